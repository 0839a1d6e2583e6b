"""Problemas de soma finita f = (1/n) Σ f_i com gradientes riemannianos fechados.

Os componentes são indexados 0..n-1 no código. Cada problema guarda a
variedade onde vive e, quando dá para calcular na construção, o ótimo
conhecido (ω*, f*) e a constante τ de dominância do gradiente.
"""
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy import linalg

from . import spd_math
from .errors import ContractViolation
from .manifold import SPD, Euclidean, Manifold, ManifoldElement, Sphere, TangentElement
from .utils import sym

logger = logging.getLogger(__name__)

PCA_GAP_TOL = 1e-10


@dataclass(frozen=True)
class BatchIndex:
    indices: Tuple[int, ...]
    n: int

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        object.__setattr__(self, "indices", idx)
        if len(idx) == 0:
            raise ContractViolation("lote vazio")
        if len(set(idx)) != len(idx):
            raise ContractViolation(f"índices repetidos no lote: {idx}")
        if min(idx) < 0 or max(idx) >= self.n:
            raise ContractViolation(f"índices fora de [0, {self.n - 1}]: {idx}")

    @property
    def size(self) -> int:
        return len(self.indices)

    @classmethod
    def full(cls, n: int) -> "BatchIndex":
        return cls(tuple(range(n)), n)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.indices, dtype=int)


@dataclass(frozen=True)
class KnownOptimum:
    point: ManifoldElement
    value: float
    # PCA com autovalor dominante repetido: só o subespaço é identificável
    is_subspace: bool = False


class FiniteSumProblem(ABC):
    name = "abstract"

    def __init__(self, manifold: Manifold, n: int):
        if int(n) < 1:
            raise ContractViolation("n deve ser >= 1")
        self.manifold = manifold
        self.n = int(n)
        self.known_optimum: Optional[KnownOptimum] = None
        self.tau: Optional[float] = None

    @property
    def manifold_id(self) -> str:
        return self.manifold.manifold_id

    # vetorizados: recebem array de índices, devolvem valores/coords empilhados
    @abstractmethod
    def component_costs(self, idx: np.ndarray, w: ManifoldElement) -> np.ndarray: ...

    @abstractmethod
    def component_rgrads(self, idx: np.ndarray, w: ManifoldElement) -> np.ndarray: ...

    def component_cost(self, i: int, w: ManifoldElement) -> float:
        return float(self.component_costs(np.asarray([i]), w)[0])

    def component_rgrad(self, i: int, w: ManifoldElement) -> TangentElement:
        return TangentElement(self.component_rgrads(np.asarray([i]), w)[0], w)

    def cost(self, w: ManifoldElement) -> float:
        return float(np.mean(self.component_costs(np.arange(self.n), w)))

    def batch_grad(self, I: Union[BatchIndex, Iterable[int]], w: ManifoldElement) -> TangentElement:
        if not isinstance(I, BatchIndex):
            I = BatchIndex(tuple(I), self.n)
        if I.n != self.n:
            raise ContractViolation(f"lote para n={I.n}, problema tem n={self.n}")
        stack = self.component_rgrads(I.as_array(), w)
        return TangentElement(np.mean(stack, axis=0), w)

    def full_grad(self, w: ManifoldElement) -> TangentElement:
        return self.batch_grad(BatchIndex.full(self.n), w)

    def suboptimality(self, w: ManifoldElement) -> float:
        if self.known_optimum is None:
            raise ContractViolation(f"{self.name}: ótimo desconhecido")
        return self.cost(w) - self.known_optimum.value

    def __repr__(self) -> str:
        return f"{type(self).__name__}(n={self.n}, manifold={self.manifold!r})"


def full_grad(p: FiniteSumProblem, w: ManifoldElement) -> TangentElement:
    return p.full_grad(w)


def batch_grad(p: FiniteSumProblem, I: BatchIndex, w: ManifoldElement) -> TangentElement:
    return p.batch_grad(I, w)


# ============================================================
# PCA na esfera: f_i(ω) = -(x_iᵀω)²
# ============================================================
class PCASphere(FiniteSumProblem):
    name = "pca_sphere"

    def __init__(self, data: np.ndarray, retraction: str = "retraction", transport: str = "parallel"):
        data = np.asarray(data, dtype=float)
        if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] < 2:
            raise ContractViolation(f"dados PCA precisam ser n x d com n>=1, d>=2; veio {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ContractViolation("dados PCA com NaN/Inf")
        super().__init__(Sphere(data.shape[1], retraction, transport), data.shape[0])
        self.data = data
        self.data.setflags(write=False)

        cov = data.T @ data / self.n
        w, v = linalg.eigh(cov)
        subspace = bool(w[-1] - w[-2] <= PCA_GAP_TOL)
        if subspace:
            logger.warning(
                "PCA: autovalor dominante repetido (gap %.2e); ótimo reportado como subespaço",
                w[-1] - w[-2],
            )
        self.known_optimum = KnownOptimum(self.manifold.normalized(v[:, -1]), -float(w[-1]), subspace)

    def component_costs(self, idx, w):
        proj = self.data[idx] @ w.coords
        return -(proj ** 2)

    def component_rgrads(self, idx, w):
        x = w.coords
        rows = self.data[idx]
        proj = rows @ x
        egrads = -2.0 * proj[:, None] * rows
        return egrads - (egrads @ x)[:, None] * x[None, :]


def make_pca_sphere(data, retraction: str = "retraction", transport: str = "parallel") -> PCASphere:
    return PCASphere(data, retraction, transport)


# ============================================================
# Média de Karcher em SPD: f_i(X) = ½ dist²(X, A_i)
# ============================================================
def karcher_mean_oracle(
    manifold: SPD, anchors: Sequence[np.ndarray], tol: float = 1e-13, max_iter: int = 500
) -> ManifoldElement:
    """Iteração de ponto fixo X <- Exp_X((1/n) Σ Log_X(A_i)), partindo da média log-euclidiana."""
    logs = [spd_math.logm(a) for a in anchors]
    x = manifold.point(spd_math.expm(np.mean(logs, axis=0)))
    for _ in range(max_iter):
        step = np.mean([manifold.log_map(x, manifold.point(a, check=False)).coords for a in anchors], axis=0)
        xi = TangentElement(sym(step), x)
        if manifold.norm(xi) < tol:
            break
        x = manifold.exp_map(x, xi)
    return x


class KarcherSPD(FiniteSumProblem):
    name = "karcher_spd"

    def __init__(self, anchors: Sequence[np.ndarray], retraction: str = "retraction"):
        anchors = [np.asarray(a, dtype=float) for a in anchors]
        if not anchors:
            raise ContractViolation("lista de âncoras vazia")
        d = anchors[0].shape[0] if anchors[0].ndim == 2 else -1
        for k, a in enumerate(anchors):
            if a.shape != (d, d):
                raise ContractViolation(f"âncora {k} com forma {a.shape}, esperado ({d},{d})")
            if not spd_math.is_spd(a):
                raise ContractViolation(f"âncora {k} não é SPD")
        super().__init__(SPD(d, retraction, "parallel"), len(anchors))
        self.anchors = [sym(a) for a in anchors]
        opt = karcher_mean_oracle(self.manifold, self.anchors)
        self.known_optimum = KnownOptimum(opt, self.cost(opt))

    def _whitened_logs(self, idx, w) -> Tuple[np.ndarray, np.ndarray, List[np.ndarray]]:
        half, ihalf = spd_math.sqrt_and_invsqrt(w.coords)
        logs = [spd_math.logm(ihalf @ self.anchors[i] @ ihalf) for i in idx]
        return half, ihalf, logs

    def component_costs(self, idx, w):
        _, _, logs = self._whitened_logs(idx, w)
        return np.asarray([0.5 * float(np.sum(l * l)) for l in logs])

    def component_rgrads(self, idx, w):
        half, _, logs = self._whitened_logs(idx, w)
        return np.stack([-sym(half @ l @ half) for l in logs])


def make_karcher_spd(anchors, retraction: str = "retraction") -> KarcherSPD:
    return KarcherSPD(anchors, retraction)


# ============================================================
# Mínimos quadrados: f_i(ω) = ½‖A_i ω - c_i‖²
# ============================================================
class LeastSquares(FiniteSumProblem):
    name = "least_squares"

    def __init__(self, A_list, c_list):
        try:
            A = np.asarray([np.atleast_2d(np.asarray(a, dtype=float)) for a in A_list])
            c = np.asarray([np.atleast_1d(np.asarray(v, dtype=float)) for v in c_list])
        except ValueError:
            raise ContractViolation("matrizes A_i (e vetores c_i) precisam ter a mesma forma") from None
        if A.ndim != 3 or c.ndim != 2 or A.shape[0] != c.shape[0] or A.shape[1] != c.shape[1]:
            raise ContractViolation(f"formas incompatíveis: A {A.shape}, c {c.shape}")
        super().__init__(Euclidean(A.shape[2]), A.shape[0])
        self.A = A
        self.c = c

        self.hessian = np.einsum("kpi,kpj->ij", A, A) / self.n
        self.linear = np.einsum("kpi,kp->i", A, c) / self.n
        eig = linalg.eigvalsh(self.hessian)
        if eig[0] <= 1e-12 * max(1.0, abs(eig[-1])):
            raise ContractViolation(f"H singular (λ_min = {eig[0]:.3e})")
        opt = self.manifold.point(np.linalg.solve(self.hessian, self.linear))
        self.known_optimum = KnownOptimum(opt, self.cost(opt))
        self.tau = 1.0 / (2.0 * float(eig[0]))

    def _residuals(self, idx, w):
        return np.einsum("kpi,i->kp", self.A[idx], w.coords) - self.c[idx]

    def component_costs(self, idx, w):
        r = self._residuals(idx, w)
        return 0.5 * np.sum(r * r, axis=1)

    def component_rgrads(self, idx, w):
        r = self._residuals(idx, w)
        return np.einsum("kpi,kp->ki", self.A[idx], r)


def make_least_squares(A_list, c_list) -> LeastSquares:
    return LeastSquares(A_list, c_list)


# ============================================================
# Dados sintéticos e leitura de arquivos
# ============================================================
def synthetic_pca_data(n: int, d: int, gap: float = 4.0, seed: int = 0) -> np.ndarray:
    """Amostras gaussianas com covariância de espectro decrescente e gap no topo."""
    rng = np.random.default_rng(seed)
    scales = np.ones(d)
    scales[0] = np.sqrt(gap)
    scales[1:] = np.linspace(1.0, 0.3, d - 1)
    q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    return (rng.standard_normal((n, d)) * scales) @ q.T


def synthetic_spd_anchors(n: int, d: int, spread: float = 0.5, seed: int = 0) -> List[np.ndarray]:
    rng = np.random.default_rng(seed)
    base = spd_math.expm(sym(rng.standard_normal((d, d))) * 0.2)
    half = spd_math.sqrtm(base)
    out = []
    for _ in range(n):
        s = sym(rng.standard_normal((d, d))) * spread
        out.append(sym(half @ spd_math.expm(s) @ half))
    return out


def synthetic_least_squares(n: int, d: int, rows: int = 1, noise: float = 0.1, seed: int = 0):
    rng = np.random.default_rng(seed)
    truth = rng.standard_normal(d)
    A = rng.standard_normal((n, rows, d))
    c = np.einsum("kpi,i->kp", A, truth) + noise * rng.standard_normal((n, rows))
    return list(A), list(c)


def load_pca_csv(path: Union[str, Path]) -> np.ndarray:
    """Matriz CSV (linhas = amostras). Linha de cabeçalho e linhas vazias são descartadas."""
    df = pd.read_csv(path, header=None, skip_blank_lines=True)
    df = df.apply(pd.to_numeric, errors="coerce")
    df = df.dropna(how="all")
    if not df.empty and df.iloc[0].isna().all():
        df = df.iloc[1:]
    if df.empty:
        raise ContractViolation(f"CSV sem dados numéricos: {path}")
    if df.isna().any().any():
        linhas = [int(i) for i in df.index[df.isna().any(axis=1)]][:5]
        raise ContractViolation(f"CSV com células não numéricas nas linhas {linhas}: {path}")
    return df.to_numpy(dtype=float)


def load_spd_directory(path: Union[str, Path]) -> List[np.ndarray]:
    """Um arquivo *.txt por matriz, valores separados por espaço."""
    pasta = Path(path)
    if not pasta.is_dir():
        raise FileNotFoundError(f"pasta não encontrada: {pasta}")
    arquivos = sorted(pasta.glob("*.txt"), key=lambda p: p.name.lower())
    if not arquivos:
        raise ContractViolation(f"nenhum arquivo .txt em {pasta}")
    mats = [np.atleast_2d(np.loadtxt(a, dtype=float)) for a in arquivos]
    logger.info("[dados] %d matrizes lidas de %s", len(mats), pasta)
    return mats
