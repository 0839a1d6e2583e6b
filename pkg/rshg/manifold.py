"""Variedades: métrica, retração, transporte vetorial, exp/log e distância.

Três instâncias concretas: `Euclidean` (R^d), `Sphere` (S^{d-1} em R^d) e
`SPD` (matrizes simétricas definidas positivas com a métrica afim-invariante).

Cada variedade é configurada com um modo de retração ("retraction" ou "exp")
e um tipo de transporte ("parallel" ou, só na esfera, "projection"). Todas as
operações são funções puras dos argumentos.
"""
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from . import spd_math
from .errors import ContractViolation, DegenerateStepError, DomainError, NeighbourhoodError
from .utils import sym

logger = logging.getLogger(__name__)

SPHERE_NORM_TOL = 1e-12
SPHERE_TANGENT_TOL = 1e-10
SYM_TOL = 1e-12
SPD_EIG_FLOOR = 1e-12


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ManifoldElement:
    coords: np.ndarray
    manifold_id: str

    def __post_init__(self):
        object.__setattr__(self, "coords", _frozen(self.coords))

    def same_as(self, other: "ManifoldElement") -> bool:
        if self is other:
            return True
        return (
            isinstance(other, ManifoldElement)
            and self.manifold_id == other.manifold_id
            and self.coords.shape == other.coords.shape
            and bool(np.array_equal(self.coords, other.coords))
        )


@dataclass(frozen=True, eq=False)
class TangentElement:
    coords: np.ndarray
    anchor: ManifoldElement

    def __post_init__(self):
        object.__setattr__(self, "coords", _frozen(self.coords))

    def _check(self, other: "TangentElement") -> None:
        if not isinstance(other, TangentElement):
            raise ContractViolation("operação entre vetor tangente e objeto de outro tipo")
        if not self.anchor.same_as(other.anchor):
            raise ContractViolation(
                f"vetores tangentes em pontos diferentes ({self.anchor.manifold_id})"
            )

    def __add__(self, other: "TangentElement") -> "TangentElement":
        self._check(other)
        return TangentElement(self.coords + other.coords, self.anchor)

    def __sub__(self, other: "TangentElement") -> "TangentElement":
        self._check(other)
        return TangentElement(self.coords - other.coords, self.anchor)

    def __mul__(self, a: float) -> "TangentElement":
        return TangentElement(float(a) * self.coords, self.anchor)

    __rmul__ = __mul__

    def __neg__(self) -> "TangentElement":
        return TangentElement(-self.coords, self.anchor)


def _require_anchor(xi: TangentElement, x: ManifoldElement) -> None:
    if not xi.anchor.same_as(x):
        raise ContractViolation("vetor tangente não está ancorado no ponto informado")


class Manifold(ABC):
    """Interface comum (ManifoldOps). Subclasses implementam os métodos `_*`."""

    kind = "abstract"
    transports: Tuple[str, ...] = ("parallel",)

    def __init__(self, dim: int, retraction: str = "retraction", transport: str = "parallel"):
        if int(dim) < 1:
            raise ContractViolation("dimensão deve ser >= 1")
        if retraction not in ("retraction", "exp"):
            raise ContractViolation(f"modo de retração desconhecido: {retraction}")
        if transport not in self.transports:
            raise ContractViolation(f"transporte '{transport}' não disponível em {self.kind}")
        if retraction == "exp" and transport != "parallel":
            raise ContractViolation("modo exp exige transporte paralelo")
        self.dim = int(dim)
        self.retraction = retraction
        self.transport_kind = transport

    @property
    def manifold_id(self) -> str:
        return f"{self.kind}({self.dim})"

    @property
    def transport_is_isometric(self) -> bool:
        return self.transport_kind == "parallel"

    def __repr__(self) -> str:
        return f"{type(self).__name__}(dim={self.dim}, retraction={self.retraction!r}, transport={self.transport_kind!r})"

    # ---------------------------------------------------------------- fábricas
    def point(self, coords, check: bool = True) -> ManifoldElement:
        x = ManifoldElement(coords, self.manifold_id)
        if check:
            ok, msg = self.check_point(x)
            if not ok:
                raise ContractViolation(msg)
        return x

    def tangent(self, x: ManifoldElement, coords) -> TangentElement:
        self._require_mine(x)
        return TangentElement(coords, x)

    def zero(self, x: ManifoldElement) -> TangentElement:
        return TangentElement(np.zeros_like(x.coords), x)

    def _require_mine(self, x: ManifoldElement) -> None:
        if x.manifold_id != self.manifold_id:
            raise ContractViolation(f"ponto de {x.manifold_id} usado em {self.manifold_id}")

    # -------------------------------------------------------------- métrica
    def inner(self, xi: TangentElement, zeta: TangentElement) -> float:
        xi._check(zeta)
        self._require_mine(xi.anchor)
        return float(self._inner(xi.anchor.coords, xi.coords, zeta.coords))

    def norm(self, xi: TangentElement) -> float:
        return float(np.sqrt(max(self.inner(xi, xi), 0.0)))

    def dist(self, x: ManifoldElement, y: ManifoldElement) -> float:
        return self.norm(self.log_map(x, y))

    # ----------------------------------------------------------- retração
    def retract(self, x: ManifoldElement, xi: TangentElement) -> ManifoldElement:
        _require_anchor(xi, x)
        if self.retraction == "exp":
            return self.exp_map(x, xi)
        if not np.any(xi.coords):
            return x
        return ManifoldElement(self._retract(x.coords, xi.coords), self.manifold_id)

    def inverse_retract(self, x: ManifoldElement, y: ManifoldElement) -> TangentElement:
        self._require_mine(x)
        self._require_mine(y)
        if self.retraction == "exp":
            return self.log_map(x, y)
        if x.same_as(y):
            return self.zero(x)
        return TangentElement(self._inverse_retract(x.coords, y.coords), x)

    def exp_map(self, x: ManifoldElement, xi: TangentElement) -> ManifoldElement:
        _require_anchor(xi, x)
        if not np.any(xi.coords):
            return x
        return ManifoldElement(self._exp(x.coords, xi.coords), self.manifold_id)

    def log_map(self, x: ManifoldElement, y: ManifoldElement) -> TangentElement:
        self._require_mine(x)
        self._require_mine(y)
        if x.same_as(y):
            return self.zero(x)
        return TangentElement(self._log(x.coords, y.coords), x)

    # --------------------------------------------------------- transporte
    def transport(
        self,
        x: ManifoldElement,
        xi: TangentElement,
        zeta: TangentElement,
        target: Optional[ManifoldElement] = None,
    ) -> TangentElement:
        """T_xi(zeta), ancorado em R_x(xi).

        Se o chamador já tem R_x(xi) em mãos, passa `target` e o resultado fica
        ancorado exatamente nesse objeto.
        """
        _require_anchor(xi, x)
        _require_anchor(zeta, x)
        if target is None:
            target = self.retract(x, xi)
        return self.transport_between(x, target, zeta)

    def transport_between(
        self, x: ManifoldElement, y: ManifoldElement, zeta: TangentElement
    ) -> TangentElement:
        _require_anchor(zeta, x)
        self._require_mine(y)
        if x.same_as(y):
            return TangentElement(zeta.coords, y)
        if self.transport_kind == "projection":
            return TangentElement(self._project(y.coords, zeta.coords), y)
        return TangentElement(self._parallel(x.coords, y.coords, zeta.coords), y)

    def parallel_transport(
        self, x: ManifoldElement, y: ManifoldElement, zeta: TangentElement
    ) -> TangentElement:
        """Γ_x^y ao longo da geodésica que liga x a y (independe do transporte configurado)."""
        _require_anchor(zeta, x)
        self._require_mine(y)
        if x.same_as(y):
            return TangentElement(zeta.coords, y)
        return TangentElement(self._parallel(x.coords, y.coords, zeta.coords), y)

    def project_to_tangent(self, x: ManifoldElement, v) -> TangentElement:
        self._require_mine(x)
        v = np.asarray(v, dtype=float)
        if v.shape != x.coords.shape:
            raise ContractViolation(f"dimensão ambiente {v.shape} != {x.coords.shape}")
        return TangentElement(self._project(x.coords, v), x)

    def egrad_to_rgrad(self, x: ManifoldElement, egrad) -> TangentElement:
        return self.project_to_tangent(x, egrad)

    # ------------------------------------------------------ amostragem
    @abstractmethod
    def random_point(self, rng: np.random.Generator) -> ManifoldElement: ...

    def random_tangent(
        self, x: ManifoldElement, rng: np.random.Generator, scale: float = 1.0
    ) -> TangentElement:
        v = self.project_to_tangent(x, rng.standard_normal(x.coords.shape))
        nv = self.norm(v)
        if nv == 0.0:
            return v
        return v * (scale / nv)

    # ------------------------------------------------------ invariantes
    def check_point(self, x: ManifoldElement) -> Tuple[bool, str]:
        if x.manifold_id != self.manifold_id:
            return False, f"ponto de {x.manifold_id}, esperado {self.manifold_id}"
        if not np.all(np.isfinite(x.coords)):
            return False, "coordenadas com NaN/Inf"
        return self._check_point(x.coords)

    def check_tangent(self, xi: TangentElement) -> Tuple[bool, str]:
        ok, msg = self.check_point(xi.anchor)
        if not ok:
            return ok, msg
        if xi.coords.shape != xi.anchor.coords.shape:
            return False, "vetor tangente com forma errada"
        return self._check_tangent(xi.anchor.coords, xi.coords)

    def _check_point(self, x: np.ndarray) -> Tuple[bool, str]:
        return True, ""

    def _check_tangent(self, x: np.ndarray, u: np.ndarray) -> Tuple[bool, str]:
        return True, ""

    @abstractmethod
    def _inner(self, x, u, v) -> float: ...

    @abstractmethod
    def _retract(self, x, u) -> np.ndarray: ...

    @abstractmethod
    def _inverse_retract(self, x, y) -> np.ndarray: ...

    @abstractmethod
    def _exp(self, x, u) -> np.ndarray: ...

    @abstractmethod
    def _log(self, x, y) -> np.ndarray: ...

    @abstractmethod
    def _parallel(self, x, y, v) -> np.ndarray: ...

    @abstractmethod
    def _project(self, x, v) -> np.ndarray: ...


class Euclidean(Manifold):
    kind = "euclidean"
    transports = ("parallel",)

    def random_point(self, rng):
        return self.point(rng.standard_normal(self.dim))

    def _check_point(self, x):
        if x.shape != (self.dim,):
            return False, f"forma {x.shape}, esperado ({self.dim},)"
        return True, ""

    def _inner(self, x, u, v):
        return float(np.dot(u, v))

    def _retract(self, x, u):
        return x + u

    def _inverse_retract(self, x, y):
        return y - x

    def _exp(self, x, u):
        return x + u

    def _log(self, x, y):
        return y - x

    def _parallel(self, x, y, v):
        return v

    def _project(self, x, v):
        return v


class Sphere(Manifold):
    """Esfera unitária S^{d-1} ⊂ R^d; `dim` é a dimensão ambiente d."""

    kind = "sphere"
    transports = ("parallel", "projection")

    def __init__(self, dim: int, retraction: str = "retraction", transport: str = "parallel"):
        if int(dim) < 2:
            raise ContractViolation("esfera exige dimensão ambiente >= 2")
        super().__init__(dim, retraction, transport)

    def normalized(self, v) -> ManifoldElement:
        v = np.asarray(v, dtype=float)
        nv = np.linalg.norm(v)
        if nv == 0.0:
            raise DomainError("vetor nulo não define ponto da esfera")
        return self.point(v / nv)

    def random_point(self, rng):
        return self.normalized(rng.standard_normal(self.dim))

    def _check_point(self, x):
        if x.shape != (self.dim,):
            return False, f"forma {x.shape}, esperado ({self.dim},)"
        err = abs(float(np.linalg.norm(x)) - 1.0)
        if err > SPHERE_NORM_TOL:
            return False, f"|‖x‖-1| = {err:.3e} > {SPHERE_NORM_TOL}"
        return True, ""

    def _check_tangent(self, x, u):
        err = abs(float(np.dot(x, u)))
        if err > SPHERE_TANGENT_TOL:
            return False, f"|<x,u>| = {err:.3e} > {SPHERE_TANGENT_TOL}"
        return True, ""

    def _inner(self, x, u, v):
        return float(np.dot(u, v))

    def _retract(self, x, u):
        y = x + u
        return y / np.linalg.norm(y)

    def _inverse_retract(self, x, y):
        c = float(np.dot(x, y))
        if c <= 0.0:
            raise NeighbourhoodError(f"<x,y> = {c:.3e} <= 0: fora da vizinhança retrativa")
        return y / c - x

    def _exp(self, x, u):
        nu = np.linalg.norm(u)
        y = np.cos(nu) * x + np.sin(nu) * (u / nu)
        return y / np.linalg.norm(y)

    def _log(self, x, y):
        c = float(np.dot(x, y))
        u = y - c * x
        su = float(np.linalg.norm(u))
        if c <= -1.0 + 1e-12 and su < 1e-6:
            raise DomainError("pontos antípodas: log indefinido")
        if su == 0.0:
            return np.zeros_like(x)
        theta = np.arctan2(su, c)
        return (theta / su) * u

    def _parallel(self, x, y, v):
        c = float(np.dot(x, y))
        if 1.0 + c <= 1e-12:
            raise DomainError("transporte paralelo entre pontos antípodas")
        return v - (float(np.dot(y, v)) / (1.0 + c)) * (x + y)

    def _project(self, x, v):
        return v - float(np.dot(x, v)) * x


class SPD(Manifold):
    """SPD(d) com métrica afim-invariante g_X(ξ,ζ) = tr(X⁻¹ξX⁻¹ζ)."""

    kind = "spd"
    transports = ("parallel",)

    def random_point(self, rng):
        a = sym(rng.standard_normal((self.dim, self.dim))) * 0.5
        return self.point(spd_math.expm(a))

    def _check_point(self, x):
        if x.shape != (self.dim, self.dim):
            return False, f"forma {x.shape}, esperado ({self.dim},{self.dim})"
        asym = float(np.max(np.abs(x - x.T)))
        if asym > SYM_TOL:
            return False, f"assimetria {asym:.3e} > {SYM_TOL}"
        lmin = spd_math.min_eigenvalue(x)
        if lmin <= 0.0:
            return False, f"autovalor mínimo {lmin:.3e} <= 0"
        return True, ""

    def _check_tangent(self, x, u):
        asym = float(np.max(np.abs(u - u.T)))
        if asym > SYM_TOL:
            return False, f"assimetria {asym:.3e} > {SYM_TOL}"
        return True, ""

    def _inner(self, x, u, v):
        a = np.linalg.solve(x, u)
        b = np.linalg.solve(x, v)
        return float(np.trace(a @ b))

    def _retract(self, x, u):
        y = sym(x + u + 0.5 * u @ np.linalg.solve(x, u))
        w, q = spd_math.eigh_sym(y)
        if w[0] >= SPD_EIG_FLOOR:
            return y
        if w[0] < -SPD_EIG_FLOOR:
            raise DegenerateStepError(
                f"retração SPD perdeu definição positiva (λ_min = {w[0]:.3e})"
            )
        # dentro da tolerância: corta no piso
        logger.debug("retração SPD com λ_min=%.3e cortado para %.0e", w[0], SPD_EIG_FLOOR)
        return sym((q * np.maximum(w, SPD_EIG_FLOOR)) @ q.T)

    def _inverse_retract(self, x, y):
        half, ihalf = spd_math.sqrt_and_invsqrt(x)
        w, q = spd_math.eigh_sym(ihalf @ y @ ihalf)
        if w[0] <= 0.5:
            raise NeighbourhoodError(
                f"autovalor {w[0]:.3e} <= 1/2: Y fora da imagem da retração de X"
            )
        z = (q * (np.sqrt(2.0 * w - 1.0) - 1.0)) @ q.T
        return sym(half @ z @ half)

    def _exp(self, x, u):
        half, ihalf = spd_math.sqrt_and_invsqrt(x)
        return sym(half @ spd_math.expm(ihalf @ u @ ihalf) @ half)

    def _log(self, x, y):
        half, ihalf = spd_math.sqrt_and_invsqrt(x)
        return sym(half @ spd_math.logm(ihalf @ y @ ihalf) @ half)

    def _parallel(self, x, y, v):
        half, ihalf = spd_math.sqrt_and_invsqrt(x)
        e = half @ spd_math.sqrtm(ihalf @ y @ ihalf) @ ihalf
        return sym(e @ v @ e.T)

    def _project(self, x, v):
        return sym(v)

    def egrad_to_rgrad(self, x: ManifoldElement, egrad) -> TangentElement:
        """Gradiente euclidiano -> riemanniano: X·sym(G)·X."""
        self._require_mine(x)
        g = sym(np.asarray(egrad, dtype=float))
        return TangentElement(sym(x.coords @ g @ x.coords), x)


MANIFOLDS = {"euclidean": Euclidean, "sphere": Sphere, "spd": SPD}


def make_manifold(kind: str, dim: int, retraction: str = "retraction", transport: str = "parallel") -> Manifold:
    try:
        cls = MANIFOLDS[kind]
    except KeyError:
        raise ContractViolation(f"variedade desconhecida: {kind}") from None
    return cls(dim, retraction=retraction, transport=transport)
