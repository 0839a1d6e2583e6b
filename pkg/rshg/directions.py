"""Direções de descida estocásticas.

Termos básicos (lote I, ponto corrente ω_t):

    batch  = grad f_I(ω_t)
    svrg   = grad f_I(ω_t) - T_{ω_0→ω_t}(grad f_I(ω_0) - grad f(ω_0))
    srg    = grad f_I(ω_t) - T_{ω_{t-1}→ω_t}(grad f_I(ω_{t-1}) - V_{t-1})

A direção híbrida é φ·svrg + ψ·srg + (1-φ-ψ)·batch, com ψ recortado (ψ̃) na
versão adaptativa e ψ do cronograma na versão com parâmetros variáveis.
"""
import itertools
import logging
import math
from dataclasses import dataclass
from typing import Iterator, Optional, Tuple

import numpy as np

from .errors import ContractViolation, SizeError
from .manifold import Manifold, ManifoldElement, TangentElement
from .problems import BatchIndex, FiniteSumProblem

logger = logging.getLogger(__name__)

CLIP_ZERO_TOL = 1e-14
COEFF_TOL = 1e-12
ENUMERATION_LIMIT = 100_000

VARIANTS = ("adaptive", "timevarying", "svrg_srg", "svrg", "srg", "sgd")


@dataclass(frozen=True)
class HybridState:
    snapshot: ManifoldElement
    snapshot_full_grad: TangentElement
    prev_point: ManifoldElement
    prev_direction: TangentElement
    prev_step: float

    def __post_init__(self):
        if not self.snapshot_full_grad.anchor.same_as(self.snapshot):
            raise ContractViolation("gradiente do snapshot não está ancorado no snapshot")
        if not self.prev_direction.anchor.same_as(self.prev_point):
            raise ContractViolation("V_{t-1} não está ancorado em ω_{t-1}")
        if not float(self.prev_step) >= 0.0:
            raise ContractViolation(f"passo anterior inválido: {self.prev_step}")


@dataclass(frozen=True)
class HybridCoeffs:
    phi: float
    psi: float
    mu: float = 0.5
    psi_tilde: Optional[float] = None

    def __post_init__(self):
        if self.psi_tilde is None:
            object.__setattr__(self, "psi_tilde", self.psi)
        if self.phi < 0.0 or self.psi < 0.0:
            raise ContractViolation(f"coeficientes negativos: φ={self.phi}, ψ={self.psi}")
        if self.phi + self.psi > 1.0 + COEFF_TOL:
            raise ContractViolation(f"φ+ψ = {self.phi + self.psi} > 1")
        if not 0.0 < self.mu < 1.0:
            raise ContractViolation(f"μ = {self.mu} fora de (0,1)")
        if not 0.0 <= self.psi_tilde <= self.psi:
            raise ContractViolation(f"ψ̃ = {self.psi_tilde} fora de [0, ψ={self.psi}]")

    @property
    def sgd_weight(self) -> float:
        return 1.0 - self.phi - self.psi_tilde


@dataclass(frozen=True)
class ClipInfo:
    """O que o recorte de ψ viu: ψ̃, ⟨carried, g_t⟩, ‖g_t‖² e se o recorte atuou."""

    psi: float
    psi_tilde: float
    inner: float
    g_norm_sq: float
    active: bool

    def product(self) -> float:
        return self.psi_tilde * self.inner


# ------------------------------------------------------------------ termos
def _transported_correction(p: FiniteSumProblem, w_t, source, correction: TangentElement) -> TangentElement:
    return p.manifold.transport_between(source, w_t, correction)


def _snapshot_correction(p: FiniteSumProblem, I: BatchIndex, w_t: ManifoldElement, state: HybridState):
    M = p.manifold
    w0 = state.snapshot
    # confere a vizinhança: ξ com R_{ω0}(ξ) = ω_t precisa existir
    xi = M.inverse_retract(w0, w_t)
    corr = p.batch_grad(I, w0) - state.snapshot_full_grad
    return M.transport(w0, xi, corr, target=w_t)


def _recursive_correction(p: FiniteSumProblem, I: BatchIndex, w_t: ManifoldElement, state: HybridState):
    corr = p.batch_grad(I, state.prev_point) - state.prev_direction
    return p.manifold.transport_between(state.prev_point, w_t, corr)


def svrg_term(p: FiniteSumProblem, I: BatchIndex, w_t: ManifoldElement, state: HybridState) -> TangentElement:
    return p.batch_grad(I, w_t) - _snapshot_correction(p, I, w_t, state)


def srg_term(p: FiniteSumProblem, I: BatchIndex, w_t: ManifoldElement, state: HybridState) -> TangentElement:
    return p.batch_grad(I, w_t) - _recursive_correction(p, I, w_t, state)


def _three_terms(p, I, w_t, state) -> Tuple[TangentElement, TangentElement, TangentElement]:
    """(batch, svrg, srg) com 3b avaliações de gradiente de componente."""
    batch = p.batch_grad(I, w_t)
    svrg = batch - _snapshot_correction(p, I, w_t, state)
    srg = batch - _recursive_correction(p, I, w_t, state)
    return batch, svrg, srg


def _combine(phi: float, psi: float, svrg: TangentElement, srg: TangentElement, batch: TangentElement) -> TangentElement:
    return phi * svrg + psi * srg + (1.0 - phi - psi) * batch


# ------------------------------------------------------------------ recorte
def carried_term(
    p: FiniteSumProblem,
    w_t: ManifoldElement,
    state: HybridState,
    prev_full_grad: Optional[TangentElement] = None,
) -> TangentElement:
    """T_{ω_{t-1}→ω_t}(V_{t-1} - grad f(ω_{t-1}))."""
    if prev_full_grad is None:
        prev_full_grad = p.full_grad(state.prev_point)
    return p.manifold.transport_between(state.prev_point, w_t, state.prev_direction - prev_full_grad)


def _clip(psi: float, mu: float, g_t: TangentElement, carried: TangentElement, manifold: Manifold) -> Tuple[float, float, float]:
    if psi < 0.0:
        raise ContractViolation(f"ψ = {psi} < 0")
    if not 0.0 < mu < 1.0:
        raise ContractViolation(f"μ = {mu} fora de (0,1)")
    g_t._check(carried)
    inner = manifold.inner(carried, g_t)
    g_sq = manifold.inner(g_t, g_t)
    c_sq = manifold.inner(carried, carried)
    if psi == 0.0:
        return 0.0, inner, g_sq
    if abs(inner) <= CLIP_ZERO_TOL * math.sqrt(max(c_sq, 0.0) * max(g_sq, 0.0)):
        return float(psi), inner, g_sq
    return float(min(psi, mu * g_sq / abs(inner))), inner, g_sq


def clip_psi(psi: float, mu: float, g_t: TangentElement, carried: TangentElement, manifold: Manifold) -> float:
    """ψ̃ = min{ψ, μ‖g_t‖²/|⟨carried, g_t⟩|}; ψ quando o produto interno é numericamente nulo.

    Produtos internos na métrica de `manifold`.
    """
    return _clip(psi, mu, g_t, carried, manifold)[0]


def adaptive_coefficients(
    p: FiniteSumProblem,
    w_t: ManifoldElement,
    state: HybridState,
    phi: float,
    psi: float,
    mu: float,
) -> Tuple[HybridCoeffs, ClipInfo]:
    """Calcula os dois gradientes completos (2n avaliações), o termo carregado e ψ̃."""
    g_t = p.full_grad(w_t)
    g_prev = p.full_grad(state.prev_point)
    carried = carried_term(p, w_t, state, g_prev)
    psi_tilde, inner, g_sq = _clip(psi, mu, g_t, carried, p.manifold)
    coeffs = HybridCoeffs(phi, psi, mu, psi_tilde)
    return coeffs, ClipInfo(psi, psi_tilde, inner, g_sq, psi_tilde < psi)


# ------------------------------------------------------------------ direções
def hybrid_direction_adaptive(
    p: FiniteSumProblem,
    I: BatchIndex,
    w_t: ManifoldElement,
    state: HybridState,
    coeffs: HybridCoeffs,
    clip: Optional[ClipInfo] = None,
) -> Tuple[TangentElement, ClipInfo]:
    batch, svrg, srg = _three_terms(p, I, w_t, state)
    v = _combine(coeffs.phi, coeffs.psi_tilde, svrg, srg, batch)
    if clip is None:
        clip = ClipInfo(coeffs.psi, coeffs.psi_tilde, float("nan"), float("nan"), coeffs.psi_tilde < coeffs.psi)
    return v, clip


def hybrid_direction_timevarying(
    p: FiniteSumProblem,
    I: BatchIndex,
    w_t: ManifoldElement,
    state: HybridState,
    coeffs: HybridCoeffs,
) -> TangentElement:
    # ψ sem recorte: nenhum gradiente completo em ω_t
    batch, svrg, srg = _three_terms(p, I, w_t, state)
    return _combine(coeffs.phi, coeffs.psi, svrg, srg, batch)


def svrg_srg_direction(
    p: FiniteSumProblem,
    I: BatchIndex,
    w_t: ManifoldElement,
    state: HybridState,
    psi_tilde: float,
) -> TangentElement:
    if not 0.0 <= psi_tilde <= 1.0:
        raise ContractViolation(f"ψ̃ = {psi_tilde} fora de [0,1]")
    _, svrg, srg = _three_terms(p, I, w_t, state)
    return (1.0 - psi_tilde) * svrg + psi_tilde * srg


def effective_weights(variant: str, coeffs: HybridCoeffs) -> Tuple[float, float]:
    """(φ, ψ) tais que V = φ·svrg + ψ·srg + (1-φ-ψ)·batch para a variante."""
    if variant == "adaptive":
        return coeffs.phi, coeffs.psi_tilde
    if variant == "timevarying":
        return coeffs.phi, coeffs.psi
    if variant == "svrg_srg":
        return 1.0 - coeffs.psi_tilde, coeffs.psi_tilde
    if variant == "svrg":
        return 1.0, 0.0
    if variant == "srg":
        return 0.0, 1.0
    if variant == "sgd":
        return 0.0, 0.0
    raise ContractViolation(f"variante desconhecida: {variant}")


def direction(
    variant: str,
    p: FiniteSumProblem,
    I: BatchIndex,
    w_t: ManifoldElement,
    state: HybridState,
    coeffs: HybridCoeffs,
) -> TangentElement:
    """Direção de uma variante com coeficientes já resolvidos (ψ̃ incluído)."""
    if variant == "adaptive":
        return hybrid_direction_adaptive(p, I, w_t, state, coeffs)[0]
    if variant == "timevarying":
        return hybrid_direction_timevarying(p, I, w_t, state, coeffs)
    if variant == "svrg_srg":
        return svrg_srg_direction(p, I, w_t, state, coeffs.psi_tilde)
    if variant == "svrg":
        return svrg_term(p, I, w_t, state)
    if variant == "srg":
        return srg_term(p, I, w_t, state)
    if variant == "sgd":
        return p.batch_grad(I, w_t)
    raise ContractViolation(f"variante desconhecida: {variant}")


# ------------------------------------------------------------ enumeração
def _all_batches(n: int, b: int) -> Iterator[BatchIndex]:
    if not 1 <= b <= n:
        raise ContractViolation(f"tamanho de lote b={b} fora de [1, {n}]")
    total = math.comb(n, b)
    if total > ENUMERATION_LIMIT:
        raise SizeError(f"C({n},{b}) = {total} lotes > {ENUMERATION_LIMIT}")
    for combo in itertools.combinations(range(n), b):
        yield BatchIndex(combo, n)


def expectation_oracle(
    p: FiniteSumProblem,
    w_t: ManifoldElement,
    state: HybridState,
    coeffs: HybridCoeffs,
    b: int,
    variant: str = "adaptive",
) -> TangentElement:
    """Média exata da direção sobre todos os lotes de tamanho b (ordem lexicográfica fixa)."""
    acc = None
    count = 0
    for I in _all_batches(p.n, b):
        v = direction(variant, p, I, w_t, state, coeffs).coords
        acc = v.copy() if acc is None else acc + v
        count += 1
    return TangentElement(acc / count, w_t)


def lemma_mean(
    p: FiniteSumProblem,
    w_t: ManifoldElement,
    state: HybridState,
    psi_used: float,
) -> TangentElement:
    """grad f(ω_t) + ψ·T(V_{t-1} - grad f(ω_{t-1})): valor previsto para a esperança condicional."""
    return p.full_grad(w_t) + psi_used * carried_term(p, w_t, state)


def second_moment_oracle(
    p: FiniteSumProblem,
    w_t: ManifoldElement,
    state: HybridState,
    coeffs: HybridCoeffs,
    b: int,
    variant: str = "adaptive",
) -> float:
    """E‖V - grad f(ω_t)‖² exato por enumeração dos lotes."""
    M = p.manifold
    g = p.full_grad(w_t)
    total = 0.0
    count = 0
    for I in _all_batches(p.n, b):
        diff = direction(variant, p, I, w_t, state, coeffs) - g
        total += M.inner(diff, diff)
        count += 1
    return total / count


# ------------------------------------------------------- cotas de variância
def hybrid_variance_bound(K: float, N: float, phi: float, psi: float, xi_norm: float, carried_norm: float) -> float:
    """4Kφ²‖ξ_{0→t}‖² + 4N²((1-φ)² + ψ²) + ψ²‖V_{t-1} - grad f(ω_{t-1})‖², K = M²+θ²N²."""
    return (
        4.0 * K * phi ** 2 * xi_norm ** 2
        + 4.0 * N ** 2 * ((1.0 - phi) ** 2 + psi ** 2)
        + psi ** 2 * carried_norm ** 2
    )


def special_case_variance_bound(K: float, N: float, psi_tilde: float, xi_norm: float, carried_norm: float) -> float:
    """Direção svrg+srg com φ̃ = 1-ψ̃."""
    phi_tilde = 1.0 - psi_tilde
    return (
        4.0 * K * phi_tilde ** 2 * xi_norm ** 2
        + 8.0 * N ** 2 * psi_tilde ** 2
        + psi_tilde ** 2 * carried_norm ** 2
    )


def three_term_variance_bound(
    K: float,
    N: float,
    phi: float,
    psi: float,
    xi_norm: float,
    step_norm: float,
    carried_norm: float,
) -> float:
    """Separa os três termos: 6φ²K‖ξ_{0→t}‖² + 6ψ²K‖α_{t-1}V_{t-1}‖² + 12(1-φ-ψ)²N² + ψ²‖D‖²."""
    return (
        6.0 * phi ** 2 * K * xi_norm ** 2
        + 6.0 * psi ** 2 * K * step_norm ** 2
        + 12.0 * (1.0 - phi - psi) ** 2 * N ** 2
        + psi ** 2 * carried_norm ** 2
    )
