"""Passos α_t^s e parâmetros (φ_t^s, ψ_t^s), com as restrições validadas na construção.

Tipos de cronograma:

* ``decaying_default``: α = 1/(t+s+1); (φ, ψ) vêm de um preset por época.
* ``theorem5``: α = (t+s+κ+2)^{-P}·C_α, ψ = 1-(t+s+κ+1)^{-Q}·C_ψ, φ = (t+s+κ+1)^{-Rexp}·C_φ.
* ``fixed``: α = C_α; (φ, ψ) vêm de um preset por época.

O expoente de φ chama-se ``Rexp`` para não colidir com o símbolo da retração.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from .errors import ContractViolation

logger = logging.getLogger(__name__)

KINDS = ("decaying_default", "theorem5", "fixed")
PRESETS = ("constant", "svrg", "sgd", "srg", "remark", "complement", "theorem6", "list")

COEFF_TOL = 1e-12
KAPPA_REL_TOL = 1e-12


def kappa_of(gamma: float) -> int:
    """Menor inteiro positivo x com x^γ >= x+1 (busca crescente)."""
    if not gamma > 1.0:
        raise ContractViolation(f"γ = {gamma} precisa ser > 1")
    x = 1
    while True:
        # tolerância relativa: γ = log2(3) dá 2^γ = 3 só a menos de arredondamento
        if x ** gamma >= (x + 1) * (1.0 - KAPPA_REL_TOL):
            return x
        x += 1


def psi_theorem5(base: float, Q: float, C_psi: float) -> float:
    return 1.0 - base ** (-Q) * C_psi


def phi_theorem5(base: float, Rexp: float, C_phi: float) -> float:
    return base ** (-Rexp) * C_phi


def preset_params(preset: str, s: int, phi: float = 0.0, psi: float = 0.0,
                  phi_seq: Sequence[float] = (), psi_seq: Sequence[float] = ()) -> Tuple[float, float]:
    """(φ^s, ψ^s) de um preset por época; listas explícitas repetem o último valor."""
    if preset == "constant":
        return float(phi), float(psi)
    if preset == "svrg":
        return 1.0, 0.0
    if preset == "sgd":
        return 0.0, 0.0
    if preset == "srg":
        return 0.0, 1.0
    if preset == "remark":
        return 1.0 - 1.0 / (s + 1), 1.0 / (s + 1) ** 2
    if preset == "complement":
        return 1.0 - 1.0 / (s + 1), 1.0 / (s + 1)
    if preset == "theorem6":
        return 1.0 - 1.0 / (s + 1) - 1.0 / (s + 1) ** 2, 1.0 / (s + 1) ** 2
    if preset == "list":
        if not phi_seq or not psi_seq:
            raise ContractViolation("preset 'list' exige phi_seq e psi_seq")
        i = s - 1
        return float(phi_seq[min(i, len(phi_seq) - 1)]), float(psi_seq[min(i, len(psi_seq) - 1)])
    raise ContractViolation(f"preset de parâmetros desconhecido: {preset}")


@dataclass(frozen=True)
class ScheduleSpec:
    kind: str = "decaying_default"
    m: int = 1
    S_max: int = 1000
    C_alpha: float = 1.0
    C_psi: float = 1.0
    C_phi: float = 0.0
    P: float = 0.5
    Q: float = 0.5
    Rexp: float = 1.0
    gamma: float = 2.0
    kappa: Optional[int] = None
    beta: float = 5.0
    mu: float = 0.5
    params: str = "constant"
    phi: float = 0.0
    psi: float = 0.0
    phi_seq: Tuple[float, ...] = field(default_factory=tuple)
    psi_seq: Tuple[float, ...] = field(default_factory=tuple)
    # constantes estimadas (opcionais) para as restrições que dependem delas
    L: Optional[float] = None
    msq_theta_nsq: Optional[float] = None
    strict: bool = True

    def __post_init__(self):
        object.__setattr__(self, "phi_seq", tuple(float(v) for v in self.phi_seq))
        object.__setattr__(self, "psi_seq", tuple(float(v) for v in self.psi_seq))
        if self.kind not in KINDS:
            raise ContractViolation(f"tipo de cronograma desconhecido: {self.kind}")
        if self.params not in PRESETS:
            raise ContractViolation(f"preset de parâmetros desconhecido: {self.params}")
        if int(self.m) < 1 or int(self.S_max) < 1:
            raise ContractViolation("m e S_max precisam ser >= 1")
        if self.kappa is None:
            object.__setattr__(self, "kappa", kappa_of(self.gamma) if self.gamma > 1.0 else 1)
        elif int(self.kappa) < 0:
            raise ContractViolation(f"κ = {self.kappa} < 0")
        if self.strict:
            self.validate()

    # ---------------------------------------------------------- avaliação
    def step(self, t: int, s: int) -> float:
        if self.kind == "decaying_default":
            return 1.0 / (t + s + 1)
        if self.kind == "theorem5":
            return (t + s + self.kappa + 2) ** (-self.P) * self.C_alpha
        return float(self.C_alpha)

    def params_at(self, t: int, s: int) -> Tuple[float, float]:
        if self.kind == "theorem5":
            base = t + s + self.kappa + 1
            return phi_theorem5(base, self.Rexp, self.C_phi), psi_theorem5(base, self.Q, self.C_psi)
        return preset_params(self.params, s, self.phi, self.psi, self.phi_seq, self.psi_seq)

    # ---------------------------------------------------------- validação
    def validate(self) -> None:
        if not 0.0 < self.mu < 1.0:
            raise ContractViolation(f"μ = {self.mu} fora de (0,1)")
        if self.kind != "decaying_default" and not self.C_alpha > 0.0:
            raise ContractViolation(f"C_alpha = {self.C_alpha} precisa ser > 0")
        if self.kind == "theorem5":
            self._validate_theorem5()
        self._validate_horizon()

    def _validate_theorem5(self) -> None:
        P, Q, g = self.P, self.Q, self.gamma
        if not g > 1.0:
            raise ContractViolation(f"γ = {g} precisa ser > 1")
        if not (0.0 < P < 1.0 and 0.0 < Q < 1.0):
            raise ContractViolation(f"P={P}, Q={Q}: exige 0 < P,Q < 1")
        lower = max((g * Q - 1.0) / (g - 1.0), Q / 2.0)
        if P < lower - 1e-12 or P > Q + 1e-12:
            raise ContractViolation(f"P={P} fora de [max((γQ-1)/(γ-1), Q/2), Q] = [{lower:.6g}, {Q}]")
        if self.Rexp < Q:
            raise ContractViolation(f"Rexp={self.Rexp} < Q={Q}")
        if self.C_phi > self.C_psi:
            raise ContractViolation(f"C_phi={self.C_phi} > C_psi={self.C_psi}")
        if not self.beta > 4.0:
            raise ContractViolation(f"β = {self.beta} precisa ser > 4")
        if self.msq_theta_nsq is not None:
            need = P + 6.0 * self.beta * self.C_alpha ** 2 * self.msq_theta_nsq
            if self.C_psi < need:
                raise ContractViolation(f"C_psi={self.C_psi} < P + 6βC_α²(M²+θ²N²) = {need:.6g}")
            if self.L is not None:
                bound = step_bound_theorem5(self.L, self.msq_theta_nsq, P, self.beta)
                if self.C_alpha > bound:
                    raise ContractViolation(f"C_alpha={self.C_alpha} > {bound:.6g}")
        else:
            logger.debug("theorem5 sem constantes estimadas: restrições de C_psi/C_alpha não verificadas")

    def _validate_horizon(self) -> None:
        for s in range(1, int(self.S_max) + 1):
            ts = range(int(self.m)) if self.kind == "theorem5" else (0,)
            for t in ts:
                phi, psi = self.params_at(t, s)
                if phi < -COEFF_TOL or psi < -COEFF_TOL or phi + psi > 1.0 + COEFF_TOL:
                    raise ContractViolation(
                        f"(φ, ψ) = ({phi:.6g}, {psi:.6g}) inválido em (t={t}, s={s})"
                    )


def step(spec: ScheduleSpec, t: int, s: int) -> float:
    return spec.step(t, s)


def params(spec: ScheduleSpec, t: int, s: int) -> Tuple[float, float]:
    phi, psi = spec.params_at(t, s)
    # ruído de arredondamento na borda não pode virar coeficiente inválido
    phi = min(max(phi, 0.0), 1.0)
    psi = min(max(psi, 0.0), 1.0 - phi)
    return phi, psi


def assumption3_holds(spec: ScheduleSpec) -> bool:
    """Σα = ∞ e Σα² < ∞, pela classificação de séries p: vale para expoente em (1/2, 1]."""
    if spec.kind == "decaying_default":
        return True
    if spec.kind == "theorem5":
        return 0.5 < spec.P <= 1.0
    return False


# ------------------------------------------------------------ cotas de passo
def _check_bound_inputs(L: float, K: float, C1: float, C2: float, m: int) -> None:
    if int(m) < 1:
        raise ContractViolation(f"m = {m} < 1")
    if not L > 0.0:
        raise ContractViolation(f"L = {L} precisa ser > 0")
    if K < 0.0 or C1 < 0.0 or C2 < 0.0:
        raise ContractViolation("constantes negativas")


def nu_theorem3(Msq_theta_Nsq: float, C1: float, C2: float, m: int) -> float:
    return 4.0 * m ** 3 * Msq_theta_Nsq * C1 ** 2 * C2 ** 2


def nu_theorem6(Msq_theta_Nsq: float, C1: float, C2: float, m: int) -> float:
    return 6.0 * m ** 2 * Msq_theta_Nsq * (C1 ** 2 * C2 ** 2 * m ** 2 + 1.0)


def corollary_nu(Msq: float, m: int) -> float:
    """Caso R = Exp e T = Γ: θ = 0 e C1 = C2 = 1."""
    return nu_theorem3(Msq, 1.0, 1.0, m)


def step_bound_theorem3(L: float, Msq_theta_Nsq: float, C1: float, C2: float, m: int) -> float:
    _check_bound_inputs(L, Msq_theta_Nsq, C1, C2, m)
    nu = nu_theorem3(Msq_theta_Nsq, C1, C2, m)
    return 2.0 / (L + math.sqrt(L * L + 4.0 * nu))


def step_bound_theorem4(L: float, Msq_theta_Nsq: float, C1: float, C2: float, m: int) -> float:
    _check_bound_inputs(L, Msq_theta_Nsq, C1, C2, m)
    nu = nu_theorem3(Msq_theta_Nsq, C1, C2, m)
    return 1.0 / (L + math.sqrt(L * L + 4.0 * nu))


def step_bound_theorem6(L: float, Msq_theta_Nsq: float, C1: float, C2: float, m: int) -> float:
    _check_bound_inputs(L, Msq_theta_Nsq, C1, C2, m)
    nu = nu_theorem6(Msq_theta_Nsq, C1, C2, m)
    return 2.0 / (L + math.sqrt(L * L + 4.0 * nu))


def step_bound_theorem5(L: float, Msq_theta_Nsq: float, P: float, beta: float) -> float:
    """C_α <= min{1/L, √((1-P)/(6β(M²+θ²N²)))}."""
    if not L > 0.0:
        raise ContractViolation(f"L = {L} precisa ser > 0")
    if Msq_theta_Nsq <= 0.0:
        return 1.0 / L
    return min(1.0 / L, math.sqrt((1.0 - P) / (6.0 * beta * Msq_theta_Nsq)))


def restart_epochs_theorem7(tau: float, gamma: float, m: int, C_alpha: float) -> int:
    """S = ⌈2τγ/(mC_α)⌉, nunca menor que 1."""
    if tau < 0.0:
        raise ContractViolation(f"τ = {tau} < 0")
    if not gamma > 1.0:
        raise ContractViolation(f"γ = {gamma} precisa ser > 1")
    if int(m) < 1 or not C_alpha > 0.0:
        raise ContractViolation("m >= 1 e C_alpha > 0 são obrigatórios")
    return max(1, int(math.ceil(2.0 * tau * gamma / (m * C_alpha))))


# ------------------------------------------------------- cotas previstas
def parameter_series(spec: ScheduleSpec, which: str, horizon: int = 100_000) -> float:
    """Somas de parâmetros que aparecem nas cotas de taxa, truncadas em `horizon` épocas.

    which: "theorem3" -> Σ_s (1-φ^s)² + (ψ^s)²; "theorem4" -> Σ_s Σ_t (ψ_t^s)²;
    "theorem6" -> Σ_s (1-φ^s-ψ^s)².
    """
    total = 0.0
    for s in range(1, horizon + 1):
        if which == "theorem4":
            total += sum(params(spec, t, s)[1] ** 2 for t in range(spec.m))
            continue
        phi, psi = params(spec, 0, s)
        if which == "theorem3":
            total += (1.0 - phi) ** 2 + psi ** 2
        elif which == "theorem6":
            total += (1.0 - phi - psi) ** 2
        else:
            raise ContractViolation(f"série desconhecida: {which}")
    return total


def predicted_bound_theorem3(gap: float, N: float, m: int, S: int, C_alpha: float, series: float) -> float:
    return 2.0 / (m * S * C_alpha) * gap + 4.0 * m * N ** 2 / S * series


def predicted_bound_theorem4(gap: float, N: float, m: int, S: int, C_alpha: float, series: float) -> float:
    return 2.0 / (m * S * C_alpha) * gap + 8.0 * N ** 2 / S * series


def predicted_bound_theorem6(gap: float, N: float, m: int, S: int, C_alpha: float, series: float) -> float:
    return 2.0 / (m * S * C_alpha) * gap + 12.0 * m * N ** 2 / S * series


def rate_exponent_theorem5(P: float, Q: float) -> float:
    """Expoente previsto da taxa O(1/S^{2(Q-P)})."""
    return 2.0 * (Q - P)


def optimal_exponents(gamma: float) -> Tuple[float, float]:
    """(P, Q) = (1/(γ+1), 2/(γ+1)), que maximizam 2(Q-P)."""
    return 1.0 / (gamma + 1.0), 2.0 / (gamma + 1.0)


def alpha_grid(spec: ScheduleSpec, S: int) -> np.ndarray:
    """Matriz S x m dos passos, útil em relatórios."""
    return np.asarray([[spec.step(t, s) for t in range(spec.m)] for s in range(1, S + 1)])
