"""Verificação numérica: constantes das hipóteses, diferenças finitas, monitores
das cotas de variância e do recorte, identidade da esperança e ajuste de taxa.
"""
import logging
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from . import directions as dirs
from .directions import HybridCoeffs, HybridState
from .errors import ContractViolation, DomainError, InsufficientDataError, NeighbourhoodError, SizeError
from .manifold import Manifold, ManifoldElement, TangentElement
from .optimizer import RunConfig, RunTrace, StepContext, run
from .problems import FiniteSumProblem

logger = logging.getLogger(__name__)

SAFETY_FACTOR = 1.1
MIN_VALID_SAMPLES = 10
DEGENERATE_TOL = 1e-10


def default_rng(seed: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


@dataclass
class CheckResult:
    name: str
    passed: bool
    worst: float
    detail: str = ""

    @property
    def status(self) -> str:
        return "OK" if self.passed else "ERRO"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["status"] = self.status
        return d


# ============================================================
# Amostragem em bolas geodésicas
# ============================================================
@dataclass(frozen=True)
class Region:
    center: ManifoldElement
    radius: float = 0.5

    def describe(self) -> dict:
        return {"center": self.center.coords.tolist(), "radius": self.radius}


def sample_in_ball(M: Manifold, center: ManifoldElement, radius: float, rng: np.random.Generator) -> ManifoldElement:
    xi = M.random_tangent(center, rng, scale=radius * float(rng.uniform()))
    return M.exp_map(center, xi)


def default_region(problem: FiniteSumProblem, rng: np.random.Generator, radius: float = 0.5) -> Region:
    if problem.known_optimum is not None:
        return Region(problem.known_optimum.point, radius)
    return Region(problem.manifold.random_point(rng), radius)


# ============================================================
# Constantes N, L, M, θ, C1, C2
# ============================================================
@dataclass
class ConstantEstimates:
    N: float
    L: float
    M: float
    theta: float
    C1: float
    C2: float
    region: Region
    samples: int
    valid_samples: int
    argmax: Dict[str, int] = field(default_factory=dict)
    safety: float = SAFETY_FACTOR

    @property
    def msq_theta_nsq(self) -> float:
        return self.M ** 2 + self.theta ** 2 * self.N ** 2

    def to_dict(self) -> dict:
        return {
            "N": self.N,
            "L": self.L,
            "M": self.M,
            "theta": self.theta,
            "C1": self.C1,
            "C2": self.C2,
            "msq_theta_nsq": self.msq_theta_nsq,
            "region": {"radius": self.region.radius, "samples": self.samples, "valid_samples": self.valid_samples},
            "argmax": dict(self.argmax),
            "safety": self.safety,
        }


def estimate_constants(
    problem: FiniteSumProblem,
    region: Optional[Region] = None,
    samples: int = 200,
    rng: Optional[np.random.Generator] = None,
    safety: float = SAFETY_FACTOR,
) -> ConstantEstimates:
    """Supremo empírico de cada razão das hipóteses sobre pares (x, y = R_x(ξ)) da região.

    N, L, M e θ saem multiplicados por `safety`; C1 e C2 são reportados crus.
    """
    rng = default_rng() if rng is None else rng
    region = default_region(problem, rng) if region is None else region
    M = problem.manifold
    idx = np.arange(problem.n)

    best = {k: 0.0 for k in ("N", "L", "M", "theta", "C1", "C2")}
    argmax = {k: -1 for k in best}
    valid = 0

    def bump(key: str, value: float, k: int) -> None:
        if value > best[key]:
            best[key] = value
            argmax[key] = k

    for k in range(int(samples)):
        # sorteios fixos por amostra: a sequência não depende dos descartes
        x = sample_in_ball(M, region.center, region.radius, rng)
        y = sample_in_ball(M, region.center, region.radius, rng)
        eta = M.random_tangent(x, rng)
        try:
            xi = M.inverse_retract(x, y)
            d = M.dist(x, y)
        except (NeighbourhoodError, DomainError):
            continue
        xi_n = M.norm(xi)
        if xi_n < DEGENERATE_TOL or d < DEGENERATE_TOL:
            continue
        valid += 1

        Gx = problem.component_rgrads(idx, x)
        Gy = problem.component_rgrads(idx, y)
        for G, p in ((Gx, x), (Gy, y)):
            bump("N", max(M.norm(TangentElement(g, p)) for g in G), k)

        gx = TangentElement(np.mean(Gx, axis=0), x)
        y_r = M.retract(x, xi)
        excess = problem.cost(y_r) - problem.cost(x) - M.inner(gx, xi)
        bump("L", 2.0 * excess / xi_n ** 2, k)

        diffs = 0.0
        for gi_x, gi_y in zip(Gx, Gy):
            moved = M.parallel_transport(y, x, TangentElement(gi_y, y))
            diff = TangentElement(gi_x, x) - moved
            diffs += M.inner(diff, diff)
        bump("M", math.sqrt(diffs / problem.n) / xi_n, k)

        eta_n = M.norm(eta)
        if eta_n > DEGENERATE_TOL:
            gap = M.parallel_transport(x, y, eta) - M.transport_between(x, y, eta)
            bump("theta", M.norm(gap) / (xi_n * eta_n), k)

        bump("C1", xi_n / d, k)
        bump("C2", d / xi_n, k)

    if valid < MIN_VALID_SAMPLES:
        raise InsufficientDataError(f"apenas {valid} amostras válidas (mínimo {MIN_VALID_SAMPLES})")

    return ConstantEstimates(
        N=best["N"] * safety,
        L=best["L"] * safety,
        M=best["M"] * safety,
        theta=best["theta"] * safety,
        C1=best["C1"],
        C2=best["C2"],
        region=region,
        samples=int(samples),
        valid_samples=valid,
        argmax=argmax,
        safety=safety,
    )


def zero_constants(region: Region) -> ConstantEstimates:
    return ConstantEstimates(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, region, 0, 0)


# ============================================================
# Diferenças finitas
# ============================================================
def gradient_fd_check(
    problem: FiniteSumProblem,
    w: ManifoldElement,
    trials: int = 20,
    h: float = 1e-5,
    rng: Optional[np.random.Generator] = None,
) -> float:
    """max |(f(R(hξ)) - f(R(-hξ)))/2h - ⟨grad f, ξ⟩| / (1 + |⟨grad f, ξ⟩|) com ξ unitário."""
    if not 1e-7 <= h <= 1e-3:
        raise ContractViolation(f"h = {h} fora de [1e-7, 1e-3]")
    rng = default_rng() if rng is None else rng
    M = problem.manifold
    g = problem.full_grad(w)
    worst = 0.0
    for _ in range(int(trials)):
        xi = M.random_tangent(w, rng)
        fp = problem.cost(M.retract(w, h * xi))
        fm = problem.cost(M.retract(w, -h * xi))
        ip = M.inner(g, xi)
        worst = max(worst, abs((fp - fm) / (2.0 * h) - ip) / (1.0 + abs(ip)))
    return worst


# ============================================================
# Propriedades das variedades
# ============================================================
def _result(name: str, values: Sequence[Tuple[float, str]], tol: float) -> CheckResult:
    if not values:
        return CheckResult(name, True, 0.0, "sem amostras")
    worst, where = max(values, key=lambda v: v[0])
    return CheckResult(name, bool(worst <= tol), float(worst), where)


def isometry_check(M: Manifold, rng: np.random.Generator, trials: int = 1000, tol: float = 1e-10) -> CheckResult:
    """⟨T ξ, T ζ⟩ = ⟨ξ, ζ⟩ em `trials` trios (x, ξ, ζ) com η aleatório."""
    if int(trials) < 1:
        raise ContractViolation(f"trials = {trials} < 1")
    iso = []
    for k in range(int(trials)):
        x = M.random_point(rng)
        xi = M.random_tangent(x, rng)
        zeta = M.random_tangent(x, rng)
        eta = M.random_tangent(x, rng, scale=float(rng.uniform(0.05, 0.5)))
        y = M.retract(x, eta)
        txi = M.transport(x, eta, xi, target=y)
        tze = M.transport(x, eta, zeta, target=y)
        iso.append((abs(M.inner(txi, tze) - M.inner(xi, zeta)), f"trio {k}"))
    res = _result(f"{M.manifold_id}:isometria", iso, tol)
    res.detail = f"{res.detail} (de {len(iso)} trios)"
    return res


def manifold_property_suite(
    M: Manifold,
    rng: np.random.Generator,
    trials: int = 100,
    isometry: Optional[bool] = None,
    h: float = 1e-5,
    isometry_trials: int = 1000,
) -> List[CheckResult]:
    """Axiomas de retração e transporte, inversões exp/log e R/R⁻¹, tangência.

    A isometria do transporte roda à parte, com `isometry_trials` trios.
    """
    if isometry is None:
        isometry = M.transport_is_isometric
    tag = M.manifold_id
    zero_r, fd_r, zero_t, lin_t, explog, rinv, tang, proj = ([] for _ in range(8))

    for k in range(int(trials)):
        x = M.random_point(rng)
        xi = M.random_tangent(x, rng)
        zeta = M.random_tangent(x, rng)
        eta = M.random_tangent(x, rng, scale=float(rng.uniform(0.05, 0.5)))
        a, b = (float(c) for c in rng.standard_normal(2))
        where = f"amostra {k}"

        zero_r.append((0.0 if M.retract(x, M.zero(x)).same_as(x) else 1.0, where))

        fd = (M.retract(x, h * xi).coords - M.retract(x, -h * xi).coords) / (2.0 * h)
        fd_r.append((float(np.linalg.norm(fd - xi.coords) / max(np.linalg.norm(xi.coords), 1e-300)), where))

        t0 = M.transport(x, M.zero(x), zeta)
        zero_t.append((float(np.max(np.abs(t0.coords - zeta.coords))), where))

        y = M.retract(x, eta)
        combo = M.transport(x, eta, a * xi + b * zeta, target=y)
        parts = a * M.transport(x, eta, xi, target=y) + b * M.transport(x, eta, zeta, target=y)
        lin_t.append((float(np.linalg.norm(combo.coords - parts.coords)), where))

        small = M.random_tangent(x, rng, scale=float(rng.uniform(0.0, 1.0)))
        back = M.log_map(x, M.exp_map(x, small))
        explog.append((float(np.linalg.norm(back.coords - small.coords)), where))

        half = M.random_tangent(x, rng, scale=float(rng.uniform(0.0, 0.5)))
        back = M.inverse_retract(x, M.retract(x, half))
        rinv.append((float(np.linalg.norm(back.coords - half.coords)), where))

        for out in (M.transport(x, eta, xi, target=y), M.log_map(x, y), M.inverse_retract(x, y)):
            ok, msg = M.check_tangent(out)
            tang.append((0.0 if ok else 1.0, f"{where}: {msg}" if msg else where))
        ok, msg = M.check_point(y)
        tang.append((0.0 if ok else 1.0, f"{where}: {msg}" if msg else where))

        v = rng.standard_normal(x.coords.shape)
        p1 = M.project_to_tangent(x, v)
        p2 = M.project_to_tangent(x, p1.coords)
        proj.append((float(np.max(np.abs(p2.coords - p1.coords))), where))

    out = [
        _result(f"{tag}:retracao_zero", zero_r, 0.0),
        _result(f"{tag}:retracao_fd", fd_r, 1e-6),
        _result(f"{tag}:transporte_zero", zero_t, 0.0),
        _result(f"{tag}:transporte_linear", lin_t, 1e-12),
        _result(f"{tag}:exp_log", explog, 1e-9),
        _result(f"{tag}:retracao_inversa", rinv, 1e-9),
        _result(f"{tag}:tangencia", tang, 0.0),
        _result(f"{tag}:projecao", proj, 1e-12),
    ]
    if isometry:
        out.append(isometry_check(M, rng, isometry_trials))
    return out


# ============================================================
# Identidade da esperança condicional
# ============================================================
def random_hybrid_state(
    problem: FiniteSumProblem,
    rng: np.random.Generator,
    radius: float = 0.2,
    alpha: float = 0.1,
) -> Tuple[ManifoldElement, HybridState]:
    """Estado (ω_0, ω_{t-1}, V_{t-1}, α_{t-1}) aleatório perto da região e o ω_t resultante."""
    M = problem.manifold
    center = default_region(problem, rng).center
    w0 = sample_in_ball(M, center, radius, rng)
    prev = sample_in_ball(M, w0, radius, rng)
    v_prev = problem.full_grad(prev) + M.random_tangent(prev, rng, scale=0.1)
    w_t = M.retract(prev, -alpha * v_prev)
    return w_t, HybridState(w0, problem.full_grad(w0), prev, v_prev, alpha)


def random_coeffs(
    problem: FiniteSumProblem,
    w_t: ManifoldElement,
    state: HybridState,
    rng: np.random.Generator,
    variant: str,
    mu: float = 0.5,
) -> HybridCoeffs:
    phi = float(rng.uniform(0.0, 0.6))
    psi = float(rng.uniform(0.0, 0.4))
    if variant in ("adaptive", "svrg_srg"):
        coeffs, _ = dirs.adaptive_coefficients(problem, w_t, state, 0.0 if variant == "svrg_srg" else phi, psi, mu)
        return coeffs
    return HybridCoeffs(phi, psi, mu)


def _psi_used(variant: str, coeffs: HybridCoeffs) -> float:
    return dirs.effective_weights(variant, coeffs)[1]


def expectation_identity_check(
    problem: FiniteSumProblem,
    cases: Iterable[Tuple[ManifoldElement, HybridState, HybridCoeffs]],
    b: int,
    variant: str = "adaptive",
    tol: float = 1e-12,
) -> CheckResult:
    """Média enumerada da direção contra grad f(ω_t) + ψ·T(V_{t-1} - grad f(ω_{t-1}))."""
    M = problem.manifold
    values = []
    for k, (w_t, state, coeffs) in enumerate(cases):
        oracle = dirs.expectation_oracle(problem, w_t, state, coeffs, b, variant)
        predicted = dirs.lemma_mean(problem, w_t, state, _psi_used(variant, coeffs))
        values.append((M.norm(oracle - predicted), f"estado {k}"))
    return _result(f"{problem.name}:esperanca:{variant}:b={b}", values, tol)


# ============================================================
# Monitores ao longo de execuções
# ============================================================
def clip_bound_check(trace: RunTrace, slack: float = 1e-12) -> CheckResult:
    """-μ‖g_t‖² ≤ ψ̃⟨carried, g_t⟩ ≤ μ‖g_t‖² em todo passo que recortou ψ."""
    values = []
    for r in trace.records:
        if r.carried_inner is None:
            continue
        excess = abs(r.psi_tilde * r.carried_inner) - r.clip_limit
        values.append((excess, f"k={r.k} s={r.s} t={r.t}"))
    if not values:
        return CheckResult("recorte", True, 0.0, "nenhum passo adaptativo no traço")
    worst, where = max(values, key=lambda v: v[0])
    return CheckResult("recorte", bool(worst <= slack), float(worst), where)


@dataclass
class LemmaRow:
    s: int
    t: int
    bound: str
    measured: float
    limit: float
    slack: float
    ok: bool


@dataclass
class LemmaReport:
    rows: List[LemmaRow] = field(default_factory=list)
    skipped: bool = False
    notices: List[str] = field(default_factory=list)

    @property
    def violations(self) -> List[LemmaRow]:
        return [r for r in self.rows if not r.ok]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([asdict(r) for r in self.rows])

    def to_dict(self) -> dict:
        return {
            "steps_checked": len({(r.s, r.t) for r in self.rows}),
            "violations": [asdict(r) for r in self.violations],
            "skipped": self.skipped,
            "notices": list(self.notices),
        }


def lemma_monitor(
    cfg: RunConfig,
    constants: ConstantEstimates,
    trace: Optional[RunTrace] = None,
    slack: float = 1e-12,
) -> LemmaReport:
    """Reexecuta a configuração e confere, passo a passo, as cotas de variância e do recorte.

    O segundo momento condicional é exato (enumeração de todos os lotes). Quando a
    enumeração é grande demais o monitor registra o aviso e não verifica nada.
    """
    problem = cfg.problem
    M = problem.manifold
    K = constants.msq_theta_nsq
    N = constants.N
    report = LemmaReport()

    def add(s, t, name, measured, limit):
        ok = measured <= limit + slack * max(1.0, abs(limit))
        report.rows.append(LemmaRow(s, t, name, float(measured), float(limit), float(limit - measured), bool(ok)))

    def observer(ctx: StepContext) -> None:
        if report.skipped:
            return
        alg = ctx.algorithm
        if ctx.t == 0:
            # V_0 = grad f(ω_0): variância nula
            add(ctx.s, 0, "hibrida", 0.0, 0.0)
            return
        try:
            measured = dirs.second_moment_oracle(problem, ctx.point, ctx.state, ctx.coeffs, ctx.b, alg)
        except SizeError as e:
            report.skipped = True
            report.notices.append(str(e))
            logger.warning("monitor de cotas ignorado: %s", e)
            return
        st = ctx.state
        phi, psi = dirs.effective_weights(alg, ctx.coeffs)
        # com φ = 0 o termo em ξ_{0→t} some e a inversa pode nem existir
        xi_norm = M.norm(M.inverse_retract(st.snapshot, ctx.point)) if phi > 0.0 else 0.0
        step_norm = st.prev_step * M.norm(st.prev_direction)
        carried_norm = M.norm(st.prev_direction - problem.full_grad(st.prev_point))

        add(ctx.s, ctx.t, "hibrida", measured, dirs.hybrid_variance_bound(K, N, phi, psi, xi_norm, carried_norm))
        add(ctx.s, ctx.t, "tres_termos", measured,
            dirs.three_term_variance_bound(K, N, phi, psi, xi_norm, step_norm, carried_norm))
        if abs(phi + psi - 1.0) <= 1e-15:
            add(ctx.s, ctx.t, "caso_especial", measured,
                dirs.special_case_variance_bound(K, N, psi, xi_norm, carried_norm))
        if ctx.clip is not None:
            clip = ctx.clip
            add(ctx.s, ctx.t, "recorte", abs(clip.product()), ctx.coeffs.mu * clip.g_norm_sq)

    _, replayed = run(cfg, observer)
    if trace is not None:
        got = [(r.s, r.t, r.f) for r in replayed.records]
        want = [(r.s, r.t, r.f) for r in trace.records]
        if got != want:
            raise ContractViolation("o traço informado não corresponde à configuração reexecutada")
    return report


def variance_check(report: LemmaReport) -> CheckResult:
    if report.skipped:
        return CheckResult("variancia", True, 0.0, "; ".join(report.notices) or "ignorado")
    if not report.rows:
        return CheckResult("variancia", True, 0.0, "sem passos")
    worst = min(report.rows, key=lambda r: r.slack)
    detail = f"{worst.bound} em s={worst.s} t={worst.t}"
    return CheckResult("variancia", not report.violations, float(-worst.slack), detail)


def domination_check(problem: FiniteSumProblem, rng: np.random.Generator, trials: int = 200, radius: float = 2.0) -> CheckResult:
    """f(ω) - f* ≤ τ‖grad f(ω)‖² em pontos amostrados."""
    if problem.tau is None or problem.known_optimum is None:
        return CheckResult(f"{problem.name}:dominancia", True, 0.0, "τ indisponível")
    M = problem.manifold
    center = problem.known_optimum.point
    values = []
    for k in range(int(trials)):
        w = sample_in_ball(M, center, radius, rng)
        g = problem.full_grad(w)
        excess = problem.cost(w) - problem.known_optimum.value - problem.tau * M.inner(g, g)
        values.append((excess, f"amostra {k}"))
    return _result(f"{problem.name}:dominancia", values, 1e-12)


# ============================================================
# Ajuste de taxa
# ============================================================
@dataclass
class RateFit:
    points: List[Tuple[int, float]]
    slope: float
    intercept: float
    residual: float
    excluded: List[Tuple[int, float]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "points": [[int(s), float(v)] for s, v in self.points],
            "slope": self.slope,
            "intercept": self.intercept,
            "residual": self.residual,
            "excluded": [[int(s), float(v)] for s, v in self.excluded],
        }


def fit_rate(runs: Iterable[Tuple[int, float]]) -> RateFit:
    """Reta de mínimos quadrados em log-log das médias por S; a inclinação é o expoente empírico."""
    df = pd.DataFrame(list(runs), columns=["S", "metric"])
    bad = df[~(df["metric"] > 0)]
    if not bad.empty:
        logger.warning("fit_rate: %d pontos com métrica não positiva excluídos", len(bad))
    df = df[df["metric"] > 0]
    means = df.groupby("S")["metric"].mean().sort_index()
    if len(means) < 4:
        raise InsufficientDataError(f"ajuste exige >= 4 valores distintos de S (há {len(means)})")
    x = np.log(means.index.to_numpy(dtype=float))
    y = np.log(means.to_numpy(dtype=float))
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    return RateFit(
        points=[(int(s), float(v)) for s, v in means.items()],
        slope=float(slope),
        intercept=float(intercept),
        residual=float(np.sqrt(np.mean(resid ** 2))),
        excluded=[(int(s), float(v)) for s, v in zip(bad["S"], bad["metric"])],
    )


# ============================================================
# Suíte completa (cmd_verify)
# ============================================================
CHECKS = ("manifold", "isometry", "gradient_fd", "expectation", "clip", "variance", "domination")


def run_verification_suite(
    problem: FiniteSumProblem,
    run_cfg: RunConfig,
    constants: Optional[ConstantEstimates],
    checks: Sequence[str],
    rng: np.random.Generator,
    trials: int = 50,
    states: int = 20,
    b_values: Sequence[int] = (1, 2),
    isometry_trials: int = 1000,
) -> List[CheckResult]:
    unknown = [c for c in checks if c not in CHECKS]
    if unknown:
        raise ContractViolation(f"verificações desconhecidas: {unknown}")
    M = problem.manifold
    results: List[CheckResult] = []

    if "manifold" in checks or "isometry" in checks:
        forced = True if "isometry" in checks else None
        results.extend(manifold_property_suite(M, rng, trials, isometry=forced, isometry_trials=isometry_trials))

    if "gradient_fd" in checks:
        worst = 0.0
        where = ""
        for k in range(int(trials)):
            w = M.random_point(rng)
            err = gradient_fd_check(problem, w, trials=5, rng=rng)
            if err > worst:
                worst, where = err, f"ponto {k}"
        results.append(CheckResult(f"{problem.name}:gradiente_fd", worst <= 1e-6, worst, where))

    if "expectation" in checks:
        for variant in ("adaptive", "timevarying", "svrg_srg"):
            for b in b_values:
                if b > problem.n:
                    continue
                cases = []
                for _ in range(int(states)):
                    w_t, st = random_hybrid_state(problem, rng)
                    cases.append((w_t, st, random_coeffs(problem, w_t, st, rng, variant, run_cfg.schedule.mu)))
                try:
                    results.append(expectation_identity_check(problem, cases, b, variant))
                except SizeError as e:
                    logger.warning("identidade da esperança ignorada: %s", e)

    if "clip" in checks:
        cfg = run_cfg
        if cfg.algorithm not in ("adaptive", "svrg_srg"):
            cfg = replace(cfg, algorithm="adaptive")
        _, trace = run(cfg)
        results.append(clip_bound_check(trace))

    if "variance" in checks:
        if constants is None:
            raise ContractViolation("monitor de variância exige constantes estimadas")
        results.append(variance_check(lemma_monitor(run_cfg, constants)))

    if "domination" in checks:
        results.append(domination_check(problem, rng))

    return results
