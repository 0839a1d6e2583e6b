"""Laço duplo dos algoritmos híbridos, escolha da saída e reinícios.

Cada época s:
  1. grad f(ω_0^s) completo (snapshot), V_0 = grad f(ω_0^s), ω_1 = R(ω_0, -α_0 V_0);
  2. para t = 1..m-1: sorteia I_t, calcula V_t pela variante configurada e
     ω_{t+1} = R(ω_t, -α_t V_t);
  3. ω̃^s = ω_m^s.

O registro (s, t) descreve o ponto ω_t^s e a direção V_t^s usada a partir dele.
"""
import logging
import time
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Iterator, List, Optional, Tuple

import numpy as np
import pandas as pd

from . import directions as dirs
from .directions import ClipInfo, HybridCoeffs, HybridState
from .errors import ContractViolation, DegenerateStepError, DomainError, NeighbourhoodError, NumericalAbort
from .manifold import ManifoldElement, TangentElement
from .problems import BatchIndex, FiniteSumProblem
from .schedules import ScheduleSpec, params as schedule_params, restart_epochs_theorem7
from .utils import is_finite_array

logger = logging.getLogger(__name__)

ALGORITHMS = dirs.VARIANTS
OUTPUT_OPTIONS = ("last_iterate", "uniform_random")


def default_output_option(algorithm: str) -> str:
    """O algoritmo de parâmetros variáveis só define a saída sorteada ω_a."""
    return "uniform_random" if algorithm == "timevarying" else "last_iterate"


# ============================================================
# RNG
# ============================================================
def make_streams(seed: int) -> Tuple[np.random.Generator, np.random.Generator, np.random.Generator]:
    """Fluxos Philox disjuntos (lotes, saída, ponto inicial) derivados de uma SeedSequence."""
    children = np.random.SeedSequence(int(seed)).spawn(3)
    return tuple(np.random.Generator(np.random.Philox(c)) for c in children)


def sample_batch(rng: np.random.Generator, n: int, b: int) -> BatchIndex:
    """Lote uniforme entre os C(n,b) subconjuntos.

    Consome exatamente uma permutação de n elementos por chamada.
    """
    if not 1 <= b <= n:
        raise ContractViolation(f"b={b} fora de [1, {n}]")
    perm = rng.permutation(n)
    return BatchIndex(tuple(sorted(int(i) for i in perm[:b])), n)


def derived_seed(seed: int, k: int) -> int:
    if k == 0:
        return int(seed)
    state = np.random.SeedSequence([int(seed), int(k)]).generate_state(1, dtype=np.uint64)
    return int(state[0])


# ============================================================
# Contagem de avaliações
# ============================================================
class CountingProblem(FiniteSumProblem):
    """Proxy que conta avaliações de gradiente de componente."""

    def __init__(self, inner: FiniteSumProblem):
        super().__init__(inner.manifold, inner.n)
        self.inner = inner
        self.name = inner.name
        self.known_optimum = inner.known_optimum
        self.tau = inner.tau
        self.evals = 0

    def component_costs(self, idx, w):
        return self.inner.component_costs(idx, w)

    def component_rgrads(self, idx, w):
        self.evals += len(idx)
        return self.inner.component_rgrads(idx, w)


def evals_per_epoch(algorithm: str, n: int, m: int, b: int) -> int:
    per_step = {
        "adaptive": 2 * n + 3 * b,
        "svrg_srg": 2 * n + 3 * b,
        "timevarying": 3 * b,
        "svrg": 2 * b,
        "srg": 2 * b,
        "sgd": b,
    }[algorithm]
    return n + (m - 1) * per_step


# ============================================================
# Configuração e traço
# ============================================================
@dataclass
class RunConfig:
    algorithm: str
    problem: FiniteSumProblem
    schedule: ScheduleSpec
    initial_point: ManifoldElement
    S: int
    b: int
    seed: int = 0
    output_option: Optional[str] = None

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ContractViolation(f"algoritmo desconhecido: {self.algorithm}")
        if self.output_option is None:
            self.output_option = default_output_option(self.algorithm)
        if self.output_option not in OUTPUT_OPTIONS:
            raise ContractViolation(f"opção de saída desconhecida: {self.output_option}")
        if int(self.S) < 1:
            raise ContractViolation(f"S = {self.S} < 1")
        if not 1 <= int(self.b) <= self.problem.n:
            raise ContractViolation(f"b = {self.b} fora de [1, n={self.problem.n}]")
        if int(self.S) > self.schedule.S_max:
            raise ContractViolation(f"S = {self.S} além do horizonte validado S_max = {self.schedule.S_max}")
        ok, msg = self.problem.manifold.check_point(self.initial_point)
        if not ok:
            raise ContractViolation(f"ponto inicial inválido: {msg}")

    @property
    def m(self) -> int:
        return int(self.schedule.m)


@dataclass
class StepRecord:
    s: int
    t: int
    f: float
    grad_norm_sq: float
    v_norm_sq: float
    psi_tilde: float
    clip_active: bool
    evals: int
    phi: float = 0.0
    psi: float = 0.0
    alpha: float = 0.0
    carried_inner: Optional[float] = None
    clip_limit: Optional[float] = None
    k: int = 0
    wall_time: float = field(default=0.0, compare=False)

    def to_dict(self, with_wall_time: bool = False) -> dict:
        d = asdict(self)
        if not with_wall_time:
            d.pop("wall_time")
        return d


@dataclass
class EpochSummary:
    s: int
    f_mean: float
    grad_norm_sq_mean: float
    evals: int
    k: int = 0


@dataclass
class RunTrace:
    algorithm: str
    n: int
    m: int
    b: int
    S: int
    seed: int
    output_option: str
    records: List[StepRecord] = field(default_factory=list)
    epochs: List[EpochSummary] = field(default_factory=list)
    output_index: Optional[Tuple[int, int]] = None
    final_f: Optional[float] = None
    final_grad_norm_sq: Optional[float] = None
    wall_time: float = 0.0

    def append(self, rec: StepRecord) -> None:
        if self.records:
            last = self.records[-1]
            if (rec.k, rec.s, rec.t) <= (last.k, last.s, last.t):
                raise ContractViolation(f"registro fora de ordem: {(rec.s, rec.t)} após {(last.s, last.t)}")
            if rec.evals <= last.evals and rec.k == last.k:
                raise ContractViolation("contador de avaliações não cresceu")
        self.records.append(rec)

    def close_epoch(self, s: int, k: int = 0) -> EpochSummary:
        recs = [r for r in self.records if r.s == s and r.k == k]
        summary = EpochSummary(
            s=s,
            f_mean=float(np.mean([r.f for r in recs])),
            grad_norm_sq_mean=float(np.mean([r.grad_norm_sq for r in recs])),
            evals=recs[-1].evals,
            k=k,
        )
        self.epochs.append(summary)
        return summary

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([r.to_dict() for r in self.records])

    def epoch_frame(self) -> pd.DataFrame:
        return pd.DataFrame([asdict(e) for e in self.epochs])

    def expected_grad_norm_sq(self) -> Optional[float]:
        """E[‖grad f(ω_a)‖²] sobre o sorteio da saída.

        Com saída uniforme é a média exata sobre os m·S iterados registrados; com o
        último iterado é o próprio valor final.
        """
        if self.output_option == "uniform_random":
            return float(np.mean([r.grad_norm_sq for r in self.records])) if self.records else None
        return self.final_grad_norm_sq

    def metadata(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "n": self.n,
            "m": self.m,
            "b": self.b,
            "S": self.S,
            "seed": self.seed,
            "output_option": self.output_option,
            "output_index": list(self.output_index) if self.output_index else None,
            "final_f": self.final_f,
            "final_grad_norm_sq": self.final_grad_norm_sq,
            "records": len(self.records),
        }


@dataclass
class StepContext:
    """Entregue ao observador logo depois de cada direção calculada."""

    s: int
    t: int
    point: ManifoldElement
    direction: TangentElement
    alpha: float
    state: Optional[HybridState]
    batch: Optional[BatchIndex]
    coeffs: Optional[HybridCoeffs]
    clip: Optional[ClipInfo]
    algorithm: str
    b: int


Observer = Callable[[StepContext], None]


# ============================================================
# Driver
# ============================================================
def _norm_sq(M, v: TangentElement) -> float:
    return M.inner(v, v)


def _inner_direction(cfg: RunConfig, P: CountingProblem, I, w, state, t, s):
    """(V, coeffs, clip, φ, ψ, ψ usado) para o passo estocástico t da época s."""
    alg = cfg.algorithm
    phi, psi = schedule_params(cfg.schedule, t, s)
    mu = cfg.schedule.mu
    if alg == "adaptive":
        coeffs, clip = dirs.adaptive_coefficients(P, w, state, phi, psi, mu)
        v, clip = dirs.hybrid_direction_adaptive(P, I, w, state, coeffs, clip)
        return v, coeffs, clip, phi, psi, coeffs.psi_tilde
    if alg == "svrg_srg":
        coeffs, clip = dirs.adaptive_coefficients(P, w, state, 0.0, psi, mu)
        v = dirs.svrg_srg_direction(P, I, w, state, coeffs.psi_tilde)
        return v, coeffs, clip, 1.0 - coeffs.psi_tilde, psi, coeffs.psi_tilde
    if alg == "timevarying":
        coeffs = HybridCoeffs(phi, psi, mu)
        v = dirs.hybrid_direction_timevarying(P, I, w, state, coeffs)
        return v, coeffs, None, phi, psi, psi
    phi, psi = dirs.effective_weights(alg, HybridCoeffs(0.0, 0.0, mu))
    coeffs = HybridCoeffs(phi, psi, mu)
    if alg == "svrg":
        v = dirs.svrg_term(P, I, w, state)
    elif alg == "srg":
        v = dirs.srg_term(P, I, w, state)
    else:
        v = P.batch_grad(I, w)
    return v, coeffs, None, phi, psi, psi


def _iterate(cfg: RunConfig, trace: RunTrace, observer: Optional[Observer] = None, k: int = 0) -> Iterator[Tuple[int, int, ManifoldElement]]:
    """Gera (s, t, ω_t^s) na ordem de execução e preenche o traço. Por fim gera (S+1, 0, ω̃^S)."""
    raw = cfg.problem
    P = CountingProblem(raw)
    M = raw.manifold
    batch_rng, _, _ = make_streams(cfg.seed)
    m, b = cfg.m, int(cfg.b)
    t0 = time.perf_counter()

    def record(s, t, w, v, psi_used, clip, phi, psi, alpha):
        # monitor sem contagem: não entra na conta de avaliações
        g = raw.full_grad(w)
        f = raw.cost(w)
        g_sq = _norm_sq(M, g)
        v_sq = _norm_sq(M, v)
        if not (np.isfinite(f) and np.isfinite(g_sq) and np.isfinite(v_sq)):
            raise NumericalAbort(f"NaN/Inf em (s={s}, t={t})", (s, t), trace)
        rec = StepRecord(
            s=s, t=t, f=float(f), grad_norm_sq=g_sq, v_norm_sq=v_sq,
            psi_tilde=float(psi_used), clip_active=bool(clip.active) if clip else False,
            evals=P.evals, phi=float(phi), psi=float(psi), alpha=float(alpha),
            carried_inner=float(clip.inner) if clip else None,
            clip_limit=float(cfg.schedule.mu * clip.g_norm_sq) if clip else None,
            k=k, wall_time=time.perf_counter() - t0,
        )
        trace.append(rec)

    def retract(s, t, w, v, alpha):
        try:
            return M.retract(w, -alpha * v)
        except (DegenerateStepError, NeighbourhoodError, DomainError) as e:
            e.context = (s, t)
            e.trace = trace
            raise

    current = cfg.initial_point
    for s in range(1, int(cfg.S) + 1):
        w0 = current
        g0 = P.full_grad(w0)
        if not is_finite_array(g0.coords):
            raise NumericalAbort(f"gradiente do snapshot com NaN/Inf (s={s})", (s, 0), trace)
        alpha = cfg.schedule.step(0, s)
        record(s, 0, w0, g0, 0.0, None, *schedule_params(cfg.schedule, 0, s), alpha)
        if observer is not None:
            observer(StepContext(s, 0, w0, g0, alpha, None, None, None, None, cfg.algorithm, b))
        yield s, 0, w0
        w = retract(s, 0, w0, g0, alpha)
        state = HybridState(w0, g0, w0, g0, alpha)

        for t in range(1, m):
            I = sample_batch(batch_rng, raw.n, b)
            try:
                v, coeffs, clip, phi, psi, psi_used = _inner_direction(cfg, P, I, w, state, t, s)
            except (NeighbourhoodError, DomainError) as e:
                e.context = (s, t)
                e.trace = trace
                raise
            if not is_finite_array(v.coords):
                raise NumericalAbort(f"direção com NaN/Inf em (s={s}, t={t})", (s, t), trace)
            alpha = cfg.schedule.step(t, s)
            record(s, t, w, v, psi_used, clip, phi, psi, alpha)
            if observer is not None:
                observer(StepContext(s, t, w, v, alpha, state, I, coeffs, clip, cfg.algorithm, b))
            yield s, t, w
            w_next = retract(s, t, w, v, alpha)
            state = HybridState(w0, g0, w, v, alpha)
            w = w_next

        trace.close_epoch(s, k)
        current = w
    trace.wall_time = time.perf_counter() - t0
    yield int(cfg.S) + 1, 0, current


def _new_trace(cfg: RunConfig) -> RunTrace:
    return RunTrace(
        algorithm=cfg.algorithm, n=cfg.problem.n, m=cfg.m, b=int(cfg.b), S=int(cfg.S),
        seed=int(cfg.seed), output_option=cfg.output_option,
    )


def replay_point(cfg: RunConfig, s: int, t: int) -> ManifoldElement:
    """Reconstrói ω_t^s rodando de novo (determinístico) até o ponto pedido."""
    if not (1 <= s <= cfg.S and 0 <= t < cfg.m):
        raise ContractViolation(f"(s={s}, t={t}) fora do traço")
    for ss, tt, w in _iterate(cfg, _new_trace(cfg)):
        if (ss, tt) == (s, t):
            return w
    raise ContractViolation(f"(s={s}, t={t}) não alcançado")


def run(cfg: RunConfig, observer: Optional[Observer] = None, k: int = 0) -> Tuple[ManifoldElement, RunTrace]:
    trace = _new_trace(cfg)
    final = None
    for ss, _, w in _iterate(cfg, trace, observer, k):
        final = w
    if cfg.output_option == "last_iterate":
        out = final
        trace.output_index = (int(cfg.S), cfg.m)
    else:
        _, out_rng, _ = make_streams(cfg.seed)
        idx = int(out_rng.integers(cfg.m * int(cfg.S)))
        s, t = idx // cfg.m + 1, idx % cfg.m
        trace.output_index = (s, t)
        out = replay_point(cfg, s, t)
    raw = cfg.problem
    trace.final_f = raw.cost(out)
    g = raw.full_grad(out)
    trace.final_grad_norm_sq = raw.manifold.inner(g, g)
    logger.debug("run %s seed=%d: f(ω_a)=%.6e ‖grad‖²=%.3e", cfg.algorithm, cfg.seed, trace.final_f, trace.final_grad_norm_sq)
    return out, trace


# ============================================================
# Reinícios para funções com dominância de gradiente
# ============================================================
def _check_complementary(schedule: ScheduleSpec, S: int) -> None:
    if schedule.kind != "fixed":
        raise ContractViolation("reinícios exigem cronograma 'fixed'")
    for s in range(1, S + 1):
        phi, psi = schedule.params_at(0, s)
        if abs(phi + psi - 1.0) > 1e-12:
            raise ContractViolation(f"reinícios exigem φ^s+ψ^s = 1 (s={s}: {phi + psi})")


def restart_epochs(cfg: RunConfig, tau: Optional[float], gamma: float) -> int:
    tau = cfg.problem.tau if tau is None else tau
    if tau is None:
        raise ContractViolation(f"{cfg.problem.name}: τ não disponível para reinícios")
    return restart_epochs_theorem7(tau, gamma, cfg.m, cfg.schedule.C_alpha)


def run_restarted(
    cfg: RunConfig,
    tau: Optional[float] = None,
    gamma: float = 2.0,
    K: int = 1,
) -> List[Tuple[ManifoldElement, Optional[RunTrace]]]:
    """K execuções encadeadas com S = ⌈2τγ/(mC_α)⌉ épocas cada; o reinício k parte da saída k-1.

    Com `timevarying` cada reinício parte da saída sorteada ω_a, qualquer que seja `cfg.output_option`.
    """
    S = restart_epochs(cfg, tau, gamma)
    _check_complementary(cfg.schedule, S)
    if int(K) < 0:
        raise ContractViolation(f"K = {K} < 0")
    output = "uniform_random" if cfg.algorithm == "timevarying" else cfg.output_option
    results: List[Tuple[ManifoldElement, Optional[RunTrace]]] = [(cfg.initial_point, None)]
    current = cfg.initial_point
    for k in range(int(K)):
        sub = replace(cfg, S=S, initial_point=current, seed=derived_seed(cfg.seed, k), output_option=output)
        current, trace = run(sub, k=k)
        results.append((current, trace))
        logger.info("reinício %d/%d: f=%.6e", k + 1, K, trace.final_f)
    return results


def restart_table(results, problem: FiniteSumProblem) -> pd.DataFrame:
    """f - f* e ‖grad f‖² em cada ω̃^k, com a razão em relação ao reinício anterior."""
    if problem.known_optimum is None:
        raise ContractViolation(f"{problem.name}: ótimo desconhecido")
    fstar = problem.known_optimum.value
    rows = []
    for k, (w, _) in enumerate(results):
        g = problem.full_grad(w)
        rows.append({"k": k, "f_gap": problem.cost(w) - fstar, "grad_norm_sq": problem.manifold.inner(g, g)})
    df = pd.DataFrame(rows)
    df["ratio"] = df["f_gap"] / df["f_gap"].shift(1)
    return df
