"""Documento de experimento (JSON) -> dataclasses validadas -> objetos prontos para rodar.

Cada seção vira uma dataclass com os defaults nos próprios campos. Chave
desconhecida ou tipo errado gera `ConfigError` com o caminho pontuado do campo.
"""
import json
import logging
import typing
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, List, Optional, Union

from . import problems as probs
from . import schedules as sched
from .diagnostics import CHECKS, ConstantEstimates, Region, default_rng, estimate_constants, sample_in_ball
from .errors import ConfigError, ContractViolation
from .manifold import ManifoldElement
from .optimizer import ALGORITHMS, OUTPUT_OPTIONS, RunConfig, make_streams
from .problems import FiniteSumProblem
from .schedules import ScheduleSpec
from .utils import sha256_of

logger = logging.getLogger(__name__)

PROBLEM_KINDS = ("pca_sphere", "karcher_spd", "least_squares")
C_ALPHA_RULES = ("theorem3", "theorem4", "theorem5", "theorem6")
INIT_MODES = ("random", "near_optimum")


@dataclass
class ProblemSection:
    kind: str = "least_squares"
    n: int = 20
    d: int = 3
    data: Optional[str] = None
    seed: int = 0
    gap: float = 4.0
    spread: float = 0.5
    rows: int = 1
    noise: float = 0.1
    retraction: str = "retraction"
    transport: str = "parallel"


@dataclass
class ScheduleSection:
    kind: str = "decaying_default"
    C_alpha: Union[float, str] = 1.0
    C_psi: float = 1.0
    C_phi: float = 0.0
    P: float = 0.5
    Q: float = 0.5
    Rexp: float = 1.0
    gamma: float = 2.0
    beta: float = 5.0
    mu: float = 0.5
    params: str = "constant"
    phi: float = 0.0
    psi: float = 0.0
    phi_seq: List[float] = field(default_factory=list)
    psi_seq: List[float] = field(default_factory=list)


@dataclass
class RunSection:
    algorithm: str = "adaptive"
    m: int = 5
    S: int = 10
    b: int = 1
    seeds: List[int] = field(default_factory=lambda: [0])
    output_option: Optional[str] = None
    init: str = "random"
    init_radius: float = 0.5


@dataclass
class RestartSection:
    enabled: bool = False
    K: int = 1
    gamma: float = 2.0
    tau: Optional[float] = None


@dataclass
class SweepSection:
    S_values: List[int] = field(default_factory=list)


@dataclass
class VerifySection:
    checks: List[str] = field(default_factory=lambda: ["manifold", "gradient_fd", "expectation", "clip", "variance"])
    trials: int = 50
    states: int = 20
    b_values: List[int] = field(default_factory=lambda: [1, 2])
    isometry_trials: int = 1000


@dataclass
class EstimateSection:
    samples: int = 200
    radius: float = 0.5
    safety: float = 1.1


@dataclass
class OutputSection:
    dir: Optional[str] = None
    xlsx: bool = False


SECTIONS = {
    "problem": ProblemSection,
    "schedule": ScheduleSection,
    "run": RunSection,
    "restart": RestartSection,
    "sweep": SweepSection,
    "verify": VerifySection,
    "estimate": EstimateSection,
    "output": OutputSection,
}


@dataclass
class ExperimentConfig:
    problem: ProblemSection = field(default_factory=ProblemSection)
    schedule: ScheduleSection = field(default_factory=ScheduleSection)
    run: RunSection = field(default_factory=RunSection)
    restart: RestartSection = field(default_factory=RestartSection)
    sweep: SweepSection = field(default_factory=SweepSection)
    verify: VerifySection = field(default_factory=VerifySection)
    estimate: EstimateSection = field(default_factory=EstimateSection)
    output: OutputSection = field(default_factory=OutputSection)
    base_dir: Path = field(default_factory=Path.cwd, compare=False)

    def to_dict(self) -> dict:
        return {name: asdict(getattr(self, name)) for name in SECTIONS}

    def validate(self) -> None:
        validate(self)


# ============================================================
# Parsing
# ============================================================
def _coerce(value: Any, hint, path: str) -> Any:
    origin = typing.get_origin(hint)
    args = typing.get_args(hint)

    if origin is Union:
        if value is None and type(None) in args:
            return None
        for a in args:
            if a is type(None):
                continue
            try:
                return _coerce(value, a, path)
            except ConfigError:
                continue
        raise ConfigError(f"tipo inválido ({value!r})", path)

    if origin in (list, List):
        if not isinstance(value, list):
            raise ConfigError(f"esperava lista, recebeu {type(value).__name__}", path)
        (item,) = args or (Any,)
        return [_coerce(v, item, f"{path}[{i}]") for i, v in enumerate(value)]

    if hint is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"esperava booleano, recebeu {value!r}", path)
        return value
    if hint is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"esperava inteiro, recebeu {value!r}", path)
        return int(value)
    if hint is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"esperava número, recebeu {value!r}", path)
        return float(value)
    if hint is str:
        if not isinstance(value, str):
            raise ConfigError(f"esperava texto, recebeu {value!r}", path)
        return value
    return value


def _parse_section(cls, raw: Any, prefix: str):
    if raw is None:
        return cls()
    if not isinstance(raw, dict):
        raise ConfigError("seção precisa ser um objeto", prefix)
    hints = typing.get_type_hints(cls)
    known = {f.name for f in fields(cls)}
    for key in raw:
        if key not in known:
            raise ConfigError("chave desconhecida", f"{prefix}.{key}")
    kwargs = {k: _coerce(v, hints[k], f"{prefix}.{k}") for k, v in raw.items()}
    return cls(**kwargs)


def parse_config(doc: Any, base_dir: Optional[Path] = None) -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigError("documento precisa ser um objeto JSON")
    for key in doc:
        if key not in SECTIONS:
            raise ConfigError("seção desconhecida", key)
    parts = {name: _parse_section(cls, doc.get(name), name) for name, cls in SECTIONS.items()}
    cfg = ExperimentConfig(**parts, base_dir=Path(base_dir) if base_dir else Path.cwd())
    validate(cfg)
    return cfg


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    """Lê e valida o JSON. Arquivo ausente sobe FileNotFoundError (a CLI trata)."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"configuração não encontrada: {path}")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError(f"JSON inválido (linha {e.lineno}, coluna {e.colno}): {e.msg}") from e
    return parse_config(doc, path.resolve().parent)


def config_hash(cfg: ExperimentConfig) -> str:
    """sha256 do JSON canônico sem a seção de saída (caminhos não mudam o experimento)."""
    doc = cfg.to_dict()
    doc.pop("output", None)
    return sha256_of(doc)


# ============================================================
# Validação semântica
# ============================================================
def _require(cond: bool, message: str, path: str) -> None:
    if not cond:
        raise ConfigError(message, path)


def validate(cfg: ExperimentConfig) -> None:
    p, sc, r = cfg.problem, cfg.schedule, cfg.run
    _require(p.kind in PROBLEM_KINDS, f"tipo desconhecido, use um de {PROBLEM_KINDS}", "problem.kind")
    _require(p.n >= 1, "precisa ser >= 1", "problem.n")
    _require(p.d >= (2 if p.kind == "pca_sphere" else 1), "dimensão pequena demais", "problem.d")
    _require(p.retraction in ("retraction", "exp"), "use 'retraction' ou 'exp'", "problem.retraction")
    _require(p.transport in ("parallel", "projection"), "use 'parallel' ou 'projection'", "problem.transport")
    _require(not (p.kind == "least_squares" and p.data), "least_squares só aceita dados sintéticos", "problem.data")

    _require(sc.kind in sched.KINDS, f"use um de {sched.KINDS}", "schedule.kind")
    _require(sc.params in sched.PRESETS, f"use um de {sched.PRESETS}", "schedule.params")
    if isinstance(sc.C_alpha, str):
        _require(sc.C_alpha in C_ALPHA_RULES, f"use um número ou um de {C_ALPHA_RULES}", "schedule.C_alpha")

    _require(r.algorithm in ALGORITHMS, f"use um de {ALGORITHMS}", "run.algorithm")
    _require(r.output_option is None or r.output_option in OUTPUT_OPTIONS, f"use um de {OUTPUT_OPTIONS}", "run.output_option")
    _require(r.init in INIT_MODES, f"use um de {INIT_MODES}", "run.init")
    _require(r.m >= 1, "precisa ser >= 1", "run.m")
    _require(r.S >= 1, "precisa ser >= 1", "run.S")
    _require(r.b >= 1, "precisa ser >= 1", "run.b")
    if not p.data:
        _require(r.b <= p.n, f"b = {r.b} maior que n = {p.n}", "run.b")
    _require(len(r.seeds) > 0, "lista de sementes vazia", "run.seeds")

    _require(cfg.restart.K >= 0, "precisa ser >= 0", "restart.K")
    _require(all(S >= 1 for S in cfg.sweep.S_values), "valores de S precisam ser >= 1", "sweep.S_values")
    _require(len(cfg.verify.checks) > 0, "nada a verificar", "verify.checks")
    bad = [c for c in cfg.verify.checks if c not in CHECKS]
    _require(not bad, f"verificações desconhecidas {bad}; use {CHECKS}", "verify.checks")
    _require(cfg.verify.isometry_trials >= 1, "precisa ser >= 1", "verify.isometry_trials")
    _require(cfg.estimate.samples >= 1, "precisa ser >= 1", "estimate.samples")


# ============================================================
# Construção
# ============================================================
def _data_path(cfg: ExperimentConfig) -> Path:
    path = Path(cfg.problem.data)
    return path if path.is_absolute() else cfg.base_dir / path


def build_problem(cfg: ExperimentConfig) -> FiniteSumProblem:
    p = cfg.problem
    try:
        if p.kind == "pca_sphere":
            data = probs.load_pca_csv(_data_path(cfg)) if p.data else probs.synthetic_pca_data(p.n, p.d, p.gap, p.seed)
            problem = probs.make_pca_sphere(data, p.retraction, p.transport)
        elif p.kind == "karcher_spd":
            if p.transport != "parallel":
                raise ConfigError("SPD só tem transporte paralelo", "problem.transport")
            anchors = probs.load_spd_directory(_data_path(cfg)) if p.data else probs.synthetic_spd_anchors(p.n, p.d, p.spread, p.seed)
            problem = probs.make_karcher_spd(anchors, p.retraction)
        else:
            if p.transport != "parallel":
                raise ConfigError("espaço euclidiano só tem transporte paralelo", "problem.transport")
            A, c = probs.synthetic_least_squares(p.n, p.d, p.rows, p.noise, p.seed)
            problem = probs.make_least_squares(A, c)
    except ContractViolation as e:
        raise ConfigError(str(e), "problem") from e
    if cfg.run.b > problem.n:
        raise ConfigError(f"b = {cfg.run.b} maior que n = {problem.n}", "run.b")
    return problem


def initial_point(cfg: ExperimentConfig, problem: FiniteSumProblem, seed: int) -> ManifoldElement:
    """Ponto inicial tirado do fluxo de inicialização da semente."""
    _, _, init_rng = make_streams(seed)
    M = problem.manifold
    if cfg.run.init == "near_optimum":
        if problem.known_optimum is None:
            raise ConfigError(f"{problem.name} não tem ótimo conhecido", "run.init")
        return sample_in_ball(M, problem.known_optimum.point, cfg.run.init_radius, init_rng)
    return M.random_point(init_rng)


def estimate_for(cfg: ExperimentConfig, problem: FiniteSumProblem) -> ConstantEstimates:
    rng = default_rng(cfg.problem.seed)
    center = problem.known_optimum.point if problem.known_optimum is not None else problem.manifold.random_point(rng)
    region = Region(center, cfg.estimate.radius)
    return estimate_constants(problem, region, cfg.estimate.samples, rng, cfg.estimate.safety)


def resolve_c_alpha(cfg: ExperimentConfig, constants: Optional[ConstantEstimates]) -> float:
    rule = cfg.schedule.C_alpha
    if not isinstance(rule, str):
        return float(rule)
    c = constants
    m = cfg.run.m
    try:
        if rule == "theorem3":
            return sched.step_bound_theorem3(c.L, c.msq_theta_nsq, c.C1, c.C2, m)
        if rule == "theorem4":
            return sched.step_bound_theorem4(c.L, c.msq_theta_nsq, c.C1, c.C2, m)
        if rule == "theorem6":
            return sched.step_bound_theorem6(c.L, c.msq_theta_nsq, c.C1, c.C2, m)
        return sched.step_bound_theorem5(c.L, c.msq_theta_nsq, cfg.schedule.P, cfg.schedule.beta)
    except ContractViolation as e:
        raise ConfigError(str(e), "schedule.C_alpha") from e


def horizon(cfg: ExperimentConfig, c_alpha: float, problem: FiniteSumProblem) -> int:
    """Maior S que alguma execução deste documento pode pedir."""
    values = [cfg.run.S, *cfg.sweep.S_values]
    if cfg.restart.enabled:
        tau = cfg.restart.tau if cfg.restart.tau is not None else problem.tau
        if tau is None:
            raise ConfigError(f"{problem.name} não tem τ conhecido; informe restart.tau", "restart.tau")
        try:
            values.append(sched.restart_epochs_theorem7(tau, cfg.restart.gamma, cfg.run.m, c_alpha))
        except ContractViolation as e:
            raise ConfigError(str(e), "restart") from e
    return max(values)


def build_schedule(
    cfg: ExperimentConfig,
    problem: FiniteSumProblem,
    constants: Optional[ConstantEstimates] = None,
) -> ScheduleSpec:
    sc = cfg.schedule
    c_alpha = resolve_c_alpha(cfg, constants)
    try:
        return ScheduleSpec(
            kind=sc.kind,
            m=cfg.run.m,
            S_max=horizon(cfg, c_alpha, problem),
            C_alpha=c_alpha,
            C_psi=sc.C_psi,
            C_phi=sc.C_phi,
            P=sc.P,
            Q=sc.Q,
            Rexp=sc.Rexp,
            gamma=sc.gamma,
            beta=sc.beta,
            mu=sc.mu,
            params=sc.params,
            phi=sc.phi,
            psi=sc.psi,
            phi_seq=tuple(sc.phi_seq),
            psi_seq=tuple(sc.psi_seq),
            L=constants.L if constants is not None else None,
            msq_theta_nsq=constants.msq_theta_nsq if constants is not None else None,
        )
    except ContractViolation as e:
        raise ConfigError(str(e), "schedule") from e


@dataclass
class Prepared:
    """Problema, cronograma e (se foram necessárias) constantes estimadas."""

    cfg: ExperimentConfig
    problem: FiniteSumProblem
    schedule: ScheduleSpec
    constants: Optional[ConstantEstimates] = None

    def run_config(self, seed: int, S: Optional[int] = None, algorithm: Optional[str] = None) -> RunConfig:
        r = self.cfg.run
        try:
            return RunConfig(
                algorithm=algorithm or r.algorithm,
                problem=self.problem,
                schedule=self.schedule,
                initial_point=initial_point(self.cfg, self.problem, seed),
                S=int(S if S is not None else r.S),
                b=r.b,
                seed=int(seed),
                output_option=r.output_option,
            )
        except ContractViolation as e:
            raise ConfigError(str(e), "run") from e


def prepare(cfg: ExperimentConfig, need_constants: bool = False) -> Prepared:
    problem = build_problem(cfg)
    constants = None
    if need_constants or isinstance(cfg.schedule.C_alpha, str) or cfg.schedule.kind == "theorem5":
        constants = estimate_for(cfg, problem)
        logger.info("constantes estimadas: N=%.4g L=%.4g M=%.4g θ=%.4g", constants.N, constants.L, constants.M, constants.theta)
    schedule = build_schedule(cfg, problem, constants)
    return Prepared(cfg, problem, schedule, constants)
