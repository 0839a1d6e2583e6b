"""Linha de comando: run, verify, sweep, estimate.

Códigos de saída: 0 sucesso; 1 verificação reprovada ou dados insuficientes;
2 configuração inválida ou arquivo ausente; 3 aborto numérico (traço parcial gravado).
"""
import argparse
import logging
import os
import sys
from multiprocessing import Pool
from pathlib import Path
from typing import List, Optional

import pandas as pd

from . import __version__
from . import report as rep
from . import schedules as sched
from .config import ExperimentConfig, Prepared, build_problem, config_hash, estimate_for, load_config, prepare
from .diagnostics import default_rng, fit_rate, run_verification_suite
from .errors import (
    ConfigError,
    ContractViolation,
    DegenerateStepError,
    DomainError,
    InsufficientDataError,
    NeighbourhoodError,
    NumericalAbort,
    RshgError,
)
from .optimizer import RunConfig, RunTrace, restart_table, run, run_restarted

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2
EXIT_ABORT = 3

ABORTS = (NumericalAbort, DegenerateStepError, NeighbourhoodError, DomainError)


def _out_dir(args, cfg: ExperimentConfig) -> Path:
    if args.out:
        return Path(args.out)
    if cfg.output.dir:
        p = Path(cfg.output.dir)
        return p if p.is_absolute() else cfg.base_dir / p
    return Path(os.getenv("RSHG_SAIDA", "saida"))


def _workers(args) -> int:
    if args.workers:
        return max(1, int(args.workers))
    try:
        return max(1, int(os.getenv("RSHG_WORKERS", "1")))
    except ValueError:
        return 1


def _want_xlsx(args, cfg: ExperimentConfig) -> bool:
    return bool(args.xlsx or cfg.output.xlsx)


def _flush_partial(out: Path, e: Exception, h: str) -> None:
    trace = getattr(e, "trace", None)
    if isinstance(trace, RunTrace):
        extra = {"aborted": str(e), "context": list(getattr(e, "context", None) or [])}
        rep.write_run_artifacts(out, trace, h, __version__, extra)
        print(f"[run] traço parcial gravado em {out}")


def _fmt(x, spec: str = ".6e") -> str:
    return "-" if x is None else format(x, spec)


def _merge_restarts(results, rc: RunConfig) -> RunTrace:
    merged = RunTrace(
        algorithm=rc.algorithm, n=rc.problem.n, m=rc.m, b=int(rc.b), S=0,
        seed=int(rc.seed), output_option=results[-1][1].output_option if len(results) > 1 else rc.output_option,
    )
    for _, trace in results[1:]:
        for r in trace.records:
            merged.append(r)
        merged.epochs.extend(trace.epochs)
        merged.S += trace.S
        merged.wall_time += trace.wall_time
        merged.final_f = trace.final_f
        merged.final_grad_norm_sq = trace.final_grad_norm_sq
        merged.output_index = trace.output_index
    return merged


# ============================================================
# run
# ============================================================
def cmd_run(args) -> int:
    cfg = load_config(args.config)
    prep = prepare(cfg)
    h = config_hash(cfg)
    out = _out_dir(args, cfg)
    for seed in cfg.run.seeds:
        seed_dir = out / f"seed_{seed}"
        rc = prep.run_config(seed)
        try:
            if cfg.restart.enabled:
                results = run_restarted(rc, cfg.restart.tau, cfg.restart.gamma, cfg.restart.K)
                trace = _merge_restarts(results, rc)
                rep.write_run_artifacts(seed_dir, trace, h, __version__, {"restarts": cfg.restart.K})
                restart_table(results, prep.problem).to_csv(seed_dir / "restarts.csv", index=False, lineterminator="\n")
            else:
                _, trace = run(rc)
                rep.write_run_artifacts(seed_dir, trace, h, __version__)
        except ABORTS as e:
            print(f"❌ [run] seed={seed}: {e}")
            _flush_partial(seed_dir, e, h)
            return EXIT_ABORT
        print(
            f"✅ [run] seed={seed} {rc.algorithm}: f={_fmt(trace.final_f)} "
            f"‖grad‖²={_fmt(trace.final_grad_norm_sq, '.3e')} avaliações={trace.records[-1].evals if trace.records else 0} -> {seed_dir}"
        )
    return EXIT_OK


# ============================================================
# verify
# ============================================================
def cmd_verify(args) -> int:
    cfg = load_config(args.config)
    prep = prepare(cfg, need_constants="variance" in cfg.verify.checks)
    out = _out_dir(args, cfg)
    out.mkdir(parents=True, exist_ok=True)
    v = cfg.verify
    rc = prep.run_config(cfg.run.seeds[0])
    print(f"[verify] {prep.problem!r}: {', '.join(v.checks)}")
    results = run_verification_suite(
        prep.problem, rc, prep.constants, v.checks, default_rng(cfg.problem.seed),
        trials=v.trials, states=v.states, b_values=v.b_values, isometry_trials=v.isometry_trials,
    )
    print(rep.format_checks(results))
    passed = all(r.passed for r in results)
    rep.write_json(
        {
            "config_hash": config_hash(cfg),
            "version": __version__,
            "passed": passed,
            "checks": [r.to_dict() for r in results],
            "constants": prep.constants.to_dict() if prep.constants else None,
        },
        out / "report.json",
    )
    if _want_xlsx(args, cfg):
        rep.write_xlsx(out / "report.xlsx", {"verificacoes": rep.checks_frame(results)})
    for r in results:
        if not r.passed:
            print(f"❌ [verify] {r.name}: pior={r.worst:.3e} ({r.detail})")
    return EXIT_OK if passed else EXIT_FAIL


# ============================================================
# sweep
# ============================================================
def _run_cell(task) -> dict:
    rc, cell_dir, h = task
    row = {"S": int(rc.S), "seed": int(rc.seed)}
    try:
        _, trace = run(rc)
    except RshgError as e:
        _flush_partial(Path(cell_dir), e, h)
        row.update(status="ERRO", grad_norm_sq=None, f=None, grad_norm_sq_esperado=None, detail=str(e))
        return row
    rep.write_run_artifacts(cell_dir, trace, h, __version__)
    row.update(
        status="OK", grad_norm_sq=trace.final_grad_norm_sq, f=trace.final_f,
        grad_norm_sq_esperado=trace.expected_grad_norm_sq(), detail="",
    )
    return row


def _sweep_tasks(prep: Prepared, out: Path, h: str) -> List[tuple]:
    cfg = prep.cfg
    S_values = cfg.sweep.S_values or [cfg.run.S]
    return [
        (prep.run_config(seed, S=S), str(out / f"S_{S}" / f"seed_{seed}"), h)
        for S in S_values
        for seed in cfg.run.seeds
    ]


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    prep = prepare(cfg)
    h = config_hash(cfg)
    out = _out_dir(args, cfg)
    out.mkdir(parents=True, exist_ok=True)
    tasks = _sweep_tasks(prep, out, h)
    workers = min(_workers(args), len(tasks))
    print(f"[sweep] {len(tasks)} células, {workers} processo(s)")
    if workers > 1:
        with Pool(processes=workers) as pool:
            rows = pool.map(_run_cell, tasks)
    else:
        rows = [_run_cell(t) for t in tasks]

    cells = pd.DataFrame(rows)
    ok = cells[cells["status"] == "OK"]
    metric_cols = ["grad_norm_sq", "grad_norm_sq_esperado"]
    if ok.empty:
        means = pd.DataFrame(columns=["S", *metric_cols])
    else:
        means = ok.groupby("S")[metric_cols].mean().reset_index()
    fit, notice = None, None
    try:
        # E[‖grad f(ω_a)‖²] por célula; com último iterado coincide com grad_norm_sq
        fit = fit_rate(zip(ok["S"].tolist(), ok["grad_norm_sq_esperado"].tolist()))
        print(f"[sweep] inclinação log-log = {fit.slope:.3f} (resíduo {fit.residual:.3f})")
    except InsufficientDataError as e:
        notice = f"ajuste ignorado: {e}"
        print(f"[sweep] {notice}")

    doc = {
        "config_hash": h,
        "version": __version__,
        "cells": cells.to_dict(orient="records"),
        "means": means.to_dict(orient="records"),
        "fit": fit.to_dict() if fit else None,
        "notice": notice,
        "failed": int((cells["status"] != "OK").sum()),
    }
    if cfg.schedule.kind == "theorem5":
        doc["predicted_slope"] = -sched.rate_exponent_theorem5(cfg.schedule.P, cfg.schedule.Q)
    rep.write_json(doc, out / "report.json")
    if _want_xlsx(args, cfg):
        rep.write_xlsx(out / "report.xlsx", {"celulas": cells, "medias": means})

    for _, r in cells[cells["status"] != "OK"].iterrows():
        print(f"❌ [sweep] S={r['S']} seed={r['seed']}: {r['detail']}")
    return EXIT_OK if doc["failed"] == 0 else EXIT_FAIL


# ============================================================
# estimate
# ============================================================
def step_bounds(cfg: ExperimentConfig, c) -> dict:
    m = cfg.run.m
    K = c.msq_theta_nsq
    if not c.L > 0.0:
        return {"notice": f"L estimado = {c.L:.3e} <= 0: cotas de passo indefinidas"}
    return {
        "theorem3": sched.step_bound_theorem3(c.L, K, c.C1, c.C2, m),
        "theorem4": sched.step_bound_theorem4(c.L, K, c.C1, c.C2, m),
        "theorem6": sched.step_bound_theorem6(c.L, K, c.C1, c.C2, m),
        "theorem5": sched.step_bound_theorem5(c.L, K, cfg.schedule.P, cfg.schedule.beta),
    }


def cmd_estimate(args) -> int:
    cfg = load_config(args.config)
    problem = build_problem(cfg)
    out = _out_dir(args, cfg)
    out.mkdir(parents=True, exist_ok=True)
    print(f"[estimate] {problem!r}: {cfg.estimate.samples} amostras, raio {cfg.estimate.radius}")
    c = estimate_for(cfg, problem)
    doc = {"config_hash": config_hash(cfg), "version": __version__, "constants": c.to_dict(), "step_bounds": step_bounds(cfg, c)}
    rep.write_json(doc, out / "constants.json")
    rep.write_json(doc, out / "report.json")
    for k in ("N", "L", "M", "theta", "C1", "C2"):
        print(f"   {k:<6}= {getattr(c, k):.6g}")
    for k, v in doc["step_bounds"].items():
        print(f"   {k}: {v}")
    return EXIT_OK


# ============================================================
# main
# ============================================================
def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="documento JSON do experimento")
    common.add_argument("--out", default=None, help="pasta de saída (padrão: RSHG_SAIDA ou ./saida)")
    common.add_argument("--workers", type=int, default=None, help="processos da varredura (padrão: RSHG_WORKERS ou 1)")
    common.add_argument("--quiet", action="store_true", help="só avisos e erros no log")
    common.add_argument("--xlsx", action="store_true", help="grava report.xlsx (verify e sweep)")

    ap = argparse.ArgumentParser(prog="rshg", description="Otimização estocástica riemanniana híbrida")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, func, ajuda in (
        ("run", cmd_run, "executa o algoritmo configurado"),
        ("verify", cmd_verify, "roda a suíte de verificações numéricas"),
        ("sweep", cmd_sweep, "grade S x sementes e ajuste de taxa"),
        ("estimate", cmd_estimate, "estima constantes e cotas de passo"),
    ):
        p = sub.add_parser(name, parents=[common], help=ajuda)
        p.set_defaults(func=func)
    return ap


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except FileNotFoundError as e:
        print(f"❌ [{args.command}] arquivo não encontrado: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as e:
        print(f"❌ [{args.command}] configuração inválida: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except ContractViolation as e:
        print(f"❌ [{args.command}] combinação de parâmetros inválida: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except InsufficientDataError as e:
        print(f"❌ [{args.command}] dados insuficientes: {e}", file=sys.stderr)
        return EXIT_FAIL
    except ABORTS as e:
        print(f"❌ [{args.command}] aborto numérico: {e}", file=sys.stderr)
        return EXIT_ABORT
