"""Gravação e leitura dos artefatos: traços, resumos por época, manifesto,
relatório JSON e a planilha estilizada das verificações e varreduras.
"""
import json
import numbers
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Union

import numpy as np
import pandas as pd
from openpyxl import Workbook
from openpyxl.styles import Alignment, Font, PatternFill
from openpyxl.utils.dataframe import dataframe_to_rows

from .diagnostics import CheckResult
from .optimizer import RunTrace
from .utils import to_jsonable

TRACE_CSV_COLUMNS = ["s", "t", "f", "grad_norm_sq", "v_norm_sq", "psi_tilde", "clip_active", "evals"]
EPOCH_CSV_COLUMNS = ["s", "f_mean", "grad_norm_sq_mean", "evals"]

PathLike = Union[str, Path]


# ============================================================
# Traço
# ============================================================
def write_trace_jsonl(trace: RunTrace, path: PathLike) -> Path:
    """Um registro por iteração interna. Sem tempo de parede: execuções iguais geram arquivos iguais."""
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for rec in trace.records:
            fh.write(json.dumps(to_jsonable(rec.to_dict()), sort_keys=True) + "\n")
    return path


def read_trace_jsonl(path: PathLike) -> List[dict]:
    out = []
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(json.loads(line))
    return out


def write_trace_csv(trace: RunTrace, path: PathLike) -> Path:
    df = trace.to_frame()
    if df.empty:
        df = pd.DataFrame(columns=TRACE_CSV_COLUMNS)
    df[TRACE_CSV_COLUMNS].to_csv(path, index=False, lineterminator="\n")
    return Path(path)


def read_trace_csv(path: PathLike) -> pd.DataFrame:
    return pd.read_csv(path)


def write_epochs_csv(trace: RunTrace, path: PathLike) -> Path:
    df = trace.epoch_frame()
    if df.empty:
        df = pd.DataFrame(columns=EPOCH_CSV_COLUMNS)
    df[EPOCH_CSV_COLUMNS].to_csv(path, index=False, lineterminator="\n")
    return Path(path)


def read_epochs_csv(path: PathLike) -> pd.DataFrame:
    return pd.read_csv(path)


# ============================================================
# JSON
# ============================================================
def write_json(obj, path: PathLike) -> Path:
    path = Path(path)
    path.write_text(
        json.dumps(to_jsonable(obj), indent=2, sort_keys=True, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )
    return path


def read_json(path: PathLike):
    return json.loads(Path(path).read_text(encoding="utf-8"))


def build_manifest(trace: RunTrace, config_hash: str, version: str, extra: Optional[dict] = None) -> dict:
    man = {
        "config_hash": config_hash,
        "seed": trace.seed,
        "version": version,
        "wall_time": trace.wall_time,
        "trace": trace.metadata(),
    }
    if extra:
        man.update(extra)
    return man


def write_run_artifacts(
    out_dir: PathLike,
    trace: RunTrace,
    config_hash: str,
    version: str,
    extra: Optional[dict] = None,
) -> Dict[str, Path]:
    """trace.jsonl, trace.csv, epochs.csv e manifest.json na pasta da execução."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return {
        "trace_jsonl": write_trace_jsonl(trace, out / "trace.jsonl"),
        "trace_csv": write_trace_csv(trace, out / "trace.csv"),
        "epochs_csv": write_epochs_csv(trace, out / "epochs.csv"),
        "manifest": write_json(build_manifest(trace, config_hash, version, extra), out / "manifest.json"),
    }


# ============================================================
# Tabelas de verificação
# ============================================================
def checks_frame(results: Iterable[CheckResult]) -> pd.DataFrame:
    rows = [
        {"check": r.name, "worst": r.worst, "detail": r.detail, "status": r.status}
        for r in results
    ]
    return pd.DataFrame(rows, columns=["check", "worst", "detail", "status"])


def format_checks(results: Iterable[CheckResult]) -> str:
    linhas = []
    for r in results:
        marca = "✅" if r.passed else "❌"
        linhas.append(f"{marca} {r.name:<40} pior={r.worst:.3e}  {r.detail}")
    return "\n".join(linhas)


# ============================================================
# Planilha
# ============================================================
def write_xlsx(path: PathLike, sheets: Dict[str, pd.DataFrame]) -> Path:
    """Uma aba por tabela, com o mesmo estilo em todas."""
    wb = Workbook()
    wb.remove(wb.active)
    for title, df in sheets.items():
        ws = wb.create_sheet(title=title[:31])
        # NaN vira célula vazia
        df = df.astype(object).where(pd.notna(df), None)
        for r in dataframe_to_rows(df, index=False, header=True):
            ws.append(r)
        _estilizar_planilha(ws)
    if not wb.sheetnames:
        wb.create_sheet(title="vazio")
    path = Path(path)
    wb.save(path)
    print(f"[relatorio] planilha gravada: {path}")
    return path


def _estilizar_planilha(ws, cor_padrao=None):
    """Cabeçalho azul; linhas verdes (OK), vermelhas (ERRO) ou amarelas (PENDENTE) pela coluna status."""
    header_fill = PatternFill(start_color="203764", end_color="203764", fill_type="solid")
    header_font = Font(bold=True, color="FFFFFF")

    cores = {
        "OK": (PatternFill(start_color="C6EFCE", end_color="C6EFCE", fill_type="solid"), Font(color="006100")),
        "ERRO": (PatternFill(start_color="FFC7CE", end_color="FFC7CE", fill_type="solid"), Font(color="9C0006")),
        "PENDENTE": (PatternFill(start_color="FFEB9C", end_color="FFEB9C", fill_type="solid"), Font(color="9C6500")),
    }

    for cell in ws[1]:
        cell.fill = header_fill
        cell.font = header_font
        cell.alignment = Alignment(horizontal="center", vertical="center")

    col_status = None
    for cell in ws[1]:
        if str(cell.value).lower() == "status":
            col_status = cell.column
            break

    for row in ws.iter_rows(min_row=2):
        status_val = str(row[col_status - 1].value).upper() if col_status else ""
        estilo = cores.get(status_val)
        if estilo is None and cor_padrao:
            estilo = (PatternFill(start_color=cor_padrao, end_color=cor_padrao, fill_type="solid"), None)
        if estilo:
            fill, font = estilo
            for cell in row:
                cell.fill = fill
                if font is not None:
                    cell.font = font
        for cell in row:
            v = cell.value
            if isinstance(v, numbers.Integral) and not isinstance(v, (bool, np.bool_)):
                cell.number_format = "#,##0"
            elif isinstance(v, numbers.Real) and not isinstance(v, (bool, np.bool_)):
                cell.number_format = "0.000E+00"

    for col in ws.columns:
        largura = 15
        val = str(col[0].value)
        if len(val) > largura:
            largura = len(val) + 2
        ws.column_dimensions[col[0].column_letter].width = largura
