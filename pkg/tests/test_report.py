import pandas as pd
from openpyxl import load_workbook

from rshg import report as rep
from rshg.diagnostics import CheckResult
from rshg.optimizer import RunTrace, StepRecord


def _trace():
    tr = RunTrace("adaptive", 4, 2, 1, 1, 7, "last_iterate")
    tr.append(StepRecord(1, 0, 2.0, 1.0, 1.0, 0.0, False, 4, wall_time=0.1))
    tr.append(StepRecord(1, 1, 1.5, 0.5, 0.7, 0.2, True, 11, carried_inner=-0.3, clip_limit=0.25, wall_time=0.2))
    tr.close_epoch(1)
    tr.final_f = 1.25
    tr.output_index = (1, 2)
    return tr


def test_jsonl_sem_tempo_de_parede(tmp_path):
    path = rep.write_trace_jsonl(_trace(), tmp_path / "trace.jsonl")
    linhas = rep.read_trace_jsonl(path)
    assert len(linhas) == 2
    assert "wall_time" not in linhas[1]
    assert linhas[1]["clip_active"] is True
    assert linhas[1]["carried_inner"] == -0.3


def test_csv_do_traco_e_das_epocas(tmp_path):
    tr = _trace()
    df = rep.read_trace_csv(rep.write_trace_csv(tr, tmp_path / "trace.csv"))
    assert list(df.columns) == rep.TRACE_CSV_COLUMNS
    assert df["evals"].tolist() == [4, 11]
    ep = rep.read_epochs_csv(rep.write_epochs_csv(tr, tmp_path / "epochs.csv"))
    assert list(ep.columns) == rep.EPOCH_CSV_COLUMNS
    assert ep["f_mean"].tolist() == [1.75]


def test_traco_vazio_ainda_tem_cabecalho(tmp_path):
    tr = RunTrace("sgd", 2, 1, 1, 1, 0, "last_iterate")
    path = rep.write_trace_csv(tr, tmp_path / "trace.csv")
    assert path.read_text(encoding="utf-8").strip() == ",".join(rep.TRACE_CSV_COLUMNS)


def test_manifesto(tmp_path):
    paths = rep.write_run_artifacts(tmp_path / "run", _trace(), "abc", "0.1.0", {"restarts": 2})
    man = rep.read_json(paths["manifest"])
    assert man["config_hash"] == "abc"
    assert man["seed"] == 7
    assert man["restarts"] == 2
    assert man["trace"]["output_index"] == [1, 2]
    assert man["trace"]["records"] == 2


def test_tabela_de_verificacoes():
    res = [CheckResult("a", True, 1e-15, "ok"), CheckResult("b", False, 0.5, "amostra 3")]
    df = rep.checks_frame(res)
    assert df["status"].tolist() == ["OK", "ERRO"]
    texto = rep.format_checks(res)
    assert texto.splitlines()[0].startswith("✅")
    assert texto.splitlines()[1].startswith("❌")


def test_planilha_estilizada(tmp_path):
    df = pd.DataFrame(
        [
            {"check": "a", "worst": 0.5, "n": 3, "status": "OK"},
            {"check": "b", "worst": 2.0, "n": 4, "status": "ERRO"},
            {"check": "c", "worst": 1.0, "n": 5, "status": "PENDENTE"},
        ]
    )
    path = rep.write_xlsx(tmp_path / "r.xlsx", {"verificacoes": df, "uma_aba_com_nome_comprido_demais_para_o_excel": df})

    wb = load_workbook(path)
    assert wb.sheetnames[0] == "verificacoes"
    assert len(wb.sheetnames[1]) == 31
    ws = wb["verificacoes"]
    assert ws["A1"].font.bold
    assert ws["A2"].fill.fgColor.rgb.endswith("C6EFCE")
    assert ws["A3"].fill.fgColor.rgb.endswith("FFC7CE")
    assert ws["A4"].fill.fgColor.rgb.endswith("FFEB9C")
    assert ws["B2"].number_format == "0.000E+00"
    assert ws["C2"].number_format == "#,##0"
    assert ws.column_dimensions["A"].width == 15


def test_planilha_sem_abas(tmp_path):
    wb = load_workbook(rep.write_xlsx(tmp_path / "v.xlsx", {}))
    assert wb.sheetnames == ["vazio"]
