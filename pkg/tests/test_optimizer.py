from collections import Counter

import numpy as np
import pytest

from rshg.errors import ContractViolation, NumericalAbort
from rshg.manifold import Euclidean
from rshg.optimizer import (
    RunConfig,
    RunTrace,
    StepRecord,
    default_output_option,
    derived_seed,
    evals_per_epoch,
    make_streams,
    replay_point,
    restart_table,
    run,
    run_restarted,
    sample_batch,
)
from rshg.problems import FiniteSumProblem, LeastSquares, PCASphere, synthetic_least_squares, synthetic_pca_data
from rshg.schedules import ScheduleSpec


def _ls(n=20, d=3, seed=0):
    A, c = synthetic_least_squares(n, d, seed=seed)
    return LeastSquares(A, c)


def _cfg(problem, algorithm="sgd", S=3, m=4, b=1, seed=0, C_alpha=0.02, params="constant", S_max=None, **kw):
    spec = ScheduleSpec(kind="fixed", m=m, S_max=S_max or S, C_alpha=C_alpha, params=params,
                        phi=kw.pop("phi", 0.0), psi=kw.pop("psi", 0.0))
    w0 = kw.pop("initial_point", None)
    if w0 is None:
        w0 = problem.manifold.point(np.zeros(problem.manifold.dim))
    return RunConfig(algorithm, problem, spec, w0, S, b, seed, **kw)


# ------------------------------------------------------------------- RNG
def test_fluxos_deterministicos():
    a = [g.integers(1 << 30) for g in make_streams(7)]
    b = [g.integers(1 << 30) for g in make_streams(7)]
    assert a == b
    assert len(set(a)) == 3


def test_lote_sorteado_ordenado_e_sem_repeticao():
    rng = make_streams(0)[0]
    for _ in range(50):
        I = sample_batch(rng, 10, 4)
        assert list(I.indices) == sorted(set(I.indices))
        assert len(I.indices) == 4


def test_lote_uniforme():
    rng = make_streams(3)[0]
    draws = 300_000
    cont = Counter(sample_batch(rng, 3, 1).indices[0] for _ in range(draws))
    for i in range(3):
        assert 0.328 <= cont[i] / draws <= 0.338


def test_lote_maior_que_n():
    with pytest.raises(ContractViolation):
        sample_batch(make_streams(0)[0], 3, 4)


def test_semente_derivada():
    assert derived_seed(5, 0) == 5
    assert derived_seed(5, 1) != derived_seed(5, 2)
    assert derived_seed(5, 1) == derived_seed(5, 1)


# -------------------------------------------------------------- RunConfig
def test_config_invalida():
    p = _ls(n=5)
    with pytest.raises(ContractViolation):
        _cfg(p, algorithm="adam")
    with pytest.raises(ContractViolation):
        _cfg(p, b=6)
    with pytest.raises(ContractViolation):
        _cfg(p, output_option="melhor")
    spec = ScheduleSpec(kind="fixed", m=2, S_max=2, C_alpha=0.1)
    with pytest.raises(ContractViolation):
        RunConfig("sgd", p, spec, p.manifold.point(np.zeros(3)), 3, 1)


def test_ponto_inicial_de_outra_variedade():
    p = _ls(n=5, d=3)
    other = Euclidean(2).point([0.0, 0.0])
    with pytest.raises(ContractViolation):
        _cfg(p, initial_point=other)


# ------------------------------------------------------------------ traço
@pytest.mark.parametrize("algorithm", ["adaptive", "timevarying", "svrg_srg", "svrg", "srg", "sgd"])
def test_traco_ordenado_com_contagem_exata(algorithm):
    p = _ls(n=8)
    cfg = _cfg(p, algorithm=algorithm, S=3, m=4, b=2, phi=0.3, psi=0.2)
    _, trace = run(cfg)
    assert [(r.s, r.t) for r in trace.records] == [(s, t) for s in (1, 2, 3) for t in range(4)]
    por_epoca = evals_per_epoch(algorithm, 8, 4, 2)
    assert [e.evals for e in trace.epochs] == [por_epoca * s for s in (1, 2, 3)]
    if algorithm == "timevarying":
        assert trace.output_option == "uniform_random"
        s, t = trace.output_index
        assert 1 <= s <= 3 and 0 <= t < 4
    else:
        assert trace.output_option == "last_iterate"
        assert trace.output_index == (3, 4)


def test_primeiro_passo_da_epoca_usa_gradiente_completo():
    p = _ls(n=8)
    _, trace = run(_cfg(p, algorithm="adaptive", phi=0.3, psi=0.2))
    for r in trace.records:
        if r.t == 0:
            assert r.v_norm_sq == pytest.approx(r.grad_norm_sq)
            assert r.psi_tilde == 0.0


def test_execucao_reprodutivel():
    p = _ls(n=8)
    w1, t1 = run(_cfg(p, algorithm="adaptive", seed=4, phi=0.3, psi=0.2))
    w2, t2 = run(_cfg(p, algorithm="adaptive", seed=4, phi=0.3, psi=0.2))
    assert [r.to_dict() for r in t1.records] == [r.to_dict() for r in t2.records]
    assert w1.same_as(w2)
    _, t3 = run(_cfg(p, algorithm="adaptive", seed=5, phi=0.3, psi=0.2))
    assert [r.f for r in t3.records] != [r.f for r in t1.records]


def test_sgd_com_lote_completo_e_descida_do_gradiente():
    p = _ls(n=6)
    cfg = _cfg(p, algorithm="sgd", S=1, m=3, b=6, C_alpha=0.05)
    out, _ = run(cfg)
    x = np.zeros(3)
    for _ in range(3):
        x = x - 0.05 * p.full_grad(p.manifold.point(x)).coords
    np.testing.assert_array_equal(out.coords, x)


def test_descida_do_gradiente_reduz_a_lacuna():
    p = _ls(n=20)
    _, trace = run(_cfg(p, algorithm="sgd", S=20, m=10, b=20, C_alpha=0.05))
    fstar = p.known_optimum.value
    assert trace.final_f - fstar < 0.5 * (trace.records[0].f - fstar)


def _mesmo_traco(cfg_a, cfg_b):
    a, ta = run(cfg_a)
    b, tb = run(cfg_b)
    chave = lambda tr: [(r.s, r.t, r.f, r.grad_norm_sq, r.v_norm_sq) for r in tr.records]
    assert chave(ta) == chave(tb)
    np.testing.assert_array_equal(a.coords, b.coords)


def test_timevarying_com_pesos_svrg_reproduz_svrg():
    p = PCASphere(synthetic_pca_data(10, 3, seed=1))
    w0 = p.manifold.normalized([1.0, 1.0, 1.0])
    kw = dict(params="svrg", initial_point=w0, C_alpha=0.05, S=4, m=5, b=2, output_option="last_iterate")
    _mesmo_traco(_cfg(p, algorithm="timevarying", **kw), _cfg(p, algorithm="svrg", **kw))


def test_timevarying_com_pesos_nulos_reproduz_sgd():
    p = _ls(n=12, seed=2)
    kw = dict(params="sgd", C_alpha=0.03, S=4, m=5, b=3, seed=7, output_option="last_iterate")
    _mesmo_traco(_cfg(p, algorithm="timevarying", **kw), _cfg(p, algorithm="sgd", **kw))


def test_timevarying_euclidiano_com_psi_um_reproduz_srg():
    p = _ls(n=12, seed=3)
    kw = dict(params="srg", C_alpha=0.03, S=4, m=5, b=3, seed=11, output_option="last_iterate")
    _mesmo_traco(_cfg(p, algorithm="timevarying", **kw), _cfg(p, algorithm="srg", **kw))


def test_saida_padrao_por_algoritmo():
    assert default_output_option("timevarying") == "uniform_random"
    for alg in ("adaptive", "svrg_srg", "svrg", "srg", "sgd"):
        assert default_output_option(alg) == "last_iterate"
    p = _ls(n=5)
    assert _cfg(p, algorithm="timevarying").output_option == "uniform_random"
    assert _cfg(p, algorithm="adaptive").output_option == "last_iterate"
    assert _cfg(p, algorithm="timevarying", output_option="last_iterate").output_option == "last_iterate"


def test_media_esperada_com_saida_uniforme():
    p = _ls(n=8)
    _, trace = run(_cfg(p, algorithm="timevarying", S=3, m=4, phi=0.3, psi=0.2))
    media = float(np.mean([r.grad_norm_sq for r in trace.records]))
    assert trace.expected_grad_norm_sq() == media
    _, ultimo = run(_cfg(p, algorithm="sgd", S=3, m=4))
    assert ultimo.expected_grad_norm_sq() == ultimo.final_grad_norm_sq


def test_saida_uniforme_reconstroi_o_ponto_sorteado():
    p = _ls(n=8)
    cfg = _cfg(p, algorithm="timevarying", S=4, m=5, output_option="uniform_random", phi=0.3, psi=0.2)
    out, trace = run(cfg)
    s, t = trace.output_index
    assert 1 <= s <= 4 and 0 <= t < 5
    rec = next(r for r in trace.records if (r.s, r.t) == (s, t))
    assert trace.final_f == rec.f
    assert p.cost(out) == rec.f


def test_replay_reconstroi_qualquer_iterado():
    p = _ls(n=8)
    cfg = _cfg(p, algorithm="adaptive", S=2, m=3, phi=0.3, psi=0.2)
    _, trace = run(cfg)
    for rec in trace.records:
        assert p.cost(replay_point(cfg, rec.s, rec.t)) == rec.f
    with pytest.raises(ContractViolation):
        replay_point(cfg, 3, 0)


def test_observador_recebe_cada_passo():
    p = _ls(n=8)
    vistos = []
    run(_cfg(p, algorithm="adaptive", S=2, m=3, phi=0.3, psi=0.2), observer=lambda ctx: vistos.append(ctx))
    assert [(c.s, c.t) for c in vistos] == [(1, 0), (1, 1), (1, 2), (2, 0), (2, 1), (2, 2)]
    assert vistos[0].state is None and vistos[1].clip is not None


def test_registro_fora_de_ordem():
    tr = RunTrace("sgd", 2, 2, 1, 1, 0, "last_iterate")
    tr.append(StepRecord(1, 1, 0.0, 0.0, 0.0, 0.0, False, 3))
    with pytest.raises(ContractViolation):
        tr.append(StepRecord(1, 0, 0.0, 0.0, 0.0, 0.0, False, 4))
    with pytest.raises(ContractViolation):
        tr.append(StepRecord(2, 0, 0.0, 0.0, 0.0, 0.0, False, 3))


class _NaNProblem(FiniteSumProblem):
    name = "nan"

    def __init__(self):
        super().__init__(Euclidean(1), 2)

    def component_costs(self, idx, w):
        return np.zeros(len(idx))

    def component_rgrads(self, idx, w):
        return np.full((len(idx), 1), np.nan)


def test_nan_aborta_com_traco_parcial():
    p = _NaNProblem()
    cfg = RunConfig("sgd", p, ScheduleSpec(kind="fixed", m=2, S_max=1, C_alpha=0.1), p.manifold.point([1.0]), 1, 1)
    with pytest.raises(NumericalAbort) as exc:
        run(cfg)
    assert exc.value.context == (1, 0)
    assert exc.value.trace is not None


# --------------------------------------------------------------- reinícios
def test_reinicios_encadeados():
    p = _ls(n=30, d=2, seed=1)
    cfg = _cfg(p, algorithm="timevarying", S=1, m=5, C_alpha=0.02, params="complement", S_max=5000, output_option="last_iterate")
    results = run_restarted(cfg, gamma=2.0, K=3)
    assert len(results) == 4
    assert results[0][1] is None
    for k in range(1, 4):
        trace = results[k][1]
        assert all(r.k == k - 1 for r in trace.records)
        assert trace.output_option == "uniform_random"
        # cada reinício parte da saída do anterior
        assert trace.records[0].f == p.cost(results[k - 1][0])
    df = restart_table(results, p)
    assert list(df.columns) == ["k", "f_gap", "grad_norm_sq", "ratio"]
    assert df["f_gap"].iloc[-1] < df["f_gap"].iloc[0]


def test_reinicios_exigem_parametros_complementares():
    p = _ls(n=10)
    with pytest.raises(ContractViolation):
        run_restarted(_cfg(p, algorithm="timevarying", params="sgd"), K=1)
    cfg = RunConfig("sgd", p, ScheduleSpec(m=2), p.manifold.point(np.zeros(3)), 1, 1)
    with pytest.raises(ContractViolation):
        run_restarted(cfg, K=1)
