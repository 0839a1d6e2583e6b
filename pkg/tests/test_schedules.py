import math

import pytest

from rshg import schedules as sch
from rshg.errors import ContractViolation
from rshg.schedules import ScheduleSpec


def _t5(**kw):
    base = dict(kind="theorem5", m=3, S_max=5, P=1.0 / 3.0, Q=2.0 / 3.0, gamma=2.0)
    base.update(kw)
    return ScheduleSpec(**base)


# ------------------------------------------------------------------- passos
def test_passo_decrescente_padrao():
    spec = ScheduleSpec()
    assert spec.step(0, 1) == 0.5
    assert spec.step(3, 2) == pytest.approx(1.0 / 6.0)


def test_passo_fixo():
    assert ScheduleSpec(kind="fixed", C_alpha=0.2).step(7, 3) == 0.2


def test_passo_theorem5_com_expoente_zero():
    spec = ScheduleSpec(kind="theorem5", P=0.0, kappa=0, C_alpha=0.3, strict=False)
    assert spec.step(3, 2) == 0.3


def test_psi_theorem5():
    assert sch.psi_theorem5(1.0, 0.5, 1.0) == 0.0
    spec = ScheduleSpec(kind="theorem5", Q=0.5, C_psi=0.5, kappa=2, strict=False)
    # base = t + s + κ + 1 = 4
    assert spec.params_at(0, 1)[1] == pytest.approx(0.75)


def test_passos_em_grade():
    grid = sch.alpha_grid(ScheduleSpec(m=2), 3)
    assert grid.shape == (3, 2)
    assert grid[0, 0] == 0.5


# ----------------------------------------------------------------- presets
@pytest.mark.parametrize(
    "preset,s,esperado",
    [
        ("svrg", 4, (1.0, 0.0)),
        ("sgd", 4, (0.0, 0.0)),
        ("srg", 4, (0.0, 1.0)),
        ("remark", 1, (0.5, 0.25)),
        ("complement", 1, (0.5, 0.5)),
        ("theorem6", 1, (0.25, 0.25)),
    ],
)
def test_presets(preset, s, esperado):
    assert sch.preset_params(preset, s) == pytest.approx(esperado)


def test_preset_lista_repete_o_ultimo():
    spec = ScheduleSpec(kind="fixed", C_alpha=0.1, params="list", phi_seq=[0.1, 0.2], psi_seq=[0.3])
    assert spec.params_at(0, 1) == (0.1, 0.3)
    assert spec.params_at(0, 5) == (0.2, 0.3)


def test_preset_lista_vazia():
    with pytest.raises(ContractViolation):
        ScheduleSpec(kind="fixed", params="list")


def test_params_corta_ruido_na_borda():
    spec = ScheduleSpec(kind="fixed", params="constant", phi=0.6, psi=0.4 + 5e-13)
    phi, psi = sch.params(spec, 0, 1)
    assert phi + psi <= 1.0


def test_coeficientes_invalidos_no_horizonte():
    with pytest.raises(ContractViolation):
        ScheduleSpec(kind="fixed", params="constant", phi=0.7, psi=0.5)


# ----------------------------------------------------------------------- κ
@pytest.mark.parametrize("gamma,kappa", [(2.0, 2), (1.5, 3), (math.log2(3.0), 2)])
def test_kappa(gamma, kappa):
    assert sch.kappa_of(gamma) == kappa


def test_kappa_exige_gamma_maior_que_um():
    with pytest.raises(ContractViolation):
        sch.kappa_of(1.0)


# ------------------------------------------------------------ validação
def test_theorem5_expoentes_otimos_validam():
    spec = _t5()
    assert spec.kappa == 2
    assert sch.optimal_exponents(2.0) == pytest.approx((1.0 / 3.0, 2.0 / 3.0))
    assert sch.rate_exponent_theorem5(spec.P, spec.Q) == pytest.approx(2.0 / 3.0)


@pytest.mark.parametrize(
    "kw",
    [
        {"P": 0.7, "Q": 0.6},
        {"P": 0.2},
        {"gamma": 1.0},
        {"beta": 4.0},
        {"Rexp": 0.5},
        {"C_phi": 2.0, "C_psi": 1.0},
    ],
)
def test_theorem5_restricoes(kw):
    with pytest.raises(ContractViolation):
        _t5(**kw)


def test_theorem5_com_constantes_estimadas():
    with pytest.raises(ContractViolation):
        _t5(C_alpha=1.0, msq_theta_nsq=1.0)
    spec = _t5(C_alpha=0.01, C_psi=1.0, msq_theta_nsq=1.0, L=2.0)
    assert spec.C_alpha <= sch.step_bound_theorem5(2.0, 1.0, spec.P, spec.beta)


def test_mu_e_c_alpha_validos():
    with pytest.raises(ContractViolation):
        ScheduleSpec(mu=1.0)
    with pytest.raises(ContractViolation):
        ScheduleSpec(kind="fixed", C_alpha=0.0)
    with pytest.raises(ContractViolation):
        ScheduleSpec(kind="exponencial")


def test_hipotese_de_passos():
    assert sch.assumption3_holds(ScheduleSpec())
    assert sch.assumption3_holds(_t5(P=0.75, Q=0.8))
    assert not sch.assumption3_holds(_t5())
    assert not sch.assumption3_holds(ScheduleSpec(kind="fixed", C_alpha=0.1))


# ----------------------------------------------------------------- cotas
def test_cotas_de_passo_exemplo():
    assert sch.step_bound_theorem3(1.0, 1.0, 1.0, 1.0, 1) == pytest.approx(0.390388, abs=1e-6)
    assert sch.step_bound_theorem4(1.0, 1.0, 1.0, 1.0, 1) == pytest.approx(0.195194, abs=1e-6)
    assert sch.step_bound_theorem6(1.0, 1.0, 1.0, 1.0, 1) == pytest.approx(0.25)
    assert sch.corollary_nu(1.0, 1) == 4.0


def test_cotas_de_passo_sem_variancia():
    assert sch.step_bound_theorem3(2.0, 0.0, 1.0, 1.0, 5) == pytest.approx(0.5)
    assert sch.step_bound_theorem5(2.0, 0.0, 0.5, 5.0) == 0.5
    assert sch.step_bound_theorem5(2.0, 1.0, 0.5, 5.0) == pytest.approx(math.sqrt(0.5 / 30.0))


def test_cotas_de_passo_exigem_l_positivo():
    with pytest.raises(ContractViolation):
        sch.step_bound_theorem3(0.0, 1.0, 1.0, 1.0, 1)
    with pytest.raises(ContractViolation):
        sch.step_bound_theorem6(1.0, 1.0, 1.0, 1.0, 0)


def test_epocas_de_reinicio():
    assert sch.restart_epochs_theorem7(2.0, 2.0, 1, 1.0) == 8
    assert sch.restart_epochs_theorem7(0.0, 2.0, 1, 1.0) == 1
    with pytest.raises(ContractViolation):
        sch.restart_epochs_theorem7(-1.0, 2.0, 1, 1.0)


def test_cota_prevista_exemplo():
    assert sch.predicted_bound_theorem3(1.0, 1.0, 1, 10, 0.5, 2.0) == pytest.approx(1.2)
    assert sch.predicted_bound_theorem4(1.0, 1.0, 1, 10, 0.5, 2.0) == pytest.approx(2.0)
    assert sch.predicted_bound_theorem6(1.0, 1.0, 1, 10, 0.5, 2.0) == pytest.approx(2.8)


def test_series_de_parametros():
    svrg = ScheduleSpec(kind="fixed", C_alpha=0.1, params="svrg")
    sgd = ScheduleSpec(kind="fixed", C_alpha=0.1, params="sgd", m=3)
    assert sch.parameter_series(svrg, "theorem3", horizon=10) == 0.0
    assert sch.parameter_series(sgd, "theorem6", horizon=10) == 10.0
    assert sch.parameter_series(ScheduleSpec(kind="fixed", C_alpha=0.1, params="srg", m=3), "theorem4", horizon=10) == 30.0
    with pytest.raises(ContractViolation):
        sch.parameter_series(svrg, "theorem9", horizon=1)
