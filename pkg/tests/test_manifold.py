import math

import numpy as np
import pytest

from rshg.errors import ContractViolation, DomainError, NeighbourhoodError
from rshg.manifold import SPD, Euclidean, Sphere, make_manifold


def _sphere3():
    return Sphere(3)


def _e1(S):
    return S.point([1.0, 0.0, 0.0])


def test_inner_euclidiano():
    E = Euclidean(2)
    x = E.point([0.0, 0.0])
    assert E.inner(E.tangent(x, [1.0, 2.0]), E.tangent(x, [3.0, 4.0])) == 11.0


def test_inner_com_zero():
    S = _sphere3()
    x = _e1(S)
    assert S.inner(S.tangent(x, [0.0, 0.7, -0.2]), S.zero(x)) == 0.0


def test_inner_spd_na_identidade():
    P = SPD(2)
    X = P.point(np.eye(2))
    xi = P.tangent(X, np.eye(2))
    assert P.inner(xi, xi) == pytest.approx(2.0)


@pytest.mark.parametrize("M", [Euclidean(3), Sphere(3), SPD(2), Sphere(3, "exp")])
def test_retracao_no_zero_devolve_o_ponto(M, rng):
    x = M.random_point(rng)
    assert M.retract(x, M.zero(x)).same_as(x)
    assert M.exp_map(x, M.zero(x)).same_as(x)


def test_retracao_esfera_exemplo():
    S = _sphere3()
    x = _e1(S)
    y = S.retract(x, S.tangent(x, [0.0, 1.0, 0.0]))
    np.testing.assert_allclose(y.coords, [1 / math.sqrt(2), 1 / math.sqrt(2), 0.0], atol=1e-15)


def test_retracao_euclidiana_exemplo():
    E = Euclidean(2)
    x = E.point([1.0, 1.0])
    y = E.retract(x, E.tangent(x, [2.0, -1.0]))
    np.testing.assert_array_equal(y.coords, [3.0, 0.0])


@pytest.mark.parametrize("M", [Euclidean(3), Sphere(3), Sphere(3, transport="projection"), SPD(2)])
def test_transporte_do_vetor_nulo_e_identidade(M, rng):
    x = M.random_point(rng)
    zeta = M.random_tangent(x, rng)
    out = M.transport(x, M.zero(x), zeta)
    np.testing.assert_array_equal(out.coords, zeta.coords)


def test_exp_esfera_exemplo():
    S = _sphere3()
    x = _e1(S)
    y = S.exp_map(x, S.tangent(x, [0.0, math.pi / 2, 0.0]))
    np.testing.assert_allclose(y.coords, [0.0, 1.0, 0.0], atol=1e-15)


def test_exp_spd_escalar():
    P = SPD(1)
    X = P.point([[1.0]])
    Y = P.exp_map(X, P.tangent(X, [[1.0]]))
    assert Y.coords[0, 0] == pytest.approx(math.e, rel=1e-14)


def test_log_esfera_exemplo():
    S = _sphere3()
    x = _e1(S)
    xi = S.log_map(x, S.point([0.0, 1.0, 0.0]))
    np.testing.assert_allclose(xi.coords, [0.0, math.pi / 2, 0.0], atol=1e-15)


@pytest.mark.parametrize("M", [Euclidean(3), Sphere(4), SPD(3)])
def test_log_do_proprio_ponto_e_zero(M, rng):
    x = M.random_point(rng)
    assert not np.any(M.log_map(x, x).coords)
    assert not np.any(M.inverse_retract(x, x).coords)


@pytest.mark.parametrize("M", [Sphere(4), SPD(3)])
def test_log_inverte_exp(M, rng):
    for _ in range(20):
        x = M.random_point(rng)
        xi = M.random_tangent(x, rng, scale=float(rng.uniform(0.0, 1.0)))
        back = M.log_map(x, M.exp_map(x, xi))
        np.testing.assert_allclose(back.coords, xi.coords, atol=1e-9)


def test_inversa_da_retracao_esfera_exemplo():
    S = _sphere3()
    x = _e1(S)
    xi = S.inverse_retract(x, S.point([1 / math.sqrt(2), 1 / math.sqrt(2), 0.0]))
    np.testing.assert_allclose(xi.coords, [0.0, 1.0, 0.0], atol=1e-15)


@pytest.mark.parametrize("M", [Sphere(4), SPD(3)])
def test_inversa_da_retracao_ida_e_volta(M, rng):
    for _ in range(100):
        x = M.random_point(rng)
        xi = M.random_tangent(x, rng, scale=float(rng.uniform(0.0, 0.5)))
        back = M.inverse_retract(x, M.retract(x, xi))
        np.testing.assert_allclose(back.coords, xi.coords, atol=1e-9)


def test_projecao_esfera_exemplo():
    S = _sphere3()
    x = _e1(S)
    np.testing.assert_array_equal(S.project_to_tangent(x, [5.0, 1.0, 0.0]).coords, [0.0, 1.0, 0.0])


def test_projecao_de_vetor_tangente_nao_muda(rng):
    S = Sphere(5)
    x = S.random_point(rng)
    v = S.random_tangent(x, rng)
    np.testing.assert_allclose(S.project_to_tangent(x, v.coords).coords, v.coords, atol=1e-15)


@pytest.mark.parametrize("M", [Sphere(4), SPD(3)])
def test_transporte_paralelo_isometrico(M, rng):
    for _ in range(200):
        x = M.random_point(rng)
        eta = M.random_tangent(x, rng, scale=float(rng.uniform(0.05, 1.0)))
        xi, zeta = M.random_tangent(x, rng), M.random_tangent(x, rng)
        y = M.retract(x, eta)
        a = M.transport(x, eta, xi, target=y)
        b = M.transport(x, eta, zeta, target=y)
        assert M.inner(a, b) == pytest.approx(M.inner(xi, zeta), abs=1e-10)


def test_transporte_por_projecao_nao_e_isometrico(rng):
    S = Sphere(3, transport="projection")
    assert not S.transport_is_isometric
    x = _e1(S)
    eta = S.tangent(x, [0.0, 1.0, 0.0])
    xi = S.tangent(x, [0.0, 1.0, 0.0])
    out = S.transport(x, eta, xi)
    assert S.norm(out) < S.norm(xi) - 0.1


def test_aritmetica_exige_mesma_ancora():
    S = _sphere3()
    x = _e1(S)
    y = S.point([0.0, 1.0, 0.0])
    with pytest.raises(ContractViolation):
        S.tangent(x, [0.0, 1.0, 0.0]) + S.tangent(y, [1.0, 0.0, 0.0])


def test_aritmetica_tangente():
    E = Euclidean(2)
    x = E.point([0.0, 0.0])
    a, b = E.tangent(x, [1.0, 2.0]), E.tangent(x, [3.0, -1.0])
    np.testing.assert_array_equal((a + b).coords, [4.0, 1.0])
    np.testing.assert_array_equal((a - b).coords, [-2.0, 3.0])
    np.testing.assert_array_equal((2.0 * a).coords, [2.0, 4.0])
    np.testing.assert_array_equal((-a).coords, [-1.0, -2.0])


def test_log_de_antipodas_falha():
    S = _sphere3()
    with pytest.raises(DomainError):
        S.log_map(_e1(S), S.point([-1.0, 0.0, 0.0]))


def test_inversa_fora_da_vizinhanca_esfera():
    S = _sphere3()
    with pytest.raises(NeighbourhoodError):
        S.inverse_retract(_e1(S), S.point([-0.6, 0.8, 0.0]))


def test_inversa_fora_da_vizinhanca_spd():
    P = SPD(2)
    with pytest.raises(NeighbourhoodError):
        P.inverse_retract(P.point(np.eye(2)), P.point(0.25 * np.eye(2)))


def test_retracao_spd_usa_o_autovalor_de_spd_math(monkeypatch):
    from rshg import spd_math

    chamadas = []
    original = spd_math.eigh_sym

    def _contando(C):
        chamadas.append(C.shape)
        return original(C)

    monkeypatch.setattr(spd_math, "eigh_sym", _contando)
    P = SPD(2)
    x = P.point(np.eye(2))
    y = P.retract(x, P.tangent(x, np.diag([0.5, -0.2])))
    np.testing.assert_allclose(y.coords, np.diag([1.625, 0.82]), atol=1e-14)
    assert chamadas
    P.inverse_retract(x, y)
    assert len(chamadas) >= 2


def test_ponto_invalido_rejeitado():
    with pytest.raises(ContractViolation):
        Sphere(3).point([1.0, 1.0, 0.0])
    with pytest.raises(ContractViolation):
        SPD(2).point(np.diag([1.0, -1.0]))


def test_modo_exp_exige_transporte_paralelo():
    with pytest.raises(ContractViolation):
        Sphere(3, "exp", "projection")


def test_make_manifold():
    assert isinstance(make_manifold("spd", 2), SPD)
    with pytest.raises(ContractViolation):
        make_manifold("toro", 2)
