import numpy as np
import pytest

from oracles import pure_state_qfi
from surfacelimits.errors import DegenerateScene, DimensionMismatch, SingularInformation
from surfacelimits.psf_gram import Axis, ParamIndex, PointSource, Scene, assemble_gram
from surfacelimits.qfim import (
    FisherMatrix,
    Jacobian,
    crb,
    embedded_state,
    qfim_embedding_oracle,
    qfim_general,
    qfim_reduced,
    reparametrize,
    sld_eigenbasis,
    solve_reduced_sld,
    solve_sld,
)
from surfacelimits.scenes import CRACK_PARAMS, crack, crack_jacobian

ROUTES = (qfim_reduced, qfim_general, qfim_embedding_oracle)


def _rel(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


def random_scene(rng, n, kzr):
    return Scene([PointSource(*rng.uniform(-2, 2, 3)) for _ in range(n)], kzr)


@pytest.mark.parametrize("route", ROUTES)
def test_single_source_qfim(route):
    sc = Scene([PointSource(0.2, -0.3, 0.4)], 50.0)
    h = route(sc, sc.all_params()).matrix
    assert h == pytest.approx(np.diag([2.0, 2.0, 1.0]), abs=1e-9)


def test_single_source_against_pure_state_formula():
    src = (0.2, -0.3, 0.4)
    sc = Scene([PointSource(*src)], 3.0)
    h = qfim_reduced(sc, sc.all_params()).matrix
    for a in range(3):
        for b in range(3):
            assert h[a, b] == pytest.approx(pure_state_qfi(src, 3.0, a, b), abs=1e-6)


@pytest.mark.parametrize("d", [0.1, 0.5, 1.0, 2.0, 4.0])
def test_two_source_separation(d):
    sc = Scene([PointSource(-d / 2), PointSource(d / 2)])
    f = qfim_embedding_oracle(sc, [ParamIndex(0, Axis.X), ParamIndex(1, Axis.X)])
    sep = reparametrize(f, Jacobian([[-0.5, 0.5]], ["dx1", "dx2"], ["d"]))
    assert sep.matrix[0, 0] == pytest.approx(0.5, abs=1e-9)


@pytest.mark.parametrize("seed", range(6))
def test_routes_agree(seed):
    rng = np.random.default_rng(seed)
    for kzr in (10.0, 100.0, 1000.0):
        sc = random_scene(rng, 1 + seed % 4, kzr)
        ps = sc.all_params()
        ref = qfim_reduced(sc, ps).matrix
        assert _rel(qfim_general(sc, ps).matrix, ref) < 1e-8
        assert _rel(qfim_embedding_oracle(sc, ps).matrix, ref) < 1e-8


def test_crack_routes_agree():
    sc = crack(1.0, 0.5)
    ps = list(CRACK_PARAMS)
    ref = qfim_reduced(sc, ps).matrix
    assert _rel(qfim_embedding_oracle(sc, ps).matrix, ref) < 1e-8


def test_axial_single_source_kzr_independent():
    vals = [qfim_general(Scene([PointSource(dz=0.3)], k), [ParamIndex(0, Axis.Z)]).matrix[0, 0]
            for k in (1.0, 100.0, 1000.0)]
    assert np.ptp(vals) < 1e-9
    assert vals[0] == pytest.approx(1.0, abs=1e-9)


def test_lyapunov_residual_and_single_source_sld():
    sc = Scene([PointSource(0.4, 0.1, -0.2), PointSource(-0.3, 0.0, 0.5), PointSource(0.0, 0.7, 0.0)])
    sol = solve_sld(sc, sc.all_params())
    for p in sc.all_params():
        assert sol.residual(p) < 1e-9
    single = assemble_gram(Scene([PointSource()]))
    assert solve_reduced_sld(single, ParamIndex(0, Axis.X)) == pytest.approx(np.zeros((1, 1)), abs=1e-15)


def test_sld_satisfies_defining_equation():
    sc = Scene([PointSource(0.5), PointSource(-0.5, 0.0, 0.3)], 20.0)
    params = sc.all_params()
    _, _, rho, drhos = embedded_state(sc, params)
    for d in drhos:
        lam = sld_eigenbasis(rho, d)
        assert np.abs(rho @ lam + lam @ rho - 2 * d).max() < 1e-9


def test_qfim_symmetric_psd():
    rng = np.random.default_rng(11)
    sc = random_scene(rng, 3, 100.0)
    h = qfim_reduced(sc, sc.all_params()).matrix
    assert np.array_equal(h, h.T)
    assert np.linalg.eigvalsh(h).min() > -1e-10


def test_gauge_invariance_of_crack_qfim():
    a = reparametrize(qfim_reduced(crack(0.7, 0.4, 10.0), list(CRACK_PARAMS)), crack_jacobian())
    b = reparametrize(qfim_reduced(crack(0.7, 0.4, 1000.0), list(CRACK_PARAMS)), crack_jacobian())
    assert np.abs(a.matrix - b.matrix).max() < 1e-8


def test_degenerate_scene_rejected():
    with pytest.raises(DegenerateScene):
        qfim_reduced(crack(0.0, 0.3), list(CRACK_PARAMS))


def test_reparametrize_identity_and_scaling():
    f = FisherMatrix(["a", "b"], np.array([[2.0, 0.3], [0.3, 1.0]]))
    same = reparametrize(f, Jacobian(np.eye(2), ["a", "b"], ["a", "b"]))
    assert same.matrix == pytest.approx(f.matrix)
    scaled = reparametrize(f, Jacobian(np.diag([3.0, 1.0]), ["a", "b"], ["a", "b"]))
    assert scaled["a", "a"] == pytest.approx(9 * f["a", "a"])


def test_reparametrize_mismatch():
    f = FisherMatrix(["a", "b"], np.eye(2))
    with pytest.raises(DimensionMismatch):
        reparametrize(f, Jacobian(np.eye(2), ["a", "c"], ["a", "b"]))
    with pytest.raises(DimensionMismatch):
        Jacobian(np.eye(3), ["a", "b"], ["x", "y"])


def test_crack_jacobian_shape():
    f = reparametrize(qfim_reduced(crack(1.0, 0.5), list(CRACK_PARAMS)), crack_jacobian())
    assert f.params == ["dx", "dz"]
    assert f.matrix.shape == (2, 2)


def test_crb():
    assert crb(FisherMatrix(["a", "b"], np.diag([2.0, 2.0]))) == pytest.approx(np.diag([0.5, 0.5]))
    assert crb(np.diag([2.0, 2.0]), n_photons=100) == pytest.approx(np.diag([0.005, 0.005]))
    with pytest.raises(SingularInformation):
        crb(np.array([[1.0, 1.0], [1.0, 1.0]]))
