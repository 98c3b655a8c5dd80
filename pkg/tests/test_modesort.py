import math
import warnings

import numpy as np
import pytest

from oracles import central_diff, grid, hermite_mode, psf
from surfacelimits.modesort import (
    ModeBasis,
    ModeIndex,
    channel_overlap,
    channel_prob,
    channel_prob_grad,
    fim_ms,
    fim_ms_contributions,
    gaussian_moments,
    gaussian_moments_binomial,
    scene_channel_table,
)
from surfacelimits.psf_gram import Axis, PointSource, Scene
from surfacelimits.qfim import qfim_reduced, reparametrize
from surfacelimits.scenes import CRACK_PARAMS, crack, crack_jacobian

BASIS = ModeBasis()


def quad_overlap(j, l, src, kzr):
    x, y, w = grid(12.0, 1001)
    return complex((hermite_mode(j, l, x, y) * psf(x, y, src, kzr)).sum() * w)


@pytest.mark.parametrize("mode", [(0, 0), (1, 0), (0, 1), (2, 0), (1, 2), (3, 3), (6, 1)])
@pytest.mark.parametrize("src", [(0.4, -0.3, 0.0), (0.9, 0.2, 0.7), (-0.5, 0.6, -1.3)])
def test_overlap_matches_quadrature(mode, src):
    got = channel_overlap(ModeIndex(*mode), PointSource(*src), 2.0)
    ref = quad_overlap(*mode, src, 2.0)
    assert abs(got - ref) < 1e-8 * max(abs(ref), 1e-3)


def test_ground_mode_at_origin():
    assert channel_overlap(ModeIndex(0, 0), PointSource(), 100.0) == pytest.approx(1.0, abs=1e-15)


@pytest.mark.parametrize("d", [0.3, 1.0, 2.5])
def test_first_mode_probability(d):
    assert channel_prob(ModeIndex(1, 0), PointSource(d)) == pytest.approx(0.5 * d * d * math.exp(-d * d / 2), rel=1e-13)


def test_odd_mode_vanishes_for_x_shift():
    assert channel_prob(ModeIndex(0, 1), PointSource(0.8)) == 0.0


def test_origin_only_ground_mode():
    table = scene_channel_table(Scene([PointSource()]), BASIS)
    assert table[0, 0] == pytest.approx(1.0)
    assert table.remainder == pytest.approx(0.0, abs=1e-15)
    assert max(v for m, v in table.probs.items() if (m.j, m.l) != (0, 0)) < 1e-15


def test_probability_independent_of_kzr():
    src = PointSource(0.3, 0.2, 0.6)
    for m in [ModeIndex(2, 0), ModeIndex(1, 1)]:
        vals = [abs(channel_overlap(m, src, k)) ** 2 for k in (1.0, 100.0, 1000.0)]
        assert np.ptp(vals) < 1e-15
        assert channel_prob(m, src) == pytest.approx(vals[0], rel=1e-12)


def test_defocus_second_order_mode():
    dz = 1e-3
    assert channel_prob(ModeIndex(2, 0), PointSource(dz=dz)) == pytest.approx(dz * dz / 8, rel=1e-5)


def test_moment_recursions_agree():
    mu, var = 0.3 - 0.2j, 0.7 + 0.4j
    assert gaussian_moments(mu, var, 12) == pytest.approx(gaussian_moments_binomial(mu, var, 12), rel=1e-12)


@pytest.mark.parametrize("mode,src,axis", [
    ((0, 0), (0.0, 0.0, 0.0), Axis.X),
    ((1, 0), (0.5, 0.0, 0.0), Axis.X),
    ((2, 0), (0.0, 0.0, 0.3), Axis.Z),
    ((1, 2), (0.3, -0.4, 0.5), Axis.Y),
    ((3, 1), (-0.6, 0.2, -0.8), Axis.Z),
])
def test_gradient_against_finite_difference(mode, src, axis):
    m, s = ModeIndex(*mode), PointSource(*src)
    got = channel_prob_grad(m, s, 100.0, axis)
    ref = central_diff(lambda t: channel_prob(m, s.shifted(axis, t)), 0.0, 1e-5)
    assert abs(got - ref) <= 1e-6 * max(abs(ref), 1e-6)


def test_probabilities_sum_to_one():
    table = scene_channel_table(crack(1.2, 0.8), BASIS)
    assert table.total() == 1.0
    assert 0 <= table.remainder < 1e-4


def test_remainder_clamped_with_warning(monkeypatch):
    import surfacelimits.modesort as ms

    real = ms.scene_probabilities
    monkeypatch.setattr(ms, "scene_probabilities", lambda sc, b: real(sc, b) * 1.001)
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        table = ms.scene_channel_table(crack(0.5, 0.5), BASIS)
    assert table.remainder == 0.0
    assert rec


def test_crack_leading_order_channels():
    dx = dz = 0.05
    t = scene_channel_table(crack(dx, dz), BASIS)
    assert abs(t[0, 0] - (1 - dx**2 / 12 - dz**2 / 12)) < 1e-6
    assert abs(t[1, 0] - dx**2 / 12) < 1e-7
    assert abs(t[2, 0] - dz**2 / 24) < 1e-7


def test_fim_ms_bounded_by_qfim():
    for dx, dz in [(0.2, 0.2), (1.0, 0.5), (2.5, 2.0)]:
        sc = crack(dx, dz)
        jac = crack_jacobian()
        h = reparametrize(qfim_reduced(sc, list(CRACK_PARAMS)), jac).matrix
        j = fim_ms(sc, BASIS, list(CRACK_PARAMS), jacobian=jac).matrix
        assert np.linalg.eigvalsh(j).min() > -1e-12
        assert np.linalg.eigvalsh(h - j).min() > -1e-8


def test_width_information_in_first_mode():
    sc = crack(0.01, 0.0)
    jac = crack_jacobian().matrix
    contrib = fim_ms_contributions(sc, BASIS, list(CRACK_PARAMS))
    width = {m: (jac @ c @ jac.T)[0, 0] for m, c in contrib.items()}
    best = max(width, key=width.get)
    assert (best.j, best.l) == (1, 0)
    assert width[best] > 0.9 * sum(width.values())


def test_depth_information_split_between_second_modes():
    sc = crack(1e-3, 1e-2)
    jac = crack_jacobian().matrix
    contrib = fim_ms_contributions(sc, BASIS, list(CRACK_PARAMS))
    depth = {m: (jac @ c @ jac.T)[1, 1] for m, c in contrib.items()}
    top = sorted(depth, key=depth.get, reverse=True)[:2]
    assert {(m.j, m.l) for m in top} == {(2, 0), (0, 2)}
    assert depth[top[0]] == pytest.approx(depth[top[1]], rel=1e-2)


def test_zero_channel_limit_is_continuous():
    # a channel that is exactly empty at the evaluation point uses the limit form
    near = fim_ms(crack(0.3, 1e-7), BASIS, list(CRACK_PARAMS), jacobian=crack_jacobian()).matrix
    at = fim_ms(crack(0.3, 0.0), BASIS, list(CRACK_PARAMS), jacobian=crack_jacobian()).matrix
    assert at == pytest.approx(near, rel=1e-4, abs=1e-6)


def test_rate_scaling():
    sc = crack(0.5, 0.5)
    assert fim_ms(sc, BASIS, rate=10.0).matrix == pytest.approx(10 * fim_ms(sc, BASIS).matrix)


def test_basis_is_orthonormal():
    g = ModeBasis(6).gram_2d()
    assert np.abs(g - np.eye(len(g))).max() < 1e-12
    assert len(ModeBasis(10).modes) == 66
