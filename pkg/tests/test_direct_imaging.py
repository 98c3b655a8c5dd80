import math

import numpy as np
import pytest

from oracles import central_diff
from surfacelimits.direct_imaging import (
    QuadratureGrid,
    chernoff_di,
    chernoff_di_detail,
    fim_di,
    fim_di_detail,
    intensity,
    intensity_grad,
)
from surfacelimits.errors import QuadratureFailure
from surfacelimits.psf_gram import Axis, ParamIndex, PointSource, Scene
from surfacelimits.qfim import qfim_reduced, reparametrize
from surfacelimits.scenes import CRACK_PARAMS, crack, crack_jacobian, flat_surface


def crack_di(dx, dz, **kw):
    return fim_di(crack(dx, dz), list(CRACK_PARAMS), jacobian=crack_jacobian(), **kw).matrix


def test_peak_values():
    assert intensity(Scene([PointSource()]), 0.0, 0.0) == pytest.approx(1 / math.pi)
    dz = 1.7
    assert intensity(Scene([PointSource(dz=dz)]), 0.0, 0.0) == pytest.approx(1 / (math.pi * (1 + dz * dz)))


@pytest.mark.parametrize("sc", [crack(1.0, 2.0), Scene([PointSource(0.5, -1.0, 3.0), PointSource(-2.0, 0.3, 0.0)])])
def test_intensity_normalized(sc):
    grid = QuadratureGrid()
    r = grid.radius_for(sc)
    xs, ws = grid.nodes(r, 32)
    total = (intensity(sc, xs[:, None], xs[None, :]) * ws[:, None] * ws[None, :]).sum()
    assert total == pytest.approx(1.0, abs=1e-9)


def test_intensity_matches_psf_modulus():
    from oracles import psf
    src = (0.3, -0.2, 0.9)
    x, y = 0.4, 0.1
    assert intensity(Scene([PointSource(*src)]), x, y) == pytest.approx(abs(psf(x, y, src, 5.0)) ** 2, rel=1e-13)


def test_intensity_gradient_against_fd():
    sc = Scene([PointSource(0.3, -0.2, 0.6), PointSource(-0.7, 0.1, -0.4)])
    x, y = 0.25, -0.6
    for p in sc.all_params():
        got = intensity_grad(sc, [p], x, y)[0]
        srcs = list(sc.sources)

        def shifted(t):
            s = list(srcs)
            s[p.source] = s[p.source].shifted(p.axis, t)
            return intensity(Scene(s), x, y)
        assert got == pytest.approx(central_diff(shifted, 0.0, 1e-5), rel=1e-6, abs=1e-12)


def test_single_source_location_information():
    sc = Scene([PointSource(0.2, 0.0, 0.0)])
    f = fim_di(sc, [ParamIndex(0, Axis.X), ParamIndex(0, Axis.Y)]).matrix
    assert f == pytest.approx(np.diag([2.0, 2.0]), abs=1e-9)


def test_di_below_qfim():
    for dx, dz in [(0.1, 0.1), (0.5, 1.0), (2.0, 0.3), (3.0, 3.0)]:
        sc = crack(dx, dz)
        h = reparametrize(qfim_reduced(sc, list(CRACK_PARAMS)), crack_jacobian()).matrix
        assert np.linalg.eigvalsh(h - crack_di(dx, dz)).min() > -1e-8


def test_depth_information_vanishes_and_peaks():
    zs = np.linspace(0.1, 3.0, 30)
    vals = [crack_di(1.0, z)[1, 1] for z in zs]
    assert crack_di(1.0, 1e-3)[1, 1] < 1e-5
    assert 0.6 < zs[int(np.argmax(vals))] < 1.6


def test_wide_crack_width_information_near_quantum():
    dx = 8.0
    sc = crack(dx, 0.5)
    h = reparametrize(qfim_reduced(sc, list(CRACK_PARAMS)), crack_jacobian()).matrix
    assert crack_di(dx, 0.5)[0, 0] == pytest.approx(h[0, 0], rel=0.05)


def test_convergence_within_reported_error():
    sc = crack(0.7, 0.9)
    coarse = fim_di_detail(sc, list(CRACK_PARAMS), QuadratureGrid(target_tol=1e-8))
    fine = fim_di_detail(sc, list(CRACK_PARAMS), QuadratureGrid(target_tol=5e-9))
    assert np.abs(coarse.fisher.matrix - fine.fisher.matrix).max() <= max(coarse.error, 1e-15)


def test_grid_too_small():
    with pytest.raises(QuadratureFailure):
        fim_di(crack(1.0, 2.0), list(CRACK_PARAMS), QuadratureGrid(half_width=3.0))


def test_refinement_cap():
    with pytest.raises(QuadratureFailure):
        fim_di(crack(1.0, 0.5), list(CRACK_PARAMS), QuadratureGrid(target_tol=1e-30, max_panels=16))


def test_chernoff_identical_scenes():
    xi, s = chernoff_di(crack(0.5, 0.5), crack(0.5, 0.5))
    assert xi == 0.0
    assert 0 <= s <= 1


def test_chernoff_against_riemann_sum():
    from scipy.optimize import minimize_scalar

    s0, s1 = flat_surface(0.5), crack(0.5, 0.4)
    xs = np.linspace(-12, 12, 1601)
    h = xs[1] - xs[0]
    p0 = intensity(s0, xs[:, None], xs[None, :])
    p1 = intensity(s1, xs[:, None], xs[None, :])
    res = minimize_scalar(lambda s: (p0**s * p1 ** (1 - s)).sum() * h * h, bounds=(0, 1),
                          method="bounded", options={"xatol": 1e-10})
    xi, s_star = chernoff_di(s0, s1)
    assert xi == pytest.approx(-math.log(res.fun), rel=1e-7)
    assert s_star == pytest.approx(res.x, abs=1e-4)


def test_chernoff_symmetry():
    a, b = flat_surface(0.8), crack(0.8, 0.6)
    xi_ab, s_ab = chernoff_di(a, b)
    xi_ba, s_ba = chernoff_di(b, a)
    assert xi_ab == pytest.approx(xi_ba, rel=1e-9)
    assert s_ab == pytest.approx(1 - s_ba, abs=1e-6)


def test_chernoff_small_depth_is_quartic():
    dx = 0.02
    vals = [chernoff_di(flat_surface(dx), crack(dx, z))[0] for z in (1e-3, 1e-2)]
    assert math.log(vals[1] / vals[0]) / math.log(10) == pytest.approx(4.0, abs=0.01)
    assert vals[0] * 72 / 1e-12 == pytest.approx(1.0, rel=0.02)


def test_chernoff_error_estimate_reported():
    res = chernoff_di_detail(flat_surface(0.5), crack(0.5, 0.3))
    assert 0 <= res.error < 1e-8
