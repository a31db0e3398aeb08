import cmath
import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from percolab import conformal as cf
from percolab.estimate import RECTANGLE_ROWS

# (alpha, r, pi_h exact, pi_d exact with the rectangle-midpoint halves), 4 decimals
DOUBLED_ROWS = [
    (0.5, 1.488, .3002, .2939), (0.5, 2.224, .1389, .2157), (0.5, 3.309, .0446, .1254),
    (0.375, 1.488, .2895, .2904), (0.375, 2.224, .1259, .2062), (0.375, 3.309, .0368, .1141),
    (0.25, 1.488, .2491, .2754), (0.25, 2.224, .0840, .1706), (0.25, 3.309, .0169, .0774),
    (0.125, 1.488, .1404, .2168),
]
SQUARE_DIAGONAL = [(3.0, .1469), (2.3258, .2055), (1.9041, .2496), (1.4848, .2942), (1.2198, .3165),
                   (1.0, .3244), (0.8198, .3165), (0.5252, .2496), (0.3333, .1469)]
ANGLE_38 = [(1.000, 1.000), (1.105, 1.111), (1.210, 1.224), (1.343, 1.367), (1.534, 1.573), (1.793, 1.852)]


def test_cardy_endpoints_and_midpoint():
    assert cf.cardy(0.0) == 0.0
    assert cf.cardy(1.0) == pytest.approx(1.0, abs=1e-15)
    assert cf.cardy(0.5) == pytest.approx(0.5, abs=1e-14)
    with pytest.raises(ValueError):
        cf.cardy(-0.01)
    with pytest.raises(ValueError):
        cf.cardy(1.5)


def test_cardy_constant_from_gamma():
    mp.mp.dps = 40
    want = 3 * mp.gamma(mp.mpf(2) / 3) / mp.gamma(mp.mpf(1) / 3) ** 2
    assert abs(cf.CARDY_CONSTANT - float(want)) < 1e-16
    assert abs(cf.GAMMA_ONE_THIRD - float(mp.gamma(mp.mpf(1) / 3))) < 1e-15


@pytest.mark.parametrize("z", [0.0, 1e-8, 0.01, 0.2, 0.37, 0.5])
def test_hypergeometric_series_against_mpmath(z):
    mp.mp.dps = 30
    want = mp.hyp2f1(mp.mpf(1) / 3, mp.mpf(2) / 3, mp.mpf(4) / 3, z)
    assert cf.hyp2f1_cardy(z) == pytest.approx(float(want), rel=1e-14)


def test_cardy_against_mpmath_everywhere():
    mp.mp.dps = 30
    for z in np.linspace(0.0, 1.0, 41)[1:-1]:
        want = cf.CARDY_CONSTANT * mp.mpf(z) ** (mp.mpf(1) / 3) * mp.hyp2f1(1 / mp.mpf(3), 2 / mp.mpf(3),
                                                                           4 / mp.mpf(3), z)
        assert cf.cardy(z) == pytest.approx(float(want), abs=2e-14)


def test_cardy_reflection_identity_grid():
    z = np.linspace(0.0, 1.0, 1000)
    err = max(abs(cf.cardy(x) + cf.cardy(1 - x) - 1.0) for x in z)
    assert err <= 1e-12


def test_cardy_strictly_increasing():
    vals = [cf.cardy(x) for x in np.linspace(0.0, 1.0, 2001)]
    assert all(b > a for a, b in zip(vals, vals[1:]))


def test_cardy_solves_its_ode():
    h = 1e-4
    worst = 0.0
    for z in np.linspace(0.05, 0.95, 100):
        g0, gp, gm = cf.cardy(z), cf.cardy(z + h), cf.cardy(z - h)
        d1 = (gp - gm) / (2 * h)
        d2 = (gp - 2 * g0 + gm) / h ** 2
        worst = max(worst, abs(z * (1 - z) * d2 + (2 / 3) * (1 - 2 * z) * d1))
    assert worst < 1e-6


def test_rectangle_table_all_rows():
    err = max(abs(cf.cardy_rect(w / h) - p) for w, h, p in RECTANGLE_ROWS)
    assert err <= 5e-5


@pytest.mark.parametrize("r,want", [(1.0, 0.5), (2.014, 0.1731), (7.351, 0.00065), (1220 / 820, 0.3003),
                                    (3.017, 0.06053)])
def test_cardy_rect_examples(r, want):
    assert cf.cardy_rect(r) == pytest.approx(want, abs=5e-5)


def test_crossratio_square_and_duality():
    assert cf.rect_to_crossratio(1.0) == pytest.approx(0.5, abs=1e-14)
    for r in (0.2, 0.9, 1.7, 6.0):
        assert cf.rect_to_crossratio(r) + cf.rect_to_crossratio(1 / r) == pytest.approx(1.0, abs=1e-13)
        assert cf.cardy_rect(r) + cf.cardy_rect(1 / r) == pytest.approx(1.0, abs=1e-13)


def test_crossratio_round_trip():
    # z -> r -> z is well conditioned everywhere; r -> z -> r only away from z near 1
    for z in np.linspace(0.001, 0.999, 59):
        assert cf.rect_to_crossratio(cf.crossratio_to_rect(z)) == pytest.approx(z, abs=1e-12)
    for r in np.geomspace(0.5, 10.0, 25):
        assert cf.crossratio_to_rect(cf.rect_to_crossratio(r)) == pytest.approx(r, rel=1e-9)


def test_crossratio_decreasing():
    zs = [cf.rect_to_crossratio(r) for r in np.geomspace(0.1, 10, 60)]
    assert all(b < a for a, b in zip(zs, zs[1:]))


# --- Schwarz-Christoffel geometry against an independent mpmath integration


def _mp_side_ratio(alpha, theta0):
    """Bottom/left lengths from |phi'| on the unit circle, integrated in mpmath.

    Each side is split at its midpoint so every piece has one algebraic
    singularity, at s = 0, of the form s^p; the change of variables
    s = x^(1/(p+1)) removes it before integrating.
    """
    mp.mp.dps = 30
    a, th = mp.mpf(alpha), mp.mpf(theta0)

    def piece(p, q, shift, length):
        def g(x):
            s = x ** (1 / (p + 1))
            sinc = mp.sin(s) / s if s else mp.mpf(1)
            return sinc ** p * abs(2 * mp.sin(s + shift)) ** q
        return 2 ** p / (p + 1) * mp.quad(g, [0, length ** (p + 1)])

    left = piece(-a, a - 1, mp.pi - 2 * th, th) + piece(a - 1, -a, mp.pi - 2 * th, th)
    half = (mp.pi - 2 * th) / 2
    bottom = piece(a - 1, -a, 2 * th, half) + piece(-a, a - 1, 2 * th, half)
    return bottom / left


@pytest.mark.parametrize("alpha,theta0", [(0.5, 0.6), (0.375, 0.45), (0.25, 1.1), (0.125, 0.3), (0.8, 0.7),
                                          (0.2, 1e-3), (0.6, 1.5)])
def test_side_ratio_against_mpmath(alpha, theta0):
    assert cf.side_ratio(alpha, theta0) == pytest.approx(float(_mp_side_ratio(alpha, theta0)), rel=1e-11)


def test_sc_map_square_and_angle():
    assert cf.sc_map(0.5, cmath.exp(0.25j * math.pi), 0) == 0
    ll, ul, ur, lr = cf.sc_vertices(0.5, math.pi / 4)
    sides = [abs(ul - ll), abs(ur - ul), abs(lr - ur), abs(ll - lr)]
    assert max(sides) / min(sides) - 1 < 1e-8
    for alpha in (0.25, 0.375, 0.6):
        ll, ul, ur, lr = cf.sc_vertices(alpha, 0.5)
        a, b = ul - ll, lr - ll
        ang = abs(cmath.phase(a / b))
        assert ang / math.pi == pytest.approx(alpha, abs=1e-8)


def test_sc_vertices_match_side_ratio():
    ll, ul, ur, lr = cf.sc_vertices(0.3, 0.7)
    assert abs(lr - ll) / abs(ul - ll) == pytest.approx(cf.side_ratio(0.3, 0.7), rel=1e-9)


@pytest.mark.parametrize("r", [0.5, 1.0, 2.0, 5.0])
def test_rectangle_is_its_own_equivalent(r):
    assert cf.parallelogram_to_rect(0.5, r) == pytest.approx(r, rel=1e-8)


@pytest.mark.parametrize("r,r0", ANGLE_38)
def test_three_eighths_table(r, r0):
    assert abs(cf.parallelogram_to_rect(3 / 8, r) - r0) <= 0.005


def test_supplementary_angles_agree():
    for alpha in (0.1, 0.3, 0.45):
        for r in (0.7, 1.9):
            assert cf.parallelogram_to_rect(alpha, r) == pytest.approx(cf.parallelogram_to_rect(1 - alpha, r),
                                                                       rel=1e-13)


@pytest.mark.parametrize("alpha,r,ph,pd", DOUBLED_ROWS)
def test_parallelogram_crossings_match_table(alpha, r, ph, pd):
    assert cf.cardy_rect(cf.parallelogram_to_rect(alpha, r)) == pytest.approx(ph, abs=6e-5)
    assert cf.cardy_diagonal(alpha, r, definition=2) == pytest.approx(pd, abs=6e-5)


@pytest.mark.parametrize("r,pd", SQUARE_DIAGONAL)
def test_square_diagonal_crossing(r, pd):
    # for a rectangle the side midpoints are the images of the rectangle's midpoints
    assert cf.cardy_diagonal(0.5, r, 1) == pytest.approx(pd, abs=6e-5)
    assert cf.cardy_diagonal(0.5, r, 2) == pytest.approx(cf.cardy_diagonal(0.5, r, 1), abs=1e-9)


def test_half_side_splits():
    fl, fb = cf.half_side_splits(0.5, 1.3)
    assert fl == pytest.approx(0.5, abs=1e-12) and fb == pytest.approx(0.5, abs=1e-12)
    fl, fb = cf.half_side_splits(0.25, 1.0)
    assert fl == pytest.approx(fb, abs=1e-12)
    assert 0.5 < fl < 1.0


def test_shear_examples():
    ident = cf.ShearMatrix(1.0, math.pi / 2)
    assert cf.shear_equivalent_rect(ident, 1.7) == pytest.approx(1.7, rel=1e-9)
    assert cf.side_ratio_scale(ident) == pytest.approx(1.0)
    g = cf.ShearMatrix(0.7538, 0.2643 * math.pi)
    assert cf.shear_equivalent_rect(g, 1.0) == pytest.approx(0.7018, abs=1e-3)
    assert cf.shear_equivalent_rect(g, 4.5) == pytest.approx(4.217, abs=1e-3)
    assert round(cf.side_ratio_scale(g), 3) == 2.016
    assert np.allclose(g.matrix() @ g.inverse(), np.eye(2))
    with pytest.raises(ValueError):
        cf.ShearMatrix(-1.0, 1.0)
    with pytest.raises(ValueError):
        cf.ShearMatrix(1.0, math.pi)


def test_side_ratio_scale_decreasing_in_a():
    vals = [cf.side_ratio_scale(cf.ShearMatrix(a, math.pi / 2)) for a in np.linspace(0.2, 5.0, 50)]
    assert all(b < a for a, b in zip(vals, vals[1:]))


def test_annulus_cylinder_maps():
    w, c = cf.annulus_to_cylinder(1.0, 10.0, scale=53)
    assert abs(w - 122) <= 1 and abs(c - 333) <= 1
    assert cf.annulus_to_cylinder(3.0, 3.0)[0] == 0.0
    # the cylinder with 202 along the axis and 240 around it
    assert cf.cylinder_to_annulus_ratio(202, 240) == pytest.approx(198.0, abs=0.05)
    with pytest.raises(ValueError):
        cf.annulus_to_cylinder(2.0, 1.0)


def test_exponent_prediction():
    assert cf.annulus_exponent_prediction() == pytest.approx(0.104166666, abs=1e-9)
    assert 16 ** -cf.annulus_exponent_prediction() == pytest.approx(0.749, abs=1e-3)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.12, 8.0))
def test_cardy_rect_complement(r):
    assert cf.cardy_rect(r) + cf.cardy_rect(1 / r) == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(alpha=st.floats(0.1, 0.9), r=st.floats(0.3, 3.0))
def test_theta_solves_side_ratio(alpha, r):
    th = cf.theta_for_ratio(alpha, r)
    assert cf.side_ratio(alpha, th) == pytest.approx(r, rel=1e-10)


@settings(max_examples=25, deadline=None)
@given(alpha=st.floats(0.1, 0.9), r1=st.floats(0.3, 3.0), r2=st.floats(0.3, 3.0))
def test_equivalent_rectangle_monotone(alpha, r1, r2):
    if abs(r1 - r2) < 1e-6:
        return
    lo, hi = sorted((r1, r2))
    assert cf.parallelogram_to_rect(alpha, lo) < cf.parallelogram_to_rect(alpha, hi)
