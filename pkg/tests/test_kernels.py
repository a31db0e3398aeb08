"""The compiled replica loops against sampling plus generic labelling, replica by replica."""

import numpy as np
import pytest

from percolab.cluster import Configuration, connects, image_subgroup, label_clusters, wrapping_vectors
from percolab.estimate import (_interval_mask, branched_domain, parallelogram_domain, radial_grid,
                               radial_outcomes, replica_masks, torus_homology_experiment)
from percolab.lattice import (TRIANGULAR, Annulus, Constant, CylinderRect, Rectangle, Striated, build_cylinder,
                              build_domain, build_glued_exterior, build_torus, sample_configuration)
from percolab.rng import RandomSource, mix64, stream_bases

SIDES = [(("left",), ("right",)), (("bottom",), ("top",)), (("left_upper",), ("bottom_right",)),
         (("corner_ll",), ("corner_ur",))]
ANNULUS = [(("inner_left",), ("inner_right",)), (("outer_bottom",), ("outer_top",)), (("inner",), ("outer",))]
CYLINDER = [(("l_alpha",), ("l_beta",)), (("l_gamma",), ("l_delta",)), (("r_alpha",), ("r_beta",))]
GLUED = [(("inner_left",), ("inner_right",)), (("inner_top",), ("inner_bottom",))]


def generic_masks(dom, field, names, seed, kind, n):
    sets = [(np.unique(np.concatenate([dom.intervals[x] for x in A])),
             np.unique(np.concatenate([dom.intervals[x] for x in B]))) for A, B in names]
    out = np.zeros(n, np.uint64)
    for k in range(n):
        cfg = sample_configuration(dom, field, RandomSource(kind, seed, k))
        lab = label_clusters(dom, cfg)
        m = 0
        for q, (a, b) in enumerate(sets):
            if connects(lab, a, b):
                m |= 1 << q
        out[k] = m
    return out


CASES = {
    "square": (lambda: build_domain(Rectangle(30, 20)), Constant(0.5927), SIDES),
    "triangular": (lambda: build_domain(Rectangle(30, 20), TRIANGULAR), Constant(0.5), SIDES),
    "striated": (lambda: build_domain(Rectangle(40, 40)), Striated(), SIDES),
    "parallelogram": (lambda: parallelogram_domain(0.25, 1.0, 1500, 0.3), Constant(0.5927), SIDES),
    "parallelogram-tri": (lambda: parallelogram_domain(0.25, 1.0, 1500, 0.3, lattice=TRIANGULAR),
                          Constant(0.5), SIDES),
    "annulus": (lambda: build_domain(Annulus(5, 30)), Constant(0.5927), ANNULUS),
    "cylinder": (lambda: build_cylinder(CylinderRect(20, 24)), Constant(0.5927), CYLINDER),
    "cylinder-tri": (lambda: build_cylinder(CylinderRect(20, 24), TRIANGULAR), Constant(0.5), CYLINDER),
    "glued": (lambda: build_glued_exterior(6, 25), Constant(0.5927), GLUED),
    "branched-square": (lambda: branched_domain(0.5, 1.0, 3000), Constant(0.5927), SIDES),
    "branched-skew": (lambda: branched_domain(0.375, 2.224, 3000), Constant(0.5927), SIDES),
}


@pytest.mark.parametrize("kind", ["default", "lcg48"])
@pytest.mark.parametrize("case", sorted(CASES))
def test_sweep_matches_generic(case, kind):
    make, field, names = CASES[case]
    dom = make()
    n = 150
    pairs = [(_interval_mask(dom, A), _interval_mask(dom, B)) for A, B in names]
    got = replica_masks(dom, field, pairs, n, seed=7, rng=kind, workers=3)
    want = generic_masks(dom, field, names, 7, kind, n)
    assert np.array_equal(got, want)
    # the comparison means something only if events both occur and fail
    for q in range(len(names)):
        bits = (want >> np.uint64(q)) & np.uint64(1)
        assert 0 < bits.sum() < n or case.startswith("glued")


def test_sweep_offset_start_matches_full_run():
    dom = build_domain(Rectangle(25, 25))
    pairs = [(_interval_mask(dom, A), _interval_mask(dom, B)) for A, B in SIDES[:2]]
    full = replica_masks(dom, Constant(0.5927), pairs, 80, seed=3)
    tail = replica_masks(dom, Constant(0.5927), pairs, 30, seed=3, start=50)
    assert np.array_equal(full[50:], tail)


def test_radial_search_matches_generic():
    r1, radii = 5, [9, 15, 26]
    n = 200
    out = radial_outcomes(r1, radii, n, seed=4)
    _, W, _, x0, y0 = radial_grid(r1, radii)
    thr = int(np.ceil(np.ldexp(0.59273, 53)))
    bases = stream_bases(4, 0, n)
    doms = [build_domain(Annulus(r1, R)) for R in radii]
    flats = [(d.cells[:, 1] - y0) * W + (d.cells[:, 0] - x0) for d in doms]
    for k in range(n):
        for lvl, (d, flat) in enumerate(zip(doms, flats)):
            u = np.array([mix64(int(bases[k]) + (int(c) + 1) * 0x9E3779B97F4A7C15) >> 11 for c in flat])
            lab = label_clusters(d, Configuration(u < thr))
            assert connects(lab, d.intervals["inner"], d.intervals["outer"]) == bool(out[k, lvl])
    # nested annuli: crossing a wider one implies crossing every narrower one
    assert np.all(np.diff(out.astype(int), axis=1) <= 0)


def test_radial_workers_agree():
    a = radial_outcomes(6, [12, 24], 300, seed=2, workers=1)
    b = radial_outcomes(6, [12, 24], 300, seed=2, workers=4)
    assert np.array_equal(a, b)


@pytest.mark.parametrize("kind", ["default", "lcg48"])
def test_torus_tally_matches_generic(kind):
    L, n = 12, 300
    tally = torus_homology_experiment(L, n, seed=5, rng=kind, workers=2)
    dom = build_torus(L, L)
    counts = {}
    for k in range(n):
        cfg = sample_configuration(dom, Constant(0.59273), RandomSource(kind, 5, k))
        s = str(image_subgroup(wrapping_vectors(dom, cfg)))
        counts[s] = counts.get(s, 0) + 1
    want = {"full": counts.pop("full", 0), "trivial": counts.pop("trivial", 0)}
    assert tally.full == want["full"]
    assert tally.trivial == want["trivial"]
    assert {f"({a},{b})": c for (a, b), c in tally.cyclic.items()} == counts
