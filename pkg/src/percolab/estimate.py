"""Monte Carlo estimates of crossing and winding probabilities.

Replica ``k`` of a run with seed ``s`` draws its configuration from the
substream ``derive_stream(s, k)``, so results do not depend on how replicas
are split between workers.  Workers are threads running the compiled
kernels with the GIL released; each owns a contiguous block of replicas.
"""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from . import conformal
from .cluster import KIND_CYCLIC, KIND_FULL, torus_replicas
from .lattice import (SQUARE, Annulus, BranchedParallelogram, Constant, CylinderRect, DiscreteDomain,
                      Parallelogram, Rectangle, build_branched_double_cover, build_domain,
                      build_glued_exterior, branched_scale_for_sites, build_cylinder)
from .rng import KINDS, LCG_BITS, stream_bases
from .sweep import radial_events, sweep_events

PC_LARGE = 0.5927439
PC_SMALL = 0.59273
SMALL_LATTICE = 200_000
PC_ENV = "PERCOLAB_PC"


def default_pc(n_sites: Optional[int] = None) -> float:
    """Critical site probability used when none is given.

    ``PERCOLAB_PC`` overrides; otherwise 0.59273 up to about 2e5 sites and
    0.5927439 beyond.
    """
    env = os.environ.get(PC_ENV)
    if env:
        p = float(env)
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"{PC_ENV}={env!r} is not a probability")
        return p
    if n_sites is not None and n_sites > SMALL_LATTICE:
        return PC_LARGE
    return PC_SMALL


# ---------------------------------------------------------------------------
# results


@dataclass(frozen=True)
class EstimateResult:
    name: str
    successes: int
    trials: int

    def __post_init__(self):
        if self.trials < 1 or not 0 <= self.successes <= self.trials:
            raise ValueError(f"bad tally {self.successes}/{self.trials}")

    @property
    def p_hat(self) -> float:
        return self.successes / self.trials

    @property
    def ci95(self) -> float:
        p = self.p_hat
        return 1.96 * math.sqrt(p * (1.0 - p) / self.trials)

    def merged(self, other: "EstimateResult") -> "EstimateResult":
        if other.name != self.name:
            raise ValueError("cannot merge tallies of different events")
        return EstimateResult(self.name, self.successes + other.successes, self.trials + other.trials)

    def to_dict(self) -> dict:
        return {"name": self.name, "successes": self.successes, "trials": self.trials,
                "p_hat": self.p_hat, "ci95": self.ci95}


@dataclass
class HomologyTally:
    """Counts of winding subgroups; the trivial count is whatever is left over."""

    trials: int = 0
    full: int = 0
    cyclic: Dict[Tuple[int, int], int] = field(default_factory=dict)
    nonprimitive: int = 0

    @property
    def trivial(self) -> int:
        return self.trials - self.full - sum(self.cyclic.values())

    def merged(self, other: "HomologyTally") -> "HomologyTally":
        cyc = dict(self.cyclic)
        for k, v in other.cyclic.items():
            cyc[k] = cyc.get(k, 0) + v
        return HomologyTally(self.trials + other.trials, self.full + other.full, cyc,
                             self.nonprimitive + other.nonprimitive)

    def results(self) -> Dict[str, EstimateResult]:
        """One estimate per class: H, the cyclic classes by frequency, then 0."""
        out = {"H": EstimateResult("H", self.full, self.trials)}
        for (m, n), c in sorted(self.cyclic.items(), key=lambda kv: (-kv[1], kv[0])):
            key = f"({m},{n})"
            out[key] = EstimateResult(key, c, self.trials)
        out["0"] = EstimateResult("0", self.trivial, self.trials)
        return out

    def to_dict(self) -> dict:
        return {"trials": self.trials, "full": self.full,
                "cyclic": {f"{m},{n}": c for (m, n), c in sorted(self.cyclic.items())},
                "trivial": self.trivial, "nonprimitive": self.nonprimitive}


# ---------------------------------------------------------------------------
# event specifications


@dataclass(frozen=True)
class Crossing:
    """Some cluster meets an interval of ``a`` and an interval of ``b``."""

    a: Tuple[str, ...]
    b: Tuple[str, ...]


@dataclass(frozen=True)
class Both:
    """Two other events of the same run both occur."""

    first: str
    second: str


EventSpec = Union[Crossing, Both]


def crossing(a: Union[str, Sequence[str]], b: Union[str, Sequence[str]]) -> Crossing:
    as_tuple = lambda v: (v,) if isinstance(v, str) else tuple(v)
    return Crossing(as_tuple(a), as_tuple(b))


BATTERY = {
    "h": crossing("left", "right"),
    "v": crossing("bottom", "top"),
    "hv": Both("h", "v"),
    "d": crossing("left_upper", "bottom_right"),
    "dbar": crossing("corner_ll", "corner_ur"),
}
HV = {k: BATTERY[k] for k in ("h", "v", "hv")}


@dataclass
class ExperimentSpec:
    domain: DiscreteDomain
    events: Mapping[str, EventSpec]
    n: int
    field: Optional[object] = None
    seed: int = 0
    rng: str = "default"
    workers: int = 1

    def __post_init__(self):
        if int(self.n) < 1:
            raise ValueError("sample count n must be at least 1")
        if self.rng not in KINDS:
            raise ValueError(f"unknown generator kind {self.rng!r}; choose from {KINDS}")
        if int(self.workers) < 1:
            raise ValueError("workers must be at least 1")
        if self.field is None:
            self.field = Constant(default_pc(self.domain.n_sites))


def thresholds(field_, kind: str) -> np.ndarray:
    bits = LCG_BITS if kind == "lcg48" else 53
    return np.ceil(np.ldexp(field_.table(), bits)).astype(np.uint64)


def _chunks(n: int, workers: int):
    workers = max(1, min(workers, n))
    step, extra = divmod(n, workers)
    lo = 0
    for w in range(workers):
        hi = lo + step + (1 if w < extra else 0)
        yield lo, hi
        lo = hi


def _run_blocks(fn, n, workers):
    blocks = list(_chunks(n, workers))
    if len(blocks) == 1:
        fn(*blocks[0])
        return
    with ThreadPoolExecutor(max_workers=len(blocks)) as pool:
        for fut in [pool.submit(fn, lo, hi) for lo, hi in blocks]:
            fut.result()


def replica_masks(dom: DiscreteDomain, field_, pairs: Sequence[Tuple[int, int]], n: int,
                  seed: int = 0, rng: str = "default", workers: int = 1, start: int = 0) -> np.ndarray:
    """Event bit sets of replicas ``start .. start+n-1``; bit q is pair q."""
    plan = dom.plan
    if plan is None:
        raise ValueError("domain has no raster plan")
    if len(pairs) > 64:
        raise ValueError("at most 64 crossing events per run")
    thr = thresholds(field_, rng)
    ev_a = np.array([a for a, _ in pairs], np.int64)
    ev_b = np.array([b for _, b in pairs], np.int64)
    bases = stream_bases(seed, start, n)
    out = np.zeros(n, np.uint64)
    lcg = rng == "lcg48"

    def block(lo, hi):
        sweep_events(plan.row_seg, plan.row_link, plan.row_gx, plan.row_gy, plan.seg_x0, plan.seg_x1,
                     plan.seg_alias, plan.mark_row, plan.mark_x, plan.mark_bits, plan.edge_a, plan.edge_b,
                     plan.width, plan.diagonal, thr, lcg, bases[lo:hi], ev_a, ev_b, out[lo:hi])

    _run_blocks(block, n, workers)
    return out


def _interval_mask(dom, names):
    bits = dom.plan.interval_bits
    m = 0
    for name in names:
        if name not in bits:
            raise KeyError(f"domain has no boundary interval {name!r}; has {sorted(bits)}")
        m |= bits[name]
    return m


def estimate_events(spec: ExperimentSpec) -> Dict[str, EstimateResult]:
    """Run ``spec.n`` replicas and tally every event in ``spec.events``."""
    dom = spec.domain
    crossings = [k for k, e in spec.events.items() if isinstance(e, Crossing)]
    pairs = [(_interval_mask(dom, spec.events[k].a), _interval_mask(dom, spec.events[k].b)) for k in crossings]
    masks = replica_masks(dom, spec.field, pairs, int(spec.n), spec.seed, spec.rng, int(spec.workers))
    occ: Dict[str, np.ndarray] = {k: (masks >> np.uint64(q)) & np.uint64(1) == 1 for q, k in enumerate(crossings)}
    for k, e in spec.events.items():
        if isinstance(e, Both):
            if e.first not in occ or e.second not in occ:
                raise ValueError(f"event {k!r} refers to an undefined event")
            occ[k] = occ[e.first] & occ[e.second]
        elif not isinstance(e, Crossing):
            raise TypeError(f"unsupported event {e!r}")
    return {k: EstimateResult(k, int(occ[k].sum()), int(spec.n)) for k in spec.events}


def _field(p, dom):
    if p is None:
        return Constant(default_pc(dom.n_sites))
    if isinstance(p, (int, float)):
        return Constant(float(p))
    return p


def _run(dom, events, n, p, seed, rng, workers):
    return estimate_events(ExperimentSpec(dom, events, n, _field(p, dom), seed, rng, workers))


# ---------------------------------------------------------------------------
# named experiments


def rectangle_experiment(width: int, height: int, n: int, p=None, lattice: str = SQUARE,
                         seed: int = 0, rng: str = "default", workers: int = 1):
    """h, v and hv on a width x height block of sites."""
    dom = build_domain(Rectangle(width, height), lattice)
    return _run(dom, HV, n, p, seed, rng, workers)


def parallelogram_domain(alpha: float, r: float, sites: float, rotation: float = 0.0,
                         definition: int = 1, lattice: str = SQUARE) -> DiscreteDomain:
    if definition == 2:
        fl, fb = conformal.half_side_splits(alpha, r)
    elif definition == 1:
        fl = fb = 0.5
    else:
        raise ValueError("definition must be 1 or 2")
    shape = Parallelogram.from_shape(alpha, r, sites, rotation, float(fl), float(fb))
    return build_domain(shape, lattice)


def parallelogram_experiment(alpha: float, r: float, sites: float, n: int, rotation: float = 0.0,
                             definition: int = 1, p=None, seed: int = 0, rng: str = "default",
                             workers: int = 1):
    """The full battery on a parallelogram of about ``sites`` sites, turned by ``rotation``."""
    dom = parallelogram_domain(alpha, r, sites, rotation, definition)
    return _run(dom, BATTERY, n, p, seed, rng, workers)


def annulus_experiment(r1: float, r2: float, n: int, p=None, seed: int = 0, rng: str = "default",
                       workers: int = 1):
    """Crossings between opposite quarter arcs of the inner circle and of the outer circle."""
    dom = build_domain(Annulus(r1, r2))
    ev = {}
    for side in ("int", "ext"):
        c = "inner" if side == "int" else "outer"
        ev[f"h_{side}"] = crossing(f"{c}_left", f"{c}_right")
        ev[f"v_{side}"] = crossing(f"{c}_bottom", f"{c}_top")
    for side in ("int", "ext"):
        ev[f"hv_{side}"] = Both(f"h_{side}", f"v_{side}")
    res = _run(dom, ev, n, p, seed, rng, workers)
    return {k: res[k] for k in ("h_int", "h_ext", "v_int", "v_ext", "hv_int", "hv_ext")}


def cylinder_experiment(width: int, circumference: int, n: int,
                        order: Sequence[str] = ("alpha", "gamma", "beta", "delta"), p=None,
                        seed: int = 0, rng: str = "default", workers: int = 1):
    """Crossings between intervals of one side of a vertically periodic strip.

    With the default order the left side is cut, bottom to top, into
    alpha, gamma, beta, delta; h joins alpha and beta, v joins gamma and
    delta.  ``_l`` events use the left side, ``_r`` the right.
    """
    if len(order) != 4 or set(order) != {"alpha", "beta", "gamma", "delta"}:
        raise ValueError("order must list alpha, beta, gamma, delta once each")
    dom = build_cylinder(CylinderRect(width, circumference, tuple(order)))
    ev = {}
    for s in ("l", "r"):
        ev[f"h_{s}"] = crossing(f"{s}_alpha", f"{s}_beta")
        ev[f"v_{s}"] = crossing(f"{s}_gamma", f"{s}_delta")
        ev[f"hv_{s}"] = Both(f"h_{s}", f"v_{s}")
    return _run(dom, ev, n, p, seed, rng, workers)


def exterior_glued_experiment(r1: float, r2: float, n: int, p=None, seed: int = 0,
                              rng: str = "default", workers: int = 1):
    """Crossing between the left and right quarter arcs of the inner circle,
    in an annulus glued along its outer ring to a disk."""
    dom = build_glued_exterior(r1, r2)
    return _run(dom, {"h": crossing("inner_left", "inner_right")}, n, p, seed, rng, workers)


def branched_domain(alpha: float, r: float, sites: float = 1e5, definition: int = 2) -> DiscreteDomain:
    if definition == 2:
        fl, fb = conformal.half_side_splits(alpha, r)
    elif definition == 1:
        fl = fb = 0.5
    else:
        raise ValueError("definition must be 1 or 2")
    scale = branched_scale_for_sites(alpha, r, sites)
    return build_branched_double_cover(BranchedParallelogram(alpha, r, scale, float(fl), float(fb)))


def branched_experiment(alpha: float, r: float, n: int, sites: float = 1e5, definition: int = 2,
                        p=None, seed: int = 0, rng: str = "default", workers: int = 1):
    """The full battery on the double cover of the squared image of a parallelogram."""
    dom = branched_domain(alpha, r, sites, definition)
    return _run(dom, BATTERY, n, p, seed, rng, workers)


def torus_homology_experiment(L: int, n: int, p=None, seed: int = 0, rng: str = "default",
                              workers: int = 1, Ly: Optional[int] = None) -> HomologyTally:
    """Tally of the winding subgroup generated by all clusters on an L x L torus."""
    Ly = L if Ly is None else Ly
    if L < 2 or Ly < 2:
        raise ValueError("torus needs sides >= 2")
    if n < 1:
        raise ValueError("sample count n must be at least 1")
    if rng not in KINDS:
        raise ValueError(f"unknown generator kind {rng!r}")
    p = default_pc(L * Ly) if p is None else float(p)
    thr = thresholds(Constant(p), rng)[0, 0]
    bases = stream_bases(seed, 0, n)
    kind = np.zeros(n, np.int64)
    gm = np.zeros(n, np.int64)
    gn = np.zeros(n, np.int64)
    bad = np.zeros(n, np.int64)
    lcg = rng == "lcg48"

    def block(lo, hi):
        torus_replicas(L, Ly, thr, lcg, bases[lo:hi], kind[lo:hi], gm[lo:hi], gn[lo:hi], bad[lo:hi])

    _run_blocks(block, n, workers)
    tally = HomologyTally(trials=n, full=int((kind == KIND_FULL).sum()), nonprimitive=int(bad.sum()))
    cyc = kind == KIND_CYCLIC
    pairs, counts = np.unique(np.stack([gm[cyc], gn[cyc]], axis=1), axis=0, return_counts=True)
    tally.cyclic = {(int(a), int(b)): int(c) for (a, b), c in zip(pairs, counts)}
    return tally


# ---------------------------------------------------------------------------
# radial crossings of an annulus


def radial_grid(r1: float, radii: Sequence[float]):
    """Flag grid for :func:`percolab.sweep.radial_events`.

    Returns ``(grid, width, sources, x0, y0)``; the cell at flat index
    ``(y - y0) * width + (x - x0)`` is the lattice point (x, y).
    """
    radii = [float(r) for r in radii]
    if not radii or len(radii) > 5:
        raise ValueError("between one and five outer radii")
    if any(b <= a for a, b in zip(radii, radii[1:])) or radii[0] <= r1 or r1 <= 0:
        raise ValueError("outer radii must increase and exceed the inner radius")
    R = int(math.ceil(radii[-1])) + 2
    ax = np.arange(-R, R + 1)
    X, Y = np.meshgrid(ax, ax)
    d2 = (X * X + Y * Y).astype(float)
    inside = (d2 > r1 * r1) & (d2 < radii[-1] ** 2)
    grid = np.where(inside, 0, 1).astype(np.uint8)
    for lvl, Rl in enumerate(radii):
        near = np.zeros_like(inside)
        for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            near |= np.roll(np.roll(d2, -dy, 0), -dx, 1) >= Rl * Rl
        grid[inside & (d2 < Rl * Rl) & near] |= np.uint8(2 << lvl)
    touch = np.zeros_like(inside)
    for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        touch |= np.roll(np.roll(d2, -dy, 0), -dx, 1) <= r1 * r1
    sources = np.nonzero((inside & touch).ravel())[0].astype(np.int64)
    return grid.ravel(), 2 * R + 1, sources, -R, -R


def radial_outcomes(r1: float, radii: Sequence[float], n: int, p=None, seed: int = 0,
                    workers: int = 1) -> np.ndarray:
    """Per-replica radial crossing flags, shape (n, len(radii)).

    Uniforms are keyed by lattice cell, so all radii see the same
    configuration.  Uses the counter-based generator.
    """
    if n < 1:
        raise ValueError("sample count n must be at least 1")
    grid, W, sources, _, _ = radial_grid(r1, radii)
    if p is None:
        p = default_pc(int(math.pi * (radii[-1] ** 2 - r1 * r1)))
    thr = np.uint64(thresholds(Constant(float(p)), "default")[0, 0])
    bases = stream_bases(seed, 0, n)
    out = np.zeros((n, len(radii)), np.uint8)

    def block(lo, hi):
        # each worker needs its own scratch bits
        radial_events(grid.copy(), W, sources, thr, bases[lo:hi], out[lo:hi])

    _run_blocks(block, n, workers)
    return out


def radial_experiment(r1: float, r2: float, n: int, p=None, seed: int = 0, rng: str = "default",
                      workers: int = 1):
    """Probability of an open path in the annulus r1 < |z| < r2 from the inner circle to the outer one."""
    if rng == "default":
        out = radial_outcomes(r1, [r2], n, p, seed, workers)
        return EstimateResult("radial", int(out[:, 0].sum()), n)
    dom = build_domain(Annulus(r1, r2))
    return _run(dom, {"radial": crossing("inner", "outer")}, n, p, seed, rng, workers)["radial"]


def annulus_exponent_points(r1: float, ratios: Sequence[float], n: int, p=None, seed: int = 0,
                            rng: str = "default", workers: int = 1):
    """(ratio, radial crossing estimate) for annuli r1 < |z| < ratio*r1.

    With the counter-based generator one search per replica serves every
    ratio; otherwise each annulus is swept separately.
    """
    ratios = sorted(float(q) for q in ratios)
    if rng == "default" and len(ratios) <= 5:
        out = radial_outcomes(r1, [r1 * q for q in ratios], n, p, seed, workers)
        return [(q, EstimateResult(f"radial_{q:g}", int(out[:, k].sum()), n)) for k, q in enumerate(ratios)]
    return [(q, radial_experiment(r1, r1 * q, n, p, seed, rng, workers)) for q in ratios]


# ---------------------------------------------------------------------------
# reference geometry

# (width, height, crossing probability from the exact formula, 4 decimals)
RECTANGLE_ROWS = (
    (1000, 1000, 0.5000), (1025, 975, 0.4740), (1050, 950, 0.4480), (1080, 930, 0.4226),
    (1105, 905, 0.3970), (1135, 880, 0.3695), (1160, 860, 0.3473), (1190, 840, 0.3235),
    (1220, 820, 0.3003), (1250, 800, 0.2777), (1285, 780, 0.2541), (1315, 760, 0.2330),
    (1350, 740, 0.2111), (1385, 725, 0.1929), (1420, 705, 0.1731), (1455, 685, 0.1542),
    (1490, 670, 0.1389), (1530, 655, 0.1236), (1570, 640, 0.1093), (1610, 620, 0.09402),
    (1650, 605, 0.08201), (1690, 590, 0.07104), (1735, 575, 0.06053), (1775, 565, 0.05314),
    (1820, 550, 0.04459), (1870, 535, 0.03669), (1915, 520, 0.03016), (1965, 510, 0.02523),
    (2015, 495, 0.02009), (2065, 485, 0.01651), (2115, 470, 0.01281), (2170, 460, 0.01020),
    (2225, 450, 0.00805), (2280, 440, 0.00627), (2340, 425, 0.00447), (2400, 415, 0.00334),
    (2460, 405, 0.00247), (2520, 395, 0.00179), (2585, 385, 0.00126), (2650, 375, 0.00087),
    (2720, 370, 0.00065),
)


def scaled_rows(scale: float):
    """Reference rectangles shrunk by ``scale`` (sides rounded, at least 1)."""
    if not scale > 0:
        raise ValueError("scale must be positive")
    return [(max(1, int(round(w * scale))), max(1, int(round(h * scale)))) for w, h, _ in RECTANGLE_ROWS]


def striated_rows(scale: float):
    """Rectangles for the striated fit: ratios 1 to 4.5 and the reciprocals of the first ten above 1."""
    rows = [(w, h) for (w, h), (_, _, _) in zip(scaled_rows(scale), RECTANGLE_ROWS)]
    upright = [(w, h) for w, h in rows if w / h <= 4.5 + 1e-9]
    flipped = [(h, w) for w, h in rows[1:11]]
    return sorted(flipped + upright, key=lambda wh: wh[0] / wh[1])
