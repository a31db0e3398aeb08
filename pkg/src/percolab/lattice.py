"""Finite site graphs carved out of plane regions.

Sites are lattice points strictly inside a region.  A site belongs to a
boundary interval when one of its lattice bonds to a point outside the
domain meets the geometric arc of that interval.

Every grid-based domain is assembled from one or more *patches*: boolean
masks on the integer lattice, read in raster order (rows bottom to top,
columns left to right).  Site indices follow that order, which is also the
order in which random draws are consumed.  A patch cell may be an *alias*
of a site created earlier (the shared ring of a glued exterior, the branch
point of a double cover); aliases consume no draw.  Bonds that are not
between lattice neighbours of one patch (periodic wrap-around, bonds across
a branch cut, alias identifications) are *extra edges*.

The same description produces the generic neighbour lists used for
reference computations and the row-segment plan consumed by the fast
sweep kernels in :mod:`percolab.estimate`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .rng import RandomSource, check_probability

SQUARE = "square"
TRIANGULAR = "triangular"
LATTICES = (SQUARE, TRIANGULAR)

_SQUARE_STEPS = ((1, 0), (-1, 0), (0, 1), (0, -1))
# the triangular lattice as a square grid with one family of diagonals
_TRIANGULAR_STEPS = _SQUARE_STEPS + ((1, 1), (-1, -1))

STRIATED_P2 = 0.84928
BAND_TILE = ((0, 0), (1, 0), (1, 1), (2, 1), (3, 2), (4, 2), (4, 3), (5, 3))


class EmptyDomainError(ValueError):
    pass


def lattice_steps(lattice: str):
    if lattice == SQUARE:
        return _SQUARE_STEPS
    if lattice == TRIANGULAR:
        return _TRIANGULAR_STEPS
    raise ValueError(f"unknown lattice {lattice!r}; choose from {LATTICES}")


# ---------------------------------------------------------------------------
# regions


@dataclass(frozen=True)
class Rectangle:
    width: float
    height: float

    def __post_init__(self):
        if not (self.width > 0 and self.height > 0):
            raise ValueError("rectangle sides must be positive")


@dataclass(frozen=True)
class Parallelogram:
    """Four vertices in clockwise order: lower-left, upper-left, upper-right, lower-right.

    ``rotation`` turns the figure about its centroid.  ``split_left`` and
    ``split_bottom`` locate the points (as fractions measured from the
    lower-left corner) that cut the left and bottom sides into the halves
    used by the diagonal crossing.
    """

    vertices: Tuple[Tuple[float, float], ...]
    rotation: float = 0.0
    split_left: float = 0.5
    split_bottom: float = 0.5

    def __post_init__(self):
        if len(self.vertices) != 4:
            raise ValueError("a parallelogram needs four vertices")
        v = np.asarray(self.vertices, float)
        if not np.allclose(v[0] + v[2], v[1] + v[3], atol=1e-9 * (1 + np.abs(v).max())):
            raise ValueError("vertices do not form a parallelogram")
        if _signed_area(v) >= 0:
            raise ValueError("vertices must be clockwise with positive area")
        for f in (self.split_left, self.split_bottom):
            if not 0 < f < 1:
                raise ValueError("split fractions must lie in (0, 1)")

    @classmethod
    def from_shape(cls, alpha: float, r: float, sites: float, rotation: float = 0.0,
                   split_left: float = 0.5, split_bottom: float = 0.5,
                   origin=(0.0, 0.0)) -> "Parallelogram":
        """Horizontal bottom of length r*l, left side of length l at angle alpha*pi,
        with l chosen so the area is about ``sites`` lattice cells."""
        if not (0 < alpha < 1 and r > 0 and sites > 0):
            raise ValueError("need 0 < alpha < 1, r > 0, sites > 0")
        s = math.sin(alpha * math.pi)
        ell = math.sqrt(sites / (r * s))
        ll = np.array(origin, float)
        up = ell * np.array([math.cos(alpha * math.pi), s])
        lr = ll + np.array([r * ell, 0.0])
        verts = (tuple(ll), tuple(ll + up), tuple(lr + up), tuple(lr))
        return cls(verts, rotation, split_left, split_bottom)

    def corners(self) -> np.ndarray:
        v = np.asarray(self.vertices, float)
        if self.rotation == 0.0:
            return v
        c = v.mean(axis=0)
        cs, sn = math.cos(self.rotation), math.sin(self.rotation)
        rot = np.array([[cs, -sn], [sn, cs]])
        return (v - c) @ rot.T + c


@dataclass(frozen=True)
class Annulus:
    r1: float
    r2: float
    arcs: int = 4

    def __post_init__(self):
        if not (0 < self.r1 < self.r2):
            raise ValueError("annulus needs 0 < r1 < r2")
        if self.arcs != 4:
            raise ValueError("only the four axis-centred arcs are supported")


@dataclass(frozen=True)
class Disk:
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("radius must be positive")


@dataclass(frozen=True)
class TorusCell:
    Lx: int
    Ly: int


@dataclass(frozen=True)
class CylinderRect:
    """Rectangle ``width`` wide, periodic in the vertical direction with period ``height``.

    Each vertical side is cut into ``len(order)`` equal intervals named, from
    the bottom up, by ``order``; the default gives alpha, gamma, beta, delta.
    """

    width: int
    height: int
    order: Tuple[str, ...] = ("alpha", "gamma", "beta", "delta")

    def __post_init__(self):
        if self.width < 1 or self.height < 2:
            raise ValueError("cylinder needs width >= 1 and height >= 2")


@dataclass(frozen=True)
class BranchedParallelogram:
    """Parallelogram D in the z-plane, centred at 0, bottom horizontal.

    The domain is the two-sheeted lattice cover of D' = {z^2 : z in D}; the
    branch point w = 0 is a lattice site.  ``scale`` is the length of the
    left side of D in units where the w-lattice has mesh 1.
    """

    alpha: float
    r: float
    scale: float
    split_left: float = 0.5
    split_bottom: float = 0.5


@dataclass(frozen=True)
class GluedExterior:
    r1: float
    r2: float

    def __post_init__(self):
        if not (0 < self.r1 < self.r2):
            raise ValueError("glued exterior needs 0 < r1 < r2")


# ---------------------------------------------------------------------------
# probability fields


@dataclass(frozen=True)
class Constant:
    p: float

    def __post_init__(self):
        check_probability(self.p)

    period = 1

    def table(self) -> np.ndarray:
        return np.full((1, 1), self.p)


@dataclass(frozen=True)
class Striated:
    """p2 off the bands, p2/ratio on them; bands tile the plane with a 6x4 block."""

    p2: float = STRIATED_P2
    tile: Tuple[Tuple[int, int], ...] = BAND_TILE
    tile_shape: Tuple[int, int] = (6, 4)
    ratio: float = 5.0
    period: int = 12

    def __post_init__(self):
        check_probability(self.p2)
        tx, ty = self.tile_shape
        if self.period % tx or self.period % ty:
            raise ValueError("tile must divide the period")

    @property
    def p1(self):
        return self.p2 / self.ratio

    def table(self) -> np.ndarray:
        """p over one period cell, indexed [y mod period, x mod period]."""
        n = self.period
        tx, ty = self.tile_shape
        out = np.full((n, n), self.p2)
        band = set(self.tile)
        for y in range(n):
            for x in range(n):
                if (x % tx, y % ty) in band:
                    out[y, x] = self.p1
        return out


def site_probabilities(field_, cells: np.ndarray) -> np.ndarray:
    tab = field_.table()
    n = tab.shape[0]
    return tab[np.mod(cells[:, 1], n), np.mod(cells[:, 0], n)]


# ---------------------------------------------------------------------------
# domains


@dataclass
class RasterPlan:
    """Row-segment description of a domain for the sweep kernels.

    Rows are visited in order.  ``row_seg[k]:row_seg[k+1]`` index the
    segments of row k; a segment covers patch columns ``seg_x0..seg_x1`` and
    either draws fresh sites starting at ``seg_site`` or (``seg_alias >= 0``)
    copies the state of an earlier marked cell.  ``row_link[k]`` is false when
    row k has no lattice bonds to row k-1.  Marks are cells whose cluster is
    needed after the sweep; they are sorted by (row, column).
    """

    width: int
    row_seg: np.ndarray
    row_link: np.ndarray
    row_gx: np.ndarray
    row_gy: np.ndarray
    seg_x0: np.ndarray
    seg_x1: np.ndarray
    seg_site: np.ndarray
    seg_alias: np.ndarray
    mark_row: np.ndarray
    mark_x: np.ndarray
    mark_site: np.ndarray
    mark_bits: np.ndarray
    edge_a: np.ndarray
    edge_b: np.ndarray
    diagonal: bool
    interval_bits: Dict[str, int]


@dataclass
class DiscreteDomain:
    cells: np.ndarray  # (n, 2) integer lattice coordinates
    coords: np.ndarray  # (n, 2) plane coordinates (z-plane for double covers)
    sheet: np.ndarray  # (n,) int8
    indptr: np.ndarray
    indices: np.ndarray
    intervals: Dict[str, np.ndarray]
    topology: str
    lattice: str = SQUARE
    plan: Optional[RasterPlan] = None
    patches: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    @property
    def n_sites(self) -> int:
        return int(self.cells.shape[0])

    def neighbors(self, i: int) -> np.ndarray:
        return self.indices[self.indptr[i]:self.indptr[i + 1]]

    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def interval(self, name: str) -> np.ndarray:
        try:
            return self.intervals[name]
        except KeyError:
            raise KeyError(f"domain has no boundary interval {name!r}; has {sorted(self.intervals)}") from None


@dataclass
class Configuration:
    open: np.ndarray

    def __len__(self):
        return int(self.open.shape[0])


def sample_configuration(dom: DiscreteDomain, field_, src: RandomSource) -> Configuration:
    """One draw per site, in site-index order; site i is open iff its uniform is below p(i)."""
    raw = src.raw_block(dom.n_sites)
    p = site_probabilities(field_, dom.cells)
    bits = 48 if src.kind == "lcg48" else 53
    thr = np.ceil(np.ldexp(p, bits))
    # raw < 2**53 is exactly representable, so the float compare is exact
    return Configuration(raw.astype(np.float64) < thr)


# ---------------------------------------------------------------------------
# geometry helpers


def _signed_area(v):
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _cross(ax, ay, bx, by):
    return ax * by - ay * bx


def segment_hits(p, q, a, b) -> np.ndarray:
    """Whether segments p[i]-q[i] meet the segment a-b (touching counts)."""
    p = np.asarray(p, float)
    q = np.asarray(q, float)
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    d1 = _cross(b[0] - a[0], b[1] - a[1], p[:, 0] - a[0], p[:, 1] - a[1])
    d2 = _cross(b[0] - a[0], b[1] - a[1], q[:, 0] - a[0], q[:, 1] - a[1])
    d3 = _cross(q[:, 0] - p[:, 0], q[:, 1] - p[:, 1], a[0] - p[:, 0], a[1] - p[:, 1])
    d4 = _cross(q[:, 0] - p[:, 0], q[:, 1] - p[:, 1], b[0] - p[:, 0], b[1] - p[:, 1])
    proper = (d1 * d2 <= 0) & (d3 * d4 <= 0)
    # exclude the collinear-but-disjoint case
    col = (d1 == 0) & (d2 == 0)
    if np.any(col):
        lo = np.minimum(a, b)
        hi = np.maximum(a, b)
        ov = (np.maximum(p, q) >= lo - 1e-12).all(axis=1) & (np.minimum(p, q) <= hi + 1e-12).all(axis=1)
        proper = np.where(col, ov, proper)
    return proper


def arc_hits(p, q, center, radius, ang0, ang1) -> np.ndarray:
    """Whether segments p-q cross the circular arc of ``radius`` from ang0 counter-clockwise to ang1."""
    p = np.asarray(p, float) - center
    d = np.asarray(q, float) - center - p
    A = np.einsum("ij,ij->i", d, d)
    B = 2 * np.einsum("ij,ij->i", p, d)
    C = np.einsum("ij,ij->i", p, p) - radius * radius
    disc = B * B - 4 * A * C
    ok = disc >= 0
    sq = np.sqrt(np.where(ok, disc, 0.0))
    span = (ang1 - ang0) % (2 * math.pi)
    if span == 0:
        span = 2 * math.pi
    hit = np.zeros(p.shape[0], bool)
    for sgn in (-1.0, 1.0):
        t = (-B + sgn * sq) / (2 * A)
        inside = ok & (t >= 0) & (t <= 1)
        pt = p + t[:, None] * d
        ang = np.arctan2(pt[:, 1], pt[:, 0])
        rel = (ang - ang0) % (2 * math.pi)
        hit |= inside & (rel <= span + 1e-12)
    return hit


# pieces: ("seg", a, b) or ("arc", center, radius, ang0, ang1)


def _piece_hits(piece, p, q):
    if piece[0] == "seg":
        return segment_hits(p, q, piece[1], piece[2])
    return arc_hits(p, q, np.asarray(piece[1], float), piece[2], piece[3], piece[4])


def _lerp(a, b, f):
    return tuple(np.asarray(a, float) + f * (np.asarray(b, float) - np.asarray(a, float)))


def quad_intervals(ll, ul, ur, lr, split_left=0.5, split_bottom=0.5):
    """Named boundary intervals of a quadrilateral with the given corners.

    left/right/top/bottom are the sides; ``left_upper`` runs from the split
    point of the left side to the upper-left corner and ``bottom_right``
    from the split point of the bottom to the lower-right corner (the
    diagonal crossing).  ``corner_ll`` (the rest of the left and bottom
    sides) and ``corner_ur`` (right plus top) are the complementary pair.
    """
    ml = _lerp(ll, ul, split_left)
    mb = _lerp(ll, lr, split_bottom)
    return {
        "left": [("seg", ll, ul)],
        "right": [("seg", lr, ur)],
        "top": [("seg", ul, ur)],
        "bottom": [("seg", ll, lr)],
        "left_upper": [("seg", ml, ul)],
        "bottom_right": [("seg", mb, lr)],
        "corner_ll": [("seg", ll, ml), ("seg", ll, mb)],
        "corner_ur": [("seg", lr, ur), ("seg", ul, ur)],
    }


_Q = math.pi / 4


def circle_intervals(radius, prefix):
    return {
        f"{prefix}_right": [("arc", (0.0, 0.0), radius, -_Q, _Q)],
        f"{prefix}_top": [("arc", (0.0, 0.0), radius, _Q, 3 * _Q)],
        f"{prefix}_left": [("arc", (0.0, 0.0), radius, 3 * _Q, 5 * _Q)],
        f"{prefix}_bottom": [("arc", (0.0, 0.0), radius, 5 * _Q, 7 * _Q)],
        prefix: [("arc", (0.0, 0.0), radius, 0.0, 2 * math.pi)],
    }


# ---------------------------------------------------------------------------
# patch assembly


@dataclass
class _Patch:
    mask: np.ndarray  # (H, W) bool, row 0 = lowest lattice row
    gx0: int
    gy0: int
    pos: Callable  # (gx, gy) int arrays -> (n, 2) positions in region coordinates
    sheet: int = 0
    alias: Dict[Tuple[int, int], Tuple[int, int, int]] = field(default_factory=dict)  # (row, col) -> (patch, row, col)
    no_link_rows: Tuple[int, ...] = ()
    outside_pos: Optional[Callable] = None  # (inside positions, gx, gy) -> outside positions
    sid: Optional[np.ndarray] = None


class _Assembler:
    def __init__(self, lattice, intervals, topology):
        self.lattice = lattice
        self.steps = lattice_steps(lattice)
        self.intervals = intervals  # name -> list of pieces
        self.topology = topology
        self.patches: List[_Patch] = []
        self.extra: List[Tuple[Tuple[int, int, int], Tuple[int, int, int]]] = []

    def add(self, patch: _Patch) -> int:
        self.patches.append(patch)
        return len(self.patches) - 1

    def add_edge(self, a, b):
        self.extra.append((a, b))

    def build(self, meta=None) -> DiscreteDomain:
        # 1. site numbering: raster order, aliases take their target's index
        n = 0
        for pt in self.patches:
            amask = _alias_mask(pt)
            own = pt.mask & ~amask
            sid = np.full(pt.mask.shape, -1, np.int64)
            k = int(own.sum())
            sid[own] = np.arange(n, n + k)
            n += k
            for (y, x), (q, qy, qx) in pt.alias.items():
                tgt = self.patches[q].sid[qy, qx] if self.patches[q].sid is not None else -1
                if tgt < 0:
                    raise ValueError("alias target is not an earlier site")
                sid[y, x] = tgt
            pt.sid = sid
        if n == 0:
            raise EmptyDomainError("region contains no lattice sites")

        cells = np.zeros((n, 2), np.int64)
        coords = np.zeros((n, 2))
        sheet = np.zeros(n, np.int8)
        for pt in self.patches:
            ys, xs = np.nonzero(pt.mask & ~_alias_mask(pt))
            s = pt.sid[ys, xs]
            gx, gy = xs + pt.gx0, ys + pt.gy0
            cells[s, 0], cells[s, 1] = gx, gy
            coords[s] = pt.pos(gx, gy)
            sheet[s] = pt.sheet

        # 2. bonds
        ea, eb = [], []
        for pt in self.patches:
            H, W = pt.mask.shape
            nolink = set(pt.no_link_rows)
            for dx, dy in self.steps:
                if dy < 0 or (dy == 0 and dx < 0):
                    continue
                y0, y1 = 0, H - dy
                x0, x1 = max(0, -dx), W - max(0, dx)
                a = pt.sid[y0:y1, x0:x1]
                b = pt.sid[y0 + dy:y1 + dy, x0 + dx:x1 + dx]
                ok = (a >= 0) & (b >= 0)
                if dy == 1 and nolink:
                    rows = np.array([(y + 1) in nolink for y in range(y0, y1)], bool)
                    ok &= ~rows[:, None]
                ea.append(a[ok])
                eb.append(b[ok])
        for (pa, ya, xa), (pb, yb, xb) in self.extra:
            ea.append(np.array([self.patches[pa].sid[ya, xa]]))
            eb.append(np.array([self.patches[pb].sid[yb, xb]]))
        ea = np.concatenate(ea) if ea else np.zeros(0, np.int64)
        eb = np.concatenate(eb) if eb else np.zeros(0, np.int64)
        keep = ea != eb
        ea, eb = ea[keep], eb[keep]
        lo, hi = np.minimum(ea, eb), np.maximum(ea, eb)
        pairs = np.unique(lo * n + hi)
        lo, hi = pairs // n, pairs % n
        src = np.concatenate([lo, hi])
        dst = np.concatenate([hi, lo])
        order = np.lexsort((dst, src))
        src, dst = src[order], dst[order]
        indptr = np.zeros(n + 1, np.int64)
        np.add.at(indptr, src + 1, 1)
        indptr = np.cumsum(indptr)
        indices = dst.astype(np.int64)

        # 3. boundary intervals
        names = list(self.intervals)
        members = {k: set() for k in names}
        for pt in self.patches:
            H, W = pt.mask.shape
            for dx, dy in self.steps:
                ys, xs = np.nonzero(pt.mask)
                ny, nx = ys + dy, xs + dx
                inside = (ny >= 0) & (ny < H) & (nx >= 0) & (nx < W)
                outside = np.ones(ys.size, bool)
                outside[inside] = ~pt.mask[ny[inside], nx[inside]]
                if not outside.any():
                    continue
                ys, xs = ys[outside], xs[outside]
                gx, gy = xs + pt.gx0, ys + pt.gy0
                p = pt.pos(gx, gy)
                if pt.outside_pos is not None:
                    q = pt.outside_pos(p, gx + dx, gy + dy)
                else:
                    q = pt.pos(gx + dx, gy + dy)
                for name in names:
                    hit = np.zeros(ys.size, bool)
                    for piece in self.intervals[name]:
                        hit |= _piece_hits(piece, p, q)
                    members[name].update(pt.sid[ys[hit], xs[hit]].tolist())
        intervals = {k: np.array(sorted(v), np.int64) for k, v in members.items()}

        dom = DiscreteDomain(cells=cells, coords=coords, sheet=sheet, indptr=indptr, indices=indices,
                             intervals=intervals, topology=self.topology, lattice=self.lattice,
                             patches=self.patches, meta=dict(meta or {}))
        dom.plan = self._plan(dom, names)
        return dom

    def _plan(self, dom, names) -> RasterPlan:
        if len(names) > 62:
            raise ValueError("too many intervals for the sweep kernel")
        ibit = {k: 1 << i for i, k in enumerate(names)}
        site_bits = np.zeros(dom.n_sites, np.int64)
        for k, idx in dom.intervals.items():
            site_bits[idx] |= ibit[k]

        # which cells must be marked
        need = [set() for _ in self.patches]
        for pi, pt in enumerate(self.patches):
            for (y, x), (q, qy, qx) in pt.alias.items():
                need[pi].add((y, x))
                need[q].add((qy, qx))
        for (pa, ya, xa), (pb, yb, xb) in self.extra:
            need[pa].add((ya, xa))
            need[pb].add((yb, xb))
        for pi, pt in enumerate(self.patches):
            ys, xs = np.nonzero(pt.mask & ~_alias_mask(pt))
            sel = site_bits[pt.sid[ys, xs]] != 0
            need[pi].update(zip(ys[sel].tolist(), xs[sel].tolist()))

        row_seg = [0]
        row_link, row_gx, row_gy = [], [], []
        seg_x0, seg_x1, seg_site, seg_alias = [], [], [], []
        mark_row, mark_x, mark_site, mark_bits = [], [], [], []
        mark_index = {}
        pending_alias = []  # (segment position, (patch, row, col) of target)
        width = max(pt.mask.shape[1] for pt in self.patches)
        row_counter = 0
        for pi, pt in enumerate(self.patches):
            H, W = pt.mask.shape
            nolink = set(pt.no_link_rows)
            amask = _alias_mask(pt)
            own = np.zeros((H, W + 2), np.int8)
            own[:, 1:-1] = pt.mask & ~amask
            edges = np.diff(own, axis=1)
            by_row: Dict[int, list] = {}
            for y, x in need[pi]:
                by_row.setdefault(y, []).append(x)
            for y in range(H):
                starts = np.nonzero(edges[y] == 1)[0]
                stops = np.nonzero(edges[y] == -1)[0] - 1
                segs = [(int(a), int(b), False) for a, b in zip(starts, stops)]
                segs += [(int(x), int(x), True) for x in np.nonzero(amask[y])[0]]
                segs.sort()
                for a, b, is_alias in segs:
                    seg_x0.append(a)
                    seg_x1.append(b)
                    seg_site.append(int(pt.sid[y, a]))
                    seg_alias.append(-2 if is_alias else -1)
                    if is_alias:
                        pending_alias.append((len(seg_alias) - 1, pt.alias[(y, a)]))
                row_seg.append(len(seg_x0))
                row_link.append(y > 0 and y not in nolink)
                row_gx.append(pt.gx0)
                row_gy.append(pt.gy0 + y)
                for x in sorted(by_row.get(y, ())):
                    mark_index[(pi, y, x)] = len(mark_row)
                    mark_row.append(row_counter)
                    mark_x.append(x)
                    s = int(pt.sid[y, x])
                    mark_site.append(s)
                    mark_bits.append(0 if amask[y, x] else int(site_bits[s]))
                row_counter += 1
        for pos, tgt in pending_alias:
            seg_alias[pos] = mark_index[tgt]
        ea, eb = [], []
        for pi, pt in enumerate(self.patches):
            for (y, x), tgt in pt.alias.items():
                ea.append(mark_index[(pi, y, x)])
                eb.append(mark_index[tgt])
        for a, b in self.extra:
            ea.append(mark_index[a])
            eb.append(mark_index[b])

        # draws must be consumed in site-index order
        fresh = [(s, a, b) for s, a, b, al in zip(seg_site, seg_x0, seg_x1, seg_alias) if al < 0]
        nxt = 0
        for s, a, b in fresh:
            if s != nxt:
                raise AssertionError("segment order does not follow site order")
            nxt += b - a + 1
        assert nxt == dom.n_sites

        i64 = lambda v: np.asarray(v, np.int64)
        return RasterPlan(width=width, row_seg=i64(row_seg), row_link=np.asarray(row_link, np.bool_),
                          row_gx=i64(row_gx), row_gy=i64(row_gy), seg_x0=i64(seg_x0), seg_x1=i64(seg_x1),
                          seg_site=i64(seg_site), seg_alias=i64(seg_alias), mark_row=i64(mark_row),
                          mark_x=i64(mark_x), mark_site=i64(mark_site), mark_bits=i64(mark_bits),
                          edge_a=i64(ea), edge_b=i64(eb), diagonal=self.lattice == TRIANGULAR,
                          interval_bits=ibit)


def _alias_mask(pt: _Patch) -> np.ndarray:
    m = np.zeros(pt.mask.shape, bool)
    for y, x in pt.alias:
        m[y, x] = True
    return m


# ---------------------------------------------------------------------------
# builders


def _grid_patch(contains, bbox, mesh, offset, lattice_pos=None) -> _Patch:
    """Patch of lattice points mesh*(i+ox, j+oy) inside ``bbox`` for which ``contains`` holds."""
    (xmin, ymin), (xmax, ymax) = bbox
    ox, oy = offset
    i0 = int(math.floor(xmin / mesh - ox)) - 1
    i1 = int(math.ceil(xmax / mesh - ox)) + 1
    j0 = int(math.floor(ymin / mesh - oy)) - 1
    j1 = int(math.ceil(ymax / mesh - oy)) + 1
    ii = np.arange(i0, i1 + 1)
    jj = np.arange(j0, j1 + 1)
    X, Y = np.meshgrid((ii + ox) * mesh, (jj + oy) * mesh)
    mask = contains(X, Y)
    if not mask.any():
        raise EmptyDomainError("region contains no lattice sites")
    rows = np.nonzero(mask.any(axis=1))[0]
    cols = np.nonzero(mask.any(axis=0))[0]
    mask = mask[rows[0]:rows[-1] + 1, cols[0]:cols[-1] + 1]
    gx0, gy0 = int(ii[cols[0]]), int(jj[rows[0]])

    def pos(gx, gy):
        return np.stack([(np.asarray(gx) + ox) * mesh, (np.asarray(gy) + oy) * mesh], axis=-1).astype(float)

    return _Patch(mask=np.ascontiguousarray(mask), gx0=gx0, gy0=gy0, pos=pos)


def _point_in_convex(X, Y, corners):
    """Strict interior test for a clockwise convex polygon."""
    inside = np.ones(X.shape, bool)
    m = len(corners)
    for k in range(m):
        ax, ay = corners[k]
        bx, by = corners[(k + 1) % m]
        # clockwise: interior is to the right of each directed edge
        inside &= _cross(bx - ax, by - ay, X - ax, Y - ay) < 0
    return inside


def build_domain(region, lat: str = SQUARE, mesh: float = 1.0) -> DiscreteDomain:
    """Sites of ``lat`` with spacing ``mesh`` strictly inside ``region``."""
    lattice_steps(lat)
    if not mesh > 0:
        raise ValueError("mesh must be positive")
    if isinstance(region, Rectangle):
        W, H = region.width, region.height
        corners = [(0.0, 0.0), (0.0, H), (W, H), (W, 0.0)]
        contains = lambda X, Y: (X > 0) & (X < W) & (Y > 0) & (Y < H)
        asm = _Assembler(lat, quad_intervals(*corners), "planar")
        asm.add(_grid_patch(contains, ((0, 0), (W, H)), mesh, (0.5, 0.5)))
        return asm.build({"region": region, "mesh": mesh})
    if isinstance(region, Parallelogram):
        c = region.corners()
        corners = [tuple(v) for v in c]
        asm = _Assembler(lat, quad_intervals(*corners, region.split_left, region.split_bottom), "planar")
        contains = lambda X, Y: _point_in_convex(X, Y, corners)
        asm.add(_grid_patch(contains, (c.min(axis=0), c.max(axis=0)), mesh, (0.0, 0.0)))
        return asm.build({"region": region, "mesh": mesh})
    if isinstance(region, Annulus):
        r1, r2 = region.r1, region.r2
        ivs = {**circle_intervals(r1, "inner"), **circle_intervals(r2, "outer")}
        asm = _Assembler(lat, ivs, "planar")
        contains = lambda X, Y: (X * X + Y * Y > r1 * r1) & (X * X + Y * Y < r2 * r2)
        asm.add(_grid_patch(contains, ((-r2, -r2), (r2, r2)), mesh, (0.0, 0.0)))
        return asm.build({"region": region, "mesh": mesh})
    if isinstance(region, Disk):
        R = region.radius
        asm = _Assembler(lat, circle_intervals(R, "outer"), "planar")
        asm.add(_grid_patch(lambda X, Y: X * X + Y * Y < R * R, ((-R, -R), (R, R)), mesh, (0.0, 0.0)))
        return asm.build({"region": region, "mesh": mesh})
    if isinstance(region, CylinderRect):
        return build_cylinder(region, lat)
    if isinstance(region, GluedExterior):
        return build_glued_exterior(region.r1, region.r2)
    if isinstance(region, BranchedParallelogram):
        return build_branched_double_cover(region)
    if isinstance(region, TorusCell):
        return build_torus(region.Lx, region.Ly)
    raise TypeError(f"unsupported region {region!r}")


def build_cylinder(region: CylinderRect, lat: str = SQUARE) -> DiscreteDomain:
    """Sites (i+1/2, j+1/2), 0 <= i < width, 0 <= j < height, rows j and height-1 joined."""
    W, H = region.width, region.height
    k = len(region.order)
    ivs = {}
    for side, x in (("l", 0.0), ("r", float(W))):
        for q, name in enumerate(region.order):
            ivs[f"{side}_{name}"] = [("seg", (x, H * q / k), (x, H * (q + 1) / k))]
    asm = _Assembler(lat, ivs, "periodic-y")
    contains = lambda X, Y: (X > 0) & (X < W) & (Y > 0) & (Y < H)
    pi = asm.add(_grid_patch(contains, ((0, 0), (W, H)), 1.0, (0.5, 0.5)))
    pt = asm.patches[pi]
    Hm, Wm = pt.mask.shape
    for x in range(Wm):
        asm.add_edge((pi, Hm - 1, x), (pi, 0, x))
        if lat == TRIANGULAR and x + 1 < Wm:
            asm.add_edge((pi, Hm - 1, x), (pi, 0, x + 1))
    dom = asm.build({"region": region})
    dom.meta["period"] = H
    return dom


def build_torus(Lx: int, Ly: int) -> DiscreteDomain:
    """Square-lattice torus; site (x, y) has index y*Lx + x."""
    if Lx < 2 or Ly < 2:
        raise ValueError("torus needs Lx, Ly >= 2")
    ys, xs = np.divmod(np.arange(Lx * Ly), Lx)
    nb = np.stack([ys * Lx + (xs + 1) % Lx, ys * Lx + (xs - 1) % Lx,
                   ((ys + 1) % Ly) * Lx + xs, ((ys - 1) % Ly) * Lx + xs], axis=1)
    rows = [np.unique(r) for r in nb]
    indptr = np.zeros(Lx * Ly + 1, np.int64)
    indptr[1:] = np.cumsum([len(r) for r in rows])
    indices = np.concatenate(rows).astype(np.int64)
    cells = np.stack([xs, ys], axis=1).astype(np.int64)
    return DiscreteDomain(cells=cells, coords=cells.astype(float), sheet=np.zeros(Lx * Ly, np.int8),
                          indptr=indptr, indices=indices, intervals={}, topology="torus",
                          meta={"Lx": Lx, "Ly": Ly})


def build_glued_exterior(r1: float, r2: float) -> DiscreteDomain:
    """Annulus r1 < |z| < r2 glued along its outer ring to an auxiliary disk |z| < r2.

    The ring is the set of annulus sites with a lattice neighbour outside
    radius r2; the disk's copies of those sites are the same sites.
    """
    GluedExterior(r1, r2)
    ivs = circle_intervals(r1, "inner")
    asm = _Assembler(SQUARE, ivs, "glued")
    ann = _grid_patch(lambda X, Y: (X * X + Y * Y > r1 * r1) & (X * X + Y * Y < r2 * r2),
                      ((-r2, -r2), (r2, r2)), 1.0, (0.0, 0.0))
    disk = _grid_patch(lambda X, Y: X * X + Y * Y < r2 * r2, ((-r2, -r2), (r2, r2)), 1.0, (0.0, 0.0))
    disk.sheet = 1
    if (ann.gx0, ann.gy0, ann.mask.shape) != (disk.gx0, disk.gy0, disk.mask.shape):
        raise AssertionError("annulus and disk grids differ")
    ai = asm.add(ann)
    H, W = ann.mask.shape
    ring = np.zeros_like(ann.mask)
    for dx, dy in _SQUARE_STEPS:
        sh = np.zeros_like(ann.mask)
        ys, xs = np.nonzero(ann.mask)
        gx, gy = xs + ann.gx0 + dx, ys + ann.gy0 + dy
        out = gx * gx + gy * gy >= r2 * r2
        ring[ys[out], xs[out]] = True
    for y, x in zip(*np.nonzero(ring)):
        disk.alias[(int(y), int(x))] = (ai, int(y), int(x))
    asm.add(disk)
    dom = asm.build({"region": GluedExterior(r1, r2)})
    dom.meta["ring"] = int(ring.sum())
    return dom


def _branched_sqrt(gx, gy):
    """Sheet-0 square root of w = gx + i*gy: principal branch, with the
    negative real axis taken from above (sqrt(-k) = i*sqrt(k))."""
    w = np.asarray(gx, float) + 1j * np.asarray(gy, float)
    z = np.sqrt(w)
    neg = (np.asarray(gy) == 0) & (np.asarray(gx) < 0)
    z = np.where(neg, 1j * np.sqrt(np.abs(np.asarray(gx, float))), z)
    return z


def branched_corners(spec: BranchedParallelogram) -> np.ndarray:
    a = spec.alpha * math.pi
    ell = spec.scale
    up = ell * np.array([math.cos(a), math.sin(a)])
    bot = np.array([spec.r * ell, 0.0])
    ll = -(up + bot) / 2
    return np.array([ll, ll + up, ll + up + bot, ll + bot])


def build_branched_double_cover(spec: BranchedParallelogram) -> DiscreteDomain:
    """Two-sheeted cover of D' = {z^2 : z in D} on the w-lattice, branch point w = 0 a site.

    A site (w, s) stands for z = (-1)^s sqrt(w).  Bonds between rows -1 and 0
    left of the origin cross the cut and swap sheets.  The branch point is a
    single site whose neighbours are those of w = 0 on both sheets (eight).
    """
    if not (0 < spec.alpha < 1 and spec.r > 0 and spec.scale > 0):
        raise ValueError("need 0 < alpha < 1, r > 0, scale > 0")
    c = branched_corners(spec)
    corners = [tuple(v) for v in c]
    if not _point_in_convex(np.zeros(1), np.zeros(1), corners)[0]:
        raise ValueError("branch point is not interior to the parallelogram")
    R = float(np.max(np.sum(c * c, axis=1)))  # |w| = |z|^2 <= R
    ivs = quad_intervals(*corners, spec.split_left, spec.split_bottom)
    asm = _Assembler(SQUARE, ivs, "double-cover")

    def contains(X, Y):
        z = _branched_sqrt(np.rint(X).astype(np.int64), np.rint(Y).astype(np.int64))
        return _point_in_convex(z.real, z.imag, corners) | ((X == 0) & (Y == 0))

    patches = []
    for s in (0, 1):
        pt = _grid_patch(contains, ((-R, -R), (R, R)), 1.0, (0.0, 0.0))
        sign = 1.0 if s == 0 else -1.0

        def pos(gx, gy, sign=sign):
            z = sign * _branched_sqrt(gx, gy)
            return np.stack([z.real, z.imag], axis=-1)

        def outside_pos(p, gx, gy):
            z1 = p[:, 0] + 1j * p[:, 1]
            z2 = _branched_sqrt(gx, gy)
            z2 = np.where(np.abs(z2 - z1) <= np.abs(-z2 - z1), z2, -z2)
            return np.stack([z2.real, z2.imag], axis=-1)

        pt.pos = pos
        pt.outside_pos = outside_pos
        pt.sheet = s
        pt.no_link_rows = (-pt.gy0,)  # row of w-lattice y = 0: no bonds to y = -1 inside a sheet
        patches.append(pt)
    p0, p1 = patches
    oy, ox = -p0.gy0, -p0.gx0  # patch row/col of w = 0
    if not p0.mask[oy, ox]:
        raise ValueError("branch point is not interior to the parallelogram")
    p1.alias[(oy, ox)] = (0, oy, ox)
    i0 = asm.add(p0)
    i1 = asm.add(p1)
    H, W = p0.mask.shape
    ym = oy - 1  # row of y = -1
    for x in range(W):
        if ym < 0 or not (p0.mask[oy, x] and p0.mask[ym, x]):
            continue
        gx = x + p0.gx0
        if gx >= 0:
            asm.add_edge((i0, ym, x), (i0, oy, x))
            asm.add_edge((i1, ym, x), (i1, oy, x))
        else:
            asm.add_edge((i0, ym, x), (i1, oy, x))
            asm.add_edge((i1, ym, x), (i0, oy, x))
    dom = asm.build({"region": spec})
    dom.meta["branch_site"] = int(p0.sid[oy, ox])
    return dom


def branched_scale_for_sites(alpha: float, r: float, sites: float) -> float:
    """Left-side length of D for which the double cover has about ``sites`` sites.

    The cover has two sites per lattice point of D', whose area is half the
    integral of |2z|^2 over D; that integral scales as scale**4.
    """
    spec = BranchedParallelogram(alpha, r, 1.0)
    c = branched_corners(spec)
    # integral of |z|^2 over a parallelogram centred at 0 with edge vectors u, v
    u, v = c[3] - c[0], c[1] - c[0]
    area = abs(u[0] * v[1] - u[1] * v[0])
    second = area * (u @ u + v @ v) / 12.0
    cover_sites = 2.0 * 0.5 * 4.0 * second
    return (sites / cover_sites) ** 0.25
