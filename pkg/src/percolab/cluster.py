"""Clusters of open sites, crossing events, and winding classes on the torus.

The functions here work on the generic neighbour lists of a
:class:`~percolab.lattice.DiscreteDomain` and serve as the reference
implementation.  Replica loops use the compiled sweeps in
:mod:`percolab.sweep` and :func:`torus_replicas`, which are checked against
these.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Iterable, Mapping, Optional, Set, Tuple

import numpy as np
from numba import njit

from .lattice import Configuration, DiscreteDomain
from .rng import _GOLD, _MASK, lcg_next_nb, mix64_nb

DEFAULT_CROSSINGS = {
    "h": ("left", "right"),
    "v": ("bottom", "top"),
    "d": ("left_upper", "bottom_right"),
    "dbar": ("corner_ll", "corner_ur"),
}


class ContractError(ValueError):
    """An argument violates an operation's precondition."""


# ---------------------------------------------------------------------------
# labelling


@njit(cache=True)
def _uf_find(par, a):
    r = a
    while par[r] != r:
        r = par[r]
    while par[a] != r:
        nxt = par[a]
        par[a] = r
        a = nxt
    return r


@njit(cache=True)
def _uf_label(indptr, indices, is_open, par, rank):
    n = par.shape[0]
    for i in range(n):
        par[i] = i
        rank[i] = 0
    for i in range(n):
        if not is_open[i]:
            continue
        for k in range(indptr[i], indptr[i + 1]):
            j = indices[k]
            if j <= i or not is_open[j]:
                continue
            ri = _uf_find(par, i)
            rj = _uf_find(par, j)
            if ri == rj:
                continue
            if rank[ri] < rank[rj]:
                ri, rj = rj, ri
            par[rj] = ri
            if rank[ri] == rank[rj]:
                rank[ri] += 1
    for i in range(n):
        _uf_find(par, i)


@njit(cache=True)
def _torus_label(Lx, Ly, is_open, par, rank, off, wrap_site, wrap_vec):
    """Union-find with lift offsets; returns the number of wrap records written."""
    n = Lx * Ly
    for i in range(n):
        par[i] = i
        rank[i] = 0
        off[i, 0] = 0
        off[i, 1] = 0
    nw = 0
    for i in range(n):
        if not is_open[i]:
            continue
        x = i % Lx
        y = i // Lx
        for d in range(2):
            if d == 0:
                j = y * Lx + (x + 1) % Lx
                sx, sy = 1, 0
            else:
                j = ((y + 1) % Ly) * Lx + x
                sx, sy = 0, 1
            if not is_open[j]:
                continue
            ri, oix, oiy = _off_find(par, off, i)
            rj, ojx, ojy = _off_find(par, off, j)
            dx = oix + sx - ojx
            dy = oiy + sy - ojy
            if ri == rj:
                if dx != 0 or dy != 0:
                    wrap_site[nw] = ri
                    wrap_vec[nw, 0] = dx // Lx
                    wrap_vec[nw, 1] = dy // Ly
                    nw += 1
                continue
            # lift(rj) - lift(ri) = dx, dy
            if rank[ri] < rank[rj]:
                par[ri] = rj
                off[ri, 0] = -dx
                off[ri, 1] = -dy
            else:
                par[rj] = ri
                off[rj, 0] = dx
                off[rj, 1] = dy
                if rank[ri] == rank[rj]:
                    rank[ri] += 1
    return nw


@njit(cache=True)
def _off_find(par, off, a):
    # total offset of a relative to its root, then compress
    r = a
    tx = 0
    ty = 0
    while par[r] != r:
        tx += off[r, 0]
        ty += off[r, 1]
        r = par[r]
    cx, cy = tx, ty
    while par[a] != r:
        nxt = par[a]
        ox, oy = off[a, 0], off[a, 1]
        par[a] = r
        off[a, 0] = cx
        off[a, 1] = cy
        cx -= ox
        cy -= oy
        a = nxt
    return r, tx, ty


@dataclass
class ClusterLabeling:
    parent: np.ndarray
    rank: np.ndarray
    open: np.ndarray
    displacement: Optional[np.ndarray] = None  # lift offset of each site from its root (torus)
    wraps: Optional[Dict[int, Set[Tuple[int, int]]]] = None

    def find(self, i: int) -> int:
        p = self.parent
        r = i
        while p[r] != r:
            r = p[r]
        return int(r)

    def labels(self) -> np.ndarray:
        """Cluster id per site (-1 for closed sites), numbered by smallest member."""
        roots = _roots(self.parent)
        out = np.full(roots.shape[0], -1, np.int64)
        ids = {}
        for i in np.nonzero(self.open)[0]:
            out[i] = ids.setdefault(int(roots[i]), len(ids))
        return out

    @property
    def n_clusters(self) -> int:
        return int(np.unique(_roots(self.parent)[self.open]).size)


@njit(cache=True)
def _roots_nb(par, out):
    for i in range(par.shape[0]):
        r = i
        while par[r] != r:
            r = par[r]
        out[i] = r


def _roots(par):
    out = np.empty(par.shape[0], np.int64)
    _roots_nb(par, out)
    return out


def _check_cfg(dom, cfg):
    if len(cfg) != dom.n_sites:
        raise ContractError(f"configuration has {len(cfg)} sites, domain has {dom.n_sites}")


def label_clusters(dom: DiscreteDomain, cfg: Configuration) -> ClusterLabeling:
    _check_cfg(dom, cfg)
    n = dom.n_sites
    is_open = np.ascontiguousarray(cfg.open, dtype=np.bool_)
    par = np.empty(n, np.int64)
    rank = np.empty(n, np.int64)
    if dom.topology == "torus":
        Lx, Ly = dom.meta["Lx"], dom.meta["Ly"]
        off = np.empty((n, 2), np.int64)
        ws = np.empty(2 * n, np.int64)
        wv = np.empty((2 * n, 2), np.int64)
        nw = _torus_label(Lx, Ly, is_open, par, rank, off, ws, wv)
        for i in range(n):
            _off_find(par, off, i)
        wraps: Dict[int, Set[Tuple[int, int]]] = {}
        for k in range(nw):
            wraps.setdefault(int(_uf_find(par, ws[k])), set()).add((int(wv[k, 0]), int(wv[k, 1])))
        return ClusterLabeling(par, rank, is_open, off, wraps)
    _uf_label(dom.indptr, dom.indices, is_open, par, rank)
    return ClusterLabeling(par, rank, is_open)


# ---------------------------------------------------------------------------
# crossings


@dataclass(frozen=True)
class CrossingBattery:
    h: bool
    v: bool
    hv: bool
    d: Optional[bool] = None
    dbar: Optional[bool] = None


def connects(lab: ClusterLabeling, a: np.ndarray, b: np.ndarray) -> bool:
    """Whether one cluster contains an open site of ``a`` and an open site of ``b``."""
    roots = _roots(lab.parent)
    ra = set(roots[a[lab.open[a]]].tolist())
    if not ra:
        return False
    return any(r in ra for r in roots[b[lab.open[b]]].tolist())


def crossing_battery(dom: DiscreteDomain, cfg: Configuration,
                     defs: Optional[Mapping[str, Tuple[str, str]]] = None,
                     labeling: Optional[ClusterLabeling] = None) -> CrossingBattery:
    """Crossing flags for the interval pairs in ``defs`` (default: the four sides and the diagonal halves).

    ``hv`` means both a horizontal and a vertical crossing occur, not
    necessarily through the same cluster.
    """
    defs = dict(DEFAULT_CROSSINGS if defs is None else defs)
    for key, pair in defs.items():
        if key not in DEFAULT_CROSSINGS:
            raise ContractError(f"unknown crossing {key!r}")
        for name in pair:
            if name not in dom.intervals:
                raise ContractError(f"domain has no boundary interval {name!r}")
    if "h" not in defs or "v" not in defs:
        raise ContractError("crossing definitions need at least h and v")
    lab = labeling if labeling is not None else label_clusters(dom, cfg)
    flags = {k: connects(lab, dom.intervals[a], dom.intervals[b]) for k, (a, b) in defs.items()}
    return CrossingBattery(h=flags["h"], v=flags["v"], hv=flags["h"] and flags["v"],
                           d=flags.get("d"), dbar=flags.get("dbar"))


# ---------------------------------------------------------------------------
# winding on the torus


@dataclass(frozen=True)
class HomologySubgroup:
    kind: str  # "trivial", "cyclic" or "full"
    m: int = 0
    n: int = 0

    def __post_init__(self):
        if self.kind not in ("trivial", "cyclic", "full"):
            raise ValueError(f"bad subgroup kind {self.kind!r}")
        if self.kind == "cyclic":
            if math.gcd(abs(self.m), abs(self.n)) != 1 or not (self.m > 0 or (self.m == 0 and self.n == 1)):
                raise ValueError(f"cyclic generator ({self.m},{self.n}) is not primitive and normalised")

    @classmethod
    def cyclic(cls, m: int, n: int) -> "HomologySubgroup":
        g = math.gcd(abs(m), abs(n))
        if g == 0:
            raise ValueError("zero vector does not generate a cyclic subgroup")
        m, n = m // g, n // g
        if m < 0 or (m == 0 and n < 0):
            m, n = -m, -n
        return cls("cyclic", m, n)

    def __str__(self):
        if self.kind == "cyclic":
            return f"({self.m},{self.n})"
        return self.kind


TRIVIAL = HomologySubgroup("trivial")
FULL = HomologySubgroup("full")


def wrapping_vectors(dom: DiscreteDomain, cfg: Configuration) -> Dict[int, Set[Tuple[int, int]]]:
    """Winding vectors found while labelling, keyed by cluster root.

    Each entry is the lift mismatch of a bond that closes a non-contractible
    loop, in units of the torus periods.  Signs and multiples are kept raw.
    """
    if dom.topology != "torus":
        raise ContractError("wrapping vectors need a torus domain")
    return label_clusters(dom, cfg).wraps


def hermite_normal_form(vectors: Iterable[Tuple[int, int]]):
    """Row-style HNF basis of the integer span: [] , [(a, b)] or [(a, b), (0, c)]."""
    rows = [list(v) for v in vectors if v[0] != 0 or v[1] != 0]
    basis = []
    for col in (0, 1):
        piv = [r for r in rows if r[col] != 0]
        rest = [r for r in rows if r[col] == 0]
        while len(piv) > 1:
            piv.sort(key=lambda r: abs(r[col]))
            p = piv[0]
            nxt = [p]
            for r in piv[1:]:
                q = r[col] // p[col]
                r = [r[0] - q * p[0], r[1] - q * p[1]]
                (nxt if r[col] != 0 else rest).append(r)
            piv = nxt
        if piv:
            p = piv[0]
            if p[col] < 0:
                p = [-p[0], -p[1]]
            basis.append(tuple(p))
        rows = [r for r in rest if r[0] != 0 or r[1] != 0]
    if len(basis) == 2:
        a, b = basis[0]
        c = basis[1][1]
        basis[0] = (a, b % c)
    return basis


def image_subgroup(vectors) -> HomologySubgroup:
    """Classify the span of winding vectors (all clusters of one configuration).

    Accepts a flat iterable of vectors or the mapping returned by
    :func:`wrapping_vectors`.  A rank-one span is reported by its primitive
    direction even when the vectors themselves are multiples of it.
    """
    if isinstance(vectors, Mapping):
        vectors = [v for vs in vectors.values() for v in vs]
    basis = hermite_normal_form(vectors)
    if not basis:
        return TRIVIAL
    if len(basis) == 2:
        return FULL
    return HomologySubgroup.cyclic(*basis[0])


# ---------------------------------------------------------------------------
# replica loop on the torus

KIND_TRIVIAL, KIND_CYCLIC, KIND_FULL = 0, 1, 2


@njit(cache=True, nogil=True)
def torus_replicas(Lx, Ly, thr, lcg, bases, kind, gm, gn, nonprim):
    """Sample and classify one torus configuration per stream base.

    Writes the subgroup kind and (for cyclic) the primitive generator, plus
    a flag for replicas whose raw winding vectors include a non-primitive one.
    """
    n = Lx * Ly
    is_open = np.empty(n, np.bool_)
    par = np.empty(n, np.int64)
    rank = np.empty(n, np.int64)
    off = np.empty((n, 2), np.int64)
    ws = np.empty(2 * n, np.int64)
    wv = np.empty((2 * n, 2), np.int64)
    for rep in range(bases.shape[0]):
        key = bases[rep]
        if lcg:
            key = key & _MASK
        for i in range(n):
            if lcg:
                key = lcg_next_nb(key)
                u = key
            else:
                key += _GOLD
                u = mix64_nb(key) >> np.uint64(11)
            is_open[i] = u < thr
        nw = _torus_label(Lx, Ly, is_open, par, rank, off, ws, wv)
        rk = 0
        am = 0
        an = 0
        bad = 0
        for k in range(nw):
            x = wv[k, 0]
            y = wv[k, 1]
            g = _gcd(abs(x), abs(y))
            if g != 1:
                bad = 1
            x //= g
            y //= g
            if x < 0 or (x == 0 and y < 0):
                x = -x
                y = -y
            if rk == 0:
                rk = 1
                am = x
                an = y
            elif rk == 1 and (x != am or y != an):
                rk = 2
        kind[rep] = rk
        gm[rep] = am
        gn[rep] = an
        nonprim[rep] = bad


@njit(cache=True)
def _gcd(a, b):
    while b:
        a, b = b, a % b
    return a
