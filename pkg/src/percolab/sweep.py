"""Compiled replica loops.

``sweep_events`` runs a row-by-row cluster labelling over a
:class:`~percolab.lattice.RasterPlan`.  Each row is sampled into a packed
bit mask, split into runs of open sites, and runs are merged with the
overlapping runs of the previous row in a union-find over run labels.
Boundary-interval membership travels with the roots as a bit set, so an
event "some cluster touches A and B" is read off the marked cells after
the sweep.  Memory is O(width + number of runs); no per-site arrays.

``radial_events`` is a lazy alternative for radial crossings of annuli: it
samples only the sites reached by a search from the inner circle and stops
once the outermost circle is reached.  Its uniforms are keyed by lattice
cell rather than drawn in site order, so nested annuli share one
configuration and a single search answers every radius.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .rng import _GOLD, _MASK, lcg_next_nb, mix64_nb

_DEBRUIJN = np.uint64(0x03F79D71B4CB0A89)


@njit(cache=True)
def _ctz_table():
    t = np.zeros(64, np.int64)
    for i in range(64):
        t[((np.uint64(1) << np.uint64(i)) * _DEBRUIJN) >> np.uint64(58)] = i
    return t


_CTZ = _ctz_table()


@njit(inline="always")
def _find(par, a):
    while par[a] != a:
        par[a] = par[par[a]]
        a = par[a]
    return a


@njit(cache=True, nogil=True)
def sweep_events(row_seg, row_link, row_gx, row_gy, seg_x0, seg_x1, seg_alias,
                 mark_row, mark_x, mark_bits, edge_a, edge_b, width, diagonal,
                 thr, lcg, bases, ev_a, ev_b, out):
    """For each replica k (stream base ``bases[k]``) write the bit set of events to ``out[k]``.

    Event q occurs when one cluster carries a bit of ``ev_a[q]`` and a bit of ``ev_b[q]``.
    """
    nrows = row_seg.shape[0] - 1
    nw = (width + 63) // 64 + 1
    words = np.zeros(nw, np.uint64)
    maxr = width // 2 + 2
    ps = np.empty(maxr, np.int32)
    pe = np.empty(maxr, np.int32)
    pl = np.empty(maxr, np.int32)
    cs = np.empty(maxr, np.int32)
    ce = np.empty(maxr, np.int32)
    cl = np.empty(maxr, np.int32)
    ntot = 0
    for k in range(seg_x0.shape[0]):
        ntot += seg_x1[k] - seg_x0[k] + 1
    cap = ntot // 2 + nrows + 16
    par = np.empty(cap, np.int32)
    bits = np.zeros(cap, np.int64)
    nm = mark_row.shape[0]
    mlab = np.empty(nm, np.int32)
    nev = ev_a.shape[0]
    period = thr.shape[0]
    dg = 1 if diagonal else 0
    tab = _CTZ
    for rep in range(bases.shape[0]):
        key = bases[rep]
        if lcg:
            key = key & _MASK
        nl = 0
        npr = 0
        mp = 0
        for y in range(nrows):
            for w in range(nw):
                words[w] = 0
            trow = row_gy[y] % period
            for k in range(row_seg[y], row_seg[y + 1]):
                x = seg_x0[k]
                x1 = seg_x1[k]
                if seg_alias[k] >= 0:
                    if mlab[seg_alias[k]] >= 0:
                        words[x >> 6] |= np.uint64(1) << np.uint64(x & 63)
                    continue
                tcol = (row_gx[y] + x) % period
                while x <= x1:
                    wi = x >> 6
                    xe = min(x1, wi * 64 + 63)
                    acc = np.uint64(0)
                    for xx in range(x, xe + 1):
                        if lcg:
                            key = lcg_next_nb(key)
                            u = key
                        else:
                            key += _GOLD
                            u = mix64_nb(key) >> np.uint64(11)
                        acc |= np.uint64(u < thr[trow, tcol]) << np.uint64(xx & 63)
                        tcol += 1
                        if tcol == period:
                            tcol = 0
                    words[wi] |= acc
                    x = xe + 1
            # runs of set bits
            ncr = 0
            carry = np.uint64(0)
            for w in range(nw):
                m = words[w]
                b = m ^ ((m << np.uint64(1)) | carry)
                carry = m >> np.uint64(63)
                while b != 0:
                    low = b & (~b + np.uint64(1))
                    pos = w * 64 + tab[(low * _DEBRUIJN) >> np.uint64(58)]
                    b ^= low
                    if (m & low) != 0:
                        cs[ncr] = pos
                    else:
                        ce[ncr] = pos - 1
                        ncr += 1
            if not row_link[y]:
                npr = 0
            # merge with overlapping runs of the previous row
            j = 0
            for r in range(ncr):
                a = cs[r] - dg
                e = ce[r]
                while j < npr and pe[j] < a:
                    j += 1
                lab = -1
                while j < npr and ps[j] <= e:
                    q = pl[j]
                    while par[q] != q:
                        q = par[q]
                    if lab < 0:
                        lab = q
                    elif q != lab:
                        if q < lab:
                            par[lab] = q
                            bits[q] |= bits[lab]
                            lab = q
                        else:
                            par[q] = lab
                            bits[lab] |= bits[q]
                    j += 1
                if j > 0:
                    j -= 1
                if lab < 0:
                    par[nl] = nl
                    bits[nl] = 0
                    lab = nl
                    nl += 1
                cl[r] = lab
            r = 0
            while mp < nm and mark_row[mp] == y:
                x = mark_x[mp]
                while r < ncr and ce[r] < x:
                    r += 1
                if r < ncr and cs[r] <= x:
                    q = _find(par, cl[r])
                    bits[q] |= mark_bits[mp]
                    mlab[mp] = cl[r]
                else:
                    mlab[mp] = -1
                mp += 1
            for r in range(ncr):
                ps[r] = cs[r]
                pe[r] = ce[r]
                pl[r] = cl[r]
            npr = ncr
        # bonds outside the raster: wrap-around, cuts, identifications
        for t in range(edge_a.shape[0]):
            la = mlab[edge_a[t]]
            lb = mlab[edge_b[t]]
            if la < 0 or lb < 0:
                continue
            ra = _find(par, la)
            rb = _find(par, lb)
            if ra != rb:
                par[rb] = ra
                bits[ra] |= bits[rb]
        res = np.uint64(0)
        for k in range(nm):
            if mlab[k] < 0:
                continue
            bk = bits[_find(par, mlab[k])]
            for q in range(nev):
                if (bk & ev_a[q]) != 0 and (bk & ev_b[q]) != 0:
                    res |= np.uint64(1) << np.uint64(q)
        out[rep] = res


@njit(cache=True, nogil=True)
def radial_events(grid, W, sources, thr, bases, out):
    """Radial crossings of nested annuli sharing one inner circle.

    ``grid`` is a flattened padded grid (row length ``W``) of uint8 flags:
    bit 0 marks cells outside the largest annulus, bit 1+l marks sites that
    have a lattice neighbour on or beyond the l-th outer circle.
    ``sources`` are the flat indices of the sites touching the inner circle.
    Cell c of replica k is open when the uniform keyed by ``bases[k]`` and
    c falls below ``thr``.  ``out[k, l]`` is set when an open path joins the
    inner circle to the l-th outer circle.  The search stops once the
    outermost circle is reached; scratch state lives in bits 6-7.
    """
    nlev = out.shape[1]
    top_bit = np.uint8(1 << nlev)
    stack = np.empty(grid.shape[0], np.int32)
    touched = np.empty(grid.shape[0], np.int32)
    for rep in range(bases.shape[0]):
        base = bases[rep]
        nt = 0
        seen = np.uint8(0)
        done = False
        for t in range(sources.shape[0]):
            c = sources[t]
            g = grid[c]
            if g & 0xC0:
                continue
            touched[nt] = c
            nt += 1
            if (mix64_nb(base + np.uint64(c + 1) * _GOLD) >> np.uint64(11)) >= thr:
                grid[c] = g | 0x80
                continue
            grid[c] = g | 0xC0
            stack[0] = c
            top = 1
            while top > 0:
                top -= 1
                i = stack[top]
                seen |= grid[i]
                if seen & top_bit:
                    done = True
                    break
                for d in range(4):
                    if d == 0:
                        j = i + 1
                    elif d == 1:
                        j = i - 1
                    elif d == 2:
                        j = i + W
                    else:
                        j = i - W
                    gj = grid[j]
                    if gj & 0xC1:
                        continue
                    touched[nt] = j
                    nt += 1
                    if (mix64_nb(base + np.uint64(j + 1) * _GOLD) >> np.uint64(11)) < thr:
                        grid[j] = gj | 0xC0
                        stack[top] = j
                        top += 1
                    else:
                        grid[j] = gj | 0x80
            if done:
                break
        for k in range(nt):
            grid[touched[k]] &= np.uint8(0x3F)
        for l in range(nlev):
            out[rep, l] = 1 if seen & np.uint8(2 << l) else 0
