"""Reproducible random numbers.

Two generators are offered.  ``Lcg48`` is the 48-bit linear congruential
recurrence x' = (a*x + 11) mod 2**48 with a = 142412240584757, kept so that
runs can be replayed with the historical generator.  ``Default`` is a
counter-based SplitMix64 stream: draw i of a stream with base s0 is

    mix64(s0 + (i + 1) * 0x9E3779B97F4A7C15)  >> 11,  scaled by 2**-53

where ``mix64`` is the Stafford variant-13 finalizer used by SplitMix64::

    z ^= z >> 30; z *= 0xBF58476D1CE4E5B9
    z ^= z >> 27; z *= 0x94D049BB133111EB
    z ^= z >> 31

Streams are derived from ``(seed, stream_id)`` by the same mixer::

    s0 = mix64((seed + (stream_id + 1) * 0x9E3779B97F4A7C15) mod 2**64)

The Lcg48 stream starts from ``s0 mod 2**48``.  All arithmetic is modulo
2**64, so the derivation is easy to reproduce in any language.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

LCG_A = 142412240584757
LCG_C = 11
LCG_BITS = 48
LCG_MOD = 1 << LCG_BITS
LCG_MASK = LCG_MOD - 1

GOLDEN = 0x9E3779B97F4A7C15
_U64 = (1 << 64) - 1

KINDS = ("default", "lcg48")


def mix64(z: int) -> int:
    """SplitMix64 finalizer on a Python int (taken modulo 2**64)."""
    z &= _U64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _U64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _U64
    return z ^ (z >> 31)


def derive_stream(seed: int, stream_id: int = 0) -> int:
    """Base value of substream ``stream_id`` for ``seed``."""
    if stream_id < 0:
        raise ValueError("stream_id must be non-negative")
    return mix64(seed + (stream_id + 1) * GOLDEN)


@dataclass(frozen=True)
class Lcg48State:
    x: int

    def __post_init__(self):
        if not 0 <= self.x < LCG_MOD:
            raise ValueError(f"Lcg48 state must lie in [0, 2**48), got {self.x}")


def lcg_step(s: Lcg48State) -> Lcg48State:
    return Lcg48State((LCG_A * s.x + LCG_C) % LCG_MOD)


def lcg_threshold(p: float) -> int:
    """Smallest integer t with x/2**48 < p  <=>  x < t for 48-bit x."""
    return _threshold(p, LCG_BITS)


def default_threshold(p: float) -> int:
    """Same as :func:`lcg_threshold` for the 53-bit draws of the default stream."""
    return _threshold(p, 53)


def _threshold(p, bits):
    check_probability(p)
    # p * 2**bits is exact in binary floating point, so ceil gives the exact cut.
    return int(np.ceil(np.ldexp(float(p), bits)))


def check_probability(p):
    if not (0.0 <= p <= 1.0):
        raise ValueError(f"probability must lie in [0, 1], got {p!r}")


class RandomSource:
    """A single-owner stream of uniforms.

    ``RandomSource("lcg48", seed, stream_id)`` and
    ``RandomSource("default", seed, stream_id)`` with equal arguments always
    produce the same sequence.
    """

    def __init__(self, kind: str = "default", seed: int = 0, stream_id: int = 0):
        if kind not in KINDS:
            raise ValueError(f"unknown generator kind {kind!r}; choose from {KINDS}")
        self.kind = kind
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        self.base = derive_stream(self.seed, self.stream_id)
        if kind == "lcg48":
            self.state = Lcg48State(self.base & LCG_MASK)
        else:
            self.state = 0  # counter: number of draws consumed

    @classmethod
    def from_lcg_state(cls, x: int) -> "RandomSource":
        """Lcg48 source starting from a raw 48-bit state, bypassing stream derivation."""
        src = cls("lcg48", 0, 0)
        src.state = Lcg48State(x)
        return src

    def next_raw(self) -> int:
        """Next raw integer: 48-bit LCG state or 53-bit SplitMix output."""
        if self.kind == "lcg48":
            self.state = lcg_step(self.state)
            return self.state.x
        self.state += 1
        return mix64(self.base + self.state * GOLDEN) >> 11

    def uniform01(self) -> float:
        raw = self.next_raw()
        if self.kind == "lcg48":
            return raw / LCG_MOD
        return raw * 2.0 ** -53

    def bernoulli(self, p: float) -> bool:
        check_probability(p)
        return self.uniform01() < p

    def uniforms(self, n: int) -> np.ndarray:
        """``n`` consecutive uniforms as a float64 array (advances the stream)."""
        raw = self.raw_block(n)
        scale = 2.0 ** -LCG_BITS if self.kind == "lcg48" else 2.0 ** -53
        return raw.astype(np.float64) * scale

    def raw_block(self, n: int) -> np.ndarray:
        out = np.empty(n, np.uint64)
        if self.kind == "lcg48":
            last = _lcg_fill(np.uint64(self.state.x), out)
            self.state = Lcg48State(int(last))
        else:
            _splitmix_fill(np.uint64(self.base), np.uint64(self.state), out)
            self.state += n
        return out

    def spawn_threshold(self, p: float) -> int:
        return lcg_threshold(p) if self.kind == "lcg48" else default_threshold(p)

    def __repr__(self):
        return f"RandomSource(kind={self.kind!r}, seed={self.seed}, stream_id={self.stream_id})"


# --- compiled helpers shared with the simulation kernels -------------------

_GOLD = np.uint64(GOLDEN)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_A = np.uint64(LCG_A)
_C = np.uint64(LCG_C)
_MASK = np.uint64(LCG_MASK)


@njit(inline="always", cache=True)
def mix64_nb(z):
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


@njit(inline="always", cache=True)
def lcg_next_nb(x):
    # uint64 wraparound keeps the low 48 bits exact
    return (_A * x + _C) & _MASK


@njit(cache=True)
def _lcg_fill(x, out):
    for i in range(out.shape[0]):
        x = lcg_next_nb(x)
        out[i] = x
    return x


@njit(cache=True)
def _splitmix_fill(base, done, out):
    key = base + done * _GOLD
    for i in range(out.shape[0]):
        key += _GOLD
        out[i] = mix64_nb(key) >> np.uint64(11)


def lcg_jump(x: int, k: int) -> int:
    """State after ``k`` steps from ``x`` (O(log k) by affine squaring)."""
    a, c = 1, 0
    ma, mc = LCG_A, LCG_C
    while k:
        if k & 1:
            a, c = (ma * a) % LCG_MOD, (ma * c + mc) % LCG_MOD
        ma, mc = (ma * ma) % LCG_MOD, (ma * mc + mc) % LCG_MOD
        k >>= 1
    return (a * x + c) % LCG_MOD


@njit(cache=True)
def _stream_bases(seed, start, out):
    for i in range(out.shape[0]):
        out[i] = mix64_nb(seed + np.uint64(start + i + 1) * _GOLD)


def stream_bases(seed: int, start: int, count: int) -> np.ndarray:
    """``derive_stream(seed, k)`` for k = start .. start+count-1, as uint64."""
    if start < 0:
        raise ValueError("stream_id must be non-negative")
    out = np.empty(count, np.uint64)
    _stream_bases(np.uint64(int(seed) & _U64), start, out)
    return out
