"""Fitting a shear to striated-lattice crossing data, and the annulus exponent.

The shear g is parametrised by (a, theta) through
``g^{-1} = [[a sin(theta), 0], [-a cos(theta), 1]]``; a rectangle of aspect
ratio r is sent by g^{-1} to a parallelogram with corner angle theta and
side ratio a*r, whose conformally equivalent rectangle gives the predicted
crossing probabilities.
"""

from __future__ import annotations

import csv
import io
import json
import math
import re
import warnings
from dataclasses import asdict, dataclass
from functools import lru_cache
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial import chebyshev as C
from scipy import optimize

from . import conformal
from .conformal import ShearMatrix, cardy_rect, parallelogram_to_rect


class FitError(ArithmeticError):
    """The optimiser did not converge; ``best`` holds the last iterate."""

    def __init__(self, msg, best=None):
        super().__init__(msg)
        self.best = best


@dataclass(frozen=True)
class StriatedRow:
    r: float
    pi_h: float
    pi_v: float
    ci_h: Optional[float] = None
    ci_v: Optional[float] = None

    def __post_init__(self):
        if not self.r > 0:
            raise ValueError("aspect ratio must be positive")
        for p in (self.pi_h, self.pi_v):
            if not 0.0 <= p <= 1.0:
                raise ValueError("estimates must lie in [0, 1]")


@dataclass(frozen=True)
class StriatedDataset:
    rows: Tuple[StriatedRow, ...]

    @classmethod
    def from_arrays(cls, r, pi_h, pi_v, ci_h=None, ci_v=None) -> "StriatedDataset":
        n = len(r)
        ci_h = [None] * n if ci_h is None else list(ci_h)
        ci_v = [None] * n if ci_v is None else list(ci_v)
        return cls(tuple(StriatedRow(float(a), float(b), float(c), d, e)
                         for a, b, c, d, e in zip(r, pi_h, pi_v, ci_h, ci_v)))

    @classmethod
    def from_csv(cls, text: str) -> "StriatedDataset":
        """Parse either ``r,pi_h,pi_v[,ci95_h,ci95_v]`` columns or the estimate schema
        (``name,successes,trials,p_hat,ci95``) with names ``h[r=...]`` and ``v[r=...]``.

        ``#`` lines are skipped and only the first table is read, so the
        striated command's own CSV output can be fed back in.
        """
        lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
        table = []
        for ln in lines:
            if not ln.strip():
                if table:
                    break
                continue
            if table and ln.split(",")[0] in ("a", "event", "name") and "," in ln and not ln[0].isdigit():
                break
            table.append(ln)
        reader = csv.DictReader(io.StringIO("\n".join(table)))
        fields = reader.fieldnames or []
        if "r" in fields:
            rows = []
            for rec in reader:
                ch = rec.get("ci95_h")
                cv = rec.get("ci95_v")
                rows.append(StriatedRow(float(rec["r"]), float(rec["pi_h"]), float(rec["pi_v"]),
                                        float(ch) if ch else None, float(cv) if cv else None))
            return cls(tuple(rows))
        if "name" not in fields:
            raise ValueError("dataset CSV needs an 'r' column or a 'name' column")
        pat = re.compile(r"^([hv])\[r=([0-9.eE+-]+)\]$")
        est = {}
        for rec in reader:
            m = pat.match(rec["name"].strip())
            if not m:
                continue
            p = int(rec["successes"]) / int(rec["trials"])
            ci = 1.96 * math.sqrt(p * (1 - p) / int(rec["trials"]))
            est[(m.group(1), m.group(2))] = (p, ci)
        keys = sorted({k for _, k in est}, key=float)
        rows = []
        for k in keys:
            if ("h", k) not in est or ("v", k) not in est:
                raise ValueError(f"ratio {k} lacks an h or v estimate")
            (ph, ch), (pv, cv) = est[("h", k)], est[("v", k)]
            rows.append(StriatedRow(float(k), ph, pv, ch, cv))
        return cls(tuple(rows))

    def arrays(self):
        r = np.array([x.r for x in self.rows])
        h = np.array([x.pi_h for x in self.rows])
        v = np.array([x.pi_v for x in self.rows])
        return r, h, v

    def __len__(self):
        return len(self.rows)


@dataclass(frozen=True)
class FitResult:
    a: float
    theta: float
    residual: float
    theta_alt: float
    residual_alt: float
    weighting: str = "uniform"
    rows: int = 0

    def shear(self) -> ShearMatrix:
        return ShearMatrix(self.a, self.theta)

    def to_json(self) -> str:
        return json.dumps(asdict(self))

    @classmethod
    def from_json(cls, text: str) -> "FitResult":
        return cls(**json.loads(text))


# ---------------------------------------------------------------------------
# fast equivalent-rectangle curves


_S_MAX = math.asinh(55.0)


class _RatioCurve:
    """r -> equivalent rectangle ratio for one corner angle, via Chebyshev fits.

    Both the parallelogram's log side ratio and the rectangle's are smooth,
    decreasing and roughly linear in s = asinh(tau), tau = ln tan(theta0);
    inverting the first and composing with the second needs no further
    quadrature.
    """

    DEG = 80

    def __init__(self, alpha: float):
        self.alpha = alpha
        f = np.vectorize(lambda s: conformal._log_ratio_tau(alpha, math.sinh(s)))
        self.F = C.Chebyshev.interpolate(f, self.DEG, domain=[-_S_MAX, _S_MAX])
        self.G = _rect_curve()
        self.dF = self.F.deriv()
        self._grid = np.linspace(_S_MAX, -_S_MAX, 4001)
        self._Fg = self.F(self._grid)
        self.lo, self.hi = self._Fg[0], self._Fg[-1]

    def tau(self, r: np.ndarray) -> np.ndarray:
        """Prevertex parameter tau solving the side-ratio equation for each ``r``."""
        y = np.log(np.asarray(r, float))
        if y.min() < self.lo or y.max() > self.hi:
            raise ValueError("aspect ratio outside the supported range")
        s = np.interp(y, self._Fg, self._grid)
        for _ in range(3):
            s = s - (self.F(s) - y) / self.dF(s)
        return np.sinh(s)

    def __call__(self, r: np.ndarray) -> np.ndarray:
        return np.exp(self.G(np.arcsinh(self.tau(r))))


@lru_cache(maxsize=1)
def _rect_curve():
    g = np.vectorize(lambda s: conformal._log_ratio_tau(0.5, math.sinh(s)))
    return C.Chebyshev.interpolate(g, _RatioCurve.DEG, domain=[-_S_MAX, _S_MAX])


@lru_cache(maxsize=4096)
def _curve(alpha):
    return _RatioCurve(alpha)


_cardy_vec = np.vectorize(cardy_rect)


def predicted_h(a: float, theta: float, r: np.ndarray, exact: bool = False) -> np.ndarray:
    """Predicted horizontal crossing probability of the rectangles ``r`` under shear (a, theta)."""
    alpha = theta / math.pi
    if exact:
        r0 = np.array([parallelogram_to_rect(alpha, a * x) for x in np.atleast_1d(r)])
        return _cardy_vec(r0)
    # the same tau parametrises the parallelogram and its rectangle, so Cardy's
    # formula can be applied to it directly
    tau = _curve(round(min(alpha, 1 - alpha), 15)).tau(a * np.atleast_1d(r))
    return np.array([conformal._cardy_tau(t) for t in tau])


def shear_residual(a: float, theta: float, data: StriatedDataset, weighting: str = "uniform",
                   exact: bool = False) -> float:
    r, h, v = data.arrays()
    ph = predicted_h(a, theta, r, exact)
    wh, wv = _weights(data, weighting)
    return float(np.sum(wh * (h - ph) ** 2) + np.sum(wv * (v - (1.0 - ph)) ** 2))


def _weights(data, weighting):
    n = len(data)
    if weighting == "uniform":
        return np.ones(n), np.ones(n)
    if weighting == "ci":
        ch = np.array([x.ci_h for x in data.rows], dtype=float)
        cv = np.array([x.ci_v for x in data.rows], dtype=float)
        if np.any(~np.isfinite(ch)) or np.any(~np.isfinite(cv)):
            raise ValueError("CI weighting needs a ci95 for every row")
        floor = 1e-6
        return 1.0 / np.maximum(ch, floor) ** 2, 1.0 / np.maximum(cv, floor) ** 2
    raise ValueError("weighting must be 'uniform' or 'ci'")


def fit_shear(data: StriatedDataset, weighting: str = "uniform", grid: int = 50,
              a_range=(0.2, 3.0), tol: float = 1e-6) -> FitResult:
    """Least-squares (a, theta) from striated h/v estimates.

    A coarse grid over a and theta in (0, pi/2] seeds a Nelder-Mead search.
    The objective only sees the corner angle through min(theta, pi - theta),
    so the mirror angle fits equally well and is reported alongside.
    """
    if len(data) < 2:
        raise ValueError("need at least two rows")
    _weights(data, weighting)  # bad weighting or missing ci95 fails here, not inside the search
    A = np.linspace(a_range[0], a_range[1], grid)
    TH = np.linspace(0.5 * math.pi / grid, 0.5 * math.pi, grid)
    best = (math.inf, None, None)
    for th in TH:
        for a in A:
            try:
                f = shear_residual(a, th, data, weighting)
            except ValueError:  # ratios outside the reachable range at this angle
                continue
            if f < best[0]:
                best = (f, a, th)
    _, a0, th0 = best
    if a0 is None:
        raise FitError("no grid point gives predictions for every aspect ratio")

    def obj(x):
        a, th = x
        if a <= 0 or not 0 < th < math.pi:
            return 1e6
        try:
            return shear_residual(a, th, data, weighting)
        except ValueError:
            return 1e6

    res = optimize.minimize(obj, [a0, th0], method="Nelder-Mead",
                            options={"xatol": tol, "fatol": 1e-14, "maxiter": 4000,
                                     "initial_simplex": [[a0, th0], [a0 * 1.02, th0], [a0, th0 * 1.02]]})
    a, th = float(res.x[0]), float(res.x[1])
    if th > 0.5 * math.pi:
        th = math.pi - th
    if not res.success:
        raise FitError(f"shear fit did not converge: {res.message}", best=(a, th))
    f = shear_residual(a, th, data, weighting, exact=True)
    f_alt = shear_residual(a, math.pi - th, data, weighting, exact=True)
    return FitResult(a=a, theta=th, residual=f, theta_alt=math.pi - th, residual_alt=f_alt,
                     weighting=weighting, rows=len(data))


def synthetic_dataset(a: float, theta: float, ratios: Iterable[float]) -> StriatedDataset:
    """Noise-free h/v values generated from a known shear."""
    r = np.array(list(ratios), float)
    h = predicted_h(a, theta, r, exact=True)
    return StriatedDataset.from_arrays(r, h, 1.0 - h)


# ---------------------------------------------------------------------------
# predictions for lattice parallelograms


@dataclass(frozen=True)
class ParallelogramPrediction:
    alpha: float
    ratio: float
    r0: float
    pi_h: float
    pi_v: float


def predict_parallelogram(g, sides: Tuple[float, float, float]) -> ParallelogramPrediction:
    """Predicted crossings of the lattice parallelogram (0,0), (0,b), (c,d), (c,b+d).

    The figure is pulled back by g^{-1}; its corner angle and ratio
    |bottom|/|left| give the equivalent rectangle.  h crosses between the
    two sides of length b.
    """
    if isinstance(g, FitResult):
        g = g.shear()
    b, c, d = (float(x) for x in sides)
    if b <= 0 or c <= 0:
        raise ValueError("need b > 0 and c > 0")
    m = g.inverse()
    left = m @ np.array([0.0, b])
    bottom = m @ np.array([c, d])
    cosang = float(left @ bottom) / (np.linalg.norm(left) * np.linalg.norm(bottom))
    ang = math.acos(max(-1.0, min(1.0, cosang)))
    ratio = float(np.linalg.norm(bottom) / np.linalg.norm(left))
    alpha = ang / math.pi
    r0 = parallelogram_to_rect(alpha, ratio)
    ph = cardy_rect(r0)
    return ParallelogramPrediction(alpha, ratio, r0, ph, 1.0 - ph)


# ---------------------------------------------------------------------------
# annulus exponent


def fit_annulus_exponent(points: Sequence[Tuple[float, float]]) -> float:
    """Negated least-squares slope of ln(p) against ln(ratio)."""
    kept = []
    for q, p in points:
        if not q > 1:
            raise ValueError("ratios must exceed 1")
        if p <= 0:
            warnings.warn(f"dropping ratio {q} with zero estimate", RuntimeWarning, stacklevel=2)
            continue
        kept.append((q, p))
    if len(kept) < 2:
        raise ValueError("need at least two usable points")
    x = np.log([q for q, _ in kept])
    y = np.log([p for _, p in kept])
    slope = np.polyfit(x, y, 1)[0]
    return float(-slope)
