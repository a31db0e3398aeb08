"""Cardy's formula and the conformal geometry around it.

Everything here is a pure function of its arguments.

Parallelograms are handled through the Schwarz-Christoffel map of the unit
disk with prevertices w0, conj(w0), -w0, -conj(w0), w0 = exp(i*theta0):

    phi(w) = integral_0^w (u^2 - w0^2)^(alpha-1) (u^2 - conj(w0)^2)^(-alpha) du

The vertex phi(w0) (the lower-left corner below) has interior angle
alpha*pi.  On the unit circle |phi'(e^{it})| = |2 sin(t-theta0)|^(alpha-1)
|2 sin(t+theta0)|^(-alpha), so side lengths are one-dimensional integrals
with algebraic endpoint singularities.  They are evaluated with fixed
Gauss-Jacobi rules plus a logarithmic substitution for the part of the
bottom side that sits close to the other singularity.  The resulting side
ratio is accurate to roughly 1e-13 for theta0 down to 1e-25.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, optimize, special

GAMMA_ONE_THIRD = 2.67893853470774763365569294097
GAMMA_TWO_THIRDS = 1.35411793942640041694528802815
# 3 Gamma(2/3) / Gamma(1/3)^2
CARDY_CONSTANT = 0.566046680363159700449670550463

ANNULUS_EXPONENT = 5.0 / 48.0

_JACOBI_NODES = 48
_LEGENDRE_NODES = 20
_PANEL = 1.0  # width of the log-substituted panels


class ConvergenceError(ArithmeticError):
    """A root finder or quadrature did not reach its tolerance."""


# ---------------------------------------------------------------------------
# Cardy's formula


def hyp2f1_cardy(z: float) -> float:
    """2F1(1/3, 2/3; 4/3; z) by its power series; intended for 0 <= z <= 1/2."""
    term = 1.0
    total = 1.0
    k = 0
    while True:
        term *= (k + 1 / 3) * (k + 2 / 3) / ((k + 4 / 3) * (k + 1)) * z
        total += term
        k += 1
        if abs(term) < 1e-17 * abs(total) or k > 400:
            return total


def _check_z(z):
    if not (0.0 <= z <= 1.0) or math.isnan(z):
        raise ValueError(f"cross-ratio must lie in [0, 1], got {z!r}")


def cardy(z: float) -> float:
    """Horizontal crossing probability for cross-ratio ``z``."""
    _check_z(z)
    if z > 0.5:
        return 1.0 - cardy(1.0 - z)
    if z == 0.0:
        return 0.0
    return CARDY_CONSTANT * z ** (1.0 / 3.0) * hyp2f1_cardy(z)


# ---------------------------------------------------------------------------
# quadrature rules


@lru_cache(maxsize=512)
def _jacobi01(a: float, b: float, n: int = _JACOBI_NODES):
    """Nodes/weights for integral_0^1 (1-s)^a s^b f(s) ds."""
    x, w = special.roots_jacobi(n, a, b)
    s = 0.5 * (1.0 + x)
    w = w * 2.0 ** (-(a + b + 1.0))
    s.setflags(write=False)
    w.setflags(write=False)
    return s, w


_GL_X, _GL_W = np.polynomial.legendre.leggauss(_LEGENDRE_NODES)


def _sinc(y):
    # sin(y)/y, y >= 0 (numpy's sinc carries a factor pi)
    return np.sinc(y / np.pi)


def _pair_integral(p, q, eps, upper):
    """integral_0^upper (2 sin u)^p (2 sin(u+eps))^q du, with upper+eps < pi."""
    h = min(eps, upper)
    s, w = _jacobi01(0.0, p)
    u = h * s
    near = h * (2.0 * h) ** p * np.dot(w, _sinc(u) ** p * (2.0 * np.sin(u + eps)) ** q)
    if upper <= eps:
        return near
    lo, hi = math.log(eps), math.log(upper)
    panels = max(1, int(math.ceil((hi - lo) / _PANEL)))
    edges = np.linspace(lo, hi, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    sv = (mid[:, None] + half[:, None] * _GL_X[None, :]).ravel()
    wv = (half[:, None] * _GL_W[None, :]).ravel()
    u = np.exp(sv)
    far = np.dot(wv, u * (2.0 * np.sin(u)) ** p * (2.0 * np.sin(u + eps)) ** q)
    return near + far


def _left_halves(alpha, theta0):
    """Left side split at phi(1): (corner ... phi(1) part, phi(1) ... upper-left part).

    With u = t + theta0 = 2*theta0*s the side is
    (1/2) integral_0^1 (1-s)^(alpha-1) s^(-alpha) G(s) ds with G smooth; each
    half carries only one of the two algebraic singularities.
    """
    eps = 2.0 * theta0

    def smooth(s):
        return _sinc(eps * (1.0 - s)) ** (alpha - 1.0) * _sinc(eps * s) ** (-alpha)

    # s in [1/2, 1]: s = (1 + sig)/2, weight (1-sig)^(alpha-1)
    sig, w = _jacobi01(alpha - 1.0, 0.0)
    s = 0.5 + 0.5 * sig
    lower = 0.25 * 0.5 ** (alpha - 1.0) * np.dot(w, s ** (-alpha) * smooth(s))
    # s in [0, 1/2]: s = sig/2, weight sig^(-alpha)
    sig, w = _jacobi01(0.0, -alpha)
    s = 0.5 * sig
    upper = 0.25 * 0.5 ** (-alpha) * np.dot(w, (1.0 - s) ** (alpha - 1.0) * smooth(s))
    return lower, upper


def _bottom_halves_direct(alpha, theta0):
    eps = 2.0 * theta0
    upper = 0.5 * math.pi - theta0
    first = _pair_integral(alpha - 1.0, -alpha, eps, upper)
    second = _pair_integral(-alpha, alpha - 1.0, eps, upper)
    return first, second


def _check_alpha(alpha):
    if not (0.0 < alpha < 1.0):
        raise ValueError(f"interior angle fraction must lie in (0, 1), got {alpha!r}")


def _check_theta(theta0):
    if not (0.0 < theta0 < 0.5 * math.pi):
        raise ValueError(f"theta0 must lie in (0, pi/2), got {theta0!r}")


def side_lengths(alpha: float, theta0: float):
    """Boundary lengths of the Schwarz-Christoffel parallelogram.

    Returns ``(left, bottom, f_left, f_bottom)``: the left side (corner
    angle alpha*pi at its lower end), the bottom side, and the fractions of
    each measured from the lower-left corner to the images of w = 1 and
    w = i.  The overall scale is arbitrary.
    """
    _check_alpha(alpha)
    _check_theta(theta0)
    if theta0 <= math.pi / 4:
        l1, l2 = _left_halves(alpha, theta0)
        b1, b2 = _bottom_halves_direct(alpha, theta0)
        return l1 + l2, b1 + b2, l1 / (l1 + l2), b1 / (b1 + b2)
    # a quarter turn of the disk swaps the roles of the sides and of alpha
    left2, bottom2, fl2, fb2 = side_lengths(1.0 - alpha, 0.5 * math.pi - theta0)
    return bottom2, left2, 1.0 - fb2, 1.0 - fl2


def side_ratio(alpha: float, theta0: float) -> float:
    """Bottom/left side ratio of the parallelogram with prevertex angle theta0."""
    left, bottom, _, _ = side_lengths(alpha, theta0)
    return bottom / left


def _log_ratio_tau(alpha, tau):
    # tau = ln tan(theta0); the quarter-turn identity keeps theta0 <= pi/4
    if tau <= 0.0:
        return math.log(side_ratio(alpha, math.atan(math.exp(tau))))
    return -math.log(side_ratio(1.0 - alpha, math.atan(math.exp(-tau))))


# |tau| <= 700 keeps theta0 = atan(e^tau) a normal double; the side ratio
# grows linearly in |tau| out there, so this reaches r of a few hundred
_TAU_MAX = 700.0


def _tau_for_ratio(alpha, r, xtol=1e-14):
    _check_alpha(alpha)
    if not (r > 0.0) or math.isinf(r):
        raise ValueError(f"aspect ratio must be positive and finite, got {r!r}")
    alpha = min(alpha, 1.0 - alpha)  # exact symmetry, identical residuals
    target = math.log(r)

    def resid(tau):
        return _log_ratio_tau(alpha, tau) - target

    lo, hi = -_TAU_MAX, _TAU_MAX
    if resid(lo) < 0 or resid(hi) > 0:
        raise ValueError(f"aspect ratio {r!r} outside the supported range")
    try:
        return optimize.brentq(resid, lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=200)
    except RuntimeError as exc:  # pragma: no cover - brentq is robust on this bracket
        raise ConvergenceError(f"no theta0 for alpha={alpha}, r={r}: {exc}") from exc


def theta_for_ratio(alpha: float, r: float) -> float:
    """Prevertex angle theta0 at which the side ratio equals ``r``.

    Solved in tau = ln tan(theta0), over which the side ratio varies
    smoothly and monotonically, with Brent's method on a bracket covering ratios from about
    1/446 to 446 for the rectangle (narrower for sharper angles).
    """
    return math.atan(math.exp(_tau_for_ratio(alpha, r)))


def _cardy_tau(tau):
    # sin^2 = 1/(1 + e^{-2 tau}); keep the small one of z, 1-z exact
    if tau <= 0.0:
        return cardy(float(special.expit(2.0 * tau)))
    return 1.0 - cardy(float(special.expit(-2.0 * tau)))


# ---------------------------------------------------------------------------
# rectangles


def rect_to_crossratio(r: float) -> float:
    """Cross-ratio sin^2(theta0) of a rectangle of aspect ratio ``r`` (width/height)."""
    return float(special.expit(2.0 * _tau_for_ratio(0.5, r)))


def crossratio_to_rect(z: float) -> float:
    """Aspect ratio of the rectangle whose cross-ratio is ``z``."""
    _check_z(z)
    if z == 0.0:
        return math.inf
    if z == 1.0:
        return 0.0
    if z <= 0.5:
        return side_ratio(0.5, math.asin(math.sqrt(z)))
    return 1.0 / side_ratio(0.5, math.asin(math.sqrt(1.0 - z)))


def cardy_rect(r: float) -> float:
    """Horizontal crossing probability of a width/height = ``r`` rectangle."""
    return _cardy_tau(_tau_for_ratio(0.5, r))


def parallelogram_to_rect(alpha: float, r: float) -> float:
    """Aspect ratio r0 of the rectangle conformally equivalent to a parallelogram.

    ``alpha`` is the lower-left interior angle in units of pi and ``r`` the
    bottom/left side ratio.  Rotation is irrelevant.
    """
    return _parallelogram_to_rect(float(alpha), float(r))


@lru_cache(maxsize=65536)
def _parallelogram_to_rect(alpha, r):
    if alpha == 0.5:
        return r
    return math.exp(_log_ratio_tau(0.5, _tau_for_ratio(alpha, r)))


# ---------------------------------------------------------------------------
# the map itself


def sc_map(alpha: float, w0: complex, w: complex) -> complex:
    """Schwarz-Christoffel parallelogram map evaluated at ``w`` (|w| <= 1).

    The constant factor (-w0^2)^(alpha-1) (-conj(w0)^2)^(-alpha) is dropped,
    i.e. this returns

        w * integral_0^1 (1 - t^2 w^2 conj(w0)^2)^(alpha-1) (1 - t^2 w^2 w0^2)^(-alpha) dt

    with principal branches, so phi'(0) = 1.  The image is the parallelogram
    up to a fixed rotation and scale.
    """
    _check_alpha(alpha)
    w0 = complex(w0)
    w = complex(w)
    if abs(abs(w0) - 1.0) > 1e-12:
        raise ValueError("w0 must lie on the unit circle")
    if abs(w) > 1.0 + 1e-12:
        raise ValueError("w must lie in the closed unit disk")
    if w == 0:
        return 0j
    a = (w * w0.conjugate()) ** 2
    b = (w * w0) ** 2

    def f(t):
        return (1.0 - t * t * a) ** (alpha - 1.0) * (1.0 - t * t * b) ** (-alpha)

    # a vertex puts an algebraic singularity at t = 1
    if abs(a - 1.0) < 1e-12 or abs(b - 1.0) < 1e-12:
        expo = alpha - 1.0 if abs(a - 1.0) < 1e-12 else -alpha
        s, wt = _jacobi01(expo, 0.0, 64)
        other = b if abs(a - 1.0) < 1e-12 else a
        other_expo = -alpha if abs(a - 1.0) < 1e-12 else alpha - 1.0
        # (1 - t^2) = (1 - t)(1 + t)
        vals = (1.0 + s) ** expo * (1.0 - s * s * other) ** other_expo
        return w * complex(np.dot(wt, vals))
    val, err = integrate.quad(f, 0.0, 1.0, complex_func=True, epsabs=1e-13, epsrel=1e-12, limit=400)
    return w * val


def sc_vertices(alpha: float, theta0: float):
    """Images of w0, conj(w0), -w0, -conj(w0) (lower-left, upper-left, upper-right, lower-right)."""
    w0 = complex(math.cos(theta0), math.sin(theta0))
    ll = sc_map(alpha, w0, w0)
    ul = sc_map(alpha, w0, w0.conjugate())
    return ll, ul, -ll, -ul


# ---------------------------------------------------------------------------
# diagonal crossings


def _partial_left(alpha, theta0, t):
    """Length along the left side from the lower-left corner (t=theta0) down to t."""
    f = lambda x: (2.0 * _sinc(theta0 - x)) ** (alpha - 1.0) * (2.0 * math.sin(x + theta0)) ** (-alpha)
    val, _ = integrate.quad(f, t, theta0, weight="alg", wvar=(0.0, alpha - 1.0), limit=200)
    return val


def _partial_bottom(alpha, theta0, t):
    """Length along the bottom side from the lower-left corner to t."""
    f = lambda x: (2.0 * _sinc(x - theta0)) ** (alpha - 1.0) * (2.0 * math.sin(x + theta0)) ** (-alpha)
    val, _ = integrate.quad(f, theta0, t, weight="alg", wvar=(alpha - 1.0, 0.0), limit=200)
    return val


def _chord(a, b):
    return abs(2.0 * math.sin(0.5 * (a - b)))


def diagonal_crossratio(alpha: float, r: float, definition: int = 1) -> float:
    """Cross-ratio for a crossing from the upper half of the left side to the
    right half of the bottom side.

    ``definition=1`` uses the true midpoints of the parallelogram's sides;
    ``definition=2`` uses the images of the midpoints of the equivalent
    rectangle's sides, which are phi(1) and phi(i).
    """
    if definition not in (1, 2):
        raise ValueError("definition must be 1 or 2")
    theta0 = theta_for_ratio(alpha, r)
    if definition == 2:
        t_left, t_bottom = 0.0, 0.5 * math.pi
    else:
        left, bottom, _, _ = side_lengths(alpha, theta0)
        # the midpoints lie well inside each side; the brackets stop short of the far corner
        t_left = optimize.brentq(lambda t: _partial_left(alpha, theta0, t) - 0.5 * left,
                                 -theta0 * (1 - 1e-9), theta0 * (1 - 1e-9), xtol=1e-14)
        t_bottom = optimize.brentq(lambda t: _partial_bottom(alpha, theta0, t) - 0.5 * bottom,
                                   theta0 * (1 + 1e-9), math.pi - theta0 * (1 + 1e-9), xtol=1e-14)
    t_ul, t_lr = -theta0, math.pi - theta0
    num = _chord(t_bottom, t_lr) * _chord(t_ul, t_left)
    den = _chord(t_lr, t_left) * _chord(t_bottom, t_ul)
    return num / den


def cardy_diagonal(alpha: float, r: float, definition: int = 1) -> float:
    return cardy(min(1.0, diagonal_crossratio(alpha, r, definition)))


def half_side_splits(alpha: float, r: float):
    """Where the images of the equivalent rectangle's side midpoints fall.

    Fractions of the left and bottom sides, measured from the lower-left
    corner, for the parallelogram with corner angle alpha*pi and ratio r.
    """
    _, _, f_left, f_bottom = side_lengths(alpha, theta_for_ratio(alpha, r))
    return f_left, f_bottom


# ---------------------------------------------------------------------------
# shears


@dataclass(frozen=True)
class ShearMatrix:
    """The linear map g with g^-1 = [[a sin(theta), 0], [-a cos(theta), 1]]."""

    a: float
    theta: float

    def __post_init__(self):
        if not (self.a > 0):
            raise ValueError(f"a must be positive, got {self.a!r}")
        if not (0.0 < self.theta < math.pi):
            raise ValueError(f"theta must lie in (0, pi), got {self.theta!r}")

    def inverse(self) -> np.ndarray:
        s, c = math.sin(self.theta), math.cos(self.theta)
        return np.array([[self.a * s, 0.0], [-self.a * c, 1.0]])

    def matrix(self) -> np.ndarray:
        return np.linalg.inv(self.inverse())


def shear_equivalent_rect(g: ShearMatrix, r: float) -> float:
    """r0 of the rectangle conformally equivalent to g^-1 applied to a width/height = r rectangle.

    The image is a parallelogram with vertical left side 1, bottom side a*r
    and lower-left angle pi - theta, whose r0 equals that for angle theta.
    """
    return parallelogram_to_rect(g.theta / math.pi, g.a * r)


def side_ratio_scale(g: ShearMatrix) -> float:
    """B = sqrt(1 + a^2 cos^2 theta) / (a sin theta)."""
    return math.sqrt(1.0 + (g.a * math.cos(g.theta)) ** 2) / (g.a * math.sin(g.theta))


# ---------------------------------------------------------------------------
# annulus and cylinder


def annulus_to_cylinder(r1: float, r2: float, scale: float = 1.0):
    """(width, circumference) of the cylinder that log maps the annulus onto."""
    if not (0 < r1 <= r2):
        raise ValueError("need 0 < r1 <= r2")
    return scale * math.log(r2 / r1), 2.0 * math.pi * scale


def cylinder_to_annulus_ratio(width: float, circumference: float) -> float:
    """Radius ratio r2/r1 of the annulus equivalent to a cylinder."""
    if width < 0 or circumference <= 0:
        raise ValueError("need width >= 0 and circumference > 0")
    return math.exp(2.0 * math.pi * width / circumference)


def annulus_exponent_prediction() -> float:
    return ANNULUS_EXPONENT
