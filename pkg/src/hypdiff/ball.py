"""Closed-form Poincare ball operations (gyrovector calculus).

Convention: curvature kappa < 0, scale s = |kappa|, ball radius R = 1/sqrt(s).
All functions broadcast over leading axes; the last axis holds coordinates.
Points are float64 arrays strictly inside the ball; tangent vectors are plain
arrays attached to an explicit base point argument.

Numerical safety: atanh arguments are clamped below 1, every point-valued
output is passed through :func:`project_to_ball`, and the degenerate 0/0
branches (zero tangent, coincident points) return exact identities instead of
evaluating the closed forms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Relative margin kept between any point and the ball boundary.  atanh blows
# up at the boundary, so interior outputs are rescaled to (1 - EPS) * R.
BOUNDARY_EPS = 1e-5

# Largest argument ever handed to atanh.
_ATANH_MAX = 1.0 - 1e-15


@dataclass(frozen=True)
class Curvature:
    """Sectional curvature of the ball, kappa < 0."""

    kappa: float

    def __post_init__(self):
        if not np.isfinite(self.kappa) or self.kappa >= 0.0:
            raise ValueError(f"curvature must be a finite negative real, got {self.kappa}")

    @property
    def scale(self) -> float:
        return -self.kappa

    @property
    def radius(self) -> float:
        return 1.0 / np.sqrt(-self.kappa)


def _kappa_value(kappa) -> float:
    k = kappa.kappa if isinstance(kappa, Curvature) else float(kappa)
    if not np.isfinite(k) or k >= 0.0:
        raise ValueError(f"curvature must be a finite negative real, got {k}")
    return k


def _norm(x: np.ndarray) -> np.ndarray:
    return np.linalg.norm(x, axis=-1, keepdims=True)


def _lambda(x: np.ndarray, k: float) -> np.ndarray:
    # conformal factor with keepdims, for internal composition
    return 2.0 / (1.0 + k * np.sum(x * x, axis=-1, keepdims=True))


def project_to_ball(x: np.ndarray, kappa) -> np.ndarray:
    """Rescale x onto radius (1 - eps) * R whenever it lies outside it.

    Identity for interior points, idempotent, raises on non-finite input.
    """
    k = _kappa_value(kappa)
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite coordinates")
    max_norm = (1.0 - BOUNDARY_EPS) / np.sqrt(-k)
    n = _norm(x)
    factor = np.where(n > max_norm, max_norm / np.where(n == 0.0, 1.0, n), 1.0)
    return x * factor


def _mobius_add_raw(x: np.ndarray, y: np.ndarray, k: float) -> np.ndarray:
    # algebraic form without the ball projection; gyration applies it to
    # tangent vectors, which may lie far outside the ball
    x2 = np.sum(x * x, axis=-1, keepdims=True)
    y2 = np.sum(y * y, axis=-1, keepdims=True)
    xy = np.sum(x * y, axis=-1, keepdims=True)
    num = (1.0 - 2.0 * k * xy - k * y2) * x + (1.0 + k * x2) * y
    den = 1.0 - 2.0 * k * xy + k * k * x2 * y2
    return num / den


def mobius_add(x: np.ndarray, y: np.ndarray, kappa) -> np.ndarray:
    """Mobius addition x (+) y.

    ((1 - 2k<x,y> - k|y|^2) x + (1 + k|x|^2) y) / (1 - 2k<x,y> + k^2 |x|^2 |y|^2)
    """
    k = _kappa_value(kappa)
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    return project_to_ball(_mobius_add_raw(x, y, k), k)


def mobius_scalar(r: float, x: np.ndarray, kappa) -> np.ndarray:
    """Mobius scalar multiplication r (x) x = exp_o(r log_o(x)).

    Closed form tanh(r atanh(sqrt(s)|x|)) x / (sqrt(s)|x|); collinear with x.
    """
    k = _kappa_value(kappa)
    if not np.all(np.isfinite(r)):
        raise ValueError("non-finite scalar")
    x = np.asarray(x, dtype=np.float64)
    sq = np.sqrt(-k)
    n = _norm(x)
    safe = np.where(n == 0.0, 1.0, n)
    arg = np.minimum(sq * n, _ATANH_MAX)
    out = np.tanh(r * np.arctanh(arg)) * x / (sq * safe)
    return project_to_ball(np.where(n == 0.0, 0.0, out), k)


def mobius_matvec(w: np.ndarray, x: np.ndarray, kappa) -> np.ndarray:
    """Matrix action on a ball point: exp_o(W log_o(x)).

    w has shape (m, n) and acts on the last axis of x (dimension n).
    """
    k = _kappa_value(kappa)
    w = np.asarray(w, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if w.ndim != 2 or w.shape[1] != x.shape[-1]:
        raise ValueError(f"matrix shape {w.shape} does not act on dimension {x.shape[-1]}")
    o = np.zeros(w.shape[0])
    return exp_map(o, log_map(np.zeros(x.shape[-1]), x, k) @ w.T, k)


def conformal_factor(x: np.ndarray, kappa) -> np.ndarray:
    """lambda_x = 2 / (1 + kappa |x|^2); equals 2 at the origin."""
    k = _kappa_value(kappa)
    x = project_to_ball(x, k)
    return _lambda(x, k)[..., 0]


def exp_map(x: np.ndarray, v: np.ndarray, kappa) -> np.ndarray:
    """Exponential map: x (+) tanh(sqrt(s) lambda_x |v| / 2) v / (sqrt(s)|v|).

    exp_x(0) = x exactly (zero-tangent branch short-circuits the 0/0 form).
    """
    k = _kappa_value(kappa)
    x = np.asarray(x, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    sq = np.sqrt(-k)
    vn = _norm(v)
    safe = np.where(vn == 0.0, 1.0, vn)
    gyro = np.tanh(sq * _lambda(x, k) * vn / 2.0) * v / (sq * safe)
    return project_to_ball(np.where(vn == 0.0, x + 0.0 * v, mobius_add(x, gyro, k)), k)


def log_map(x: np.ndarray, y: np.ndarray, kappa) -> np.ndarray:
    """Logarithmic map, inverse of exp_map.

    2 / (sqrt(s) lambda_x) atanh(sqrt(s) |m|) m / |m|  with  m = (-x) (+) y.
    Returns the zero vector when y coincides with x.
    """
    k = _kappa_value(kappa)
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    sq = np.sqrt(-k)
    same = np.all(x == y, axis=-1, keepdims=True)
    m = mobius_add(-x, y, k)
    mn = _norm(m)
    degenerate = same | (mn == 0.0)
    safe = np.where(degenerate, 1.0, mn)
    arg = np.minimum(sq * mn, _ATANH_MAX)
    coef = 2.0 / (sq * _lambda(x, k)) * np.arctanh(arg) / safe
    return np.where(degenerate, 0.0, coef * m)


def dlog(x: np.ndarray, y: np.ndarray, w: np.ndarray, kappa) -> np.ndarray:
    """Differential of y -> log_x(y) applied to w (Jacobian-vector product).

    Chain rule through m = (-x) (+) y and the radial profile
    g(m) = 2/(sqrt(s) lambda_x) atanh(sqrt(s)|m|) m/|m|: the tangential part of
    dm scales by atanh(sqrt(s) r)/r, the radial part by sqrt(s)/(1 - s r^2).
    Reduces to the identity at y = x.  Exact, so one classical Runge-Kutta
    step in T_x integrates the pulled-back field at full order.
    """
    k = _kappa_value(kappa)
    s = -k
    sq = np.sqrt(s)
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    a = -x
    a2 = np.sum(a * a, axis=-1, keepdims=True)
    y2 = np.sum(y * y, axis=-1, keepdims=True)
    ay = np.sum(a * y, axis=-1, keepdims=True)
    aw = np.sum(a * w, axis=-1, keepdims=True)
    yw = np.sum(y * w, axis=-1, keepdims=True)
    den = 1.0 - 2.0 * k * ay + k * k * a2 * y2
    m = ((1.0 - 2.0 * k * ay - k * y2) * a + (1.0 + k * a2) * y) / den
    dnum = (-2.0 * k * aw - 2.0 * k * yw) * a + (1.0 + k * a2) * w
    dden = -2.0 * k * aw + 2.0 * k * k * a2 * yw
    u = (dnum - m * dden) / den
    r = _norm(m)
    safe = np.where(r == 0.0, 1.0, r)
    mu = m / safe
    u_rad = np.sum(mu * u, axis=-1, keepdims=True) * mu
    u_tan = u - u_rad
    coef_tan = np.where(r == 0.0, sq, np.arctanh(np.minimum(sq * r, _ATANH_MAX)) / safe)
    coef_rad = sq / (1.0 - s * r * r)
    return 2.0 / (sq * _lambda(x, k)) * (coef_tan * u_tan + coef_rad * u_rad)


def distance(x: np.ndarray, y: np.ndarray, kappa) -> np.ndarray:
    """Geodesic distance 2/sqrt(s) atanh(sqrt(s) |(-x) (+) y|)."""
    k = _kappa_value(kappa)
    sq = np.sqrt(-k)
    m = mobius_add(-x, y, k)
    arg = np.minimum(sq * _norm(m), _ATANH_MAX)
    return (2.0 / sq) * np.arctanh(arg)[..., 0]


def gyration(a: np.ndarray, b: np.ndarray, c: np.ndarray, kappa) -> np.ndarray:
    """gyr[a, b] c = -(a (+) b) (+) (a (+) (b (+) c)); a Euclidean isometry of c.

    c may be an arbitrary vector (typically a tangent), so the compositions
    use the raw algebraic Mobius form without the ball projection.
    """
    k = _kappa_value(kappa)
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    ab = _mobius_add_raw(a, b, k)
    abc = _mobius_add_raw(a, _mobius_add_raw(b, c, k), k)
    return _mobius_add_raw(-ab, abc, k)


def parallel_transport(x: np.ndarray, y: np.ndarray, v: np.ndarray, kappa) -> np.ndarray:
    """Transport tangent v from T_x to T_y: (lambda_x / lambda_y) gyr[y, -x] v.

    Preserves the metric: lambda_y |PT(v)| = lambda_x |v|.
    """
    k = _kappa_value(kappa)
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    return _lambda(x, k) / _lambda(y, k) * gyration(y, -x, v, k)


def gyromidpoint(points: np.ndarray, weights: np.ndarray, kappa) -> np.ndarray:
    """Weighted Mobius gyromidpoint of points (J, ..., d) with weights (J,).

    (1/2) (x) ( sum_j eta_j lambda_j z_j / sum_j |eta_j| (lambda_j - 1) ).
    Recovers the weighted arithmetic mean as kappa -> 0.  For kappa < 0 every
    lambda_j - 1 >= 1, so the denominator only degenerates when the weights
    are all (numerically) zero.
    """
    k = _kappa_value(kappa)
    pts = np.asarray(points, dtype=np.float64)
    eta = np.asarray(weights, dtype=np.float64).reshape(
        (pts.shape[0],) + (1,) * (pts.ndim - 1)
    )
    lam = _lambda(pts, k)
    den = np.sum(np.abs(eta) * (lam - 1.0), axis=0)
    if np.any(np.abs(den) < 1e-15):
        raise ValueError("ill-posed gyromidpoint weights: denominator vanishes")
    inner = np.sum(eta * lam * pts, axis=0) / den
    return mobius_scalar(0.5, inner, k)
