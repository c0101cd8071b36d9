"""Numerical kernels shared by the design and fitting modules.

* ``ellip_k`` -- complete elliptic integral of the first kind via the
  arithmetic-geometric mean.  Takes the *modulus* k, not the parameter m = k**2.
* ``fit_circle`` -- algebraic (Taubin) circle fit.
* ``least_squares`` -- damped Gauss-Newton / Levenberg-Marquardt solver with
  box bounds and a finite-difference Jacobian fallback.
"""

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from . import kernels
from .errors import DegenerateGeometryError, DomainError

__all__ = [
    "agm",
    "ellip_k",
    "Circle2D",
    "fit_circle",
    "LeastSquaresOptions",
    "LeastSquaresReport",
    "least_squares",
]


# ---------------------------------------------------------------------------
# elliptic integral
# ---------------------------------------------------------------------------

def agm(a, b, max_iter=64):
    """Arithmetic-geometric mean of ``a`` and ``b`` (broadcasts over arrays)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    for _ in range(max_iter):
        a_next = 0.5 * (a + b)
        b = np.sqrt(a * b)
        a = a_next
        if np.all(np.abs(a - b) <= 4.0 * np.finfo(float).eps * np.abs(a)):
            break
    out = 0.5 * (a + b)
    return float(out) if out.ndim == 0 else out


def ellip_k(k):
    """K(k) = integral_0^{pi/2} dtheta / sqrt(1 - k^2 sin^2 theta).

    Parameters
    ----------
    k : float or array_like
        Modulus, ``0 <= k < 1``.

    Raises
    ------
    DomainError
        If any ``k`` is negative, ``>= 1`` or not finite.
    """
    k_arr = np.asarray(k, dtype=float)
    if not np.all(np.isfinite(k_arr)) or np.any(k_arr < 0.0) or np.any(k_arr >= 1.0):
        raise DomainError(f"ellip_k needs 0 <= k < 1, got {k!r}")
    # sqrt(1 - k^2) as sqrt((1-k)(1+k)) keeps precision for k close to 1
    k_prime = np.sqrt((1.0 - k_arr) * (1.0 + k_arr))
    return np.pi / (2.0 * agm(1.0, k_prime))


# ---------------------------------------------------------------------------
# circle fit
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Circle2D:
    center_x: float
    center_y: float
    radius: float

    def __post_init__(self):
        if not (np.isfinite(self.radius) and self.radius > 0):
            raise DegenerateGeometryError(f"circle radius must be positive and finite, got {self.radius}")

    @property
    def center(self):
        return complex(self.center_x, self.center_y)


_COLLINEAR_TOL = 1e-12


def fit_circle(points, tol=_COLLINEAR_TOL):
    """Algebraic circle fit (Taubin, solved by Newton iteration on the
    characteristic polynomial).

    ``points`` may be an ``(n, 2)`` array of ``(x, y)`` pairs or a 1-D complex
    array.  Exact for points lying exactly on a circle.  Raises
    `DegenerateGeometryError` when fewer than three points are given or the
    points are collinear (normalized covariance determinant below ``tol``).
    """
    pts = np.asarray(points)
    if np.iscomplexobj(pts):
        x, y = pts.real.ravel(), pts.imag.ravel()
    else:
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValueError("points must be an (n, 2) array or a complex vector")
        x, y = pts[:, 0].astype(float), pts[:, 1].astype(float)
    if x.size < 3:
        raise DegenerateGeometryError(f"need at least 3 points, got {x.size}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("points must be finite")

    xm, ym, mxx, myy, mxy, mxz, myz, mzz = kernels.circle_moments(x, y)
    mz = mxx + myy
    cov_xy = mxx * myy - mxy * mxy
    if mz <= 0.0 or cov_xy <= tol * mz * mz:
        raise DegenerateGeometryError("points are collinear or coincident")
    var_z = mzz - mz * mz

    a3 = 4.0 * mz
    a2 = -3.0 * mz * mz - mzz
    a1 = var_z * mz + 4.0 * cov_xy * mz - mxz * mxz - myz * myz
    a0 = mxz * (mxz * myy - myz * mxy) + myz * (myz * mxx - mxz * mxy) - var_z * cov_xy
    a22 = a2 + a2
    a33 = a3 + a3 + a3

    # Newton from eta = 0 towards the smallest root of the cubic
    eta = 0.0
    poly = a0
    for _ in range(99):
        dpoly = a1 + eta * (a22 + eta * a33)
        if dpoly == 0.0:
            break
        eta_new = eta - poly / dpoly
        if not np.isfinite(eta_new):
            break
        poly_new = a0 + eta_new * (a1 + eta_new * (a2 + eta_new * a3))
        if abs(poly_new) >= abs(poly):
            break
        done = abs(eta_new - eta) <= 1e-15 * max(abs(eta_new), mz)
        eta, poly = eta_new, poly_new
        if done:
            break

    det = eta * eta - eta * mz + cov_xy
    if abs(det) <= tol * mz * mz:
        raise DegenerateGeometryError("circle fit is singular (points nearly collinear)")
    xc = (mxz * (myy - eta) - myz * mxy) / det / 2.0
    yc = (myz * (mxx - eta) - mxz * mxy) / det / 2.0
    return Circle2D(float(xc + xm), float(yc + ym), float(np.sqrt(xc * xc + yc * yc + mz)))


# ---------------------------------------------------------------------------
# least squares
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LeastSquaresOptions:
    xtol: float = 1e-10
    ftol: float = 1e-12
    max_iter: int = 500
    fd_rel_step: float = 1e-8
    fd_abs_step: float = 1e-12
    max_damping: float = 1e16


@dataclass
class LeastSquaresReport:
    parameters: np.ndarray
    covariance: Optional[np.ndarray]
    residual_norm: float
    iterations: int
    converged: bool
    jacobian: Optional[np.ndarray] = None
    message: str = ""

    @property
    def covariance_available(self):
        return self.covariance is not None

    @property
    def stderr(self):
        """One-sigma parameter uncertainties, or NaNs when the covariance is unavailable."""
        if self.covariance is None:
            return np.full(len(self.parameters), np.nan)
        return np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))


def _fd_jacobian(fun, p, r0, opts, lower, upper):
    jac = np.empty((r0.size, p.size))
    for i in range(p.size):
        h = max(opts.fd_rel_step * abs(p[i]), opts.fd_abs_step)
        hi, lo = p.copy(), p.copy()
        hi[i] += h
        lo[i] -= h
        # fall back to a one-sided difference at an active bound
        if hi[i] > upper[i]:
            hi[i] = p[i]
        if lo[i] < lower[i]:
            lo[i] = p[i]
        jac[:, i] = (np.asarray(fun(hi), dtype=float) - np.asarray(fun(lo), dtype=float)) / (hi[i] - lo[i])
    return jac


def _covariance(jac, residual_norm, n_params):
    m = jac.shape[0]
    if m <= n_params:
        return None
    jtj = jac.T @ jac
    d = np.sqrt(np.diag(jtj))
    if not np.all(np.isfinite(d)) or np.any(d == 0.0):
        return None
    scaled = jtj / np.outer(d, d)
    w = np.linalg.eigvalsh(scaled)
    if w[0] <= 1e-14 * w[-1]:
        return None
    sigma2 = residual_norm ** 2 / (m - n_params)
    cov = sigma2 * np.linalg.inv(scaled) / np.outer(d, d)
    return 0.5 * (cov + cov.T)


def least_squares(residual_fn: Callable[[np.ndarray], np.ndarray],
                  initial: Sequence[float],
                  bounds=None,
                  jacobian: Optional[Callable[[np.ndarray], np.ndarray]] = None,
                  options: Optional[LeastSquaresOptions] = None) -> LeastSquaresReport:
    """Minimize ``sum(residual_fn(p)**2)``.

    Each iteration solves the damped normal equations
    ``(J^T J + lam * diag(J^T J)) dp = -J^T r`` as an augmented linear
    least-squares problem.  Damping starts at zero (a pure Gauss-Newton step)
    and is raised tenfold on every rejected step.  Trial points are projected
    onto ``bounds = (lower, upper)``.

    Convergence: relative step ``|dp| <= xtol * (|p| + xtol)``, relative
    cost decrease ``<= ftol``, a zero gradient, or damping exhausted at a
    stationary point.  Hitting ``max_iter`` returns ``converged=False``; it
    is not an exception.

    The covariance is ``s^2 (J^T J)^-1`` with ``s^2 = |r|^2 / (m - n)``,
    evaluated at the solution.  It is None when ``J^T J`` is singular.
    """
    opts = options or LeastSquaresOptions()
    p = np.array(initial, dtype=float)
    n = p.size
    if bounds is None:
        lower = np.full(n, -np.inf)
        upper = np.full(n, np.inf)
    else:
        lower = np.broadcast_to(np.asarray(bounds[0], dtype=float), (n,)).copy()
        upper = np.broadcast_to(np.asarray(bounds[1], dtype=float), (n,)).copy()
        if np.any(p < lower) or np.any(p > upper):
            raise ValueError("initial point lies outside the bounds")

    def fun(q):
        return np.asarray(residual_fn(q), dtype=float).ravel()

    def jac_at(q, rq):
        if jacobian is not None:
            return np.asarray(jacobian(q), dtype=float).reshape(rq.size, n)
        return _fd_jacobian(fun, q, rq, opts, lower, upper)

    r = fun(p)
    if not np.all(np.isfinite(r)):
        raise ValueError("residual_fn is not finite at the initial point")
    cost = float(r @ r)
    lam = 0.0
    converged = False
    message = "maximum iterations reached"
    iterations = 0
    jac = None

    while iterations < opts.max_iter:
        jac = jac_at(p, r)
        grad = jac.T @ r
        if cost == 0.0 or not np.any(grad):
            converged, message = True, "zero gradient"
            break
        iterations += 1
        diag = np.einsum("ij,ij->j", jac, jac)
        diag = np.where(diag > 0.0, diag, 1.0)

        accepted = False
        while True:
            if lam == 0.0:
                step = np.linalg.lstsq(jac, -r, rcond=None)[0]
            else:
                aug = np.vstack([jac, np.diag(np.sqrt(lam * diag))])
                rhs = np.concatenate([-r, np.zeros(n)])
                step = np.linalg.lstsq(aug, rhs, rcond=None)[0]
            trial = np.clip(p + step, lower, upper)
            step = trial - p
            r_trial = fun(trial)
            cost_trial = float(r_trial @ r_trial) if np.all(np.isfinite(r_trial)) else np.inf
            if cost_trial < cost:
                accepted = True
                break
            if not np.any(step):
                break
            lam = 1e-3 if lam == 0.0 else lam * 10.0
            if lam > opts.max_damping:
                break

        if not accepted:
            converged, message = True, "no further decrease possible"
            break

        small_step = np.linalg.norm(step) <= opts.xtol * (np.linalg.norm(p) + opts.xtol)
        small_decrease = (cost - cost_trial) <= opts.ftol * cost
        p, r, cost = trial, r_trial, cost_trial
        lam = lam / 10.0 if lam > 1e-7 else 0.0
        if small_step or small_decrease:
            converged = True
            message = "relative step below xtol" if small_step else "relative decrease below ftol"
            jac = jac_at(p, r)
            break
    else:
        jac = jac_at(p, r)

    residual_norm = float(np.sqrt(cost))
    cov = _covariance(jac, residual_norm, n) if jac is not None else None
    return LeastSquaresReport(p, cov, residual_norm, iterations, converged, jac, message)
