"""Circle-fit extraction of notch resonator parameters from a complex S21 trace.

Pipeline of `fit_notch`:

1. cable delay from a bracketed scalar search that makes the trace most circular;
2. algebraic circle fit of the delay-corrected trace;
3. phase-vs-frequency fit around the circle centre -> fr, Ql, theta0;
4. off-resonant point -> environment amplitude and phase;
5. normalized circle -> |Qc| and impedance-mismatch angle phi;
6. joint least-squares refinement of all seven model parameters against the
   complex data, whose covariance supplies the uncertainties.
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import minimize_scalar

from . import kernels
from .errors import DegenerateCircleError, DegenerateGeometryError, UnphysicalParameterError
from .numerics import Circle2D, LeastSquaresReport, fit_circle, least_squares
from .s21 import ComplexTrace, NotchParams, TraceMetadata

MIN_POINTS = 32
EDGE_FRACTION = 0.1
DELAY_GRID = 81
RELIABLE_COUPLING = (0.1, 100.0)


@dataclass
class PhaseFit:
    fr: float
    ql: float
    theta0: float
    converged: bool
    report: Optional[LeastSquaresReport] = None


@dataclass
class NotchFitResult:
    params: NotchParams
    qi: float
    uncertainties: dict
    residual_norm: float
    n_points: int
    converged: bool
    covariance: Optional[np.ndarray] = None
    metadata: TraceMetadata = field(default_factory=TraceMetadata)

    @property
    def coupling_coefficient(self):
        return self.qi / self.params.qc_mag

    def as_record(self):
        p = self.params
        u = self.uncertainties

        def sig(key):
            v = u.get(key)
            return None if v is None or not math.isfinite(v) else float(v)

        rec = {
            "fr_hz": p.fr, "fr_hz_sigma": sig("fr"),
            "ql": p.ql, "ql_sigma": sig("ql"),
            "qc_mag": p.qc_mag, "qc_mag_sigma": sig("qc_mag"),
            "phi_rad": p.phi, "phi_rad_sigma": sig("phi"),
            "qi": self.qi, "qi_sigma": sig("qi"),
            "a": p.a, "a_sigma": sig("a"),
            "alpha_rad": p.alpha, "alpha_rad_sigma": sig("alpha"),
            "tau_s": p.tau, "tau_s_sigma": sig("tau"),
            "coupling_coefficient": self.coupling_coefficient,
            "residual_norm": self.residual_norm,
            "n_points": self.n_points,
            "converged": bool(self.converged),
        }
        rec.update(self.metadata.as_record())
        return rec

    @classmethod
    def from_record(cls, rec):
        params = NotchParams.from_record(rec)
        keys = {"fr": "fr_hz_sigma", "ql": "ql_sigma", "qc_mag": "qc_mag_sigma", "phi": "phi_rad_sigma",
                "qi": "qi_sigma", "a": "a_sigma", "alpha": "alpha_rad_sigma", "tau": "tau_s_sigma"}
        unc = {k: (math.nan if rec.get(v) is None else float(rec[v])) for k, v in keys.items()}
        meta = TraceMetadata(rec.get("p_vna_dbm"), rec.get("p_att_db"), rec.get("temperature_k"))
        return cls(params, float(rec["qi"]), unc, float(rec.get("residual_norm", math.nan)),
                   int(rec.get("n_points", 0)), bool(rec.get("converged", True)), None, meta)


@dataclass(frozen=True)
class CouplingDiagnostics:
    coupling_coefficient: float
    relative_error: float
    regime: str

    def as_record(self):
        return {"coupling_coefficient": self.coupling_coefficient,
                "qi_relative_error": None if not math.isfinite(self.relative_error) else self.relative_error,
                "regime": self.regime}


def _edge_count(n):
    return max(int(round(EDGE_FRACTION * n)), 3)


def _circle_scatter(f, s21, tau):
    z = kernels.derotate(f, s21, tau)
    try:
        c = fit_circle(z)
    except DegenerateGeometryError:
        return np.inf
    # unnormalized: dividing by r**2 or by the point spread rewards wrong delays
    # that smear the trace onto a large circle
    return kernels.radial_scatter(z.real, z.imag, c.center_x, c.center_y, c.radius)


def estimate_delay(trace: ComplexTrace) -> float:
    """Electrical delay tau (s) that makes the trace most circular.

    The search is bracketed around the delay implied by the phase slope of
    the outer 10% of points on each edge.
    """
    f, s = trace.frequencies, trace.s21
    n = f.size
    if n < MIN_POINTS:
        raise ValueError(f"delay estimation needs at least {MIN_POINTS} points, got {n}")
    m = _edge_count(n)
    slopes = []
    for sl in (slice(0, m), slice(n - m, n)):
        fe = f[sl] - f[sl].mean()
        slopes.append(np.polyfit(fe, np.unwrap(np.angle(s[sl])), 1)[0])
    tau0 = -float(np.mean(slopes)) / (2.0 * np.pi)

    # The scatter has local minima roughly 0.2/span apart: scan a grid finer
    # than that across the bracket, then polish the best cell with Brent.
    span = f[-1] - f[0]
    half = 0.5 / span
    centre = tau0
    for _ in range(2):
        grid = centre + np.linspace(-half, half, DELAY_GRID)
        scores = np.array([_circle_scatter(f, s, t) for t in grid])
        best = int(np.argmin(scores))
        centre = grid[best]
        if 0 < best < DELAY_GRID - 1:
            break
    step = 2.0 * half / (DELAY_GRID - 1)
    res = minimize_scalar(lambda t: _circle_scatter(f, s, t), bounds=(centre - step, centre + step),
                          method="bounded", options={"xatol": 1e-12 / span, "maxiter": 500})
    tau = float(res.x) if res.fun <= scores[best] else float(centre)

    z = kernels.derotate(f, s, tau)
    try:
        circle = fit_circle(z)
    except DegenerateGeometryError as exc:
        raise DegenerateCircleError(f"no resonance circle after delay removal ({exc})") from exc
    # a delay line without a resonance traces a circle around the origin
    if abs(circle.center) < 1e-3 * circle.radius:
        raise DegenerateCircleError("trace is a pure delay line: no resonance to fit")
    return tau


def _smooth(x, width):
    if width <= 1:
        return x
    kernel = np.ones(width) / width
    padded = np.concatenate([np.full(width // 2, x[0]), x, np.full(width - 1 - width // 2, x[-1])])
    return np.convolve(padded, kernel, mode="valid")


def _initial_resonance(f, z, theta):
    """Initial fr (steepest phase slope) and Ql (fr / FWHM of the |S21|^2 dip)."""
    n = f.size
    width = max(1, n // 200)
    slope = np.gradient(_smooth(theta, width), f)
    idx = int(np.argmax(np.abs(slope)))
    fr0 = float(f[idx])
    ql_slope = abs(slope[idx]) * fr0 / 4.0

    power = _smooth(np.abs(z) ** 2, width)
    m = _edge_count(n)
    baseline = 0.5 * (power[:m].mean() + power[-m:].mean())
    i_min = int(np.argmin(power))
    half = 0.5 * (baseline + power[i_min])
    left = i_min
    while left > 0 and power[left] < half:
        left -= 1
    right = i_min
    while right < n - 1 and power[right] < half:
        right += 1
    fwhm = f[right] - f[left]
    if 0 < left and right < n - 1 and fwhm > 0:
        ql0 = fr0 / fwhm
    else:
        ql0 = ql_slope
    if not (np.isfinite(ql0) and ql0 > 0):
        ql0 = 10.0 * fr0 / (f[-1] - f[0])
    return idx, fr0, ql0


def fit_phase(f, theta, fr0, ql0, theta0=None) -> PhaseFit:
    """Fit theta(f) = theta0 + 2 arctan(2 Ql (1 - f/fr)) to unwrapped phase data."""
    f = np.asarray(f, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if theta0 is None:
        theta0 = float(theta[int(np.argmin(np.abs(f - fr0)))])
    p0 = np.array([fr0, ql0, theta0], dtype=float)
    scale = np.array([fr0 / ql0, ql0, 1.0])

    def unpack(u):
        return p0 + scale * u

    def residual(u):
        fr, ql, th0 = unpack(u)
        return theta - (th0 + 2.0 * np.arctan(2.0 * ql * (1.0 - f / fr)))

    def jacobian(u):
        fr, ql, th0 = unpack(u)
        x = 1.0 - f / fr
        w = 2.0 / (1.0 + (2.0 * ql * x) ** 2)
        jac = np.empty((f.size, 3))
        jac[:, 0] = -w * 2.0 * ql * f / fr ** 2
        jac[:, 1] = -w * 2.0 * x
        jac[:, 2] = -1.0
        return jac * scale

    report = least_squares(residual, np.zeros(3), jacobian=jacobian)
    fr, ql, th0 = unpack(report.parameters)
    span = f[-1] - f[0]
    resolved = (np.isfinite(fr) and np.isfinite(ql) and ql > 0 and f[0] <= fr <= f[-1]
                and ql * span / fr >= 1.0)
    return PhaseFit(float(fr), float(ql), float(th0), bool(report.converged and resolved), report)


def _wrap(angle):
    return float(math.remainder(angle, 2.0 * math.pi))


def _stage_estimates(trace: ComplexTrace):
    """Steps 1-5: delay, circle, phase fit, environment and normalized circle."""
    f, s = trace.frequencies, trace.s21
    tau = estimate_delay(trace)
    z = kernels.derotate(f, s, tau)
    circle = fit_circle(z)
    theta = np.unwrap(np.angle(z - circle.center))
    _, fr0, ql0 = _initial_resonance(f, z, theta)
    phase = fit_phase(f, theta, fr0, ql0)

    z_inf = circle.center + circle.radius * np.exp(1j * (phase.theta0 + np.pi))
    a = abs(z_inf)
    alpha = float(np.angle(z_inf))
    norm = a * np.exp(1j * alpha)
    c_norm = circle.center / norm
    r_norm = circle.radius / a
    phi = float(np.angle(1.0 - c_norm))
    qc_mag = phase.ql / (2.0 * r_norm)
    return NotchParams(phase.fr, phase.ql, qc_mag, phi, a, alpha, tau), phase, circle


def _refine(trace: ComplexTrace, start: NotchParams):
    f, s = trace.frequencies, trace.s21
    f_ref = 0.5 * (f[0] + f[-1])
    span = f[-1] - f[0]
    alpha_ref = start.alpha - 2.0 * np.pi * f_ref * start.tau
    p0 = np.array([start.fr, start.ql, start.qc_mag, start.phi, start.a, alpha_ref, start.tau])
    scale = np.array([start.fr / start.ql, start.ql, start.qc_mag, 1.0, start.a, 1.0, 1.0 / (2.0 * np.pi * span)])

    def residual(u):
        model = kernels.notch(f, p0 + scale * u, f_ref)
        d = model - s
        return np.concatenate([d.real, d.imag])

    def jacobian(u):
        _, jac = kernels.notch_jacobian(f, p0 + scale * u, f_ref)
        jac = jac * scale
        return np.vstack([jac.real, jac.imag])

    report = least_squares(residual, np.zeros(7), jacobian=jacobian)
    p = p0 + scale * report.parameters
    cov = None
    if report.covariance is not None:
        # back to physical parameters: alpha = alpha_ref + 2 pi f_ref tau
        m = np.diag(scale)
        m[5, 6] = 2.0 * np.pi * f_ref * scale[6]
        cov = m @ report.covariance @ m.T
    alpha = _wrap(p[5] + 2.0 * np.pi * f_ref * p[6])
    return p, alpha, cov, report


def fit_notch(trace: ComplexTrace) -> NotchFitResult:
    """Extract fr, Ql, |Qc|, phi, Qi and the environment (a, alpha, tau).

    Raises `DegenerateCircleError` when the trace holds no resonance and
    `UnphysicalParameterError` when the fitted 1/Ql - cos(phi)/|Qc| <= 0.
    Non-convergence is reported through ``converged=False``.
    """
    if len(trace) < MIN_POINTS:
        raise ValueError(f"fit needs at least {MIN_POINTS} points, got {len(trace)}")
    start, phase, _ = _stage_estimates(trace)
    p, alpha, cov, report = _refine(trace, start)
    fr, ql, qc, phi, a, _, tau = p
    if not (ql > 0 and qc > 0 and a > 0):
        raise UnphysicalParameterError(f"refinement left the physical region (ql={ql:.3g}, qc={qc:.3g})")
    params = NotchParams(float(fr), float(ql), float(qc), _wrap(phi), float(a), alpha, float(tau))
    qi = params.qi

    names = ("fr", "ql", "qc_mag", "phi", "a", "alpha", "tau")
    if cov is not None:
        sig = np.sqrt(np.clip(np.diag(cov), 0.0, None))
        unc = dict(zip(names, map(float, sig)))
        grad = np.zeros(7)
        grad[1] = qi ** 2 / ql ** 2
        grad[2] = -qi ** 2 * math.cos(phi) / qc ** 2
        grad[3] = -qi ** 2 * math.sin(phi) / qc
        unc["qi"] = float(math.sqrt(max(grad @ cov @ grad, 0.0)))
    else:
        unc = {k: math.nan for k in names + ("qi",)}

    return NotchFitResult(params, qi, unc, report.residual_norm, len(trace),
                          bool(report.converged), cov, trace.metadata)


def coupling_diagnostics(result: NotchFitResult) -> CouplingDiagnostics:
    coeff = result.qi / result.params.qc_mag
    qerr = result.uncertainties.get("qi", math.nan)
    rel = qerr / result.qi if qerr is not None else math.nan
    lo, hi = RELIABLE_COUPLING
    regime = "reliable" if lo <= coeff <= hi else "caution"
    return CouplingDiagnostics(coeff, rel, regime)
