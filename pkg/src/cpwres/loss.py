"""Loss budget of the internal quality factor and the TLS saturation model.

    1/Qi = 1/Q0 + 1/Q_TLS(n, T) + 1/Q_qp(T)
    1/Q_TLS = (1/Q_TLS^0) tanh(h fr / 2 kB T) / (1 + n/n_c)^beta

The quasiparticle term is a caller-supplied function of temperature and
defaults to zero.
"""

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .constants import CODATA
from .numerics import LeastSquaresOptions, least_squares

BETA_MAX = 2.0
BETA_MIN = 1e-9
MIN_DECADES = 1.5
# box for the log-space parameters; keeps exp() finite while the solver explores
LOG_Q_MAX = math.log(1e12)
LOG_NC_RANGE = (math.log(1e-9), math.log(1e9))


class IllConditionedWarning(UserWarning):
    """The data cannot separate n_c and beta."""


@dataclass(frozen=True)
class TlsFitParams:
    q_tls0: float
    n_c: float
    beta: float
    q0: float

    def __post_init__(self):
        for name in ("q_tls0", "n_c", "beta", "q0"):
            value = getattr(self, name)
            if not value > 0:
                raise ValueError(f"{name} must be > 0, got {value}")
        if self.beta > BETA_MAX:
            raise ValueError(f"beta must be <= {BETA_MAX}, got {self.beta}")

    def as_record(self):
        return {"q_tls0": self.q_tls0, "n_c": self.n_c, "beta": self.beta, "q0": self.q0}


@dataclass(frozen=True)
class LossObservation:
    n_ph: float
    temperature: float   # K
    fr: float            # Hz
    qi_measured: float
    qi_sigma: Optional[float] = None

    def __post_init__(self):
        if not self.n_ph >= 0:
            raise ValueError(f"n_ph must be >= 0, got {self.n_ph}")
        if not self.temperature > 0:
            raise ValueError(f"temperature must be > 0, got {self.temperature}")
        if not self.qi_measured > 0:
            raise ValueError(f"qi must be > 0, got {self.qi_measured}")


@dataclass
class TlsFit:
    params: TlsFitParams
    sigma: dict
    covariance: Optional[np.ndarray]    # order: q_tls0, n_c, beta, q0
    converged: bool
    ill_conditioned: bool
    residual_norm: float
    n_observations: int
    warnings: list = field(default_factory=list)

    def as_record(self):
        rec = self.params.as_record()
        for k, v in self.sigma.items():
            rec[f"{k}_sigma"] = None if not math.isfinite(v) else v
        rec.update(converged=self.converged, ill_conditioned=self.ill_conditioned,
                   residual_norm=self.residual_norm, n_observations=self.n_observations)
        return rec


def _thermal_factor(fr, t):
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore"):
        x = CODATA.h * np.asarray(fr, dtype=float) / (2.0 * CODATA.k_b * t)
    return np.tanh(x)      # t = 0 -> x = inf -> 1


def tls_inverse_q(p: TlsFitParams, n_ph, t, fr):
    """1/Q_TLS for photon number ``n_ph``, temperature ``t`` (K) and ``fr`` (Hz)."""
    n_ph = np.asarray(n_ph, dtype=float)
    out = _thermal_factor(fr, t) / (1.0 + n_ph / p.n_c) ** p.beta / p.q_tls0
    return float(out) if out.ndim == 0 else out


def total_qi(p: TlsFitParams, n_ph, t, fr, qp_hook: Optional[Callable] = None):
    """Internal Q from the background, TLS and (optional) quasiparticle terms."""
    inv = 1.0 / p.q0 + tls_inverse_q(p, n_ph, t, fr)
    if qp_hook is not None:
        inv = inv + np.asarray(qp_hook(np.asarray(t, dtype=float)), dtype=float)
    out = 1.0 / np.asarray(inv)
    return float(out) if out.ndim == 0 else out


def relaxation_bound(ql: float, fr: float) -> float:
    """Upper bound on the relaxation time (s) set by the loaded Q."""
    if not (ql > 0 and fr > 0):
        raise ValueError("need ql > 0 and fr > 0")
    return ql / (2.0 * math.pi * fr)


def _decades(n_ph):
    pos = n_ph[n_ph > 0]
    if pos.size < 2:
        return 0.0
    return float(np.log10(pos.max() / pos.min()))


def fit_tls(observations: Sequence[LossObservation], initial: Optional[TlsFitParams] = None,
            qp_hook: Optional[Callable] = None, weighted: bool = False,
            options: Optional[LeastSquaresOptions] = None) -> TlsFit:
    """Fit Q_TLS^0, n_c, beta and Q0 to measured Qi(n_ph, T).

    Residuals are taken in 1/Q.  With ``weighted=True`` and a ``qi_sigma`` on
    every observation they are scaled by 1/sigma(1/Q) = Qi**2 / sigma.  The three
    scale parameters are fitted as logarithms; beta is bounded to (0, 2].
    """
    obs = list(observations)
    if len(obs) < 4:
        raise ValueError(f"need at least 4 observations for 4 parameters, got {len(obs)}")
    n_ph = np.array([o.n_ph for o in obs])
    t = np.array([o.temperature for o in obs])
    fr = np.array([o.fr for o in obs])
    qi = np.array([o.qi_measured for o in obs])
    target = 1.0 / qi
    if weighted:
        if not all(o.qi_sigma is not None and o.qi_sigma > 0 for o in obs):
            raise ValueError("weighted fit needs a positive qi_sigma on every observation")
        weight = qi ** 2 / np.array([o.qi_sigma for o in obs])
    else:
        weight = np.ones_like(qi)

    notes = []
    ill = False
    span = _decades(n_ph)
    if span < MIN_DECADES:
        ill = True
        notes.append(f"photon numbers span {span:.2f} decades (< {MIN_DECADES}): n_c and beta are not separable")
        warnings.warn(notes[-1], IllConditionedWarning, stacklevel=2)
    if len(obs) < 8:
        notes.append(f"only {len(obs)} observations; at least 8 recommended")

    thermal = _thermal_factor(fr, t)
    extra = np.zeros_like(qi) if qp_hook is None else np.asarray(qp_hook(t), dtype=float)

    if initial is None:
        q0 = float(qi.max())
        initial = TlsFitParams(q_tls0=3.0 * q0, n_c=1.0, beta=0.3, q0=q0)
    x0 = np.array([math.log(initial.q_tls0), math.log(initial.n_c), initial.beta, math.log(initial.q0)])
    lower = np.array([0.0, LOG_NC_RANGE[0], BETA_MIN, 0.0])
    upper = np.array([LOG_Q_MAX, LOG_NC_RANGE[1], BETA_MAX, LOG_Q_MAX])
    x0 = np.clip(x0, lower, upper)

    def model(x):
        lq_tls, ln_c, beta, lq0 = x
        sat = (1.0 + n_ph * math.exp(-ln_c)) ** (-beta)
        return math.exp(-lq0) + math.exp(-lq_tls) * thermal * sat + extra

    def residual(x):
        return weight * (target - model(x))

    def jacobian(x):
        lq_tls, ln_c, beta, lq0 = x
        nc = math.exp(ln_c)
        base = 1.0 + n_ph / nc
        tls = math.exp(-lq_tls) * thermal * base ** (-beta)
        jac = np.empty((n_ph.size, 4))
        jac[:, 0] = tls
        jac[:, 1] = -tls * beta * (n_ph / nc) / base
        jac[:, 2] = tls * np.log(base)
        jac[:, 3] = math.exp(-lq0)
        return jac * weight[:, None]

    report = least_squares(residual, x0, bounds=(lower, upper), jacobian=jacobian, options=options)
    lq_tls, ln_c, beta, lq0 = report.parameters
    params = TlsFitParams(math.exp(lq_tls), math.exp(ln_c), float(beta), math.exp(lq0))

    names = ("q_tls0", "n_c", "beta", "q0")
    if report.covariance is not None:
        d = np.array([params.q_tls0, params.n_c, 1.0, params.q0])
        cov = report.covariance * np.outer(d, d)
        sig = dict(zip(names, map(float, np.sqrt(np.clip(np.diag(cov), 0.0, None)))))
    else:
        cov = None
        sig = {k: math.nan for k in names}
        ill = True
        notes.append("singular Jacobian: parameter covariance unavailable")
    if not report.converged:
        notes.append(f"fit did not converge ({report.message})")
    return TlsFit(params, sig, cov, bool(report.converged), ill, report.residual_norm, len(obs), notes)
