"""Notch-type resonator forward model and synthetic traces.

    S21(f) = a e^{i alpha} e^{-2 pi i f tau} [1 - (Ql/|Qc|) e^{i phi} / (1 + 2i Ql (f/fr - 1))]
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .errors import UnphysicalParameterError


@dataclass(frozen=True)
class NotchParams:
    fr: float          # Hz
    ql: float
    qc_mag: float
    phi: float = 0.0   # rad
    a: float = 1.0
    alpha: float = 0.0  # rad
    tau: float = 0.0   # s

    def __post_init__(self):
        for name in ("fr", "ql", "qc_mag", "a"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive and finite, got {value}")
        for name in ("phi", "alpha", "tau"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    @property
    def inverse_qi(self):
        return 1.0 / self.ql - math.cos(self.phi) / self.qc_mag

    @property
    def qi(self):
        """Internal Q, 1/Qi = 1/Ql - cos(phi)/|Qc|; raises if not positive."""
        inv = self.inverse_qi
        if not inv > 0:
            raise UnphysicalParameterError(
                f"1/Ql - cos(phi)/|Qc| = {inv:.3g} <= 0: no positive internal Q")
        return 1.0 / inv

    def as_vector(self):
        return np.array([self.fr, self.ql, self.qc_mag, self.phi, self.a, self.alpha, self.tau])

    @classmethod
    def from_vector(cls, v):
        return cls(*(float(x) for x in v))

    def as_record(self):
        return {"fr_hz": self.fr, "ql": self.ql, "qc_mag": self.qc_mag, "phi_rad": self.phi,
                "a": self.a, "alpha_rad": self.alpha, "tau_s": self.tau}

    @classmethod
    def from_record(cls, rec):
        return cls(fr=rec["fr_hz"], ql=rec["ql"], qc_mag=rec["qc_mag"],
                   phi=rec.get("phi_rad", 0.0), a=rec.get("a", 1.0),
                   alpha=rec.get("alpha_rad", 0.0), tau=rec.get("tau_s", 0.0))


@dataclass(frozen=True)
class TraceMetadata:
    p_vna_dbm: Optional[float] = None
    p_att_db: Optional[float] = None
    temperature_k: Optional[float] = None

    def as_record(self):
        return {k: v for k, v in (("p_vna_dbm", self.p_vna_dbm), ("p_att_db", self.p_att_db),
                                  ("temperature_k", self.temperature_k)) if v is not None}


@dataclass(frozen=True, eq=False)
class ComplexTrace:
    frequencies: np.ndarray
    s21: np.ndarray
    metadata: TraceMetadata = field(default_factory=TraceMetadata)

    def __post_init__(self):
        f = np.asarray(self.frequencies, dtype=float)
        s = np.asarray(self.s21, dtype=complex)
        if f.ndim != 1 or s.shape != f.shape:
            raise ValueError("frequencies and s21 must be 1-D arrays of equal length")
        if f.size > 1 and not np.all(np.diff(f) > 0):
            raise ValueError("frequencies must be strictly increasing")
        if not (np.all(np.isfinite(f)) and np.all(np.isfinite(s))):
            raise ValueError("trace contains non-finite values")
        f.setflags(write=False)
        s.setflags(write=False)
        object.__setattr__(self, "frequencies", f)
        object.__setattr__(self, "s21", s)

    def __len__(self):
        return self.frequencies.size

    def __eq__(self, other):
        if not isinstance(other, ComplexTrace):
            return NotImplemented
        return (np.array_equal(self.frequencies, other.frequencies)
                and np.array_equal(self.s21, other.s21) and self.metadata == other.metadata)

    def scaled(self, c):
        return ComplexTrace(self.frequencies, self.s21 * c, self.metadata)


def notch_s21(p: NotchParams, f):
    """Complex S21 at frequency ``f`` (Hz; scalar or array)."""
    f_arr = np.atleast_1d(np.asarray(f, dtype=float))
    out = kernels.notch(f_arr, p.as_vector())
    return complex(out[0]) if np.ndim(f) == 0 else out


def noise_sigma_for_snr(p: NotchParams, snr_db: float) -> float:
    """Per-quadrature noise sigma for a given resonance signal-to-noise ratio.

    The signal is the resonance-circle diameter ``a * Ql/|Qc|``; the noise is
    the rms of the complex noise, ``sqrt(2) * sigma``.
    """
    return p.a * (p.ql / p.qc_mag) * 10.0 ** (-snr_db / 20.0) / math.sqrt(2.0)


def synthesize_trace(p: NotchParams, f_start: float, f_stop: float, n_points: int,
                     noise_sigma: float = 0.0, seed: int = 0,
                     metadata: Optional[TraceMetadata] = None) -> ComplexTrace:
    """Uniform-grid trace of the notch model plus white complex Gaussian noise.

    Noise comes from ``numpy.random.Generator(PCG64(seed))``: one call to
    ``standard_normal((2, n_points))``, row 0 the real part and row 1 the
    imaginary part, each scaled by ``noise_sigma``.  A given seed therefore
    yields the same trace on every platform numpy supports.
    """
    if not f_start < f_stop:
        raise ValueError("need f_start < f_stop")
    if n_points < 16:
        raise ValueError(f"need at least 16 points, got {n_points}")
    if not noise_sigma >= 0:
        raise ValueError("noise_sigma must be >= 0")
    f = np.linspace(f_start, f_stop, int(n_points))
    s = kernels.notch(f, p.as_vector())
    if noise_sigma > 0:
        g = np.random.Generator(np.random.PCG64(seed)).standard_normal((2, f.size))
        s = s + noise_sigma * (g[0] + 1j * g[1])
    return ComplexTrace(f, s, metadata or TraceMetadata())
