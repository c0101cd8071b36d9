"""Hot inner loops of the fitting pipeline.

Every kernel exists twice: an explicit-loop version compiled with numba's
``@njit`` and a vectorized numpy version.  Both compute the same thing; the
numba path is used when numba imports cleanly and ``CPWRES_DISABLE_JIT`` is
unset (or ``0``).  Set ``CPWRES_DISABLE_JIT=1`` to force the numpy path, e.g.
for debugging or on platforms without an LLVM toolchain.

The two implementations are exposed as ``NUMPY_KERNELS`` and ``JIT_KERNELS``
so tests and ``benchmarks/bench_kernels.py`` can compare them directly.
"""

import math
import os
from types import SimpleNamespace

import numpy as np

_DISABLE = os.environ.get("CPWRES_DISABLE_JIT", "0").strip().lower() not in ("", "0", "false", "no")

try:
    if _DISABLE:
        raise ImportError("numba disabled by CPWRES_DISABLE_JIT")
    from numba import njit
    HAS_NUMBA = True
except ImportError:
    HAS_NUMBA = False


# ---------------------------------------------------------------------------
# notch model: value and analytic Jacobian
# ---------------------------------------------------------------------------
# Parameter vector layout: [fr, ql, qc_mag, phi, a, alpha, tau].
# The environment phase is referenced to ``f_ref``:
#     a * exp(i*alpha) * exp(-2*pi*i*(f - f_ref)*tau) * (1 - (ql/qc) e^{i phi} / (1 + 2i ql (f/fr - 1)))
# With f_ref = 0 this is exactly the textbook notch model.

def _notch_numpy(f, p, f_ref):
    fr, ql, qc, phi, a, alpha, tau = p
    env = a * np.exp(1j * (alpha - 2.0 * np.pi * (f - f_ref) * tau))
    return env * (1.0 - (ql / qc) * np.exp(1j * phi) / (1.0 + 2j * ql * (f / fr - 1.0)))


def _notch_jac_numpy(f, p, f_ref):
    fr, ql, qc, phi, a, alpha, tau = p
    env = a * np.exp(1j * (alpha - 2.0 * np.pi * (f - f_ref) * tau))
    x = f / fr - 1.0
    den = 1.0 + 2j * ql * x
    eph = np.exp(1j * phi)
    t = (ql / qc) * eph / den
    s = env * (1.0 - t)
    jac = np.empty((f.size, 7), dtype=np.complex128)
    jac[:, 0] = env * t / den * (-2j * ql * f / (fr * fr))
    jac[:, 1] = -env * (eph / (qc * den) - t * 2j * x / den)
    jac[:, 2] = env * t / qc
    jac[:, 3] = -env * 1j * t
    jac[:, 4] = s / a
    jac[:, 5] = 1j * s
    jac[:, 6] = -2j * np.pi * (f - f_ref) * s
    return s, jac


def _notch_loop(f, p, f_ref):
    fr, ql, qc, phi, a, alpha, tau = p[0], p[1], p[2], p[3], p[4], p[5], p[6]
    n = f.shape[0]
    out = np.empty(n, dtype=np.complex128)
    eph = complex(math.cos(phi), math.sin(phi))
    for j in range(n):
        ang = alpha - 2.0 * math.pi * (f[j] - f_ref) * tau
        env = a * complex(math.cos(ang), math.sin(ang))
        den = complex(1.0, 2.0 * ql * (f[j] / fr - 1.0))
        out[j] = env * (1.0 - (ql / qc) * eph / den)
    return out


def _notch_jac_loop(f, p, f_ref):
    fr, ql, qc, phi, a, alpha, tau = p[0], p[1], p[2], p[3], p[4], p[5], p[6]
    n = f.shape[0]
    s_out = np.empty(n, dtype=np.complex128)
    jac = np.empty((n, 7), dtype=np.complex128)
    eph = complex(math.cos(phi), math.sin(phi))
    for j in range(n):
        ang = alpha - 2.0 * math.pi * (f[j] - f_ref) * tau
        env = a * complex(math.cos(ang), math.sin(ang))
        x = f[j] / fr - 1.0
        den = complex(1.0, 2.0 * ql * x)
        t = (ql / qc) * eph / den
        s = env * (1.0 - t)
        s_out[j] = s
        jac[j, 0] = env * t / den * complex(0.0, -2.0 * ql * f[j] / (fr * fr))
        jac[j, 1] = -env * (eph / (qc * den) - t * complex(0.0, 2.0 * x) / den)
        jac[j, 2] = env * t / qc
        jac[j, 3] = -env * 1j * t
        jac[j, 4] = s / a
        jac[j, 5] = 1j * s
        jac[j, 6] = complex(0.0, -2.0 * math.pi * (f[j] - f_ref)) * s
    return s_out, jac


# ---------------------------------------------------------------------------
# circle fitting support
# ---------------------------------------------------------------------------

def _moments_numpy(x, y):
    xm = x.mean()
    ym = y.mean()
    xi = x - xm
    yi = y - ym
    zi = xi * xi + yi * yi
    return (xm, ym, (xi * xi).mean(), (yi * yi).mean(), (xi * yi).mean(),
            (xi * zi).mean(), (yi * zi).mean(), (zi * zi).mean())


def _moments_loop(x, y):
    n = x.shape[0]
    xm = 0.0
    ym = 0.0
    for j in range(n):
        xm += x[j]
        ym += y[j]
    xm /= n
    ym /= n
    mxx = myy = mxy = mxz = myz = mzz = 0.0
    for j in range(n):
        xi = x[j] - xm
        yi = y[j] - ym
        zi = xi * xi + yi * yi
        mxx += xi * xi
        myy += yi * yi
        mxy += xi * yi
        mxz += xi * zi
        myz += yi * zi
        mzz += zi * zi
    return xm, ym, mxx / n, myy / n, mxy / n, mxz / n, myz / n, mzz / n


def _scatter_numpy(x, y, cx, cy, r):
    d = np.hypot(x - cx, y - cy) - r
    return float(np.mean(d * d))


def _scatter_loop(x, y, cx, cy, r):
    acc = 0.0
    n = x.shape[0]
    for j in range(n):
        d = math.hypot(x[j] - cx, y[j] - cy) - r
        acc += d * d
    return acc / n


def _derotate_numpy(f, s21, tau):
    return s21 * np.exp(2j * np.pi * f * tau)


def _derotate_loop(f, s21, tau):
    n = f.shape[0]
    out = np.empty(n, dtype=np.complex128)
    for j in range(n):
        ang = 2.0 * math.pi * f[j] * tau
        out[j] = s21[j] * complex(math.cos(ang), math.sin(ang))
    return out


NUMPY_KERNELS = SimpleNamespace(
    name="numpy",
    notch=_notch_numpy,
    notch_jacobian=_notch_jac_numpy,
    circle_moments=_moments_numpy,
    radial_scatter=_scatter_numpy,
    derotate=_derotate_numpy,
)

if HAS_NUMBA:
    JIT_KERNELS = SimpleNamespace(
        name="numba",
        notch=njit(cache=True)(_notch_loop),
        notch_jacobian=njit(cache=True)(_notch_jac_loop),
        circle_moments=njit(cache=True)(_moments_loop),
        radial_scatter=njit(cache=True)(_scatter_loop),
        derotate=njit(cache=True)(_derotate_loop),
    )
    active = JIT_KERNELS
else:
    JIT_KERNELS = None
    active = NUMPY_KERNELS


def backend():
    """Name of the kernel set in use (``"numba"`` or ``"numpy"``)."""
    return active.name


def notch(f, p, f_ref=0.0):
    return active.notch(np.ascontiguousarray(f, dtype=np.float64),
                        np.asarray(p, dtype=np.float64), float(f_ref))


def notch_jacobian(f, p, f_ref=0.0):
    return active.notch_jacobian(np.ascontiguousarray(f, dtype=np.float64),
                                 np.asarray(p, dtype=np.float64), float(f_ref))


def circle_moments(x, y):
    return active.circle_moments(np.ascontiguousarray(x, dtype=np.float64),
                                 np.ascontiguousarray(y, dtype=np.float64))


def radial_scatter(x, y, cx, cy, r):
    return active.radial_scatter(np.ascontiguousarray(x, dtype=np.float64),
                                 np.ascontiguousarray(y, dtype=np.float64),
                                 float(cx), float(cy), float(r))


def derotate(f, s21, tau):
    return active.derotate(np.ascontiguousarray(f, dtype=np.float64),
                           np.ascontiguousarray(s21, dtype=np.complex128), float(tau))
