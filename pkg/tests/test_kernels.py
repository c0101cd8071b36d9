import os
import subprocess
import sys

import numpy as np
import pytest

from cpwres import kernels

from conftest import REF

needs_numba = pytest.mark.skipif(kernels.JIT_KERNELS is None, reason="numba unavailable")


def _inputs():
    rng = np.random.default_rng(3)
    f = np.sort(rng.uniform(5.0e9, 5.1e9, 777))
    p = np.array(list(REF.values()))
    z = rng.standard_normal(777) + 1j * rng.standard_normal(777)
    return f, p, z


@needs_numba
@pytest.mark.parametrize("f_ref", [0.0, 5.05e9])
def test_notch_agreement(f_ref):
    f, p, _ = _inputs()
    a = kernels.NUMPY_KERNELS.notch(f, p, f_ref)
    b = kernels.JIT_KERNELS.notch(f, p, f_ref)
    assert np.max(np.abs(a - b)) < 1e-12
    sa, ja = kernels.NUMPY_KERNELS.notch_jacobian(f, p, f_ref)
    sb, jb = kernels.JIT_KERNELS.notch_jacobian(f, p, f_ref)
    assert np.max(np.abs(sa - sb)) < 1e-12
    assert np.allclose(ja, jb, rtol=1e-10, atol=1e-12 * np.abs(ja).max())


@needs_numba
def test_moment_scatter_derotate_agreement():
    f, _, z = _inputs()
    ma = kernels.NUMPY_KERNELS.circle_moments(z.real, z.imag)
    mb = kernels.JIT_KERNELS.circle_moments(z.real, z.imag)
    assert np.allclose(ma, mb, rtol=1e-11, atol=1e-14)
    sa = kernels.NUMPY_KERNELS.radial_scatter(z.real, z.imag, 0.1, -0.2, 1.3)
    sb = kernels.JIT_KERNELS.radial_scatter(z.real, z.imag, 0.1, -0.2, 1.3)
    assert sa == pytest.approx(sb, rel=1e-12)
    da = kernels.NUMPY_KERNELS.derotate(f, z, 37e-9)
    db = kernels.JIT_KERNELS.derotate(f, z, 37e-9)
    assert np.max(np.abs(da - db)) < 1e-12


def test_jacobian_matches_finite_differences():
    f, p, _ = _inputs()
    f_ref = 5.05e9
    _, jac = kernels.notch_jacobian(f, p, f_ref)
    for k in range(7):
        h = 1e-6 * max(abs(p[k]), 1e-9)
        up, dn = p.copy(), p.copy()
        up[k] += h
        dn[k] -= h
        fd = (kernels.notch(f, up, f_ref) - kernels.notch(f, dn, f_ref)) / (2 * h)
        assert np.allclose(jac[:, k], fd, rtol=1e-5, atol=1e-6 * np.abs(fd).max())


def test_env_flag_selects_numpy():
    code = "from cpwres import kernels; print(kernels.backend())"
    env = dict(os.environ, CPWRES_DISABLE_JIT="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"


def test_backends_give_same_fit():
    code = ("import json; from cpwres import *; p = NotchParams(5.04e9, 480, 1100, 0.1, 0.98, 0.3, 4e-8);"
            "t = synthesize_trace(p, 5.0e9, 5.08e9, 801, 1e-3, 2);"
            "r = fit_notch(t); print(json.dumps([r.params.fr, r.params.ql, r.params.qc_mag, r.qi]))")
    outs = []
    for flag in ("0", "1"):
        env = dict(os.environ, CPWRES_DISABLE_JIT=flag)
        res = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
        outs.append(np.array(eval(res.stdout)))
    assert np.allclose(outs[0], outs[1], rtol=1e-8)
