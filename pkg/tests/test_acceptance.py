"""Acceptance criteria 1-7.

Each ``criterion_*`` function evaluates one criterion at its stated tolerance
and returns ``(passed, detail)``.  The pytest wrappers assert on it and the
conftest hook prints one PASS/FAIL line per criterion at the end of the run.
Run ``python tests/test_acceptance.py`` for the summary alone.
"""

import math
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from cpwres import (CpwGeometry, NotchParams, TlsFitParams, LossObservation, WaferStack, design_report,
                    ellip_k, fit_notch, fit_tls, noise_sigma_for_snr, photon_number, relaxation_bound,
                    synthesize_trace, total_qi)
from cpwres.constants import CODATA
from cpwres.design import conformal_factors, effective_permittivity, geometric_line_params

import oracles

pytestmark = pytest.mark.acceptance

RESULTS = {}

DESIGN_TARGETS = [  # length um, f_measured GHz, Qi, Lk uH/m, R Ohm/m
    (4643.0, 5.57, 813.0, 0.142, 16.08),
    (5084.0, 5.04, 776.0, 0.152, 15.52),
    (4643.0, 5.60, 568.0, 0.135, 22.8),
    (5084.0, 5.08, 599.0, 0.143, 19.95),
]
TLS_TARGETS = {  # q_tls0, n_c, beta, q0, fr
    "S1-fr1": (5703.0, 0.32, 0.16, 946.0, 5.04e9),
    "S1-fr2": (6789.0, 2.1, 0.3, 894.0, 5.57e9),
    "S2-fr1": (2941.0, 0.0104, 0.0791, 693.8, 5.085e9),
    "S2-fr2": (2342.0, 0.115, 0.082, 694.0, 5.604e9),
}


def _record(n, passed, detail):
    RESULTS[n] = (bool(passed), detail)
    return bool(passed), detail


def criterion_1():
    t0 = time.perf_counter()
    stack = WaferStack(378.0, 2.0, 11.7, 0.3)
    checks = []
    for length, fm, qi, lk, r in DESIGN_TARGETS:
        row = design_report(stack, CpwGeometry.on_stack(stack, 8.0, 5.0, length), fm, qi,
                            lg_ref=0.44, cg_ref=0.159)
        f_target = 6.40 if length == 4643.0 else 5.85
        checks += [
            ("eps_eff", row.eps_eff, 6.35, 0.01),
            (f"f_design@{length:g}", row.f_design, f_target, 0.005),
            ("lg", row.lg, 0.44, 0.03),
            ("cg", row.cg, 0.159, 0.05),
            (f"lk@{length:g}/{fm}", row.lk, lk, 0.02),
            (f"r@{length:g}/{fm}", row.r, r, 0.02),
        ]
    elapsed = time.perf_counter() - t0
    worst = max(checks, key=lambda c: abs(c[1] / c[2] - 1) / c[3])
    ok = all(abs(v / t - 1) <= tol for _, v, t, tol in checks) and elapsed < 1.0
    return _record(1, ok, f"worst {worst[0]} {worst[1]:.4g} vs {worst[2]} "
                          f"({abs(worst[1] / worst[2] - 1):.2%} of {worst[3]:.1%}); {elapsed * 1e3:.0f} ms")


def criterion_2():
    p = TlsFitParams(5703.0, 0.32, 0.16, 946.0)
    q1 = total_qi(p, 1.0, 0.05, 5.04e9)
    q100 = total_qi(p, 100.0, 0.05, 5.04e9)
    e1, e100 = abs(q1 / 865 - 1), abs(q100 / 899 - 1)
    return _record(2, e1 <= 0.06 and e100 <= 0.06,
                   f"Qi(n=1) {q1:.1f} vs 865 ({e1:.1%}); Qi(n=100) {q100:.1f} vs 899 ({e100:.1%})")


def _draw_notch(rng):
    while True:
        ql = math.exp(rng.uniform(math.log(200), math.log(5e4)))
        qc = ql * math.exp(rng.uniform(math.log(0.5), math.log(50)))
        phi = rng.uniform(-0.5, 0.5)
        p = NotchParams(rng.uniform(4e9, 8e9), ql, qc, phi, rng.uniform(0.5, 1.5),
                        rng.uniform(-math.pi, math.pi), rng.uniform(0, 100e-9))
        if p.inverse_qi > 0:        # qc/ql < cos(phi) has no positive internal Q
            return p


def criterion_3(n=200):
    t0 = time.perf_counter()
    rng = np.random.default_rng(20240601)
    noisy, exact = [], []
    for i in range(n):
        p = _draw_notch(rng)
        lw = p.fr / p.ql
        lo, hi = p.fr - 5 * lw, p.fr + 5 * lw
        for sigma, sink in ((noise_sigma_for_snr(p, 40.0), noisy), (0.0, exact)):
            r = fit_notch(synthesize_trace(p, lo, hi, 1001, sigma, seed=i))
            sink.append([abs(r.params.fr - p.fr) / lw, abs(r.params.ql / p.ql - 1),
                         abs(r.params.qc_mag / p.qc_mag - 1), abs(r.qi / p.qi - 1)])
    elapsed = time.perf_counter() - t0
    p95 = np.percentile(noisy, 95, axis=0)
    worst_exact = float(np.max(np.array(exact)[:, 1:]))
    worst_exact_fr = float(np.max(np.array(exact)[:, 0]))
    ok = (p95[0] <= 0.1 and p95[1] <= 0.02 and p95[2] <= 0.02 and p95[3] <= 0.05
          and worst_exact <= 1e-3 and elapsed < 30.0)
    return _record(3, ok, f"p95 fr {p95[0]:.4f} lw, ql {p95[1]:.2%}, qc {p95[2]:.2%}, qi {p95[3]:.2%}; "
                          f"noise-free max {worst_exact:.1e} (fr {worst_exact_fr:.1e} lw); {elapsed:.1f} s")


def criterion_4(n=1000):
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(n):
        qi = 10 ** rng.uniform(1, 7)
        qc = qi / 10 ** rng.uniform(-3, 2)       # coupling qi/qc in [1e-3, 1e2]
        ql = 1 / (1 / qi + 1 / qc)
        fr = rng.uniform(1e9, 20e9)
        p_in = 10 ** rng.uniform(-20, -10)
        got = photon_number(ql, qc, qi, fr, p_in).n_ph
        want = oracles.photon_closed_form(ql, qc, fr, p_in)
        worst = max(worst, abs(got / want - 1))
    return _record(4, worst <= 1e-12, f"max relative deviation {worst:.2e} over {n} sets")


def _tls_grid(row, noise, seed):
    qt, nc, b, q0, fr = row
    n = np.logspace(-2, 3, 25)
    qi = total_qi(TlsFitParams(qt, nc, b, q0), n, 0.05, fr)
    if noise:
        qi = qi * (1 + noise * np.random.default_rng(seed).standard_normal(25))
    return [LossObservation(float(a), 0.05, fr, float(q)) for a, q in zip(n, qi)]


def criterion_5(seeds=100):
    lines, ok = [], True
    for name, row in TLS_TARGETS.items():
        qt, nc, b, q0, _ = row
        f = fit_tls(_tls_grid(row, 0.0, 0)).params
        exact = max(abs(f.q0 / q0 - 1), abs(f.q_tls0 / qt - 1), abs(f.beta / b - 1), abs(f.n_c / nc - 1))
        errs = []
        for s in range(seeds):
            f = fit_tls(_tls_grid(row, 0.01, s)).params
            errs.append([abs(f.q0 / q0 - 1), abs(f.q_tls0 / qt - 1), abs(f.beta - b), abs(math.log2(f.n_c / nc))])
        p95 = np.percentile(errs, 95, axis=0)
        row_ok = exact <= 1e-3 and p95[0] <= 0.05 and p95[1] <= 0.15 and p95[2] <= 0.05 and p95[3] <= 1.0
        ok &= row_ok
        lines.append(f"{name}: exact {exact:.0e}, p95 q0 {p95[0]:.1%} qtls0 {p95[1]:.0%} "
                     f"beta {p95[2]:.3f} nc x{2 ** p95[3]:.3g}")
    return _record(5, ok, "; ".join(lines))


def criterion_6():
    rng = np.random.default_rng(6)
    # Lg * Cg identity over random geometries
    lc = 0.0
    for _ in range(200):
        w, g, d = rng.uniform(1, 50), rng.uniform(1, 50), rng.uniform(20, 2000)
        f = conformal_factors(CpwGeometry(w, g, 1000.0, d))
        eps = effective_permittivity(rng.uniform(1.5, 20), f)
        lg, cg = geometric_line_params(f, eps)
        lc = max(lc, abs(lg * cg * 1e-15 / (CODATA.mu0 * CODATA.eps0 * eps) - 1))
    # AGM vs quadrature on 50 moduli
    ks = rng.uniform(0, 0.99, 50)
    ek = max(abs(ellip_k(k) / oracles.ellip_k_quad(k) - 1) for k in ks)
    # monotonicity of total_qi in n_ph
    mono = True
    for _ in range(200):
        p = TlsFitParams(10 ** rng.uniform(2, 5), 10 ** rng.uniform(-3, 3), rng.uniform(0.01, 2), 10 ** rng.uniform(2, 5))
        n = np.sort(10 ** rng.uniform(-3, 4, 30))
        q = total_qi(p, n, rng.uniform(0.01, 1), rng.uniform(3e9, 8e9))
        mono &= bool(np.all(np.diff(q) >= 0))
    # global complex scale invariance of the notch fit
    p = NotchParams(5.04e9, 480, 1100, 0.1, 0.98, 0.3, 40e-9)
    t = synthesize_trace(p, p.fr - 5 * p.fr / p.ql, p.fr + 5 * p.fr / p.ql, 1001)
    base = fit_notch(t)
    inv = 0.0
    for c in (np.exp(1.3j), 0.02 * np.exp(-2.2j), 7.0 + 3.0j):
        r = fit_notch(t.scaled(c))
        inv = max(inv, *(abs(x / y - 1) for x, y in [(r.params.fr, base.params.fr), (r.params.ql, base.params.ql),
                                                    (r.params.qc_mag, base.params.qc_mag), (r.qi, base.qi)]),
                  abs(r.params.phi - base.params.phi))
    ok = lc <= 1e-12 and ek <= 1e-12 and mono and inv <= 1e-9
    return _record(6, ok, f"LgCg {lc:.1e}; ellip_k vs quad {ek:.1e}; monotone {mono}; scale invariance {inv:.1e}")


def criterion_7():
    vals = [relaxation_bound(q, f) for q in (488, 552) for f in (5.04e9, 5.57e9)]
    ok = all(13e-9 <= v <= 18e-9 for v in vals)
    return _record(7, ok, "T in [" + ", ".join(f"{v * 1e9:.2f}" for v in vals) + "] ns")


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6, criterion_7]


@pytest.mark.parametrize("criterion", CRITERIA, ids=[f"criterion_{i}" for i in range(1, 8)])
def test_criterion(criterion):
    passed, detail = criterion()
    assert passed, detail


if __name__ == "__main__":
    failed = 0
    for i, fn in enumerate(CRITERIA, start=1):
        passed, detail = fn()
        failed += not passed
        print(f"criterion {i}: {'PASS' if passed else 'FAIL'}  {detail}")
    sys.exit(1 if failed else 0)
