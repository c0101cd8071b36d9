"""Time the numba and numpy kernel implementations side by side.

    python benchmarks/bench_kernels.py [--points 1001] [--repeat 200]

Also times a full ``fit_notch`` under the active backend.  Compilation
happens once before timing; numba results are checked against numpy.
"""

import argparse
import timeit

import numpy as np

from cpwres import NotchParams, fit_notch, kernels, noise_sigma_for_snr, synthesize_trace


def _cases(n):
    rng = np.random.default_rng(0)
    p = NotchParams(5.04e9, 480.0, 1100.0, 0.1, 0.98, 0.3, 40e-9)
    f = np.linspace(p.fr - 5 * p.fr / p.ql, p.fr + 5 * p.fr / p.ql, n)
    vec = p.as_vector()
    z = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return {
        "notch": lambda k: k.notch(f, vec, 5.04e9),
        "notch_jacobian": lambda k: k.notch_jacobian(f, vec, 5.04e9),
        "circle_moments": lambda k: k.circle_moments(z.real, z.imag),
        "radial_scatter": lambda k: k.radial_scatter(z.real, z.imag, 0.1, 0.2, 1.1),
        "derotate": lambda k: k.derotate(f, z, 40e-9),
    }, p, f


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--points", type=int, default=1001)
    ap.add_argument("--repeat", type=int, default=200)
    args = ap.parse_args()

    cases, p, f = _cases(args.points)
    backends = [("numpy", kernels.NUMPY_KERNELS)]
    if kernels.JIT_KERNELS is not None:
        backends.append(("numba", kernels.JIT_KERNELS))
    else:
        print("numba unavailable or disabled; timing numpy only")

    print(f"{'kernel':<16}" + "".join(f"{name:>12}" for name, _ in backends) + "    (us per call)")
    for name, fn in cases.items():
        row = f"{name:<16}"
        ref = fn(kernels.NUMPY_KERNELS)
        for _, k in backends:
            out = fn(k)   # warm-up / compile
            flat_ref = np.concatenate([np.ravel(x) for x in ref]) if isinstance(ref, tuple) else np.ravel(ref)
            flat_out = np.concatenate([np.ravel(x) for x in out]) if isinstance(out, tuple) else np.ravel(out)
            assert np.allclose(flat_out, flat_ref, rtol=1e-10, atol=1e-12 * np.abs(flat_ref).max())
            t = timeit.timeit(lambda: fn(k), number=args.repeat) / args.repeat
            row += f"{t * 1e6:12.1f}"
        print(row)

    trace = synthesize_trace(p, f[0], f[-1], args.points, noise_sigma_for_snr(p, 40.0), 1)
    fit_notch(trace)
    n_fit = max(args.repeat // 20, 3)
    t = timeit.timeit(lambda: fit_notch(trace), number=n_fit) / n_fit
    print(f"\nfit_notch ({kernels.backend()} backend, {args.points} points): {t * 1e3:.2f} ms")


if __name__ == "__main__":
    main()
