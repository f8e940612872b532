"""Compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--n 1024] [--repeat 5]

Both backends run the same power iteration, Euler growth and front
advance on identical inputs; the script checks that they agree and prints
wall-clock time per call and the speed-up.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from frontspeed import _backend
from frontspeed.assembly import assemble_line_operator
from frontspeed.eigen import _csr_arrays, _shift
from frontspeed.frontsim import _coefficients, initial_state
from frontspeed.medium import builtin_media, sample_field


def _timed(fn, repeat):
    best = np.inf
    out = None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--n", type=int, default=1024)
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--iters", type=int, default=2000)
    args = p.parse_args()

    if not _backend.COMPILED and _backend._compiled is None:
        raise SystemExit("compiled kernels are not built; run `pip install -e . --no-build-isolation`")
    compiled, python = _backend.get("compiled"), _backend.get("python")

    media = builtin_media()
    m = media["cosine1d"]
    op = assemble_line_operator(sample_field(m.a, args.n), sample_field(m.zeta, args.n), 1.0)
    arrays = _csr_arrays(op)
    sigma = _shift(op)
    coeff = _coefficients(m, 32, 60)
    h = m.period / 32
    dt = 0.9 / (float(np.max(coeff.a_face[:-1] + coeff.a_face[1:])) / h**2 + float(np.max(coeff.zeta)))

    cases = {
        "power_iteration": lambda k: k.power_iteration(*arrays, sigma, np.ones(op.n), 0.0, args.iters)[0],
        "euler_growth": lambda k: k.euler_growth(*arrays, 1.0 / sigma, np.ones(op.n), args.iters, args.iters // 5),
        "front_advance": lambda k: _front(k, coeff, dt, h, args.iters),
    }
    print(f"n = {args.n}, {args.iters} iterations per call, best of {args.repeat}")
    print(f"{'kernel':<16} {'compiled [ms]':>14} {'python [ms]':>12} {'speed-up':>9} {'max diff':>10}")
    for name, fn in cases.items():
        tc, rc = _timed(lambda: fn(compiled), args.repeat)
        tp, rp = _timed(lambda: fn(python), args.repeat)
        diff = float(np.max(np.abs(np.asarray(rc) - np.asarray(rp))))
        print(f"{name:<16} {1e3 * tc:>14.2f} {1e3 * tp:>12.2f} {tp / tc:>9.1f} {diff:>10.2e}")


def _front(kern, coeff, dt, h, nsteps):
    u = initial_state(builtin_media()["cosine1d"]).u.copy()
    kern.front_advance(u, coeff.a_face, coeff.zeta, dt, h, nsteps, 1.0, 0.0)
    return u


if __name__ == "__main__":
    main()
