"""Compare the compiled and numpy backends of the characteristic integrator.

Usage: python benchmarks/bench_characteristics.py [--points P] [--modes M] [--substeps N]
"""

import argparse
import time

import numpy as np

from fenesim import _kernels_py

try:
    from fenesim import _kernels
except ImportError:
    _kernels = None


def make_problem(points, modes, substeps, seed=0):
    rng = np.random.default_rng(seed)
    x0 = rng.uniform(0.0, 2 * np.pi, size=(points, 2))
    kvec = rng.integers(-3, 4, size=(modes, 2)).astype(float)
    kvec[np.all(kvec == 0, axis=1)] = (1.0, 0.0)
    perp = np.column_stack([-kvec[:, 1], kvec[:, 0]])
    amp = perp / np.linalg.norm(perp, axis=1)[:, None]
    kind = (np.arange(modes) % 2).astype(np.int32)
    table = 0.1 * rng.standard_normal((substeps, 3, modes))
    return x0, -1e-3, table, kvec, amp, kind


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--points", type=int, default=4096)
    p.add_argument("--modes", type=int, default=40)
    p.add_argument("--substeps", type=int, default=10)
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args(argv)

    prob = make_problem(args.points, args.modes, args.substeps)
    print(f"points={args.points} modes={args.modes} substeps={args.substeps}")
    for jac in (False, True):
        t_py, (X_py, J_py) = best_of(lambda: _kernels_py.trace_modes(*prob, jac), args.repeat)
        line = f"jacobian={jac!s:<5}  numpy {t_py * 1e3:9.2f} ms"
        if _kernels is not None:
            t_c, (X_c, J_c) = best_of(lambda: _kernels.trace_modes(*prob, jac), args.repeat)
            diff = np.max(np.abs(X_c - X_py))
            if jac:
                diff = max(diff, np.max(np.abs(J_c - J_py)))
            line += f"  compiled {t_c * 1e3:9.2f} ms  speedup {t_py / t_c:6.2f}x  max diff {diff:.1e}"
        else:
            line += "  compiled extension not built"
        print(line)


if __name__ == "__main__":
    main()
