"""Time the compiled kernels against their pure-Python fallbacks.

Usage: ``python benchmarks/bench_kernels.py [--repeat 5]``
"""

import argparse
import timeit

import numpy as np

from bagstls import _kernels_py as pure

try:
    from bagstls import _kernels as compiled
except ImportError:  # pragma: no cover
    compiled = None


def _lasso_case(p, n=500, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    y = X[:, : p // 2].sum(axis=1) + rng.standard_normal(n)
    return np.ascontiguousarray(X.T @ X / n), np.ascontiguousarray(X.T @ y / n)


def cases():
    for p in (15, 30, 100):
        gram, xty = _lasso_case(p)
        yield f"lasso_cd_gram p={p}", lambda m, g=gram, v=xty: m.lasso_cd_gram(
            g, v, 0.05, np.zeros(g.shape[0]), 1e-10, 1000
        )
    for steps in (24_000,):
        yield f"rk4_lotka_volterra steps={steps}", lambda m, s=steps: m.rk4_lotka_volterra(
            1.0, -0.1, -1.5, 0.075, 10.0, 5.0, 24.0 / s, s, 1e12
        )


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    print(f"{'kernel':<34}{'pure (ms)':>12}{'compiled (ms)':>15}{'speedup':>10}")
    for name, fn in cases():
        t_pure = min(timeit.repeat(lambda: fn(pure), number=1, repeat=args.repeat)) * 1e3
        if compiled is None:
            print(f"{name:<34}{t_pure:>12.2f}{'n/a':>15}{'':>10}")
            continue
        t_comp = min(timeit.repeat(lambda: fn(compiled), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:<34}{t_pure:>12.2f}{t_comp:>15.3f}{t_pure / t_comp:>9.1f}x")


if __name__ == "__main__":
    main()
