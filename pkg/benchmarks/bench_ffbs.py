"""Time the compiled and pure-Python forward-filter backward-sample kernels.

Usage: python benchmarks/bench_ffbs.py [--repeats 20] [--t-len 200]
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from gsfavar import _kernels
from gsfavar._kernels import _ffbs_py


def problem(k: int, n: int, t_len: int, seed: int = 0):
    g = np.random.default_rng(seed)
    y = g.standard_normal((t_len, n))
    z = g.standard_normal((t_len, n, k))
    a = g.standard_normal((n, n))
    r = np.tile(a @ a.T + np.eye(n), (t_len, 1, 1))
    b = g.standard_normal((k, k))
    q = 0.01 * (b @ b.T) + 1e-3 * np.eye(k)
    normals = g.standard_normal((t_len + 1, k))
    return y, z, r, q, np.zeros(k), 4.0 * np.eye(k), normals


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=20)
    ap.add_argument("--t-len", type=int, default=200)
    a = ap.parse_args(argv)

    backends = {"python": _ffbs_py.ffbs}
    if _kernels._ffbs_ext is not None:
        backends["cython"] = _kernels._ffbs_ext.ffbs
    else:
        print("compiled extension not built; timing the Python backend only")

    # (state dim, obs dim): a coefficient block of a small VAR, a single volatility, a covariance row
    shapes = [(1, 1), (2, 1), (6, 3), (18, 3)]
    print(f"T={a.t_len}, best of {a.repeats} calls, milliseconds per call")
    print(f"{'k':>4} {'n':>3} " + " ".join(f"{b:>10}" for b in backends) + ("    speedup" if len(backends) > 1 else ""))
    for k, n in shapes:
        args = problem(k, n, a.t_len)
        ms = {name: 1e3 * min(timeit.repeat(lambda f=f: f(*args), number=1, repeat=a.repeats))
              for name, f in backends.items()}
        line = f"{k:>4} {n:>3} " + " ".join(f"{ms[b]:>10.3f}" for b in backends)
        if len(backends) > 1:
            line += f"  {ms['python'] / ms['cython']:>8.1f}x"
        print(line)


if __name__ == "__main__":
    main()
