"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--json out.json]
"""

import argparse
import json
import timeit

import numpy as np

from bidirelay import kernels
from bidirelay.rate_region import simplex_grid


def cases(rng):
    a = rng.standard_normal((16, 16))
    sym = a + a.T
    gains = rng.uniform(0, 3, (1024, 2, 2, 2))
    powers = simplex_grid(2, 33, 10.0)
    orders = np.array([[0, 1], [1, 0]], dtype=np.int64)
    V = rng.uniform(0, 0.4, (2, 4, 4))
    for k in range(2):
        np.fill_diagonal(V[k], 0.0)
    D = rng.uniform(0.5, 1.5, (2, 4))
    G = rng.uniform(0.5, 1.5, (2, 4))
    return {
        "jacobi_eigh 16x16": lambda k: k.jacobi_eigh(sym.copy()),
        "pair_rates 1024x33x2 dpc": lambda k: k.pair_rates(gains, powers, orders, 1.0, True),
        "fixed_point_power n=4": lambda k: k.fixed_point_power(V, D, G, 1.0, 1e-12, 1e12, 200000),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", help="write timings here")
    args = ap.parse_args()

    backends = kernels.available_backends()
    rng = np.random.default_rng(0)
    rows = []
    for name, fn in cases(rng).items():
        row = {"kernel": name}
        for bname, mod in sorted(backends.items()):
            timer = timeit.Timer(lambda: fn(mod))
            number, _ = timer.autorange()
            best = min(timer.repeat(args.repeat, number)) / number
            row[bname] = best
        rows.append(row)

    names = sorted(backends)
    print(f"{'kernel':28s}" + "".join(f"{n:>14s}" for n in names)
          + ("     speedup" if len(names) > 1 else ""))
    for row in rows:
        line = f"{row['kernel']:28s}" + "".join(f"{row[n] * 1e6:12.1f}us" for n in names)
        if "cython" in row and "python" in row:
            line += f"{row['python'] / row['cython']:11.1f}x"
        print(line)
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)


if __name__ == "__main__":
    main()
