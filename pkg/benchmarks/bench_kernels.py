"""Compare the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat N] [--json out.json]

Kernel rows time both implementations in this process. The conv rows time a
full 3x3 conv2d forward+backward in a subprocess per backend, since the
backend is fixed at import.
"""

import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np

from pairdense import _kernels_py

try:
    from pairdense import _kernels
except ImportError:
    _kernels = None

CONV_SNIPPET = """
import timeit, numpy as np, pairdense
from pairdense.numerics import Tensor, ops
r = np.random.default_rng(0)
x = Tensor(r.normal(size=({h}, {w}, {c})), requires_grad=True)
k = Tensor(r.normal(size=(3, 3, {c}, {c})) * 0.05, requires_grad=True)
b = Tensor(np.zeros({c}), requires_grad=True)
def step():
    ops.sum(ops.conv2d(x, k, b)).backward()
print(pairdense.BACKEND, min(timeit.repeat(step, number=1, repeat={repeat})))
"""


def best(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def kernel_rows(repeat):
    r = np.random.default_rng(0)
    rows = []
    for h, w, c in [(40, 50, 16), (80, 80, 32), (120, 120, 64)]:
        x = r.normal(size=(1, h, w, c))
        cols = r.normal(size=(h * w, 9 * c))
        src = r.normal(size=(h * w * 6, c))
        idx = r.integers(0, h * w, size=len(src)).astype(np.int64)
        cases = {
            "im2col": lambda m: m.im2col(x, 3, 3),
            "col2im": lambda m: m.col2im(cols, 1, h, w, c, 3, 3),
            "scatter_add_rows": lambda m: m.scatter_add_rows(src, idx, h * w),
        }
        for name, call in cases.items():
            py = best(lambda: call(_kernels_py), repeat)
            comp = best(lambda: call(_kernels), repeat) if _kernels else float("nan")
            rows.append({"op": name, "shape": f"{h}x{w}x{c}", "python_s": py, "compiled_s": comp})
    return rows


def conv_rows(repeat):
    rows = []
    for h, w, c in [(40, 50, 16), (80, 80, 32)]:
        times = {}
        for backend, env_extra in (("python", {"PAIRDENSE_PURE_PYTHON": "1"}), ("compiled", {})):
            env = {k: v for k, v in os.environ.items() if k != "PAIRDENSE_PURE_PYTHON"}
            env.update(env_extra)
            out = subprocess.run([sys.executable, "-c",
                                  CONV_SNIPPET.format(h=h, w=w, c=c, repeat=repeat)],
                                 env=env, capture_output=True, text=True, check=True).stdout.split()
            times[out[0]] = float(out[1])
        rows.append({"op": "conv2d fwd+bwd", "shape": f"{h}x{w}x{c}",
                     "python_s": times.get("python", float("nan")),
                     "compiled_s": times.get("compiled", float("nan"))})
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json")
    args = ap.parse_args()
    rows = kernel_rows(args.repeat) + conv_rows(args.repeat)
    print(f"{'op':<18}{'shape':<12}{'python ms':>12}{'compiled ms':>14}{'speedup':>10}")
    for row in rows:
        speed = row["python_s"] / row["compiled_s"] if row["compiled_s"] == row["compiled_s"] else float("nan")
        row["speedup"] = speed
        print(f"{row['op']:<18}{row['shape']:<12}{row['python_s'] * 1e3:>12.2f}"
              f"{row['compiled_s'] * 1e3:>14.2f}{speed:>9.1f}x")
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(rows, fh, indent=1)


if __name__ == "__main__":
    main()
