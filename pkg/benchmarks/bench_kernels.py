"""Compare the compiled kernels with the pure-Python fallback.

Usage: python3 benchmarks/bench_kernels.py [--sizes 16 32 64] [--repeat 5]
"""
import argparse
import os
import random
import subprocess
import sys
import timeit

from mcasvis import _kernels_py as py

try:
    from mcasvis import _ckernels as cy
except ImportError:
    cy = None


def random_dag(n, density, rnd):
    """Predecessor bitsets of a random DAG over n nodes."""
    rows = []
    for i in range(n):
        row = 0
        for j in range(i):
            if rnd.random() < density:
                row |= 1 << j
        rows.append(row)
    return rows


def cases(n, rnd):
    rows = random_dag(n, 0.1, rnd)
    keys = [(rnd.randrange(n), i) for i in range(n)]
    starts = [rnd.randrange(4 * n) for _ in range(n)]
    ends = [s + rnd.randrange(1, 8) for s in starts]
    return {
        "closure": lambda m: m.closure(rows),
        "topo_sort": lambda m: m.topo_sort(rows, keys),
        "before_matrix": lambda m: m.before_matrix(starts, ends),
    }


def bench(fn, repeat):
    loops, _ = timeit.Timer(fn).autorange()
    return min(timeit.repeat(fn, number=loops, repeat=repeat)) / loops


def pipeline(pure, seeds):
    """Wall time of the full checker over stress histories in a fresh process."""
    code = (
        "import time\n"
        "from mcasvis import harness as H\n"
        f"hs = [H.run(H.stress_config(s, 'mcas', 'helping', 'sim-random')) for s in range({seeds})]\n"
        "t = time.perf_counter()\n"
        "assert all(H.check(h).passed for h in hs)\n"
        "print(time.perf_counter() - t)\n"
    )
    env = dict(os.environ, MCASVIS_PURE="1" if pure else "0")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True,
                         text=True, check=True)
    return float(out.stdout)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[16, 64, 256])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seeds", type=int, default=200)
    args = ap.parse_args(argv)
    if cy is None:
        print("compiled kernels not built; run: pip install -e . --no-build-isolation")
        return 1
    rnd = random.Random(0)
    print(f"{'kernel':<14}{'n':>6}{'python us':>12}{'cython us':>12}{'speedup':>9}")
    for n in args.sizes:
        for name, fn in cases(n, rnd).items():
            tp = bench(lambda: fn(py), args.repeat)
            tc = bench(lambda: fn(cy), args.repeat)
            print(f"{name:<14}{n:>6}{tp * 1e6:>12.1f}{tc * 1e6:>12.1f}{tp / tc:>8.1f}x")
    tp, tc = pipeline(True, args.seeds), pipeline(False, args.seeds)
    print(f"checker over {args.seeds} stress histories: python {tp:.2f}s, "
          f"cython {tc:.2f}s, {tp / tc:.2f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
