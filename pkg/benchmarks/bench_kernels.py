"""Benchmark the likelihood kernels: numba JIT flavor vs the pure-numpy
fallback, on one packed synthetic corpus.

Run from the repository root:

    python3 benchmarks/bench_kernels.py --docs 2000 --length 128 --dim 16

The JIT columns appear only when numba compiled (i.e. BBSCORE_NO_NUMBA is
unset); the numpy rows always run, so the script doubles as a smoke test of
the fallback path.
"""

import argparse
import timeit

import numpy as np

from bbscore import _kernels, simulate_corpus


def build_corpus(docs, length, dim, seed):
    corpus = simulate_corpus(docs, length, dim, 1.0, seed=seed)
    return _kernels.pack_ragged([d.rows for d in corpus])


def bench(fn, repeat, number):
    times = timeit.repeat(fn, repeat=repeat, number=number)
    return min(times) / number


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--docs", type=int, default=2000)
    parser.add_argument("--length", type=int, default=128)
    parser.add_argument("--dim", type=int, default=16)
    parser.add_argument("--window", type=int, default=4)
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--number", type=int, default=3)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    flat, offsets = build_corpus(args.docs, args.length, args.dim, args.seed)
    mb = flat.nbytes / 2 ** 20
    print(f"corpus: {args.docs} docs x T={args.length} x dim={args.dim} "
          f"({mb:.1f} MiB), window half-width {args.window}")
    print(f"numba available: {_kernels.USING_NUMBA}")

    cases = [
        ("bridge_parts_many", "numpy",
         lambda: _kernels.bridge_parts_many_numpy(flat, offsets)),
        ("windowed_beta_sum_many", "numpy",
         lambda: _kernels.windowed_beta_sum_many_numpy(flat, offsets, args.window)),
    ]
    if _kernels.USING_NUMBA:
        cases += [
            ("bridge_parts_many", "numba",
             lambda: _kernels.bridge_parts_many_jit(flat, offsets)),
            ("windowed_beta_sum_many", "numba",
             lambda: _kernels.windowed_beta_sum_many_jit(flat, offsets, args.window)),
        ]
        # trigger compilation outside the timed region
        _kernels.bridge_parts_many_jit(flat[:6], offsets[:3].copy())
        _kernels.windowed_beta_sum_many_jit(flat[:20], np.array([0, 20]), args.window)

    results = {}
    for name, flavor, fn in cases:
        results[(name, flavor)] = bench(fn, args.repeat, args.number)

    print(f"\n{'kernel':<26} {'flavor':<7} {'best (ms)':>10} {'speedup':>8}")
    for name in ("bridge_parts_many", "windowed_beta_sum_many"):
        base = results[(name, "numpy")]
        for flavor in ("numpy", "numba"):
            if (name, flavor) not in results:
                continue
            t = results[(name, flavor)]
            speed = base / t
            print(f"{name:<26} {flavor:<7} {1e3 * t:>10.3f} {speed:>7.2f}x")


if __name__ == "__main__":
    main()
