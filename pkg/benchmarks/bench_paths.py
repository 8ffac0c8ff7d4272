"""Path-counting speed: compiled kernel versus the pure-Python walk.

    python benchmarks/bench_paths.py [--repeat 3]

Both backends count (materialize=False) on the same graphs; the script checks
that counts and weights agree and prints the best-of-N wall times.
"""

import argparse
import time

from liebrob import ensembles as ens
from liebrob import paths as pth

CASES = [
    ("grid 5x5, 0 -> 24", ens.grid((5, 5)), [0], [24], 16),
    ("k-local N=10 k=2", ens.complete_k_local(10, 2), [0], [9], 7),
    ("power-law chain N=12", ens.powerlaw_chain(12, 2.0), [0], [11], 7),
    ("chain N=40", ens.chain(40), [0], [39], 39),
]


def best_time(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if pth.BACKEND != "compiled":
        print("compiled kernel not available (LIEBROB_PURE set or extension not built); "
              "timing the Python walk only")
    print(f"{'graph':<24}{'paths':>12}{'python s':>12}{'compiled s':>12}{'speedup':>10}")
    for name, spec, src, tgt, L in CASES:
        g = pth.InteractionGraph(ens.build_terms(spec))
        tp, ep = best_time(lambda: pth.enumerate_paths(g, src, tgt, L, False, "python"), args.repeat)
        if pth.BACKEND == "compiled":
            tc, ec = best_time(lambda: pth.enumerate_paths(g, src, tgt, L, False, "compiled"), args.repeat)
            assert ec.counts_by_length == ep.counts_by_length, name
            for l, w in ep.total_weight_by_length.items():
                assert abs(ec.total_weight_by_length[l] - w) <= 1e-9 * abs(w), name
            print(f"{name:<24}{ep.total_count():>12}{tp:>12.4f}{tc:>12.5f}{tp / tc:>9.1f}x")
        else:
            print(f"{name:<24}{ep.total_count():>12}{tp:>12.4f}{'-':>12}{'-':>10}")


if __name__ == "__main__":
    main()
