#!/usr/bin/env python3
"""Benchmark the numba kernels against their pure-numpy fallbacks.

Runs each hot kernel through both implementations on the same inputs,
checks the outputs agree, and prints a timing table.  The selection logic
these kernels sit behind is the PERMCOVER_BACKEND environment variable;
here both implementations are invoked directly.

Usage:
    python benchmarks/bench_backends.py [--n 7] [--trials 512] [--repeat 3]
"""
import argparse
import time

import numpy as np

from permcover import _kernels
from permcover.graph import build_graph
from permcover.threshold import trial_rng, _selection_flags


def best_of(repeat, fn, *args):
    best = float("inf")
    result = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        result = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, result


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=7)
    parser.add_argument("--trials", type=int, default=512)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()

    if not _kernels.HAVE_NUMBA:
        raise SystemExit("numba is not importable; nothing to compare")

    n = args.n
    g = build_graph(n)
    print(f"graph: n={n} ({g.n_patterns} patterns, {g.n_covers} covers)")
    print(f"{'kernel':<28} {'numpy':>10} {'numba':>10} {'speedup':>9}")

    rows = []

    # lehmer_ranks over all one-letter deletions of S_{n+1}
    perms = _kernels.all_perms(n + 1)
    sub = np.delete(perms, 0, axis=1)
    weights = _kernels.lehmer_weights(n)
    rows.append(("lehmer_ranks", (sub, weights)))

    # Monte Carlo counting over a batch of selections
    p = 0.15
    sel = np.empty((args.trials, g.n_covers), dtype=bool)
    for t in range(args.trials):
        sel[t] = _selection_flags(g.n_covers, p, trial_rng(0, t))
    rows.append(("count_uncovered_chunk", (g.cover_ranks, sel)))

    # joint pair-count accumulation
    rows.append(("joint_pair_counts", (g.pattern_indptr, g.pattern_data, g.n_patterns)))

    # greedy cover construction
    rows.append(("greedy_select", (g.pattern_indptr, g.pattern_data, g.n_patterns, 1)))

    for name, call_args in rows:
        np_impl = _kernels.IMPLEMENTATIONS[name]["numpy"]
        nb_impl = _kernels.IMPLEMENTATIONS[name]["numba"]
        nb_impl(*call_args)  # compile before timing
        t_np, out_np = best_of(args.repeat, np_impl, *call_args)
        t_nb, out_nb = best_of(args.repeat, nb_impl, *call_args)
        if isinstance(out_np, tuple):
            agree = all(np.array_equal(a, b) for a, b in zip(out_np, out_nb))
        else:
            agree = np.array_equal(out_np, out_nb)
        if not agree:
            raise SystemExit(f"{name}: backend outputs differ")
        print(f"{name:<28} {t_np * 1e3:>8.1f}ms {t_nb * 1e3:>8.1f}ms {t_np / t_nb:>8.1f}x")

    # the exhaustive subset oracle only pays off compiled; show it small
    g4 = build_graph(min(n, 4))
    pat_bool = np.zeros((g4.n_covers, g4.n_patterns), dtype=bool)
    for r in range(g4.n_covers):
        pat_bool[r, g4.pattern_row(r)] = True
    k = 5 if g4.n == 4 else 2
    nb = _kernels.IMPLEMENTATIONS["subset_cover_exists"]["numba"]
    nb(pat_bool, 1, g4.n + 1)
    t_nb, _ = best_of(1, nb, pat_bool, k, g4.n + 1)
    print(f"subset_cover_exists(n={g4.n},k={k})  numba only: {t_nb * 1e3:>8.1f}ms "
          "(python fallback exists but is orders slower)")


if __name__ == "__main__":
    main()
