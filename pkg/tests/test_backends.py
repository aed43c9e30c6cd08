"""The numba and numpy kernel implementations must agree exactly.

All kernels are pure integer computations over arrays prepared outside
the kernel, so the two backends are required to be bit-identical, not
merely statistically close.
"""
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from permcover import _kernels

pytestmark = pytest.mark.skipif(
    not _kernels.HAVE_NUMBA, reason="numba backend unavailable"
)


def impls(name):
    pair = _kernels.IMPLEMENTATIONS[name]
    return pair["numpy"], pair["numba"]


def random_perm_rows(rng, rows, length):
    out = np.empty((rows, length), dtype=np.uint8)
    for i in range(rows):
        out[i] = rng.permutation(length) + 1
    return out


def test_lehmer_ranks_agree():
    np_impl, nb_impl = impls("lehmer_ranks")
    rng = np.random.default_rng(0)
    for length in (1, 2, 5, 8):
        mat = random_perm_rows(rng, 200, length)
        weights = _kernels.lehmer_weights(length)
        assert np.array_equal(np_impl(mat, weights), nb_impl(mat, weights))


def test_count_uncovered_chunk_agree(graph):
    np_impl, nb_impl = impls("count_uncovered_chunk")
    g = graph(4)
    rng = np.random.default_rng(1)
    sel = rng.random((64, g.n_covers)) < 0.08
    assert np.array_equal(np_impl(g.cover_ranks, sel), nb_impl(g.cover_ranks, sel))


def test_joint_pair_counts_agree(graph):
    np_impl, nb_impl = impls("joint_pair_counts")
    for n in (2, 3, 4):
        g = graph(n)
        a = np_impl(g.pattern_indptr, g.pattern_data, g.n_patterns)
        b = nb_impl(g.pattern_indptr, g.pattern_data, g.n_patterns)
        assert np.array_equal(a, b)


def test_greedy_select_agree(graph):
    np_impl, nb_impl = impls("greedy_select")
    for n, lam in ((3, 1), (3, 2), (4, 1)):
        g = graph(n)
        picks_np, rem_np = np_impl(g.pattern_indptr, g.pattern_data, g.n_patterns, lam)
        picks_nb, rem_nb = nb_impl(g.pattern_indptr, g.pattern_data, g.n_patterns, lam)
        assert rem_np == rem_nb == 0
        assert np.array_equal(picks_np, picks_nb)


def test_subset_cover_exists_agree(graph):
    np_impl, nb_impl = impls("subset_cover_exists")
    g = graph(3)
    pat_bool = np.zeros((g.n_covers, g.n_patterns), dtype=bool)
    for r in range(g.n_covers):
        pat_bool[r, g.pattern_row(r)] = True
    for k in (1, 2, 3):
        assert np_impl(pat_bool, k, 4) == bool(nb_impl(pat_bool, k, 4))
    assert not nb_impl(pat_bool, 1, 4)
    assert nb_impl(pat_bool, 2, 4)


def test_env_flag_selects_backend_and_payloads_match(tmp_path):
    """End to end: the same CLI run under each backend emits identical payloads."""
    payloads = {}
    for backend in ("numba", "numpy"):
        out = tmp_path / f"gap-{backend}.json"
        env = dict(os.environ, PERMCOVER_BACKEND=backend)
        subprocess.run(
            [
                sys.executable, "-m", "permcover.cli",
                "--quiet", "gap", "--n", "3", "--lambda-target", "1.5",
                "--trials", "400", "--seed", "5", "--out", str(out),
            ],
            check=True,
            env=env,
        )
        doc = json.loads(out.read_text())
        payloads[backend] = doc["payload"]
        probe = subprocess.run(
            [sys.executable, "-c", "import permcover; print(permcover.BACKEND)"],
            check=True,
            env=env,
            capture_output=True,
            text=True,
        )
        assert probe.stdout.strip() == backend
    assert payloads["numba"] == payloads["numpy"]


def test_unknown_backend_rejected():
    proc = subprocess.run(
        [sys.executable, "-c", "import permcover"],
        env=dict(os.environ, PERMCOVER_BACKEND="cuda"),
        capture_output=True,
        text=True,
    )
    assert proc.returncode != 0
    assert "PERMCOVER_BACKEND" in proc.stderr
