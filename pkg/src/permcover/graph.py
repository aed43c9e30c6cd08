"""Bipartite incidence between S_n patterns and S_{n+1} covers.

The graph stores both adjacency directions densely, indexed by
lexicographic rank: ``cover_ranks[p]`` lists the n^2+1 ranks of covers of
pattern p, and a CSR pair (``pattern_indptr``, ``pattern_data``) lists the
distinct patterns each cover contains.  Everything is immutable after
build and safe for shared concurrent reads.

Construction enumerates S_{n+1} once and takes all one-letter deletions,
which fills both directions in a single pass.  Deleting at two adjacent
positions whose values differ by exactly 1 gives the same pattern, so one
representative per such run is kept; the build verifies the resulting
per-cover pattern lists are duplicate-free and that every pattern ends up
with exactly n^2+1 covers, failing loudly otherwise.
"""
from __future__ import annotations

import dataclasses
import os
from math import factorial

import numpy as np

from . import _kernels
from .errors import ResourceLimitError
from .perms import Permutation, format_perm, rank, unrank

DEFAULT_MAX_N = 8
"""Largest pattern length n for full enumeration of S_{n+1} by default.

Memory and build time grow like (n+1)! * (n+1); n=8 means ranking all
362880 permutations of length 9.  Override with PERMCOVER_MAX_N or the
``max_n`` argument.
"""

DEFAULT_AUDIT_MAX_N = 6
"""Largest n for the exhaustive all-pairs joint-coverage audit."""

DEFAULT_PAIR_BUDGET_N = 7
"""Largest n for which the dense pattern-pair joint-count matrix is built.

The matrix is (n!)^2 bytes: 25 MB at n=7, 1.6 GB at n=8.
"""


def max_enumeration_n() -> int:
    env = os.environ.get("PERMCOVER_MAX_N", "").strip()
    if env:
        return int(env)
    return DEFAULT_MAX_N


def covers_per_pattern(n: int) -> int:
    """Number of (n+1)-permutations containing a fixed n-pattern: n^2 + 1."""
    return n * n + 1


class PermSetBitmap:
    """Set of permutations of one length, as packed 64-bit membership words.

    Membership is indexed by lexicographic rank.  Instances behave as
    immutable values: set operations return new bitmaps.
    """

    __slots__ = ("level", "size", "words")

    def __init__(self, level: int, words: np.ndarray):
        self.level = level
        self.size = factorial(level)
        self.words = words

    @classmethod
    def empty(cls, level: int) -> "PermSetBitmap":
        n_words = (factorial(level) + 63) // 64
        return cls(level, np.zeros(n_words, dtype=np.uint64))

    @classmethod
    def full(cls, level: int) -> "PermSetBitmap":
        out = cls.empty(level)
        out.words[:] = np.uint64(0xFFFFFFFFFFFFFFFF)
        out._mask_tail()
        return out

    @classmethod
    def from_indices(cls, level: int, indices) -> "PermSetBitmap":
        out = cls.empty(level)
        idx = np.asarray(indices, dtype=np.int64)
        if idx.size:
            if idx.min() < 0 or idx.max() >= out.size:
                raise ValueError(
                    f"rank out of range 0..{out.size - 1} for level {level}"
                )
            np.bitwise_or.at(
                out.words,
                idx >> 6,
                np.left_shift(np.uint64(1), (idx & 63).astype(np.uint64)),
            )
        return out

    @classmethod
    def from_bool(cls, level: int, mask: np.ndarray) -> "PermSetBitmap":
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != (factorial(level),):
            raise ValueError(f"expected {factorial(level)} flags for level {level}")
        return cls.from_indices(level, np.flatnonzero(mask))

    def _mask_tail(self):
        tail = self.size & 63
        if tail:
            self.words[-1] &= (np.uint64(1) << np.uint64(tail)) - np.uint64(1)

    def cardinality(self) -> int:
        return int(np.bitwise_count(self.words).sum())

    def __len__(self) -> int:
        return self.cardinality()

    def __contains__(self, rank: int) -> bool:
        if not 0 <= rank < self.size:
            raise ValueError(f"rank {rank} out of range 0..{self.size - 1}")
        return bool((self.words[rank >> 6] >> np.uint64(rank & 63)) & np.uint64(1))

    def indices(self) -> np.ndarray:
        return np.flatnonzero(self.to_bool())

    def to_bool(self) -> np.ndarray:
        bits = np.unpackbits(self.words.view(np.uint8), bitorder="little")
        return bits[: self.size].astype(bool)

    def __and__(self, other: "PermSetBitmap") -> "PermSetBitmap":
        self._check_same_universe(other)
        return PermSetBitmap(self.level, self.words & other.words)

    def __or__(self, other: "PermSetBitmap") -> "PermSetBitmap":
        self._check_same_universe(other)
        return PermSetBitmap(self.level, self.words | other.words)

    def __sub__(self, other: "PermSetBitmap") -> "PermSetBitmap":
        self._check_same_universe(other)
        return PermSetBitmap(self.level, self.words & ~other.words)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PermSetBitmap):
            return NotImplemented
        return self.level == other.level and bool(np.array_equal(self.words, other.words))

    def __repr__(self) -> str:
        return f"PermSetBitmap(level={self.level}, cardinality={self.cardinality()})"

    def _check_same_universe(self, other: "PermSetBitmap"):
        if self.level != other.level:
            raise ValueError(
                f"universe mismatch: level {self.level} vs {other.level}"
            )


class CoverageGraph:
    """Immutable incidence between ranked S_n and ranked S_{n+1}."""

    def __init__(self, n, cover_ranks, pattern_indptr, pattern_data, succ_counts):
        self.n = n
        self.n_patterns = factorial(n)
        self.n_covers = factorial(n + 1)
        self.cover_ranks = cover_ranks
        self.pattern_indptr = pattern_indptr
        self.pattern_data = pattern_data
        self.succ_counts = succ_counts
        self._joint_counts = None

    # -- queries ------------------------------------------------------------

    def _check_pattern_rank(self, p: int):
        if not 0 <= p < self.n_patterns:
            raise ValueError(f"pattern rank {p} out of range 0..{self.n_patterns - 1}")

    def _check_cover_rank(self, r: int):
        if not 0 <= r < self.n_covers:
            raise ValueError(f"cover rank {r} out of range 0..{self.n_covers - 1}")

    def covers_of(self, p: int) -> PermSetBitmap:
        """All (n+1)-permutations containing pattern rank p (n^2+1 of them)."""
        self._check_pattern_rank(p)
        return PermSetBitmap.from_indices(self.n + 1, self.cover_ranks[p])

    def patterns_of(self, r: int) -> PermSetBitmap:
        """Distinct one-letter-deletion patterns of cover rank r."""
        self._check_cover_rank(r)
        row = self.pattern_data[self.pattern_indptr[r] : self.pattern_indptr[r + 1]]
        return PermSetBitmap.from_indices(self.n, row)

    def pattern_row(self, r: int) -> np.ndarray:
        self._check_cover_rank(r)
        return self.pattern_data[self.pattern_indptr[r] : self.pattern_indptr[r + 1]]

    def joint_covers(self, p: int, p2: int) -> PermSetBitmap:
        """Covers containing both patterns; equals covers_of(p) when p == p2."""
        self._check_pattern_rank(p)
        self._check_pattern_rank(p2)
        if p == p2:
            return self.covers_of(p)
        return self.covers_of(p) & self.covers_of(p2)

    def co_coverable(self, p: int) -> PermSetBitmap:
        """Patterns p' != p sharing at least one cover with p.

        Computed as the union of the pattern lists of p's covers, minus p
        itself; the all-pairs audit cross-checks this against direct
        cover-set intersections.
        """
        self._check_pattern_rank(p)
        rows = [self.pattern_row(int(r)) for r in self.cover_ranks[p]]
        partners = np.unique(np.concatenate(rows))
        partners = partners[partners != p]
        return PermSetBitmap.from_indices(self.n, partners)

    def joint_count_matrix(self) -> np.ndarray:
        """Dense (n!, n!) matrix of joint-cover counts, zero diagonal.

        Built once and cached; refused above DEFAULT_PAIR_BUDGET_N because
        the matrix is (n!)^2 bytes.
        """
        if self._joint_counts is None:
            if self.n > DEFAULT_PAIR_BUDGET_N:
                raise ResourceLimitError(
                    f"joint-count matrix needs (n!)^2 bytes; n={self.n} exceeds "
                    f"the pair budget n<={DEFAULT_PAIR_BUDGET_N}"
                )
            self._joint_counts = _kernels.joint_pair_counts(
                self.pattern_indptr, self.pattern_data, self.n_patterns
            )
        return self._joint_counts

    def pattern_perm(self, p: int) -> Permutation:
        return unrank(self.n, p)

    def cover_perm(self, r: int) -> Permutation:
        return unrank(self.n + 1, r)


def build_graph(n: int, *, max_n: int | None = None) -> CoverageGraph:
    """Materialize the coverage graph for S_n vs S_{n+1}.

    Raises ResourceLimitError above the configured enumeration maximum
    (default 8, env PERMCOVER_MAX_N).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    limit = max_n if max_n is not None else max_enumeration_n()
    if n > limit:
        raise ResourceLimitError(
            f"n={n} exceeds the enumeration limit {limit} "
            "(raise via PERMCOVER_MAX_N or the max_n argument)"
        )

    m = n + 1
    perms_next = _kernels.all_perms(m)
    n_covers = perms_next.shape[0]

    steps = np.abs(perms_next[:, 1:].astype(np.int16) - perms_next[:, :-1].astype(np.int16))
    succ_pairs = steps == 1
    succ_counts = succ_pairs.sum(axis=1).astype(np.uint8)

    # Deleting position i or i+1 across a succession yields the same
    # pattern; keep the rightmost deletion of each run.
    keep = np.ones((n_covers, m), dtype=bool)
    keep[:, :-1] = ~succ_pairs

    weights = _kernels.lehmer_weights(n)
    deletion_ranks = np.empty((n_covers, m), dtype=np.int64)
    for i in range(m):
        sub = np.delete(perms_next, i, axis=1)
        deletion_ranks[:, i] = _kernels.lehmer_ranks(sub, weights)

    counts_per_row = keep.sum(axis=1)
    row_ids = np.repeat(np.arange(n_covers, dtype=np.int64), counts_per_row)
    kept = deletion_ranks[keep]
    order = np.lexsort((kept, row_ids))
    pattern_data = kept[order].astype(np.int32)
    pattern_rows = row_ids  # unchanged by the within-row sort

    same_row = pattern_rows[1:] == pattern_rows[:-1]
    if np.any(same_row & (pattern_data[1:] == pattern_data[:-1])):
        raise RuntimeError("duplicate pattern in a cover's deletion list")

    pattern_indptr = np.zeros(n_covers + 1, dtype=np.int64)
    np.cumsum(counts_per_row, out=pattern_indptr[1:])

    n_patterns = factorial(n)
    per_pattern = covers_per_pattern(n)
    occurrences = np.bincount(pattern_data, minlength=n_patterns)
    if occurrences.shape[0] != n_patterns or not np.all(occurrences == per_pattern):
        raise RuntimeError(
            f"cover counts are not uniformly {per_pattern} at n={n}"
        )
    by_pattern = np.argsort(pattern_data, kind="stable")
    cover_ranks = pattern_rows[by_pattern].reshape(n_patterns, per_pattern).astype(np.int32)

    return CoverageGraph(n, cover_ranks, pattern_indptr, pattern_data, succ_counts)


# ---------------------------------------------------------------------------
# Joint-coverage audit


@dataclasses.dataclass
class JointReport:
    """Exhaustive (or sampled) summary of pairwise joint coverage."""

    n: int
    exhaustive: bool
    sample_size: int | None
    max_J: int
    argmax_J: str | None
    max_C: int
    four_cover_pairs: list[tuple[int, int]]
    iff_adjacent_positions: bool
    iff_adjacent_values: bool
    adjacent_swap_iff_holds: bool
    bounds_ok: bool
    violations: list[dict]

    @property
    def four_cover_pair_count(self) -> int:
        return len(self.four_cover_pairs)

    def to_payload(self) -> dict:
        return {
            "n": self.n,
            "exhaustive": self.exhaustive,
            "sample_size": self.sample_size,
            "max_J": self.max_J,
            "argmax_J": self.argmax_J,
            "max_C": self.max_C,
            "four_cover_pair_count": self.four_cover_pair_count,
            "adjacent_swap_iff_holds": self.adjacent_swap_iff_holds,
            "iff_adjacent_positions": self.iff_adjacent_positions,
            "iff_adjacent_values": self.iff_adjacent_values,
            "violations": self.violations,
        }


def _adjacent_swap_pairs(n: int):
    """Unordered rank pairs differing by one swap of adjacent positions.

    Returns (all such pairs, the subset whose swapped values also differ
    by exactly 1).  The two sets are the two readings of "adjacent swap"
    that the audit checks independently.
    """
    perms = _kernels.all_perms(n)
    position_pairs = set()
    value_pairs = set()
    for r in range(perms.shape[0]):
        row = perms[r]
        for i in range(n - 1):
            swapped = row.copy()
            swapped[i], swapped[i + 1] = swapped[i + 1], swapped[i]
            r2 = int(rank(tuple(int(v) for v in swapped)))
            pair = (min(r, r2), max(r, r2))
            position_pairs.add(pair)
            if abs(int(row[i]) - int(row[i + 1])) == 1:
                value_pairs.add(pair)
    return position_pairs, value_pairs


def audit_joint_coverage(
    g: CoverageGraph,
    *,
    max_exhaustive: int = DEFAULT_AUDIT_MAX_N,
    sample_pairs: int | None = None,
    seed: int = 0,
    max_reported: int = 20,
) -> JointReport:
    """Audit the pairwise joint-coverage structure of the graph.

    Exhaustive over all ordered pattern pairs for n <= max_exhaustive;
    beyond that a uniform random pair sample of size ``sample_pairs`` is
    audited instead (max_J and the swap iff check then cover only the
    sampled pairs).  Checks, and reports violations of:

    - every pair shares at most 4 covers,
    - every pattern has at most n^3 co-coverable partners,
    - the pairs sharing exactly 4 covers are exactly the adjacent-position
      -swap pairs, under at least one of the two "adjacent" readings.
    """
    n = g.n
    violations: list[dict] = []

    if n == 1:
        return JointReport(
            n=1, exhaustive=True, sample_size=None, max_J=0,
            argmax_J=format_perm((1,)), max_C=0, four_cover_pairs=[],
            iff_adjacent_positions=True, iff_adjacent_values=True,
            adjacent_swap_iff_holds=True, bounds_ok=True, violations=[],
        )

    if n <= max_exhaustive:
        counts = g.joint_count_matrix()
        off_diag = counts.copy()
        np.fill_diagonal(off_diag, 0)
        max_c = int(off_diag.max())
        partner_counts = (off_diag > 0).sum(axis=1)
        max_j = int(partner_counts.max())
        argmax_j = int(np.argmax(partner_counts))
        a_idx, b_idx = np.nonzero(off_diag == 4)
        four_pairs = [(int(a), int(b)) for a, b in zip(a_idx, b_idx) if a < b]
        exhaustive = True
        sample_size = None
    elif sample_pairs is not None:
        rng = np.random.default_rng(seed)
        max_c = 0
        max_j = 0
        argmax_j = None
        four_pairs = []
        seen = 0
        while seen < sample_pairs:
            a = int(rng.integers(g.n_patterns))
            b = int(rng.integers(g.n_patterns))
            if a == b:
                continue
            seen += 1
            c = (g.covers_of(a) & g.covers_of(b)).cardinality()
            if c > max_c:
                max_c = c
            if c == 4:
                four_pairs.append((min(a, b), max(a, b)))
            j = g.co_coverable(a).cardinality()
            if j > max_j:
                max_j = j
                argmax_j = a
        exhaustive = False
        sample_size = sample_pairs
        four_pairs = sorted(set(four_pairs))
    else:
        raise ResourceLimitError(
            f"exhaustive pair audit is limited to n<={max_exhaustive} "
            f"(got n={g.n}); pass sample_pairs to sample instead"
        )

    if max_c > 4:
        violations.append({"kind": "pair_cover_count_exceeds_4", "max_C": max_c})
    if max_j > n ** 3:
        violations.append({"kind": "joint_partner_count_exceeds_n3", "max_J": max_j})

    four_set = set(four_pairs)
    position_pairs, value_pairs = _adjacent_swap_pairs(n)
    if exhaustive:
        iff_pos = four_set == position_pairs
        iff_val = four_set == value_pairs
    else:
        # Sampled mode can only check one direction.
        iff_pos = four_set <= position_pairs
        iff_val = four_set <= value_pairs
    holds = iff_pos or iff_val

    if not holds:
        for pair in sorted(four_set - position_pairs)[:max_reported]:
            violations.append(
                {
                    "kind": "four_cover_pair_not_adjacent_position_swap",
                    "pair": [str(g.pattern_perm(pair[0])), str(g.pattern_perm(pair[1]))],
                }
            )
        if exhaustive:
            for pair in sorted(position_pairs - four_set)[:max_reported]:
                violations.append(
                    {
                        "kind": "adjacent_position_swap_without_4_covers",
                        "pair": [str(g.pattern_perm(pair[0])), str(g.pattern_perm(pair[1]))],
                        "shared_covers": int(
                            (g.covers_of(pair[0]) & g.covers_of(pair[1])).cardinality()
                        ),
                    }
                )

    return JointReport(
        n=n,
        exhaustive=exhaustive,
        sample_size=sample_size,
        max_J=max_j,
        argmax_J=None if argmax_j is None else str(g.pattern_perm(argmax_j)),
        max_C=max_c,
        four_cover_pairs=sorted(four_set),
        iff_adjacent_positions=iff_pos,
        iff_adjacent_values=iff_val,
        adjacent_swap_iff_holds=holds,
        bounds_ok=(max_c <= 4 and max_j <= n ** 3),
        violations=violations,
    )
