"""Partitions of the observations: distances, PSM, point estimation.

A :class:`Partition` stores canonical labels: blocks are numbered by order
of first appearance starting at 1, so two equal partitions compare equal as
arrays. Distances are metrics on the quotient space (relabeling invariant).
All pair counting runs through one contingency-table route; the brute-force
oracles in the test suite count pairs directly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .errors import (
    CandidateSpaceTooLarge,
    DomainError,
    EmptyDraws,
    LengthMismatch,
)

# Bell numbers B_1 .. B_10; exhaustive search is refused past m = 10
# (B_10 = 115975 candidates is the largest space worth enumerating).
_BELL = (1, 2, 5, 15, 52, 203, 877, 4140, 21147, 115975)
EXHAUSTIVE_MAX_ITEMS = 10


def canonicalize_labels(labels) -> np.ndarray:
    """Relabel by order of first appearance, starting at 1."""
    labels = np.asarray(labels)
    if labels.ndim != 1 or labels.size < 1:
        raise DomainError("labels must be a nonempty 1-D sequence")
    _, first, inverse = np.unique(labels, return_index=True, return_inverse=True)
    rank = np.empty(first.size, dtype=np.int64)
    rank[np.argsort(first, kind="stable")] = np.arange(first.size)
    return rank[inverse] + 1


@dataclass(frozen=True)
class Partition:
    """A partition of m items, held as canonical 1-based block labels."""

    labels: np.ndarray

    def __post_init__(self):
        labels = canonicalize_labels(self.labels)
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)

    @classmethod
    def from_labels(cls, labels: Iterable) -> "Partition":
        if not isinstance(labels, np.ndarray):
            labels = np.asarray(list(labels))
        return cls(labels=labels)

    def __len__(self) -> int:
        return int(self.labels.size)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Partition):
            return NotImplemented
        return self.labels.shape == other.labels.shape and bool(
            np.all(self.labels == other.labels)
        )

    def __hash__(self) -> int:
        return hash(self.labels.tobytes())

    @property
    def n_blocks(self) -> int:
        return int(self.labels.max())

    def block_sizes(self) -> np.ndarray:
        return np.bincount(self.labels)[1:]

    def blocks(self) -> list[np.ndarray]:
        """Member indices of each block, in label order."""
        order = np.argsort(self.labels, kind="stable")
        bounds = np.searchsorted(self.labels[order], np.arange(2, self.n_blocks + 1))
        return np.split(order, bounds)


def _as_label_matrix(draws) -> np.ndarray:
    """Coerce draws (Partition list, label-vector list, or 2-D array) to (T, m) int64."""
    if isinstance(draws, np.ndarray) and draws.ndim == 2:
        mat = draws.astype(np.int64, copy=False)
    else:
        rows = []
        for item in draws:
            if isinstance(item, Partition):
                rows.append(item.labels)
            else:
                rows.append(np.asarray(item))
        if not rows:
            raise EmptyDraws("need at least one partition draw")
        mat = np.asarray(rows, dtype=np.int64)
    if mat.ndim != 2 or mat.shape[0] < 1 or mat.shape[1] < 1:
        raise EmptyDraws("need at least one partition draw over at least one item")
    return mat


def _pair_counts(a: np.ndarray, b: np.ndarray):
    """Contingency-derived pair statistics for two equal-length label vectors."""
    if a.size != b.size:
        raise LengthMismatch(f"partitions cover {a.size} and {b.size} items")
    m = a.size
    ar = canonicalize_labels(a) - 1
    br = canonicalize_labels(b) - 1
    nb = int(br.max()) + 1
    cont = np.bincount(ar * nb + br, minlength=(int(ar.max()) + 1) * nb).astype(np.float64)
    cont = cont.reshape(-1, nb)
    rows = cont.sum(axis=1)
    cols = cont.sum(axis=0)
    s_ab = float((cont * (cont - 1.0)).sum()) / 2.0
    s_a = float((rows * (rows - 1.0)).sum()) / 2.0
    s_b = float((cols * (cols - 1.0)).sum()) / 2.0
    return m, cont, rows, cols, s_ab, s_a, s_b


def _coerce_pair(p1, p2) -> tuple[np.ndarray, np.ndarray]:
    a = p1.labels if isinstance(p1, Partition) else np.asarray(p1)
    b = p2.labels if isinstance(p2, Partition) else np.asarray(p2)
    return a, b


def binder_distance(p1, p2) -> float:
    """Fraction of item pairs on which the partitions disagree (in [0, 1])."""
    a, b = _coerce_pair(p1, p2)
    m, _, _, _, s_ab, s_a, s_b = _pair_counts(a, b)
    if m < 2:
        return 0.0
    return (s_a + s_b - 2.0 * s_ab) / (m * (m - 1) / 2.0)


def rand_index(p1, p2) -> float:
    """Fraction of agreeing item pairs: 1 - binder_distance."""
    a, b = _coerce_pair(p1, p2)
    m, _, _, _, s_ab, s_a, s_b = _pair_counts(a, b)
    if m < 2:
        return 1.0
    npairs = m * (m - 1) / 2.0
    return (npairs - s_a - s_b + 2.0 * s_ab) / npairs


def adjusted_rand_index(p1, p2) -> float:
    """Chance-corrected Rand index; 1 for equal partitions, ~0 at random."""
    a, b = _coerce_pair(p1, p2)
    m, _, _, _, s_ab, s_a, s_b = _pair_counts(a, b)
    if m < 2:
        return 1.0
    expected = s_a * s_b / (m * (m - 1) / 2.0)
    denom = 0.5 * (s_a + s_b) - expected
    if denom == 0.0:
        # Both partitions trivial (all-singleton or one-block): equal by construction.
        return 1.0
    return (s_ab - expected) / denom


def vi_distance(p1, p2) -> float:
    """Variation of information with natural-log entropies (>= 0)."""
    a, b = _coerce_pair(p1, p2)
    m, cont, rows, cols, _, _, _ = _pair_counts(a, b)
    pr = rows / m
    pc = cols / m
    h1 = -float(np.sum(pr * np.log(pr)))
    h2 = -float(np.sum(pc * np.log(pc)))
    pj = cont / m
    mask = pj > 0.0
    mi = float(np.sum(pj[mask] * np.log(pj[mask] / np.outer(pr, pc)[mask])))
    return max(h1 + h2 - 2.0 * mi, 0.0)


def compute_psm(draws) -> np.ndarray:
    """Posterior similarity matrix: co-clustering frequency over the draws.

    Accepts a sequence of :class:`Partition` (or label vectors) or a (T, m)
    label matrix. The result is symmetric with unit diagonal and entries that
    are exact multiples of 1/T.
    """
    mat = _as_label_matrix(draws)
    return kernels.psm_matrix(np.ascontiguousarray(mat))


def _set_partitions(m: int):
    """All set partitions of m items as restricted-growth label vectors.

    Lexicographic over the growth strings, so the one-block partition comes
    first and the all-singleton partition last.
    """
    a = np.zeros(m, dtype=np.int64)
    b = np.zeros(m, dtype=np.int64)  # b[i] = max(a[:i+1])
    while True:
        yield a.copy()
        # advance to the next restricted-growth string
        i = m - 1
        while i > 0 and a[i] == b[i - 1] + 1:
            i -= 1
        if i == 0:
            return
        a[i] += 1
        b[i] = max(b[i - 1], a[i])
        for k in range(i + 1, m):
            a[k] = 0
            b[k] = b[i]


def point_estimate(draws, loss: str = "vi", candidates: str = "draws"):
    """Partition minimizing the posterior expected loss over the draws.

    ``candidates="draws"`` searches the distinct sampled partitions weighted
    by their multiplicity; ``"exhaustive"`` enumerates every set partition
    (refused past m = 10 items). Ties resolve to the fewest blocks, then the
    earliest candidate (first occurrence among the draws, or enumeration
    order). Returns ``(partition, expected_loss)``.
    """
    if loss not in ("vi", "binder"):
        raise DomainError(f"loss must be 'vi' or 'binder', got {loss!r}")
    if candidates not in ("draws", "exhaustive"):
        raise DomainError(f"candidates must be 'draws' or 'exhaustive', got {candidates!r}")
    mat = _as_label_matrix(draws)
    t, m = mat.shape
    canon = np.empty_like(mat)
    for i in range(t):
        canon[i] = canonicalize_labels(mat[i])
    kind = 0 if loss == "binder" else 1

    if candidates == "exhaustive":
        if m > EXHAUSTIVE_MAX_ITEMS:
            raise CandidateSpaceTooLarge(
                f"exhaustive search over {m} items would enumerate more than "
                f"{_BELL[EXHAUSTIVE_MAX_ITEMS - 1]} partitions (limit m <= {EXHAUSTIVE_MAX_ITEMS})"
            )
        cands = np.array(list(_set_partitions(m)), dtype=np.int64)
        weights = np.ones(t, dtype=np.float64)
        draws0 = np.ascontiguousarray(canon - 1)
    else:
        uniq, first, counts = np.unique(canon, axis=0, return_index=True, return_counts=True)
        order = np.argsort(first, kind="stable")
        cands = np.ascontiguousarray(uniq[order] - 1)
        weights = counts[order].astype(np.float64)
        draws0 = cands

    losses = kernels.expected_partition_losses(
        np.ascontiguousarray(cands), draws0, weights, kind
    )
    best = 0
    best_blocks = int(cands[0].max()) + 1
    for d in range(1, cands.shape[0]):
        blocks = int(cands[d].max()) + 1
        if losses[d] < losses[best] or (
            losses[d] == losses[best] and blocks < best_blocks
        ):
            best = d
            best_blocks = blocks
    return Partition.from_labels(cands[best] + 1), float(losses[best])


def nonempty_projection(c, n_components: int | None = None):
    """Project an allocation vector onto its occupied components.

    Returns ``(labels, occupied)`` where ``occupied`` lists the original
    component indices in ascending order and ``labels`` maps each item to the
    1-based rank of its component in that list. Idempotent on dense 1-based
    labelings. ``n_components`` is accepted for interface symmetry and only
    bounds-checks the input.
    """
    c = np.asarray(c)
    if c.ndim != 1 or c.size < 1:
        raise DomainError("allocation vector must be a nonempty 1-D sequence")
    occupied = np.unique(c)
    if n_components is not None and occupied.size and int(occupied.max()) > n_components:
        raise DomainError(
            f"allocation uses component {int(occupied.max())} beyond n_components={n_components}"
        )
    labels = np.searchsorted(occupied, c) + 1
    return labels, occupied
