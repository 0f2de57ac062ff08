"""Branching decomposition of ladder excursions.

Every down-step before the ladder time opens an excursion that is closed by
the first later up-jump reaching its origin level or higher.  Classifying
each down-step at level i by that closing jump — landing offset l = (landing
site) - i in 0..R-1 and origin depth k = i - (jump origin) in 1..R-l — turns
the excursion into a multitype branching tree with R(R+1)/2 types per level
and a single immigrant given by the final jump.  For R=2 the three types are
the classical (A, B, C) = ((0,1), (0,2), (1,1)) counts.

Type ordering: landing offset major, origin depth minor —
``type_index(R, l, k) = l*R - l(l-1)/2 + (k-1)``.  Any consumer of type
indices must use these helpers.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np

from ._kernels import type_index
from .errors import InsufficientData, MalformedPath
from .walk import WalkPath

__all__ = [
    "BranchingRecord",
    "OffspringTables",
    "decompose_r2",
    "decompose_general",
    "empirical_offspring",
    "type_count",
    "type_index",
    "type_of",
    "time_weights",
    "verify_time_identity",
]


def type_count(R: int) -> int:
    """Number of branching types for jump bound R."""
    return (R * (R + 1)) // 2


def type_of(R: int, t: int) -> tuple[int, int]:
    """Inverse of :func:`type_index`: type id -> (landing offset, origin depth)."""
    for l in range(R):
        width = R - l
        if t < width:
            return l, t + 1
        t -= width
    raise ValueError("type id out of range")


def time_weights(R: int) -> np.ndarray:
    """Per-type weights turning summed counts into the excursion duration.

    A type landing at its base level (l = 0) pairs one down-step with one
    up-step and weighs 2; an overshooting type (l >= 1) additionally carries
    the up-jump counted at its landing level and weighs 1.  With these
    weights, t1 = 1 + sum over levels <= 0 of <weights, counts>.
    """
    w = np.ones(type_count(R), dtype=np.int64)
    w[:R] = 2
    return w


@dataclass(frozen=True)
class BranchingRecord:
    """Type counts per level for one ladder excursion.

    ``counts`` maps level i <= 0 to an int64 vector of length R(R+1)/2
    (levels with all-zero counts are omitted); ``immigration`` is the unit
    type vector of the final jump, living one level above 0.
    """

    R: int
    counts: dict[int, np.ndarray]
    immigration: np.ndarray

    def at(self, level: int) -> np.ndarray:
        """Counts vector at ``level`` (zeros if the level is empty)."""
        got = self.counts.get(level)
        if got is None:
            return np.zeros(type_count(self.R), dtype=np.int64)
        return got


def _validated_sites(path: WalkPath, R: int) -> np.ndarray:
    sites = np.asarray(path.sites, dtype=np.int64)
    if sites.ndim != 1 or sites.shape[0] < 2 or sites[0] != 0:
        raise MalformedPath("path must start at 0 and contain at least one step")
    inc = np.diff(sites)
    if np.any((inc < -1) | (inc == 0) | (inc > R)):
        raise MalformedPath(f"increments must lie in {{-1, 1..{R}}}")
    if np.any(sites[:-1] > 0) or sites[-1] < 1:
        raise MalformedPath("interior sites must be <= 0 and the last >= 1")
    if path.t1 != sites.shape[0] - 1:
        raise MalformedPath("t1 does not match the number of steps")
    return sites


def decompose_general(path: WalkPath, R: int) -> BranchingRecord:
    """Classify every down-step of ``path`` into the R(R+1)/2 types.

    Single left-to-right scan: an up-jump o -> e closes the unique open
    down-step at each level j in (o, min(e, 0)] with type (e-j, j-o); the
    final jump defines the immigrant type (e-1, 1-o).
    """
    sites = _validated_sites(path, R)
    T = type_count(R)
    counts: dict[int, np.ndarray] = {}
    for s in range(1, sites.shape[0]):
        o = int(sites[s - 1])
        e = int(sites[s])
        if e < o:
            continue
        top = e if e < 0 else 0
        for j in range(o + 1, top + 1):
            vec = counts.get(j)
            if vec is None:
                vec = np.zeros(T, dtype=np.int64)
                counts[j] = vec
            vec[type_index(R, e - j, j - o)] += 1
    imm = np.zeros(T, dtype=np.int64)
    imm[type_index(R, e - 1, 1 - o)] = 1
    return BranchingRecord(R, counts, imm)


def decompose_r2(path: WalkPath) -> BranchingRecord:
    """R=2 decomposition: counts are [A(i), B(i), C(i)] per level."""
    return decompose_general(path, 2)


def verify_time_identity(path: WalkPath, rec: BranchingRecord) -> bool:
    """Exact integer check: t1 == 1 + <weights, summed counts>."""
    w = time_weights(rec.R)
    total = 0
    for vec in rec.counts.values():
        total += int(w @ vec)
    return path.t1 == 1 + total


@dataclass(frozen=True)
class OffspringTables:
    """Empirical conditional offspring frequencies from decomposed paths.

    A generation at level i is usable when its parent generation (level i+1,
    with the immigrant playing the parent of level 0) is a single unit, so
    the observed counts vector at level i is one draw from that parent
    type's offspring law.  ``by_level[level][parent]`` and
    ``pooled[parent]`` count outcomes (as tuples) per parent type.
    """

    R: int
    by_level: dict[int, dict[int, Counter]]
    pooled: dict[int, Counter]
    events: int

    def frequency(self, parent: int, outcome, level: int | None = None) -> float:
        """Empirical P(counts == outcome | parent type), pooled by default."""
        table = self.pooled if level is None else self.by_level.get(level, {})
        counter = table.get(parent)
        if not counter:
            return 0.0
        return counter[tuple(outcome)] / sum(counter.values())


def empirical_offspring(records, R: int | None = None, min_events: int = 100) -> OffspringTables:
    """Aggregate offspring draws from an iterable of :class:`BranchingRecord`.

    Raises :class:`InsufficientData` when fewer than ``min_events``
    single-parent generations exist in total.
    """
    by_level: dict[int, dict[int, Counter]] = {}
    pooled: dict[int, Counter] = {}
    events = 0
    for rec in records:
        if R is None:
            R = rec.R
        elif rec.R != R:
            raise ValueError("records mix different jump bounds R")
        floor = min(rec.counts) if rec.counts else 0
        for level in range(0, floor - 2, -1):
            parent_vec = rec.immigration if level == 0 else rec.at(level + 1)
            if int(parent_vec.sum()) != 1:
                continue
            parent = int(np.argmax(parent_vec))
            outcome = tuple(int(c) for c in rec.at(level))
            by_level.setdefault(level, {}).setdefault(parent, Counter())[outcome] += 1
            pooled.setdefault(parent, Counter())[outcome] += 1
            events += 1
    if events < min_events:
        raise InsufficientData(
            f"{events} single-parent generations observed, need {min_events}"
        )
    return OffspringTables(R, by_level, pooled, events)
