"""Aggregation of pair c-values into matrices, rankings and pathfinder scores."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import CoverageError


@dataclass(frozen=True, eq=False)
class CValueMatrix:
    """Symmetric c-value matrix of one material; diagonal is zero."""

    material: str
    element_names: tuple
    C: np.ndarray

    def value(self, a, b):
        return float(self.C[self.element_names.index(a), self.element_names.index(b)])

    def upper_pairs(self):
        """``(a, b, c)`` for every unordered pair, row-major upper triangle."""
        names = self.element_names
        i, j = np.triu_indices(len(names), k=1)
        return [(names[a], names[b], float(self.C[a, b])) for a, b in zip(i, j)]


@dataclass(frozen=True)
class RankedPairs:
    material: str
    entries: tuple  # (element_1, element_2, c) by decreasing c

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @property
    def values(self):
        return np.array([c for _, _, c in self.entries], dtype=float)


@dataclass(frozen=True)
class PathfinderScore:
    element: str
    mean: float
    max: float


def c_matrix(profiles, element_names, material=""):
    """Build the symmetric matrix from one profile per unordered pair.

    Raises
    ------
    CoverageError
        When any of the ``D * (D - 1) / 2`` pairs has no profile.
    """
    names = tuple(element_names)
    index = {n: i for i, n in enumerate(names)}
    D = len(names)
    C = np.zeros((D, D))
    seen = np.zeros((D, D), dtype=bool)
    for prof in profiles:
        a, b = prof.pair
        if a not in index or b not in index or a == b:
            raise CoverageError(f"profile pair {prof.pair!r} does not fit elements {names}")
        i, j = sorted((index[a], index[b]))
        C[i, j] = C[j, i] = prof.c_value
        seen[i, j] = seen[j, i] = True
    gaps = [(names[i], names[j]) for i in range(D) for j in range(i + 1, D) if not seen[i, j]]
    if gaps:
        listed = ", ".join(f"{a}/{b}" for a, b in gaps[:20])
        more = f" (+{len(gaps) - 20} more)" if len(gaps) > 20 else ""
        raise CoverageError(f"{len(gaps)} pair(s) without a profile: {listed}{more}")
    return CValueMatrix(material, names, C)


def rank_pairs(matrix):
    """All unordered pairs by decreasing c, ties broken by pair label."""
    entries = sorted(matrix.upper_pairs(), key=lambda e: (-e[2], e[0], e[1]))
    return RankedPairs(matrix.material, tuple(entries))


def top_k(matrix, k):
    """The `k` largest pairs; a list of matrices gives a list of rankings.

    `k` beyond the pair count returns every pair.
    """
    if k < 1:
        raise ValueError(f"k must be at least 1, got {k}")
    if isinstance(matrix, (list, tuple)):
        return [top_k(m, k) for m in matrix]
    ranked = rank_pairs(matrix)
    return RankedPairs(ranked.material, ranked.entries[:k])


def pathfinder_scores(matrix):
    """Per-element mean and max of its off-diagonal row, by decreasing mean."""
    C = matrix.C
    D = len(matrix.element_names)
    scores = []
    for i, name in enumerate(matrix.element_names):
        row = np.delete(C[i], i)
        mean = float(row.mean()) if D > 1 else 0.0
        top = float(row.max()) if D > 1 else 0.0
        scores.append(PathfinderScore(name, mean, top))
    return sorted(scores, key=lambda s: (-s.mean, -s.max, s.element))


@dataclass(frozen=True, eq=False)
class ComparisonTable:
    """Rank-by-material table of c-values; NaN where a material runs out of pairs."""

    ranks: np.ndarray
    materials: tuple
    values: np.ndarray  # shape (k, n_materials)

    def column(self, material):
        return self.values[:, self.materials.index(material)]


def material_comparison(ranked, k):
    """Line up the top-`k` c-values of several materials rank by rank.

    Parameters
    ----------
    ranked : mapping of material -> RankedPairs, or sequence of RankedPairs
    k : int
    """
    if k < 1:
        raise ValueError(f"k must be at least 1, got {k}")
    items = list(ranked.items()) if isinstance(ranked, dict) else [(r.material, r) for r in ranked]
    kept = []
    for material, rp in items:
        if len(rp) == 0:
            warnings.warn(f"material {material!r} has no fitted pairs; excluded from comparison")
            continue
        kept.append((material, rp))
    values = np.full((k, len(kept)), np.nan)
    for col, (_, rp) in enumerate(kept):
        v = rp.values[:k]
        values[: len(v), col] = v
    return ComparisonTable(np.arange(1, k + 1), tuple(m for m, _ in kept), values)
