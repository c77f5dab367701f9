"""Availability-pattern decomposition for fragmentary datasets.

A fragmentary dataset observes, for each subject, only a subset of the
covariate columns.  This module groups subjects by their availability
pattern and derives, for every distinct pattern, the two subject sets the
averaging machinery needs: the subjects whose pattern equals it exactly,
and the (larger) set of subjects observing at least those columns.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError


@dataclass
class FragmentaryDataset:
    """Response vector plus covariate matrix with a per-cell availability mask.

    Parameters
    ----------
    y : ndarray, shape (n,)
        Response values, fully observed ({0,1} for the binomial family).
    x : ndarray, shape (n, p)
        Covariate values.  Cells where ``mask`` is False carry no
        information and must never be read; constructors in this package
        poison them with NaN so accidental reads propagate.
    mask : ndarray of bool, shape (n, p)
        True where the covariate is observed.
    column_names : list of str
        Covariate column names, length p.
    """

    y: np.ndarray
    x: np.ndarray
    mask: np.ndarray
    column_names: list[str]

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float)
        self.x = np.asarray(self.x, dtype=float)
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.y.ndim != 1 or self.x.ndim != 2:
            raise DataError("y must be 1-d and x 2-d")
        if self.x.shape != self.mask.shape:
            raise DataError(
                f"x shape {self.x.shape} and mask shape {self.mask.shape} differ"
            )
        if self.y.shape[0] != self.x.shape[0]:
            raise DataError("y and x disagree on the number of subjects")
        if self.y.shape[0] == 0:
            raise DataError("dataset is empty")
        if len(self.column_names) != self.x.shape[1]:
            raise DataError("column_names length does not match x")
        if not np.all(np.isfinite(self.y)):
            raise DataError("response contains missing or non-finite entries")
        rows_empty = ~self.mask.any(axis=1)
        if rows_empty.any():
            bad = np.flatnonzero(rows_empty)
            raise DataError(f"subjects with no observed covariate: rows {bad.tolist()}")
        if not np.all(np.isfinite(self.x[self.mask])):
            raise DataError("observed covariate cells contain non-finite values")

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]

    def poisoned(self) -> "FragmentaryDataset":
        """Copy with unobserved cells set to NaN (the canonical payload)."""
        x = np.where(self.mask, self.x, np.nan)
        return FragmentaryDataset(self.y.copy(), x, self.mask.copy(), list(self.column_names))

    def filled(self, value: float = 0.0) -> np.ndarray:
        """Covariate matrix with unobserved cells replaced by ``value``."""
        return np.where(self.mask, self.x, value)


@dataclass(frozen=True)
class Pattern:
    """One distinct availability pattern: a sorted set of column indices.

    ``id`` is the 1-based position within a :class:`PatternIndex`; ad-hoc
    patterns (e.g. query patterns) use ``id=0``.
    """

    indices: tuple[int, ...]
    id: int = 0

    def __post_init__(self):
        idx = tuple(int(j) for j in self.indices)
        if len(idx) == 0:
            raise DataError("pattern must contain at least one column")
        if len(set(idx)) != len(idx):
            raise DataError("pattern indices must be unique")
        if any(b <= a for a, b in zip(idx, idx[1:])):
            idx = tuple(sorted(idx))
        object.__setattr__(self, "indices", idx)

    @property
    def size(self) -> int:
        return len(self.indices)

    def contains(self, other: "Pattern") -> bool:
        return set(other.indices) <= set(self.indices)


@dataclass
class PatternIndex:
    """The K distinct patterns of a dataset with their subject sets.

    For pattern k (0-based list position, 1-based ``Pattern.id``):

    * ``t_sets[k]``  — subjects whose availability equals the pattern exactly;
    * ``s_sets[k]``  — subjects observing at least all of the pattern's columns;
    * ``projections[k]`` — the 0/1 selection matrix of shape (p_k, p) mapping a
      full-length vector onto the pattern's coordinates.

    Subject indices are 0-based row numbers of the originating dataset.
    ``subject_order`` is the permutation that would group subjects into
    contiguous pattern blocks; rows are never physically reordered.
    """

    patterns: list[Pattern]
    t_sets: list[np.ndarray]
    s_sets: list[np.ndarray]
    projections: list[np.ndarray]
    n: int
    p: int
    subject_order: np.ndarray = field(default=None, repr=False)

    @property
    def K(self) -> int:
        return len(self.patterns)

    def n_k(self, k: int) -> int:
        """|S_k| for the 1-based pattern id ``k``."""
        return int(self.s_sets[k - 1].size)

    def p_k(self, k: int) -> int:
        return self.patterns[k - 1].size

    @property
    def full_first(self) -> bool:
        """True when the first pattern covers every column."""
        return self.patterns[0].size == self.p


def build_pattern_index(data: FragmentaryDataset) -> PatternIndex:
    """Decompose a fragmentary dataset into its availability patterns.

    The pattern with the most columns comes first (ties broken
    lexicographically by index set); the remaining patterns follow in
    order of first appearance over the subject rows, matching the usual
    convention of rearranging subjects into contiguous pattern blocks.

    Returns
    -------
    PatternIndex
        All K distinct patterns with exact-match sets, superset sets and
        projection matrices; 1 <= K <= 2**p - 1.
    """
    n, p = data.mask.shape
    uniq, inverse = np.unique(data.mask, axis=0, return_inverse=True)
    inverse = inverse.ravel()

    n_uniq = uniq.shape[0]
    first_row = np.full(n_uniq, n, dtype=int)
    np.minimum.at(first_row, inverse, np.arange(n))

    sizes = uniq.sum(axis=1)
    index_tuples = [tuple(np.flatnonzero(row)) for row in uniq]
    # Leader: largest pattern, lexicographic tie-break; rest by first appearance.
    leader = min(range(n_uniq), key=lambda u: (-sizes[u], index_tuples[u]))
    order = [leader] + sorted(
        (u for u in range(n_uniq) if u != leader), key=lambda u: first_row[u]
    )

    patterns: list[Pattern] = []
    t_sets: list[np.ndarray] = []
    s_sets: list[np.ndarray] = []
    projections: list[np.ndarray] = []
    for rank, u in enumerate(order):
        idx = index_tuples[u]
        patterns.append(Pattern(indices=idx, id=rank + 1))
        t_sets.append(np.flatnonzero(inverse == u))
        s_sets.append(np.flatnonzero(data.mask[:, list(idx)].all(axis=1)))
        pi = np.zeros((len(idx), p))
        pi[np.arange(len(idx)), list(idx)] = 1.0
        projections.append(pi)

    subject_order = np.concatenate(t_sets)
    return PatternIndex(
        patterns=patterns,
        t_sets=t_sets,
        s_sets=s_sets,
        projections=projections,
        n=n,
        p=p,
        subject_order=subject_order,
    )


def restrict_to(data: FragmentaryDataset, target: Pattern) -> FragmentaryDataset:
    """Restrict a dataset to the columns of ``target``.

    Drops subjects observing none of the target columns.  Used to rebuild
    the candidate universe when predicting for a query pattern smaller
    than the full covariate set: the restricted dataset only produces
    patterns contained in the target.
    """
    idx = list(target.indices)
    if max(idx) >= data.p or min(idx) < 0:
        raise DataError(
            f"target pattern {target.indices} references columns outside 0..{data.p - 1}"
        )
    sub_mask = data.mask[:, idx]
    keep = sub_mask.any(axis=1)
    if not keep.any():
        raise DataError("no subject observes any column of the target pattern")
    return FragmentaryDataset(
        y=data.y[keep],
        x=data.x[np.ix_(keep, idx)],
        mask=sub_mask[keep],
        column_names=[data.column_names[j] for j in idx],
    )


def cc_fraction(index: PatternIndex, n: int) -> float:
    """Share of the n subjects belonging to the leading pattern's S-set.

    When the first pattern covers every column this is the complete-case
    fraction; otherwise (e.g. a column withheld from every subject) the
    maximal pattern's superset sample stands in.
    """
    return float(index.s_sets[0].size) / float(n)
