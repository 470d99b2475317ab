"""Row centering, row l2 normalization and per-dimension standardization.

Every function accepts either a :class:`RepresentationSet` or a plain 2-D
array and returns the same kind it was given.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, TooFewRows, ZeroNormRow
from .repio import as_array, like

ZERO_NORM = 1e-12
DEFAULT_FLOOR = 1e-8


@dataclass(frozen=True, eq=False)
class StandardizationStats:
    means: np.ndarray
    stdevs: np.ndarray

    @property
    def dim(self) -> int:
        return self.means.shape[0]


def center_rows(reps):
    x = as_array(reps)
    return like(reps, x - x.mean(axis=1, keepdims=True))


def l2_normalize_rows(reps):
    x = as_array(reps)
    norms = np.linalg.norm(x, axis=1)
    small = np.flatnonzero(norms < ZERO_NORM)
    if small.size:
        raise ZeroNormRow(int(small[0]))
    return like(reps, x / norms[:, None])


def center_and_normalize(reps):
    """Per-row recentering followed by unit l2 scaling."""
    return l2_normalize_rows(center_rows(reps))


def drop_constant_columns(reps):
    """Remove columns that take a single value over all rows.

    A constant column is a degenerate coordinate: it adds nothing to any
    pairwise distance but would still count toward a nearest-neighbour
    volume exponent.
    """
    x = as_array(reps)
    keep = np.any(x != x[:1], axis=0)
    if not keep.any():
        keep[0] = True
    return like(reps, x[:, keep])


def fit_standardization(reps) -> StandardizationStats:
    x = as_array(reps)
    if x.shape[0] < 2:
        raise TooFewRows(f"standardization needs at least 2 rows, got {x.shape[0]}")
    means = x.mean(axis=0)
    # two-pass population variance; numpy's pairwise summation is order-fixed
    stdevs = np.sqrt(((x - means) ** 2).mean(axis=0))
    return StandardizationStats(means, stdevs)


def apply_standardization(reps, stats: StandardizationStats, floor: float = DEFAULT_FLOOR):
    x = as_array(reps)
    if x.shape[1] != stats.dim:
        raise DimensionMismatch(f"stats have dim {stats.dim}, data has dim {x.shape[1]}")
    return like(reps, (x - stats.means) / np.maximum(stats.stdevs, floor))


@dataclass(frozen=True, eq=False)
class Preprocessing:
    """The per-estimator pipeline: optional standardization, then optional l2 scaling.

    Standardization statistics come from the estimator's training split only.
    """

    standardization: StandardizationStats | None = None
    normalize: bool = True
    floor: float = DEFAULT_FLOOR

    @classmethod
    def fit(cls, train, standardize: bool = False, normalize: bool = True,
            floor: float = DEFAULT_FLOOR) -> "Preprocessing":
        stats = fit_standardization(train) if standardize else None
        return cls(stats, normalize, floor)

    def apply(self, reps):
        out = reps
        if self.standardization is not None:
            out = apply_standardization(out, self.standardization, self.floor)
        if self.normalize:
            out = l2_normalize_rows(out)
        return out

    def describe(self) -> dict:
        return {"standardize": self.standardization is not None, "normalize": self.normalize}
