"""Pairwise similarity between two encoders' row-aligned representations.

By default each row is centered (its own mean subtracted) and scaled to unit
l2 norm before comparison; ``raw=True`` skips both steps. Sets of different
dimension are rejected rather than truncated.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch, EmptyInput, IoFailure, RowCountMismatch
from .preprocess import center_and_normalize, l2_normalize_rows
from .repio import as_array


@dataclass(frozen=True, eq=False)
class SimilarityReport:
    cosine_score: float
    cosine_stderr: float
    l2_score: float
    l2_score_stderr: float
    l1_mean: float
    l1_stderr: float
    l2_mean: float
    l2_stderr: float
    linf_mean: float
    linf_stderr: float
    per_pair_cosine: np.ndarray
    n_pairs: int

    def to_dict(self) -> dict:
        return {
            "cosine_score": self.cosine_score, "cosine_stderr": self.cosine_stderr,
            "l2_score": self.l2_score, "l2_score_stderr": self.l2_score_stderr,
            "l1_mean": self.l1_mean, "l1_stderr": self.l1_stderr,
            "l2_mean": self.l2_mean, "l2_stderr": self.l2_stderr,
            "linf_mean": self.linf_mean, "linf_stderr": self.linf_stderr,
            "n_pairs": self.n_pairs,
        }


def _aligned_units(reps_a, reps_b, raw: bool):
    a, b = as_array(reps_a), as_array(reps_b)
    if a.shape[0] != b.shape[0]:
        raise RowCountMismatch(f"row counts differ: {a.shape[0]} vs {b.shape[0]}")
    if a.shape[1] != b.shape[1]:
        raise DimensionMismatch(f"dimensions differ: {a.shape[1]} vs {b.shape[1]}")
    if raw:
        return a, b
    return center_and_normalize(a), center_and_normalize(b)


def _mean_stderr(values: np.ndarray) -> tuple[float, float]:
    n = values.size
    stderr = float(values.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    return float(values.mean()), stderr


def per_pair_cosine(reps_a, reps_b, raw: bool = False) -> np.ndarray:
    """Signed cosine similarity of each aligned pair."""
    a, b = _aligned_units(reps_a, reps_b, raw)
    if raw:
        a, b = l2_normalize_rows(a), l2_normalize_rows(b)
    return np.einsum("ij,ij->i", a, b)


def cosine_score(reps_a, reps_b, raw: bool = False) -> float:
    """Mean absolute cosine similarity over pairs."""
    return float(np.abs(per_pair_cosine(reps_a, reps_b, raw)).mean())


def per_pair_l2_score(reps_a, reps_b, raw: bool = False) -> np.ndarray:
    a, b = _aligned_units(reps_a, reps_b, raw)
    if raw:
        a, b = l2_normalize_rows(a), l2_normalize_rows(b)
    return 1.0 - 0.5 * np.linalg.norm(a - b, axis=1)


def l2_score(reps_a, reps_b, raw: bool = False) -> float:
    return float(per_pair_l2_score(reps_a, reps_b, raw).mean())


_ORDS = {1: 1, 2: 2, "1": 1, "2": 2, "inf": np.inf, np.inf: np.inf}


def lp_distances(reps_a, reps_b, p=2, raw: bool = False) -> tuple[float, float]:
    """Mean and standard error of ||a_i - b_i||_p over pairs."""
    try:
        ord_ = _ORDS[p]
    except (KeyError, TypeError):
        raise ValueError(f"p must be 1, 2 or 'inf', got {p!r}") from None
    a, b = _aligned_units(reps_a, reps_b, raw)
    return _mean_stderr(np.linalg.norm(a - b, ord=ord_, axis=1))


def similarity_report(reps_a, reps_b, raw: bool = False) -> SimilarityReport:
    a, b = _aligned_units(reps_a, reps_b, raw)
    ua, ub = (l2_normalize_rows(a), l2_normalize_rows(b)) if raw else (a, b)
    cos = np.einsum("ij,ij->i", ua, ub)
    l2u = np.linalg.norm(ua - ub, axis=1)
    diff = a - b
    c_mean, c_err = _mean_stderr(np.abs(cos))
    s_mean, s_err = _mean_stderr(1.0 - 0.5 * l2u)
    l1 = _mean_stderr(np.abs(diff).sum(axis=1))
    l2 = _mean_stderr(np.linalg.norm(diff, axis=1))
    linf = _mean_stderr(np.abs(diff).max(axis=1))
    return SimilarityReport(c_mean, c_err, s_mean, s_err, *l1, *l2, *linf, cos, cos.size)


def pair_histogram(scores, n_bins: int = 20, value_range: tuple[float, float] | None = None):
    """Equal-width histogram of per-pair scores; returns ``(edges, counts)``.

    Without ``value_range`` the bins span [min, max] of the scores; use
    ``(0, 1)`` for absolute cosine similarities.
    """
    scores = np.asarray(scores, dtype=np.float64).ravel()
    if scores.size == 0:
        raise EmptyInput("no scores to histogram")
    if n_bins < 1:
        raise ValueError("n_bins must be >= 1")
    if value_range is None:
        lo, hi = float(scores.min()), float(scores.max())
        if lo == hi:
            lo, hi = lo - 0.5, hi + 0.5
        value_range = (lo, hi)
    # out-of-range scores land in the edge bins so counts always sum to N
    scores = np.clip(scores, *value_range)
    counts, edges = np.histogram(scores, bins=n_bins, range=value_range)
    return edges, counts


def write_histogram_csv(edges, counts, path) -> None:
    try:
        with Path(path).open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["bin_left", "bin_right", "count"])
            for left, right, count in zip(edges[:-1], edges[1:], counts):
                writer.writerow([repr(float(left)), repr(float(right)), int(count)])
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc.strerror or exc}") from exc
