"""Kozachenko-Leonenko nearest-neighbour entropy and the mutual-information score.

Nearest neighbours are exact. Low-dimensional inputs go through a k-d tree;
higher-dimensional inputs use blocked all-pairs distances, with the winning
neighbour's distance recomputed from coordinate differences so that exact
duplicates report a distance of exactly zero.

Representations are consumed as given: any augmentation of the inputs has to
happen before the encoder is queried.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import DegenerateBounds, RowCountMismatch, TooFewRows
from .preprocess import center_and_normalize, drop_constant_columns
from .repio import as_array

EULER_GAMMA = 0.5772156649015329
CLAMP_EPS = 1e-12
KDTREE_MAX_DIM = 16
BLOCK_ROWS = 1024


@dataclass(frozen=True)
class EntropyEstimate:
    value: float
    n_points: int
    dim: int
    n_clamped: int


@dataclass(frozen=True)
class MutualInfoScore:
    i_raw: float
    i_min: float
    i_max: float
    s: float


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get("ENCODER_DI_THREADS", "1")))
    except ValueError:
        return 1


def log_unit_ball_volume(d: int) -> float:
    """log of pi^(d/2) / Gamma(1 + d/2)."""
    return 0.5 * d * math.log(math.pi) - math.lgamma(1.0 + 0.5 * d)


def _nn_block(x: np.ndarray, sq_norms: np.ndarray, start: int, stop: int) -> np.ndarray:
    q = x[start:stop]
    d2 = sq_norms[start:stop, None] + sq_norms[None, :] - 2.0 * (q @ x.T)
    d2[np.arange(stop - start), np.arange(start, stop)] = np.inf
    nearest = np.argmin(d2, axis=1)
    diff = q - x[nearest]
    return np.sqrt(np.einsum("ij,ij->i", diff, diff))


def nearest_neighbor_distances(x, threads: int | None = None) -> np.ndarray:
    """Euclidean distance from each row to its nearest other row."""
    x = np.ascontiguousarray(as_array(x))
    n, d = x.shape
    if n < 2:
        raise TooFewRows("nearest neighbours need at least 2 rows")
    if d <= KDTREE_MAX_DIM:
        dist, _ = cKDTree(x).query(x, k=2)
        return dist[:, 1].copy()
    sq_norms = np.einsum("ij,ij->i", x, x)
    bounds = [(s, min(s + BLOCK_ROWS, n)) for s in range(0, n, BLOCK_ROWS)]
    threads = threads or default_threads()
    if threads > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda b: _nn_block(x, sq_norms, *b), bounds))
    else:
        parts = [_nn_block(x, sq_norms, *b) for b in bounds]
    return np.concatenate(parts)


def _estimate(x: np.ndarray, threads: int | None) -> EntropyEstimate:
    n, d = x.shape
    if n < 2:
        raise TooFewRows(f"entropy needs at least 2 rows, got {n}")
    radii = nearest_neighbor_distances(x, threads)
    clamped = radii < CLAMP_EPS
    radii = np.where(clamped, CLAMP_EPS, radii)
    mean_log_z = math.log(n - 1) + d * float(np.log(radii).mean())
    value = mean_log_z + log_unit_ball_volume(d) + EULER_GAMMA
    return EntropyEstimate(value, n, d, int(clamped.sum()))


def kl_entropy(reps, threads: int | None = None) -> EntropyEstimate:
    """Differential entropy (nats) from first-nearest-neighbour distances."""
    return _estimate(as_array(reps), threads)


def kl_joint_entropy(reps_a, reps_b, threads: int | None = None) -> EntropyEstimate:
    """Entropy of row-aligned concatenations; the volume exponent is ``dim_a + dim_b``."""
    a, b = as_array(reps_a), as_array(reps_b)
    if a.shape[0] != b.shape[0]:
        raise RowCountMismatch(f"joint entropy needs aligned rows, got {a.shape[0]} and {b.shape[0]}")
    return _estimate(np.hstack([a, b]), threads)


def mutual_information(reps_a, reps_b, threads: int | None = None) -> float:
    h_a = kl_entropy(reps_a, threads).value
    h_b = kl_entropy(reps_b, threads).value
    return h_a + h_b - kl_joint_entropy(reps_a, reps_b, threads).value


def prepare_for_mi(reps) -> np.ndarray:
    """Drop constant columns, then center and l2-normalize each row."""
    return center_and_normalize(drop_constant_columns(as_array(reps)))


def mi_score(reps_victim, reps_suspect, reps_random_baseline, raw: bool = False,
             threads: int | None = None) -> MutualInfoScore:
    """Normalized mutual information between victim and suspect, clamped to [0, 1].

    The floor is the victim's mutual information with a randomly initialised
    encoder, the ceiling its mutual information with itself.
    """
    prep = (lambda r: as_array(r)) if raw else prepare_for_mi
    v, s, r = prep(reps_victim), prep(reps_suspect), prep(reps_random_baseline)
    if not (v.shape[0] == s.shape[0] == r.shape[0]):
        raise RowCountMismatch("victim, suspect and baseline must be row-aligned")
    h_v = kl_entropy(v, threads).value
    i_max = 2.0 * h_v - kl_joint_entropy(v, v, threads).value
    i_min = h_v + kl_entropy(r, threads).value - kl_joint_entropy(v, r, threads).value
    if not i_max > i_min:
        raise DegenerateBounds(f"upper bound {i_max:.6g} does not exceed lower bound {i_min:.6g}")
    i_raw = h_v + kl_entropy(s, threads).value - kl_joint_entropy(v, s, threads).value
    s_val = min(1.0, max(0.0, (i_raw - i_min) / (i_max - i_min)))
    return MutualInfoScore(i_raw, i_min, i_max, s_val)
