"""Dataset inference for encoders: is a suspect encoder derived from the victim's training data?

For each suspect, a density estimator is fit on the suspect's own
representations of the held-in private split P2. The suspect's
representations of the remaining private split P1 and of held-out data N are
scored under that estimator, and a one-sided Welch t-test asks whether P1
log-likelihoods exceed N log-likelihoods. Rejecting at level ``alpha``
yields ``"stolen"``; otherwise the result is ``"inconclusive"``.

The caller is responsible for P1 and N being disjoint from P2 and for N
being drawn from the same distribution as the private data.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import BadFraction, DimensionMismatch, EncoderDIError, TooFewRows
from .gmm import GmmFitConfig, GmmModel, fit_gmm, per_point_log_likelihoods
from .preprocess import Preprocessing
from .repio import as_array
from .stats import TTestResult, welch_one_sided
from .synth import substream

log = logging.getLogger(__name__)

VERDICT_FIELDS = ("label", "u_p", "u_n", "t", "dof", "p_value", "alpha", "decision", "k",
                  "covariance_kind", "n_p1", "n_n", "seed")


@dataclass(frozen=True)
class SplitPlan:
    p1_indices: np.ndarray
    p2_indices: np.ndarray
    fraction_p2: float
    seed: int


def make_split(n_private: int, fraction_p2: float = 0.5, seed: int = 0) -> SplitPlan:
    """Uniformly random partition of ``range(n_private)`` into P1 and P2."""
    if not 0 < fraction_p2 < 1:
        raise BadFraction(f"fraction_p2 must lie strictly between 0 and 1, got {fraction_p2}")
    if n_private < 4:
        raise TooFewRows(f"need at least 4 private points, got {n_private}")
    n_p2 = int(round(n_private * fraction_p2))
    if n_p2 < 2 or n_private - n_p2 < 2:
        raise BadFraction(f"fraction {fraction_p2} leaves a part with fewer than 2 of {n_private} points")
    perm = substream(seed, "inference/split").permutation(n_private)
    return SplitPlan(np.sort(perm[n_p2:]), np.sort(perm[:n_p2]), fraction_p2, seed)


@dataclass(frozen=True, eq=False)
class OwnershipVerdict:
    label: str
    u_p: float
    u_n: float
    t_result: TTestResult
    alpha: float
    decision: str
    k: int
    covariance_kind: str
    train_mean_log_lik: float
    n_p1: int
    n_n: int
    seed: int
    # audit payload
    liks_p1: np.ndarray = field(repr=False, default=None)
    liks_n: np.ndarray = field(repr=False, default=None)
    model: GmmModel = field(repr=False, default=None)

    @property
    def p_value(self) -> float:
        return self.t_result.p_value

    def to_dict(self) -> dict:
        return {
            "label": self.label, "u_p": self.u_p, "u_n": self.u_n,
            "t": self.t_result.t_statistic, "dof": self.t_result.dof,
            "p_value": self.t_result.p_value, "alpha": self.alpha, "decision": self.decision,
            "k": self.k, "covariance_kind": self.covariance_kind,
            "n_p1": self.n_p1, "n_n": self.n_n, "seed": self.seed,
        }


def _equalize(x: np.ndarray, m: int, rng: np.random.Generator) -> np.ndarray:
    if x.shape[0] == m:
        return x
    return x[np.sort(rng.choice(x.shape[0], size=m, replace=False))]


def run_dataset_inference(reps_p1, reps_p2, reps_n, gmm_config: GmmFitConfig | None = None,
                          alpha: float = 0.05, standardize: bool = False, normalize: bool = True,
                          label: str = "") -> OwnershipVerdict:
    """Fit on P2, score P1 and N, and test H0: mean P1 log-likelihood <= mean N log-likelihood.

    P1 and N are cut to the same size, ``min(|P1|, |N|)``, by seeded
    subsampling before scoring.
    """
    p1, p2, n = as_array(reps_p1), as_array(reps_p2), as_array(reps_n)
    dim = p2.shape[1]
    if p1.shape[1] != dim or n.shape[1] != dim:
        raise DimensionMismatch(f"splits disagree on dimension: P1 {p1.shape[1]}, P2 {dim}, N {n.shape[1]}")
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    config = gmm_config if gmm_config is not None else GmmFitConfig.for_dim(dim)

    pre = Preprocessing.fit(p2, standardize=standardize, normalize=normalize)
    model = fit_gmm(pre.apply(p2), config, pre)

    m = min(p1.shape[0], n.shape[0])
    rng = substream(config.seed, "inference/equalize")
    p1 = _equalize(p1, m, rng)
    n = _equalize(n, m, rng)
    liks_p1 = per_point_log_likelihoods(model, pre.apply(p1))
    liks_n = per_point_log_likelihoods(model, pre.apply(n))
    result = welch_one_sided(liks_p1, liks_n)
    decision = "stolen" if result.p_value < alpha else "inconclusive"
    log.debug("%s: u_p=%.4f u_n=%.4f t=%.3f p=%.3g -> %s", label, result.mean_a, result.mean_b,
              result.t_statistic, result.p_value, decision)
    return OwnershipVerdict(label, result.mean_a, result.mean_b, result, alpha, decision, config.k,
                            config.covariance_kind, model.fit_log[-1], m, m, config.seed,
                            liks_p1, liks_n, model)


@dataclass(frozen=True)
class SuiteEntry:
    label: str
    verdict: OwnershipVerdict | None = None
    error: EncoderDIError | None = None


def run_suite(suspects, gmm_config: GmmFitConfig | None = None, alpha: float = 0.05,
              max_workers: int = 1, **options) -> list[SuiteEntry]:
    """Run inference once per ``(label, p1, p2, n)`` suspect, each with its own estimator.

    A suspect that fails is reported in its entry's ``error``; the rest still run.
    """
    def one(suspect):
        label, p1, p2, n = suspect
        try:
            verdict = run_dataset_inference(p1, p2, n, gmm_config, alpha, label=label, **options)
            return SuiteEntry(label, verdict)
        except EncoderDIError as exc:
            log.warning("suspect %s failed: %s", label, exc)
            return SuiteEntry(label, error=exc)

    suspects = list(suspects)
    if max_workers > 1 and len(suspects) > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            return list(pool.map(one, suspects))
    return [one(s) for s in suspects]
