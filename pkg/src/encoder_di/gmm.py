"""Gaussian mixture density estimator fit by expectation maximization.

The estimator is fit on a suspect encoder's representations of the held-in
private split and later scores other splits by log-likelihood. Full and
diagonal covariances are supported; a small ridge ``reg_floor`` is added to
every covariance diagonal at each M-step.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import linalg

from .errors import BadConfig, DegenerateComponent, DimensionMismatch, MalformedHeader, TooFewRows
from .preprocess import Preprocessing, StandardizationStats
from .repio import as_array

COVARIANCE_KINDS = ("full", "diagonal")
LOG_2PI = np.log(2.0 * np.pi)
# A component whose responsibility mass falls below this is treated as empty.
EMPTY_MASS = 1e-6


@dataclass(frozen=True)
class GmmFitConfig:
    k: int = 10
    covariance_kind: str = "full"
    max_iters: int = 200
    rel_tol: float = 1e-5
    reg_floor: float = 1e-6
    n_init: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.covariance_kind == "diag":
            object.__setattr__(self, "covariance_kind", "diagonal")
        if self.covariance_kind not in COVARIANCE_KINDS:
            raise BadConfig(f"covariance_kind must be one of {COVARIANCE_KINDS}")
        if self.k < 1 or self.max_iters < 1 or self.n_init < 1:
            raise BadConfig("k, max_iters and n_init must all be >= 1")
        if not (self.rel_tol > 0 and self.reg_floor > 0):
            raise BadConfig("rel_tol and reg_floor must be > 0")

    @classmethod
    def for_dim(cls, dim: int, **overrides) -> "GmmFitConfig":
        """Defaults by representation size: 10 full components up to 512 dims, else 50 diagonal."""
        if dim <= 512:
            base = dict(k=10, covariance_kind="full")
        else:
            base = dict(k=50, covariance_kind="diagonal")
        base.update({key: v for key, v in overrides.items() if v is not None})
        return cls(**base)


@dataclass(frozen=True, eq=False)
class GmmModel:
    weights: np.ndarray
    means: np.ndarray
    covariances: np.ndarray
    covariance_kind: str
    preprocessing: Preprocessing = field(default_factory=Preprocessing)
    fit_log: tuple = ()
    n_reseeds: int = 0

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        mu = np.atleast_2d(np.asarray(self.means, dtype=np.float64))
        cov = np.asarray(self.covariances, dtype=np.float64)
        k, d = mu.shape
        expected = (k, d, d) if self.covariance_kind == "full" else (k, d)
        if w.shape != (k,) or cov.shape != expected:
            raise DimensionMismatch(f"inconsistent GMM shapes: weights {w.shape}, means {mu.shape}, "
                                    f"covariances {cov.shape}")
        if self.covariance_kind == "full":
            prec_chol = np.empty_like(cov)
            log_det = np.empty(k)
            for j in range(k):
                try:
                    chol = linalg.cholesky(cov[j], lower=True)
                except linalg.LinAlgError:
                    raise DegenerateComponent(f"covariance of component {j} is not positive definite") from None
                prec_chol[j] = linalg.solve_triangular(chol, np.eye(d), lower=True).T
                log_det[j] = 2.0 * np.log(np.diag(chol)).sum()
        else:
            if np.any(cov <= 0):
                raise DegenerateComponent("diagonal covariance has a non-positive entry")
            prec_chol = 1.0 / np.sqrt(cov)
            log_det = np.log(cov).sum(axis=1)
        for name, value in (("weights", w), ("means", mu), ("covariances", cov)):
            value.setflags(write=False)
            object.__setattr__(self, name, value)
        object.__setattr__(self, "fit_log", tuple(float(v) for v in self.fit_log))
        object.__setattr__(self, "_prec_chol", prec_chol)
        object.__setattr__(self, "_log_det", log_det)

    @property
    def k(self) -> int:
        return self.means.shape[0]

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def component_log_densities(self, x: np.ndarray) -> np.ndarray:
        """``n x k`` matrix of log N(x_i; mu_j, Sigma_j) (weights not included)."""
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.dim:
            raise DimensionMismatch(f"model has dim {self.dim}, data has shape {x.shape}")
        out = np.empty((x.shape[0], self.k))
        for j in range(self.k):
            diff = x - self.means[j]
            if self.covariance_kind == "full":
                y = diff @ self._prec_chol[j]
            else:
                y = diff * self._prec_chol[j]
            out[:, j] = np.einsum("ij,ij->i", y, y)
        return -0.5 * (self.dim * LOG_2PI + self._log_det + out)


def _mixture_log_density(log_comp: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """log sum_j w_j exp(log_comp_j), stabilised by the largest live component.

    Terms are summed in sorted order so that the result does not depend on
    component indexing.
    """
    live = weights > 0
    shift = np.max(np.where(live, log_comp, -np.inf), axis=1, keepdims=True)
    terms = np.where(live, weights * np.exp(log_comp - shift), 0.0)
    total = np.sort(terms, axis=1).sum(axis=1)
    return shift[:, 0] + np.log(total)


def per_point_log_likelihoods(model: GmmModel, reps) -> np.ndarray:
    x = as_array(reps)
    return _mixture_log_density(model.component_log_densities(x), model.weights)


def log_density(model: GmmModel, point) -> float:
    point = np.asarray(point, dtype=np.float64)
    if point.ndim != 1:
        raise DimensionMismatch("log_density expects a single vector")
    return float(per_point_log_likelihoods(model, point[None, :])[0])


def mean_log_likelihood(model: GmmModel, reps) -> float:
    return float(per_point_log_likelihoods(model, reps).mean())


# --------------------------------------------------------------------- fitting


def _kmeans_pp(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    centers = np.empty((k, x.shape[1]))
    centers[0] = x[rng.integers(n)]
    closest = ((x - centers[0]) ** 2).sum(axis=1)
    for c in range(1, k):
        total = closest.sum()
        if total <= 0:
            idx = rng.integers(n)
        else:
            idx = int(np.searchsorted(np.cumsum(closest), rng.random() * total, side="right"))
            idx = min(idx, n - 1)
        centers[c] = x[idx]
        closest = np.minimum(closest, ((x - centers[c]) ** 2).sum(axis=1))
    return centers


def _sq_dists(x: np.ndarray, centers: np.ndarray) -> np.ndarray:
    out = np.empty((x.shape[0], centers.shape[0]))
    for j, c in enumerate(centers):
        out[:, j] = ((x - c) ** 2).sum(axis=1)
    return out


def _m_step(x, resp, kind, reg):
    n, d = x.shape
    nk = resp.sum(axis=0)
    safe = np.maximum(nk, np.finfo(float).tiny)
    weights = nk / n
    means = (resp.T @ x) / safe[:, None]
    k = resp.shape[1]
    if kind == "full":
        cov = np.empty((k, d, d))
        for j in range(k):
            diff = x - means[j]
            cov[j] = (resp[:, j, None] * diff).T @ diff / safe[j]
            cov[j] = 0.5 * (cov[j] + cov[j].T)
            cov[j].flat[:: d + 1] += reg
    else:
        cov = np.empty((k, d))
        for j in range(k):
            cov[j] = resp[:, j] @ ((x - means[j]) ** 2) / safe[j] + reg
    return weights, means, cov, nk


def _init_params(x, config, rng):
    n, d = x.shape
    k = config.k
    m = min(n, 10 * k * d)
    sub = x if m == n else x[np.sort(rng.choice(n, size=m, replace=False))]
    centers = _kmeans_pp(sub, k, rng)
    labels = np.argmin(_sq_dists(x, centers), axis=1)
    resp = np.zeros((n, k))
    resp[np.arange(n), labels] = 1.0
    weights, means, cov, nk = _m_step(x, resp, config.covariance_kind, config.reg_floor)
    global_var = x.var(axis=0) + config.reg_floor
    for j in np.flatnonzero(nk < 2):
        means[j] = centers[j]
        cov[j] = np.diag(global_var) if config.covariance_kind == "full" else global_var
        weights[j] = max(nk[j], 1.0) / n
    weights /= weights.sum()
    return weights, means, cov


def _reseed_empty(x, weights, means, cov, nk, point_ll, kind, reg):
    empty = np.flatnonzero(nk < EMPTY_MASS)
    if not empty.size:
        return 0
    global_var = x.var(axis=0) + reg
    order = np.argsort(point_ll, kind="stable")
    for rank, j in enumerate(empty):
        means[j] = x[order[rank % len(order)]]
        cov[j] = np.diag(global_var) if kind == "full" else global_var
        weights[j] = 1.0 / x.shape[0]
    weights /= weights.sum()
    return len(empty)


def _run_em(x, config, rng, preprocessing):
    kind = config.covariance_kind
    weights, means, cov = _init_params(x, config, rng)
    model = GmmModel(weights, means, cov, kind, preprocessing)
    log_comp = model.component_log_densities(x)
    point_ll = _mixture_log_density(log_comp, model.weights)
    trace = [float(point_ll.mean())]
    reseeds = 0
    for _ in range(config.max_iters):
        log_resp = np.log(weights) + log_comp - point_ll[:, None]
        resp = np.exp(log_resp)
        weights, means, cov, nk = _m_step(x, resp, kind, config.reg_floor)
        reseeds += _reseed_empty(x, weights, means, cov, nk, point_ll, kind, config.reg_floor)
        model = GmmModel(weights, means, cov, kind, preprocessing)
        log_comp = model.component_log_densities(x)
        point_ll = _mixture_log_density(log_comp, model.weights)
        ll = float(point_ll.mean())
        prev = trace[-1]
        trace.append(ll)
        if abs(ll - prev) / max(1.0, abs(ll)) < config.rel_tol:
            break
    return replace(model, fit_log=tuple(trace), n_reseeds=reseeds)


def fit_gmm(data, config: GmmFitConfig, preprocessing: Preprocessing | None = None) -> GmmModel:
    """Fit a mixture to already-preprocessed ``data``; keep the best of ``n_init`` restarts.

    ``preprocessing`` is stored on the model so the same pipeline can be
    replayed on evaluation splits; it is not applied here.
    """
    x = as_array(data)
    if x.shape[0] < max(config.k, 2):
        raise TooFewRows(f"need at least k={config.k} rows to fit, got {x.shape[0]}")
    preprocessing = preprocessing if preprocessing is not None else Preprocessing(normalize=False)
    seeds = np.random.SeedSequence(config.seed).spawn(config.n_init)
    best = None
    with np.errstate(divide="ignore"):
        for seq in seeds:
            model = _run_em(x, config, np.random.default_rng(seq), preprocessing)
            if best is None or model.fit_log[-1] > best.fit_log[-1]:
                best = model
    return best


# --------------------------------------------------------------- serialization

_GMM_MAGIC = b"GMMB"
_GMM_VERSION = 1
_GMM_HEADER = struct.Struct("<4sBBII")


def _f8(a) -> bytes:
    return np.ascontiguousarray(a, dtype="<f8").tobytes()


def gmm_to_bytes(model: GmmModel) -> bytes:
    """Versioned little-endian float64 blob; reloads bit-exactly."""
    buf = io.BytesIO()
    kind = 0 if model.covariance_kind == "diagonal" else 1
    buf.write(_GMM_HEADER.pack(_GMM_MAGIC, _GMM_VERSION, kind, model.k, model.dim))
    buf.write(_f8(model.weights) + _f8(model.means) + _f8(model.covariances))
    pre = model.preprocessing
    flags = (1 if pre.standardization is not None else 0) | (2 if pre.normalize else 0)
    buf.write(struct.pack("<Bd", flags, pre.floor))
    if pre.standardization is not None:
        buf.write(_f8(pre.standardization.means) + _f8(pre.standardization.stdevs))
    buf.write(struct.pack("<II", len(model.fit_log), model.n_reseeds))
    buf.write(_f8(model.fit_log))
    return buf.getvalue()


def gmm_from_bytes(blob: bytes) -> GmmModel:
    try:
        magic, version, kind, k, d = _GMM_HEADER.unpack_from(blob, 0)
    except struct.error:
        raise MalformedHeader("truncated GMM header") from None
    if magic != _GMM_MAGIC or version != _GMM_VERSION or kind not in (0, 1):
        raise MalformedHeader("not a version-1 GMM blob")
    off = _GMM_HEADER.size

    def take(count):
        nonlocal off
        arr = np.frombuffer(blob, dtype="<f8", count=count, offset=off).astype(np.float64)
        off += 8 * count
        return arr

    try:
        weights = take(k)
        means = take(k * d).reshape(k, d)
        cov = take(k * d * d).reshape(k, d, d) if kind == 1 else take(k * d).reshape(k, d)
        flags, floor = struct.unpack_from("<Bd", blob, off)
        off += 9
        stats = None
        if flags & 1:
            stats = StandardizationStats(take(d), take(d))
        n_log, reseeds = struct.unpack_from("<II", blob, off)
        off += 8
        fit_log = take(n_log)
    except (ValueError, struct.error):
        raise MalformedHeader("truncated GMM payload") from None
    if off != len(blob):
        raise MalformedHeader("trailing bytes after GMM payload")
    pre = Preprocessing(stats, bool(flags & 2), floor)
    return GmmModel(weights, means, cov, "full" if kind == 1 else "diagonal", pre,
                    tuple(fit_log), reseeds)
