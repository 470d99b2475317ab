"""Synthetic victim / stolen / independent encoder worlds.

Inputs are abstract row indices. The victim maps each input to a Gaussian
cluster in ``dim`` dimensions; members of its private training data (splits
P1 and P2) sit closer to their cluster centre than held-out inputs (split N)
by the factor ``gap_rho``, which stands in for an encoder that overfits its
training set. A stolen encoder is a (noisy) linear image of the victim's
representations. An independent encoder has its own clusters and no gap.

Cluster centres lie on the sphere of radius ``sqrt(dim)``; the within-cluster
standard deviation of held-out points is 1.
"""

from __future__ import annotations

import json
import zlib
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import BadConfig, IoFailure
from .repio import RepresentationSet, read_representations, write_representations

ROLES = ("victim", "stolen", "independent")
SPLITS = ("P1", "P2", "N")
MAP_KINDS = ("orthogonal", "random_linear", "identity")
CLUSTER_STD = 1.0


def substream(seed: int, name: str) -> np.random.Generator:
    """Independent generator for a named purpose, derived from one master seed."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(zlib.crc32(name.encode()),)))


@dataclass(frozen=True)
class SyntheticWorldConfig:
    dim: int = 64
    n_clusters: int = 8
    n_p1: int = 2000
    n_p2: int = 2000
    n_n: int = 2000
    gap_rho: float = 0.9
    steal_noise: float = 0.1
    steal_map: str = "orthogonal"
    seed: int = 0

    def __post_init__(self):
        if self.dim < 1 or self.n_clusters < 1:
            raise BadConfig("dim and n_clusters must be >= 1")
        for name in ("n_p1", "n_p2", "n_n"):
            if getattr(self, name) < 2:
                raise BadConfig(f"{name} must be >= 2")
        if not 0 < self.gap_rho <= 1:
            raise BadConfig(f"gap_rho must lie in (0, 1], got {self.gap_rho}")
        if not self.steal_noise >= 0:
            raise BadConfig(f"steal_noise must be >= 0, got {self.steal_noise}")
        if self.steal_map not in MAP_KINDS:
            raise BadConfig(f"steal_map must be one of {MAP_KINDS}")

    def split_size(self, split: str) -> int:
        return {"P1": self.n_p1, "P2": self.n_p2, "N": self.n_n}[split]


@dataclass(frozen=True, eq=False)
class GroundTruth:
    victim_centers: np.ndarray
    independent_centers: np.ndarray
    labels: dict
    steal_matrix: np.ndarray
    gap_rho: float


@dataclass(frozen=True, eq=False)
class SyntheticWorld:
    config: SyntheticWorldConfig
    sets: dict = field(repr=False)
    ground_truth: GroundTruth = field(repr=False)

    def get(self, role: str, split: str) -> RepresentationSet:
        return self.sets[(role, split)]

    def save(self, directory) -> list[Path]:
        directory = Path(directory)
        try:
            directory.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise IoFailure(f"cannot create {directory}: {exc.strerror or exc}") from exc
        files, written = [], []
        for role in ROLES:
            for split in SPLITS:
                name = f"{role}_{split}.repr"
                write_representations(self.get(role, split), directory / name)
                files.append({"role": role, "split": split, "file": name})
                written.append(directory / name)
        manifest = {"config": asdict(self.config), "files": files}
        try:
            (directory / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        except OSError as exc:
            raise IoFailure(f"cannot write manifest: {exc.strerror or exc}") from exc
        return written


def load_world_sets(directory) -> dict:
    """Read back the sets of a saved world, keyed by ``(role, split)``."""
    directory = Path(directory)
    try:
        manifest = json.loads((directory / "manifest.json").read_text())
    except OSError as exc:
        raise IoFailure(f"cannot read manifest: {exc.strerror or exc}") from exc
    return {(f["role"], f["split"]): read_representations(directory / f["file"]) for f in manifest["files"]}


def _sphere_centers(rng, k, dim):
    c = rng.standard_normal((k, dim))
    return np.sqrt(dim) * c / np.linalg.norm(c, axis=1, keepdims=True)


def steal_matrix(map_kind: str, dim: int, rng: np.random.Generator) -> np.ndarray:
    if map_kind == "identity":
        return np.eye(dim)
    g = rng.standard_normal((dim, dim))
    if map_kind == "random_linear":
        return g / np.sqrt(dim)
    if map_kind == "orthogonal":
        q, r = np.linalg.qr(g)
        # sign fix makes the draw Haar-distributed
        return q * np.sign(np.diag(r))
    raise BadConfig(f"steal_map must be one of {MAP_KINDS}, got {map_kind!r}")


def _steal(x, matrix, noise, rng):
    out = x @ matrix.T
    if noise > 0:
        out = out + noise * rng.standard_normal(out.shape)
    return out


def emulate_stealing(victim_reps: RepresentationSet, map_kind: str = "orthogonal", noise: float = 0.0,
                     seed: int = 0) -> RepresentationSet:
    """Row-aligned stolen copy: each row mapped by a seeded matrix plus Gaussian noise."""
    if not noise >= 0:
        raise BadConfig(f"noise must be >= 0, got {noise}")
    matrix = steal_matrix(map_kind, victim_reps.dim, substream(seed, "stolen/map"))
    out = _steal(victim_reps.data, matrix, noise, substream(seed, "stolen/noise"))
    return RepresentationSet(out, "stolen", victim_reps.split_label)


def random_baseline_like(reps: RepresentationSet, seed: int = 0) -> RepresentationSet:
    """Representations of a randomly initialised encoder: unrelated isotropic Gaussian rows."""
    rng = substream(seed, "baseline")
    return RepresentationSet(rng.standard_normal((reps.n_rows, reps.dim)), "random", reps.split_label)


def _cluster_draw(seed, prefix, centers, n, stdev):
    labels = substream(seed, prefix + "/labels").integers(centers.shape[0], size=n)
    noise = substream(seed, prefix + "/noise").standard_normal((n, centers.shape[1]))
    return centers[labels] + stdev * noise, labels


def generate_world(config: SyntheticWorldConfig) -> SyntheticWorld:
    seed, dim = config.seed, config.dim
    victim_centers = _sphere_centers(substream(seed, "victim/centers"), config.n_clusters, dim)
    indep_centers = _sphere_centers(substream(seed, "independent/centers"), config.n_clusters, dim)
    matrix = steal_matrix(config.steal_map, dim, substream(seed, "stolen/map"))
    sets, labels = {}, {}
    for split in SPLITS:
        n = config.split_size(split)
        stdev = CLUSTER_STD * (config.gap_rho if split != "N" else 1.0)
        victim, labels[("victim", split)] = _cluster_draw(seed, f"victim/{split}", victim_centers, n, stdev)
        indep, labels[("independent", split)] = _cluster_draw(
            seed, f"independent/{split}", indep_centers, n, CLUSTER_STD)
        stolen = _steal(victim, matrix, config.steal_noise, substream(seed, f"stolen/{split}/noise"))
        sets[("victim", split)] = RepresentationSet(victim, "victim", split)
        sets[("stolen", split)] = RepresentationSet(stolen, "stolen", split)
        sets[("independent", split)] = RepresentationSet(indep, "independent", split)
    truth = GroundTruth(victim_centers, indep_centers, labels, matrix, config.gap_rho)
    return SyntheticWorld(config, sets, truth)
