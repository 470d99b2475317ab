"""Attacker-side output obfuscations: column shuffle, zero padding, scalar affine map.

Every obfuscation is fixed per set (one permutation, one set of padding
positions) and is reproducible from its seed, so it can be inverted.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BadSpec
from .repio import as_array, like

KINDS = ("shuffle", "pad", "transform")
PAD_MODES = ("append", "random_positions")


@dataclass(frozen=True)
class ObfuscationSpec:
    kind: str
    seed: int = 0
    pad_target_dim: int = 0
    pad_mode: str = "append"
    scale: float = 1.0
    offset: float = 0.0
    # explicit 0-based column order for shuffle; overrides the seed
    permutation: tuple | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise BadSpec(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.pad_mode not in PAD_MODES:
            raise BadSpec(f"pad_mode must be one of {PAD_MODES}, got {self.pad_mode!r}")
        if self.kind == "transform" and (self.scale == 0 or not np.isfinite(self.scale)
                                         or not np.isfinite(self.offset)):
            raise BadSpec("transform needs a finite non-zero scale and finite offset")


def _rng(spec: ObfuscationSpec) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(spec.seed, spawn_key=(KINDS.index(spec.kind),)))


def column_permutation(spec: ObfuscationSpec, dim: int) -> np.ndarray:
    """Output column j takes input column ``perm[j]``."""
    if spec.permutation is not None:
        perm = np.asarray(spec.permutation, dtype=np.intp)
        if perm.shape != (dim,) or not np.array_equal(np.sort(perm), np.arange(dim)):
            raise BadSpec(f"permutation is not a permutation of {dim} columns")
        return perm
    return _rng(spec).permutation(dim)


def pad_positions(spec: ObfuscationSpec, dim: int) -> np.ndarray:
    """Output columns that receive the original values, in order."""
    if spec.pad_target_dim <= dim:
        raise BadSpec(f"pad_target_dim ({spec.pad_target_dim}) must exceed input dim ({dim})")
    if spec.pad_mode == "append":
        return np.arange(dim)
    return np.sort(_rng(spec).choice(spec.pad_target_dim, size=dim, replace=False))


def apply_obfuscation(reps, spec: ObfuscationSpec):
    x = as_array(reps)
    n, d = x.shape
    if spec.kind == "shuffle":
        out = x[:, column_permutation(spec, d)]
    elif spec.kind == "pad":
        out = np.zeros((n, spec.pad_target_dim))
        out[:, pad_positions(spec, d)] = x
    else:
        out = spec.scale * x + spec.offset
    return like(reps, out)


def invert_obfuscation(reps, spec: ObfuscationSpec, original_dim: int | None = None):
    """Undo :func:`apply_obfuscation`; padding needs the pre-padding dimension."""
    y = as_array(reps)
    if spec.kind == "shuffle":
        out = np.empty_like(y)
        out[:, column_permutation(spec, y.shape[1])] = y
    elif spec.kind == "pad":
        if original_dim is None:
            raise BadSpec("inverting a pad needs original_dim")
        if y.shape[1] != spec.pad_target_dim:
            raise BadSpec("input width does not match pad_target_dim")
        out = y[:, pad_positions(spec, original_dim)]
    else:
        out = (y - spec.offset) / spec.scale
    return like(reps, out)
