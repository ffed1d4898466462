"""One-shot magnitude pruning, optionally followed by renormalization.

Renormalization multiplies the surviving weights by ``||v||_0 / ||w||_0``,
the ratio of nonzero counts before and after pruning.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from prunebench.errors import DimensionError, DomainError, EmptyNetworkError
from prunebench.mlp import DenseLayer, Mlp


@dataclass(frozen=True)
class PruneSpec:
    """Which entries to prune.

    ``mode="threshold"`` prunes every ``|v_i| < epsilon`` (strict, so equality
    is kept). ``mode="fraction"`` prunes the ``floor(sparsity * len(v))``
    smallest magnitudes.
    """

    mode: str = "fraction"
    epsilon: float | None = None
    sparsity: float | None = None
    target_layer: int = 0

    def __post_init__(self):
        if self.mode == "threshold":
            if self.epsilon is None or self.sparsity is not None:
                raise DomainError("threshold mode takes epsilon and no sparsity")
            if not self.epsilon >= 0:
                raise DomainError(f"epsilon must be non-negative, got {self.epsilon}")
        elif self.mode == "fraction":
            if self.sparsity is None or self.epsilon is not None:
                raise DomainError("fraction mode takes sparsity and no epsilon")
            if not 0 <= self.sparsity < 1:
                raise DomainError(f"sparsity must lie in [0, 1), got {self.sparsity}")
        else:
            raise DomainError(f"unknown prune mode {self.mode!r}")

    @classmethod
    def fraction(cls, sparsity: float, target_layer: int = 0) -> "PruneSpec":
        return cls("fraction", sparsity=sparsity, target_layer=target_layer)

    @classmethod
    def threshold(cls, epsilon: float, target_layer: int = 0) -> "PruneSpec":
        return cls("threshold", epsilon=epsilon, target_layer=target_layer)


@dataclass(frozen=True)
class PruneMask:
    keep: np.ndarray  # bool, shaped like the pruned parameter array
    kept_count: int
    pruned_count: int
    nnz_before: int
    kept_nonzero: int

    @property
    def pruned_indices(self) -> np.ndarray:
        """Flat indices of pruned entries, ascending."""
        return np.flatnonzero(~self.keep.reshape(-1))


@dataclass(frozen=True)
class PruneOutcome:
    mask: PruneMask
    scale_factor: float
    renormalized: bool


def _mask_from_keep(v: np.ndarray, keep: np.ndarray) -> PruneMask:
    nonzero = v != 0
    return PruneMask(
        keep=keep,
        kept_count=int(keep.sum()),
        pruned_count=int(keep.size - keep.sum()),
        nnz_before=int(nonzero.sum()),
        kept_nonzero=int((keep & nonzero).sum()),
    )


def select_mask(v, spec: PruneSpec) -> PruneMask:
    v = np.asarray(v, dtype=np.float64)
    if v.size == 0:
        raise DomainError("cannot prune an empty parameter array")
    mag = np.abs(v)
    if spec.mode == "threshold":
        keep = ~(mag < spec.epsilon)
    else:
        flat = mag.reshape(-1)
        n_prune = int(np.floor(spec.sparsity * flat.size))
        # stable sort on |v|: among equal magnitudes the lower index is pruned first
        order = np.argsort(flat, kind="stable")
        keep_flat = np.ones(flat.size, dtype=bool)
        keep_flat[order[:n_prune]] = False
        keep = keep_flat.reshape(v.shape)
    return _mask_from_keep(v, keep)


def apply_prune(v, mask: PruneMask, renormalize: bool) -> tuple[np.ndarray, PruneOutcome]:
    """Zero the pruned entries of ``v`` and, if asked, rescale the survivors."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape != mask.keep.shape:
        raise DimensionError(f"mask shape {mask.keep.shape} does not match {v.shape}")
    w = np.where(mask.keep, v, 0.0)
    scale = 1.0
    if renormalize:
        kept_nonzero = int(np.count_nonzero(w))
        if kept_nonzero == 0:
            raise EmptyNetworkError("every nonzero parameter was pruned; nothing to renormalize")
        scale = np.count_nonzero(v) / kept_nonzero
        if scale != 1.0:
            w = w * scale
    return w, PruneOutcome(mask=mask, scale_factor=float(scale), renormalized=renormalize)


def prune_network(net: Mlp, spec: PruneSpec, renormalize: bool,
                  mask: PruneMask | None = None) -> tuple[Mlp, PruneOutcome]:
    """Copy of ``net`` with the weight matrix of ``spec.target_layer`` pruned.

    Biases and every other layer are left untouched. Pass a precomputed
    ``mask`` to share one selection between the standard and renormalized
    variants.
    """
    if not 0 <= spec.target_layer < len(net.layers):
        raise DomainError(f"target_layer {spec.target_layer} out of range for "
                          f"{len(net.layers)} layers")
    target = net.layers[spec.target_layer]
    if mask is None:
        mask = select_mask(target.weights, spec)
    w, outcome = apply_prune(target.weights, mask, renormalize)
    layers = [layer.copy() for layer in net.layers]
    layers[spec.target_layer] = DenseLayer(w, target.biases.copy(), target.activation)
    return Mlp(layers), outcome
