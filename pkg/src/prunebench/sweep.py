"""Accuracy-vs-sparsity sweeps comparing standard and renormalized pruning."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from prunebench.errors import DomainError, EmptyNetworkError
from prunebench.mlp import Mlp, evaluate
from prunebench.pruning import PruneSpec, prune_network, select_mask

DEFAULT_SPARSITIES = (0.0, 0.5, 0.9, 0.95, 0.98, 0.99, 0.995)

SWEEP_CSV_HEADER = ["sparsity", "nnz", "train_acc_std", "test_acc_std", "train_acc_renorm",
                    "test_acc_renorm", "scale_factor", "seed", "valid"]

NAN = float("nan")


@dataclass
class SweepRow:
    sparsity: float
    nnz: int
    train_acc_std: float
    test_acc_std: float
    train_acc_renorm: float
    test_acc_renorm: float
    scale_factor: float
    seed: int = 0
    valid: bool = True

    def as_list(self) -> list:
        return [self.sparsity, self.nnz, self.train_acc_std, self.test_acc_std,
                self.train_acc_renorm, self.test_acc_renorm, self.scale_factor, self.seed,
                self.valid]

    @classmethod
    def from_strings(cls, rec: dict[str, str]) -> "SweepRow":
        def f(key):
            return float(rec[key]) if rec[key] != "" else NAN
        return cls(float(rec["sparsity"]), int(rec["nnz"]), f("train_acc_std"), f("test_acc_std"),
                   f("train_acc_renorm"), f("test_acc_renorm"), f("scale_factor"),
                   int(rec.get("seed") or 0), rec.get("valid", "1") == "1")


def check_grid(sparsities) -> list[float]:
    grid = [float(s) for s in sparsities]
    if not grid:
        raise DomainError("empty sparsity grid")
    if any(not 0 <= s < 1 for s in grid):
        raise DomainError(f"sparsities must lie in [0, 1): {grid}")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise DomainError(f"sparsity grid must be strictly increasing: {grid}")
    return grid


def run_sweep(net: Mlp, train_data, test_data, sparsities=DEFAULT_SPARSITIES,
              target_layer: int = 0, renormalize: str = "both", seed: int = 0,
              log=None) -> list[SweepRow]:
    """One mask per sparsity, shared by the standard and renormalized variants.

    ``renormalize`` is ``"both"``, ``"on"`` or ``"off"``; columns for a
    skipped variant are NaN.
    """
    if renormalize not in ("both", "on", "off"):
        raise DomainError(f"renormalize must be both, on or off, got {renormalize!r}")
    grid = check_grid(sparsities)
    weights = net.layers[target_layer].weights
    rows = []
    for s in grid:
        spec = PruneSpec.fraction(s, target_layer)
        mask = select_mask(weights, spec)
        row = SweepRow(s, mask.kept_nonzero, NAN, NAN, NAN, NAN, NAN, seed)
        try:
            if renormalize in ("both", "off"):
                std_net, _ = prune_network(net, spec, False, mask)
                row.train_acc_std = evaluate(std_net, train_data)
                row.test_acc_std = evaluate(std_net, test_data)
            if renormalize in ("both", "on"):
                ren_net, outcome = prune_network(net, spec, True, mask)
                row.train_acc_renorm = evaluate(ren_net, train_data)
                row.test_acc_renorm = evaluate(ren_net, test_data)
                row.scale_factor = outcome.scale_factor
        except EmptyNetworkError:
            row.valid = False
        if log is not None:
            log(f"seed {seed} sparsity {s:g}: nnz={row.nnz} "
                f"test std={row.test_acc_std:.4f} renorm={row.test_acc_renorm:.4f}")
        rows.append(row)
    return rows


def median_rows(rows: list[SweepRow]) -> list[SweepRow]:
    """Collapse multi-seed rows to one per sparsity by taking medians."""
    groups: dict[float, list[SweepRow]] = defaultdict(list)
    for r in rows:
        if r.valid:
            groups[r.sparsity].append(r)
    out = []
    for s in sorted(groups):
        g = groups[s]

        def med(attr):
            vals = [getattr(r, attr) for r in g if not math.isnan(getattr(r, attr))]
            return float(np.median(vals)) if vals else NAN
        out.append(SweepRow(s, int(np.median([r.nnz for r in g])), med("train_acc_std"),
                            med("test_acc_std"), med("train_acc_renorm"), med("test_acc_renorm"),
                            med("scale_factor"), seed=-1))
    return out


def direction_checks(rows: list[SweepRow], min_dense: float = 0.95, mid_sparsity: float = 0.5,
                     mid_tol: float = 0.02, high_sparsity: float = 0.99) -> list[tuple[str, bool, str]]:
    """Qualitative checks on a multi-seed sweep.

    Dense (sparsity 0) median test accuracy must reach ``min_dense``; at
    ``mid_sparsity`` both variants must stay within ``mid_tol`` of dense; at
    every sparsity ``>= high_sparsity`` the median renormalized test accuracy
    must be at least the median standard one.
    """
    med = {r.sparsity: r for r in median_rows(rows)}
    checks = []
    dense = med.get(0.0)
    if dense is None:
        return [("dense row present", False, "grid lacks sparsity 0")]
    checks.append(("dense test accuracy", dense.test_acc_std >= min_dense,
                   f"{dense.test_acc_std:.4f} >= {min_dense}"))
    mid = med.get(mid_sparsity)
    if mid is None:
        checks.append((f"sparsity {mid_sparsity} row present", False, "missing from grid"))
    else:
        for name, acc in (("standard", mid.test_acc_std), ("renormalized", mid.test_acc_renorm)):
            gap = dense.test_acc_std - acc
            checks.append((f"{name} at {mid_sparsity} within {mid_tol:g} of dense",
                           abs(gap) <= mid_tol, f"gap {gap:+.4f}"))
    high = [r for s, r in sorted(med.items()) if s >= high_sparsity]
    if not high:
        checks.append((f"rows at sparsity >= {high_sparsity}", False, "none in grid"))
    for r in high:
        checks.append((f"renormalized >= standard at {r.sparsity}",
                       r.test_acc_renorm >= r.test_acc_std,
                       f"{r.test_acc_renorm:.4f} vs {r.test_acc_std:.4f}"))
    return checks
