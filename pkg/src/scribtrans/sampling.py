"""Low-data subsampling and cross-validation splits.

Both operations sort sample ids before consuming randomness, so their output
depends only on the id set and the seed, never on record order.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ContractError, InsufficientDataError, InvalidSplitError
from .manifest import DatasetManifest


@dataclass
class SplitSpec:
    fold_assignments: dict[str, int]  # sample id -> fold index
    k: int

    def fold_ids(self, fold: int) -> list[str]:
        return sorted(i for i, f in self.fold_assignments.items() if f == fold)

    def train_test_ids(self, fold: int) -> tuple[list[str], list[str]]:
        test = self.fold_ids(fold)
        train = sorted(i for i, f in self.fold_assignments.items() if f != fold)
        return train, test


def subsample_per_class(manifest: DatasetManifest, n_c: int, seed: int) -> DatasetManifest:
    """Keep exactly n_c single-label examples per class, drawn uniformly
    without replacement; deterministic in (id set, seed)."""
    if n_c < 1:
        raise ContractError(f"n_c must be >= 1, got {n_c}")
    by_class: dict[int, list] = {c: [] for c in range(manifest.num_classes)}
    for r in sorted(manifest.records, key=lambda r: r.id):
        if r.label is None:
            raise ContractError(f"record {r.id!r} is not single-label; cannot subsample per class")
        by_class[r.label].append(r)

    rng = np.random.default_rng(seed)
    kept = []
    for c in range(manifest.num_classes):
        pool = by_class[c]
        if len(pool) < n_c:
            raise InsufficientDataError(
                f"class {c} ({manifest.class_names[c]!r}) has {len(pool)} examples, need {n_c}"
            )
        idx = rng.choice(len(pool), size=n_c, replace=False)
        kept.extend(pool[i] for i in sorted(idx))

    return replace(manifest, records=kept)


def kfold_splits(manifest: DatasetManifest, k: int, seed: int) -> SplitSpec:
    """Partition sample ids into k folds whose sizes differ by at most one;
    deterministic in (id set, seed)."""
    if k < 2:
        raise InvalidSplitError(f"k must be >= 2, got {k}")
    ids = sorted(r.id for r in manifest.records)
    if k > len(ids):
        raise InvalidSplitError(f"k={k} exceeds dataset size {len(ids)}")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(ids))
    assignments = {ids[j]: int(pos % k) for pos, j in enumerate(order)}
    return SplitSpec(fold_assignments=assignments, k=k)
