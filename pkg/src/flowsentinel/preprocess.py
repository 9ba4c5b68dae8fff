"""Cleaning, deduplication, standardization and train/test splitting.

All operations are pure: they return new Datasets and never mutate input.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    EmptyAfterCleanError,
    EmptyClassError,
    EmptyDatasetError,
    NonFiniteInputError,
    NotLabeledError,
    SchemaMismatchError,
)
from .flowdata import CLASS_COUNT, Dataset, FeatureSchema


@dataclass(frozen=True)
class StandardizationParams:
    """Per-feature means and population standard deviations."""

    means: np.ndarray
    stds: np.ndarray
    schema: FeatureSchema

    def __post_init__(self):
        if self.means.shape != (self.schema.count,) or self.stds.shape != (self.schema.count,):
            raise SchemaMismatchError("standardizer vectors must match the schema width")


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.6
    seed: int = 0
    stratified: bool = True

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must lie strictly between 0 and 1")


def drop_invalid(d: Dataset) -> tuple[Dataset, int]:
    """Remove every record containing a non-finite value, keeping order."""
    keep = np.isfinite(d.X).all(axis=1)
    removed = int(len(d) - keep.sum())
    if not keep.any():
        raise EmptyAfterCleanError("no finite records remain")
    return d.take(np.flatnonzero(keep)), removed


def dedup(d: Dataset) -> tuple[Dataset, int]:
    """Keep the first occurrence of each exact (values, label) tuple."""
    seen: set[bytes] = set()
    keep: list[int] = []
    labeled = d.labeled
    for i in range(len(d)):
        key = d.X[i].tobytes() + (d.y[i].tobytes() if labeled else b"")
        if key not in seen:
            seen.add(key)
            keep.append(i)
    return d.take(np.array(keep, dtype=np.int64)), len(d) - len(keep)


def fit_standardizer(d: Dataset) -> StandardizationParams:
    """Per-feature mean and population (divide-by-n) standard deviation."""
    if len(d) == 0:
        raise EmptyDatasetError("cannot fit a standardizer on zero records")
    if not np.isfinite(d.X).all():
        raise NonFiniteInputError("standardizer input must be all-finite")
    means = d.X.mean(axis=0)
    stds = d.X.std(axis=0)  # numpy default ddof=0 is the population std
    return StandardizationParams(means=means, stds=stds, schema=d.schema)


def apply_standardizer(d: Dataset, p: StandardizationParams) -> Dataset:
    """z-score each cell; zero-variance columns map to exactly 0."""
    if d.schema != p.schema:
        raise SchemaMismatchError("dataset and standardizer schemas differ")
    if not np.isfinite(d.X).all():
        raise NonFiniteInputError("standardizer input must be all-finite")
    safe = np.where(p.stds > 0.0, p.stds, 1.0)
    Z = (d.X - p.means) / safe
    Z[:, p.stds == 0.0] = 0.0
    return Dataset(d.schema, Z, d.y)


def standardize_vector(x: np.ndarray, p: StandardizationParams) -> np.ndarray:
    """Single-record version of apply_standardizer (service hot path)."""
    safe = np.where(p.stds > 0.0, p.stds, 1.0)
    z = (x - p.means) / safe
    z[p.stds == 0.0] = 0.0
    return z


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def train_test_split(d: Dataset, s: SplitSpec) -> tuple[Dataset, Dataset]:
    """Disjoint, covering split; deterministic for a fixed seed.

    Non-stratified: |train| = round(train_fraction * n) over a seeded
    permutation. Stratified: per-class floor(f * n_c), the global
    remainder distributed by largest fractional part with ties broken
    by class id; every class must be present.
    """
    n = len(d)
    rng = np.random.default_rng(s.seed)

    if not s.stratified:
        target = _round_half_up(s.train_fraction * n)
        perm = rng.permutation(n)
        train_idx, test_idx = perm[:target], perm[target:]
    else:
        if not d.labeled:
            raise NotLabeledError("stratified split needs labels")
        counts = d.class_counts()
        for c in range(CLASS_COUNT):
            if counts[c] == 0:
                raise EmptyClassError(c)
        target = _round_half_up(s.train_fraction * n)
        exact = s.train_fraction * counts
        quota = np.floor(exact).astype(np.int64)
        remainder = target - int(quota.sum())
        if remainder > 0:
            order = np.argsort(-(exact - quota), kind="stable")  # ties keep class-id order
            for c in order[:remainder]:
                quota[c] += 1
        train_parts, test_parts = [], []
        for c in range(CLASS_COUNT):
            idx = np.flatnonzero(d.y == c)
            perm = idx[rng.permutation(idx.size)]
            train_parts.append(perm[: quota[c]])
            test_parts.append(perm[quota[c]:])
        train_idx = np.concatenate(train_parts)
        test_idx = np.concatenate(test_parts)

    return d.take(np.sort(train_idx)), d.take(np.sort(test_idx))
