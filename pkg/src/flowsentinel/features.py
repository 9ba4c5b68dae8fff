"""Native PCA and feature-analysis utilities.

PCA is fitted on the population covariance of (already standardized)
data; components are orthonormal eigenvectors sorted by non-increasing
eigenvalue, with each component's sign fixed so its largest-magnitude
coordinate is positive.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateDataError,
    KTooLargeError,
    NonFiniteInputError,
    SchemaMismatchError,
)
from .flowdata import Dataset, FeatureSchema

EIGENVALUE_CLAMP = 1e-12


@dataclass(frozen=True)
class PcaModel:
    """Standardization-aware principal-component basis.

    `components` holds one orthonormal basis vector per row (k rows);
    `eigenvalues` the k retained variances; `all_eigenvalues` the full
    non-increasing spectrum, kept so variance bookkeeping (trace checks,
    reconstruction-error identities) stays possible after truncation.
    """

    means: np.ndarray
    components: np.ndarray
    eigenvalues: np.ndarray
    all_eigenvalues: np.ndarray
    k: int
    input_dim: int
    input_schema: FeatureSchema

    @property
    def output_schema(self) -> FeatureSchema:
        return FeatureSchema(tuple(f"PC{i + 1}" for i in range(self.k)))


@dataclass(frozen=True)
class FeatureRanking:
    """(feature name, score) pairs with non-increasing scores."""

    entries: tuple[tuple[str, float], ...]


@dataclass(frozen=True)
class CorrelationMatrix:
    names: tuple[str, ...]
    values: np.ndarray


def _check_finite(d: Dataset) -> None:
    if not np.isfinite(d.X).all():
        raise NonFiniteInputError("operation requires all-finite data")


def fit_pca(d: Dataset, k: int) -> PcaModel:
    """Eigendecomposition of the population covariance, top-k retained."""
    _check_finite(d)
    n, dim = d.X.shape
    if n < 2:
        raise DegenerateDataError("PCA needs at least 2 records")
    if not 1 <= k <= dim:
        raise KTooLargeError(f"k={k} outside [1, {dim}]")

    means = d.X.mean(axis=0)
    Z = d.X - means
    cov = (Z.T @ Z) / n
    eigenvalues, eigenvectors = np.linalg.eigh(cov)

    order = np.argsort(eigenvalues, kind="stable")[::-1]
    eigenvalues = eigenvalues[order]
    eigenvectors = eigenvectors[:, order]
    eigenvalues = np.where(
        (eigenvalues < 0) & (eigenvalues >= -EIGENVALUE_CLAMP), 0.0, eigenvalues
    )

    components = eigenvectors.T.copy()
    for row in components:
        pivot = np.argmax(np.abs(row))
        if row[pivot] < 0:
            row *= -1.0

    return PcaModel(
        means=means,
        components=components[:k],
        eigenvalues=eigenvalues[:k],
        all_eigenvalues=eigenvalues,
        k=k,
        input_dim=dim,
        input_schema=d.schema,
    )


def transform_pca(d: Dataset, m: PcaModel) -> Dataset:
    """Project records onto the retained components; labels ride along."""
    if d.schema.count != m.input_dim:
        raise SchemaMismatchError(f"width {d.schema.count} != PCA input_dim {m.input_dim}")
    scores = (d.X - m.means) @ m.components.T
    return Dataset(m.output_schema, scores, d.y)


def transform_vector(x: np.ndarray, m: PcaModel) -> np.ndarray:
    """Single-record projection (service hot path)."""
    return m.components @ (x - m.means)


def inverse_transform_pca(scores: Dataset, m: PcaModel) -> Dataset:
    """Map component scores back to feature space: means + components^T . s."""
    if scores.schema.count != m.k:
        raise SchemaMismatchError(f"width {scores.schema.count} != retained k {m.k}")
    X = scores.X @ m.components + m.means
    return Dataset(m.input_schema, X, scores.y)


def rank_features_by_loading(m: PcaModel, schema: FeatureSchema) -> FeatureRanking:
    """Eigenvalue-weighted squared loadings, sorted descending.

    score(j) = sum_i eigenvalues[i] * components[i][j]^2 over the retained
    components; ties keep schema order.
    """
    if m.input_dim != schema.count:
        raise SchemaMismatchError("ranking schema width != PCA input_dim")
    scores = (m.eigenvalues[:, None] * np.square(m.components)).sum(axis=0)
    order = np.argsort(-scores, kind="stable")  # stable: ties stay in schema order
    entries = tuple((schema.names[j], float(scores[j])) for j in order)
    return FeatureRanking(entries)


def correlation_matrix(d: Dataset) -> CorrelationMatrix:
    """Pearson coefficients; zero-variance features correlate 0 off-diagonal."""
    _check_finite(d)
    if len(d) < 2:
        raise DegenerateDataError("correlation needs at least 2 records")
    Z = d.X - d.X.mean(axis=0)
    cov = (Z.T @ Z) / len(d)
    sd = np.sqrt(np.diag(cov))
    nonzero = sd > 0.0
    denom = np.outer(np.where(nonzero, sd, 1.0), np.where(nonzero, sd, 1.0))
    corr = cov / denom
    corr[~nonzero, :] = 0.0
    corr[:, ~nonzero] = 0.0
    np.fill_diagonal(corr, 1.0)
    corr = np.clip(corr, -1.0, 1.0)
    corr = (corr + corr.T) / 2.0  # exact symmetry despite fp rounding
    np.fill_diagonal(corr, 1.0)
    return CorrelationMatrix(names=d.schema.names, values=corr)
