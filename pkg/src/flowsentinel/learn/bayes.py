"""Gaussian naive Bayes with per-class feature Gaussians."""

from __future__ import annotations

import time

import numpy as np

from ..flowdata import CLASS_COUNT

LOG_2PI = float(np.log(2.0 * np.pi))


class GaussianNbEstimator:
    """Class priors plus per-class per-feature (mean, variance) pairs.

    Classes absent from the training data keep a -inf log prior and
    placeholder Gaussians, so their posterior is exactly zero."""

    kind = "NB"

    def __init__(self, log_priors, means, variances):
        self.log_priors = np.asarray(log_priors, dtype=np.float64)
        self.means = np.asarray(means, dtype=np.float64)
        self.variances = np.asarray(variances, dtype=np.float64)

    def _joint_log_likelihood(self, Z: np.ndarray) -> np.ndarray:
        n = Z.shape[0]
        jll = np.empty((n, CLASS_COUNT), dtype=np.float64)
        for c in range(CLASS_COUNT):
            diff = Z - self.means[c]
            quad = (diff * diff / self.variances[c]).sum(axis=1)
            logdet = (LOG_2PI + np.log(self.variances[c])).sum()
            jll[:, c] = self.log_priors[c] - 0.5 * (logdet + quad)
        return jll

    def proba_matrix(self, Z: np.ndarray) -> np.ndarray:
        jll = self._joint_log_likelihood(Z)
        top = jll.max(axis=1, keepdims=True)
        # top is finite because at least one class was present at fit time
        p = np.exp(jll - top)
        p /= p.sum(axis=1, keepdims=True)
        return p

    def proba_one(self, z: np.ndarray) -> np.ndarray:
        return self.proba_matrix(z.reshape(1, -1))[0]

    def to_state(self) -> dict:
        return {
            "log_priors": self.log_priors.copy(),
            "means": self.means.copy(),
            "variances": self.variances.copy(),
        }

    @classmethod
    def from_state(cls, state: dict) -> "GaussianNbEstimator":
        return cls(state["log_priors"], state["means"], state["variances"])


def fit_gaussian_nb(Z: np.ndarray, y: np.ndarray, hp: dict, seed: int):
    """Closed-form Gaussian fit; variance floor keeps constant features alive."""
    t0 = time.perf_counter()
    n, d = Z.shape
    smoothing = float(hp["var_smoothing"])
    global_var = Z.var(axis=0)
    floor = smoothing * float(global_var.max()) if global_var.max() > 0.0 else smoothing

    log_priors = np.full(CLASS_COUNT, -np.inf)
    means = np.zeros((CLASS_COUNT, d))
    variances = np.ones((CLASS_COUNT, d))
    for c in range(CLASS_COUNT):
        rows = y == c
        m = int(rows.sum())
        if m == 0:
            continue
        log_priors[c] = np.log(m / n)
        means[c] = Z[rows].mean(axis=0)
        variances[c] = np.maximum(Z[rows].var(axis=0), floor)

    est = GaussianNbEstimator(log_priors, means, variances)
    elapsed_ms = (time.perf_counter() - t0) * 1000.0
    p = est.proba_matrix(Z)
    loss = float(-np.log(np.maximum(p[np.arange(n), y], 1e-300)).mean())
    log = [{"round": 0, "loss": loss, "elapsed_ms": elapsed_ms}]
    return est, log, True
