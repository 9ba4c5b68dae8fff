"""Linear models: multinomial logistic regression and a linear SVM.

Both train on the preprocessed feature space and keep a (class, feature)
weight matrix plus per-class biases. The SVM follows the classic
projected-subgradient scheme with step 1/(lambda*t); its probabilities
are a softmax over margins, documented as a calibration surrogate.
"""

from __future__ import annotations

import time

import numpy as np

from ..flowdata import CLASS_COUNT


def _softmax(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=1, keepdims=True)
    p = np.exp(shifted)
    p /= p.sum(axis=1, keepdims=True)
    return p


def _one_hot(y: np.ndarray) -> np.ndarray:
    Y = np.zeros((y.shape[0], CLASS_COUNT), dtype=np.float64)
    Y[np.arange(y.shape[0]), y] = 1.0
    return Y


def logistic_objective(W, b, X, y, l2):
    """Mean softmax cross-entropy with an L2 penalty on weights (not biases).

    Returns (loss, dW, db); exposed so the analytic gradient can be checked
    against finite differences.
    """
    n = X.shape[0]
    scores = X @ W.T + b
    shifted = scores - scores.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1))
    log_p = shifted - log_z[:, None]
    loss = float(-log_p[np.arange(n), y].mean() + 0.5 * l2 * (W * W).sum())
    G = np.exp(log_p) - _one_hot(y)
    dW = G.T @ X / n + l2 * W
    db = G.mean(axis=0)
    return loss, dW, db


class LinearScoresEstimator:
    """Shared container for models scoring via W x + b and a softmax."""

    kind = ""

    def __init__(self, W, b):
        self.W = np.asarray(W, dtype=np.float64)
        self.b = np.asarray(b, dtype=np.float64)

    def proba_matrix(self, Z: np.ndarray) -> np.ndarray:
        return _softmax(Z @ self.W.T + self.b)

    def proba_one(self, z: np.ndarray) -> np.ndarray:
        s = self.W @ z + self.b
        s -= s.max()
        p = np.exp(s)
        return p / p.sum()

    def to_state(self) -> dict:
        return {"W": self.W.copy(), "b": self.b.copy()}

    @classmethod
    def from_state(cls, state: dict):
        return cls(state["W"], state["b"])


class LogisticEstimator(LinearScoresEstimator):
    kind = "LR"


class LinearSvmEstimator(LinearScoresEstimator):
    kind = "SVM"


def fit_logistic(Z: np.ndarray, y: np.ndarray, hp: dict, seed: int):
    """Full-batch gradient descent from zero weights."""
    lr = float(hp["learning_rate"])
    l2 = float(hp["l2"])
    max_epochs = int(hp["max_epochs"])
    tol = float(hp["tol"])

    d = Z.shape[1]
    W = np.zeros((CLASS_COUNT, d))
    b = np.zeros(CLASS_COUNT)
    log = []
    converged = False
    prev_loss = None
    t0 = time.perf_counter()
    for epoch in range(max_epochs):
        loss, dW, db = logistic_objective(W, b, Z, y, l2)
        log.append({"round": epoch, "loss": loss,
                    "elapsed_ms": (time.perf_counter() - t0) * 1000.0})
        if prev_loss is not None and abs(prev_loss - loss) < tol:
            converged = True
            break
        prev_loss = loss
        W -= lr * dW
        b -= lr * db
    return LogisticEstimator(W, b), log, converged


def svm_objective(W, b, Z, signs, l2):
    """Per-class regularized hinge objective, averaged over classes.

    The bias is regularized together with the weights; leaving it free
    lets the huge early 1/(l2*t) steps freeze noise into it for good.
    """
    margins = Z @ W.T + b
    hinge = np.maximum(0.0, 1.0 - signs * margins).mean(axis=0)
    reg = 0.5 * l2 * ((W * W).sum(axis=1) + b * b)
    return float((hinge + reg).mean())


def fit_linear_svm(Z: np.ndarray, y: np.ndarray, hp: dict, seed: int):
    """One-vs-rest hinge loss by epoch-shuffled subgradient descent.

    All four binary problems share each visit to a record, so one pass
    over the permutation updates every class. The decaying step means
    the model is returned after the fixed epoch budget; the convergence
    flag reports whether the objective had stopped moving by then.
    """
    lam = float(hp["l2"])
    epochs = int(hp["epochs"])
    tol = float(hp["tol"])

    n, d = Z.shape
    signs = np.where(_one_hot(y) > 0.0, 1.0, -1.0)
    W = np.zeros((CLASS_COUNT, d))
    b = np.zeros(CLASS_COUNT)
    rng = np.random.default_rng(seed)
    log = []
    prev_obj = None
    converged = False
    t = 0
    t0 = time.perf_counter()
    for epoch in range(epochs):
        for i in rng.permutation(n):
            t += 1
            step = 1.0 / (lam * t)
            z = Z[i]
            s = signs[i]
            violated = s * (W @ z + b) < 1.0
            W *= 1.0 - step * lam
            b *= 1.0 - step * lam
            if violated.any():
                coef = step * s[violated]
                W[violated] += coef[:, None] * z
                b[violated] += coef
        obj = svm_objective(W, b, Z, signs, lam)
        log.append({"round": epoch, "loss": obj,
                    "elapsed_ms": (time.perf_counter() - t0) * 1000.0})
        if prev_obj is not None and abs(prev_obj - obj) <= tol * max(1.0, abs(prev_obj)):
            converged = True
        prev_obj = obj
    return LinearSvmEstimator(W, b), log, converged
