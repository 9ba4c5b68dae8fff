"""Tree-based classifiers built on the shared CART engine."""

from __future__ import annotations

import time

import numpy as np

from ..flowdata import CLASS_COUNT
from .trees import (ClassificationTreeBuilder, RegressionTreeBuilder, StackedTrees,
                    Tree, tree_from_state, tree_to_state)

SPLITMIX_GAMMA = 0x9E3779B97F4A7C15
_U64 = (1 << 64) - 1


def splitmix64_sequence(seed: int, count: int) -> list[int]:
    """Deterministic per-tree seed stream from one master seed."""
    x = seed & _U64
    out = []
    for _ in range(count):
        x = (x + SPLITMIX_GAMMA) & _U64
        z = x
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _U64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _U64
        out.append(z ^ (z >> 31))
    return out


def _training_error(proba: np.ndarray, y: np.ndarray) -> float:
    return float((proba.argmax(axis=1) != y).mean())


class TreeEstimator:
    kind = "DT"

    def __init__(self, tree: Tree):
        self.tree = tree

    def proba_matrix(self, Z: np.ndarray) -> np.ndarray:
        return self.tree.leaf_values(Z)

    def proba_one(self, z: np.ndarray) -> np.ndarray:
        return self.tree.value[self.tree.apply_one(z)]

    def to_state(self) -> dict:
        return {"tree": tree_to_state(self.tree)}

    @classmethod
    def from_state(cls, state: dict) -> "TreeEstimator":
        return cls(tree_from_state(state["tree"]))


class ForestEstimator:
    kind = "RF"

    def __init__(self, trees: list[Tree]):
        self.trees = trees
        self._stacked = None

    def proba_matrix(self, Z: np.ndarray) -> np.ndarray:
        acc = np.zeros((Z.shape[0], CLASS_COUNT))
        for tree in self.trees:
            acc += tree.leaf_values(Z)
        return acc / len(self.trees)

    def proba_one(self, z: np.ndarray) -> np.ndarray:
        if self._stacked is None:
            self._stacked = StackedTrees(self.trees)
        return self._stacked.leaf_values_one(z).mean(axis=0)

    def to_state(self) -> dict:
        return {"trees": [tree_to_state(t) for t in self.trees]}

    @classmethod
    def from_state(cls, state: dict) -> "ForestEstimator":
        return cls([tree_from_state(s) for s in state["trees"]])


class AdaBoostEstimator:
    """SAMME stage-weighted stump committee.

    With zero accepted stages (possible only on degenerate data whose best
    stump is no better than chance) the vote falls back to the training
    priors so the probability contract still holds."""

    kind = "ADABOOST"

    def __init__(self, stumps: list[Tree], alphas: np.ndarray, fallback: np.ndarray):
        self.stumps = stumps
        self.alphas = np.asarray(alphas, dtype=np.float64)
        self.fallback = np.asarray(fallback, dtype=np.float64)
        self._stacked = None

    def proba_matrix(self, Z: np.ndarray) -> np.ndarray:
        if not self.stumps:
            return np.tile(self.fallback, (Z.shape[0], 1))
        votes = np.zeros((Z.shape[0], CLASS_COUNT))
        for stump, alpha in zip(self.stumps, self.alphas):
            picked = stump.leaf_values(Z).argmax(axis=1)
            votes[np.arange(Z.shape[0]), picked] += alpha
        return votes / self.alphas.sum()

    def proba_one(self, z: np.ndarray) -> np.ndarray:
        if not self.stumps:
            return self.fallback.copy()
        if self._stacked is None:
            self._stacked = StackedTrees(self.stumps)
        picked = self._stacked.leaf_values_one(z).argmax(axis=1)
        votes = np.bincount(picked, weights=self.alphas, minlength=CLASS_COUNT)
        return votes / self.alphas.sum()

    def to_state(self) -> dict:
        return {
            "stumps": [tree_to_state(t) for t in self.stumps],
            "alphas": self.alphas.copy(),
            "fallback": self.fallback.copy(),
        }

    @classmethod
    def from_state(cls, state: dict) -> "AdaBoostEstimator":
        return cls([tree_from_state(s) for s in state["stumps"]],
                   np.asarray(state["alphas"], dtype=np.float64).reshape(-1),
                   state["fallback"])


class GbtEstimator:
    """Per-class additive regression trees over softmax log-loss."""

    kind = "GBT"

    def __init__(self, init_scores: np.ndarray, trees_per_class: list[list[Tree]],
                 learning_rate: float):
        self.init_scores = np.asarray(init_scores, dtype=np.float64)
        self.trees_per_class = trees_per_class
        self.learning_rate = float(learning_rate)
        self._stacked = None

    def scores_matrix(self, Z: np.ndarray) -> np.ndarray:
        scores = np.tile(self.init_scores, (Z.shape[0], 1))
        for c in range(CLASS_COUNT):
            for tree in self.trees_per_class[c]:
                scores[:, c] += self.learning_rate * tree.leaf_values(Z)[:, 0]
        return scores

    def proba_matrix(self, Z: np.ndarray) -> np.ndarray:
        scores = self.scores_matrix(Z)
        scores -= scores.max(axis=1, keepdims=True)
        p = np.exp(scores)
        p /= p.sum(axis=1, keepdims=True)
        return p

    def proba_one(self, z: np.ndarray) -> np.ndarray:
        rounds = len(self.trees_per_class[0])
        if rounds == 0:
            s = self.init_scores.copy()
        else:
            if self._stacked is None:
                flat = [t for c in range(CLASS_COUNT) for t in self.trees_per_class[c]]
                self._stacked = StackedTrees(flat)
            leaf = self._stacked.leaf_values_one(z)[:, 0].reshape(CLASS_COUNT, rounds)
            s = self.init_scores + self.learning_rate * leaf.sum(axis=1)
        s = s - s.max()
        p = np.exp(s)
        return p / p.sum()

    def to_state(self) -> dict:
        return {
            "init_scores": self.init_scores.copy(),
            "trees": [[tree_to_state(t) for t in trees] for trees in self.trees_per_class],
            "learning_rate": self.learning_rate,
        }

    @classmethod
    def from_state(cls, state: dict) -> "GbtEstimator":
        trees = [[tree_from_state(s) for s in group] for group in state["trees"]]
        return cls(state["init_scores"], trees, state["learning_rate"])


def fit_tree(Z: np.ndarray, y: np.ndarray, hp: dict, seed: int):
    t0 = time.perf_counter()
    builder = ClassificationTreeBuilder(
        max_depth=hp["max_depth"],
        min_samples_leaf=hp["min_samples_leaf"],
        min_impurity_decrease=hp["min_impurity_decrease"],
        class_count=CLASS_COUNT,
    )
    est = TreeEstimator(builder.build(Z, y))
    loss = _training_error(est.proba_matrix(Z), y)
    log = [{"round": 0, "loss": loss,
            "elapsed_ms": (time.perf_counter() - t0) * 1000.0}]
    return est, log, True


def fit_forest(Z: np.ndarray, y: np.ndarray, hp: dict, seed: int):
    """Bagged CART trees; rejoining order is fixed, so results never depend
    on scheduling."""
    t0 = time.perf_counter()
    n, d = Z.shape
    if hp["max_features"] == "sqrt":
        max_features = max(1, int(np.sqrt(d)))
    elif hp["max_features"] == "all":
        max_features = None
    else:
        max_features = min(int(hp["max_features"]), d)
    builder = ClassificationTreeBuilder(
        max_depth=hp["max_depth"],
        min_samples_leaf=hp["min_samples_leaf"],
        min_impurity_decrease=0.0,
        max_features=max_features,
        class_count=CLASS_COUNT,
    )
    trees = []
    log = []
    for tree_seed in splitmix64_sequence(seed, hp["trees"]):
        rng = np.random.default_rng(tree_seed)
        if hp["bootstrap"]:
            counts = np.bincount(rng.integers(0, n, size=n), minlength=n)
            rows = np.flatnonzero(counts)
            tree = builder.build(Z[rows], y[rows],
                                 sample_weight=counts[rows].astype(np.float64), rng=rng)
        else:
            tree = builder.build(Z, y, rng=rng)
        trees.append(tree)
    est = ForestEstimator(trees)
    loss = _training_error(est.proba_matrix(Z), y)
    log.append({"round": len(trees) - 1, "loss": loss,
                "elapsed_ms": (time.perf_counter() - t0) * 1000.0})
    return est, log, True


def fit_adaboost(Z: np.ndarray, y: np.ndarray, hp: dict, seed: int):
    """SAMME boosting of depth-1 trees.

    Rounds whose weighted error reaches the chance bound (K-1)/K are
    rejected and stop boosting; a perfect stump is kept with a capped
    stage weight and also stops."""
    t0 = time.perf_counter()
    n = Z.shape[0]
    rounds = int(hp["rounds"])
    chance = (CLASS_COUNT - 1) / CLASS_COUNT
    alpha_cap = float(np.log(1e10))

    builder = ClassificationTreeBuilder(max_depth=1, class_count=CLASS_COUNT)
    w = np.full(n, 1.0 / n)
    stumps: list[Tree] = []
    alphas: list[float] = []
    log = []
    for r in range(rounds):
        stump = builder.build(Z, y, sample_weight=w)
        miss = stump.leaf_values(Z).argmax(axis=1) != y
        err = float(w[miss].sum())
        if err >= chance:
            break
        if err == 0.0:
            stumps.append(stump)
            alphas.append(alpha_cap)
            log.append({"round": r, "loss": err, "alpha": alpha_cap,
                        "elapsed_ms": (time.perf_counter() - t0) * 1000.0})
            break
        clamped = min(max(err, 1e-10), 1.0 - 1e-10)
        alpha = float(np.log((1.0 - clamped) / clamped) + np.log(CLASS_COUNT - 1))
        stumps.append(stump)
        alphas.append(alpha)
        log.append({"round": r, "loss": err, "alpha": alpha,
                    "elapsed_ms": (time.perf_counter() - t0) * 1000.0})
        w = w * np.exp(alpha * miss)
        w /= w.sum()

    fallback = np.bincount(y, minlength=CLASS_COUNT) / n
    est = AdaBoostEstimator(stumps, np.array(alphas), fallback)
    return est, log, True


def fit_gbt(Z: np.ndarray, y: np.ndarray, hp: dict, seed: int):
    """Second-order gradient boosting with one regression tree per class
    per round; initial scores are log class priors."""
    t0 = time.perf_counter()
    n = Z.shape[0]
    rounds = int(hp["rounds"])
    lr = float(hp["learning_rate"])

    priors = np.bincount(y, minlength=CLASS_COUNT) / n
    init_scores = np.log(priors)
    builder = RegressionTreeBuilder(max_depth=hp["max_depth"], l2=hp["l2"])
    Y = np.zeros((n, CLASS_COUNT))
    Y[np.arange(n), y] = 1.0

    scores = np.tile(init_scores, (n, 1))
    trees_per_class: list[list[Tree]] = [[] for _ in range(CLASS_COUNT)]
    log = []
    rows = np.arange(n)
    for r in range(rounds):
        shifted = scores - scores.max(axis=1, keepdims=True)
        p = np.exp(shifted)
        p /= p.sum(axis=1, keepdims=True)
        loss = float(-np.log(np.maximum(p[rows, y], 1e-300)).mean())
        log.append({"round": r, "loss": loss,
                    "elapsed_ms": (time.perf_counter() - t0) * 1000.0})
        grad = p - Y
        hess = p * (1.0 - p)
        for c in range(CLASS_COUNT):
            tree = builder.build(Z, grad[:, c], hess[:, c])
            trees_per_class[c].append(tree)
            scores[:, c] += lr * tree.leaf_values(Z)[:, 0]

    est = GbtEstimator(init_scores, trees_per_class, lr)
    p = est.proba_matrix(Z) if rounds else np.tile(priors, (n, 1))
    final_loss = float(-np.log(np.maximum(p[rows, y], 1e-300)).mean())
    log.append({"round": rounds, "loss": final_loss,
                "elapsed_ms": (time.perf_counter() - t0) * 1000.0})
    return est, log, True
