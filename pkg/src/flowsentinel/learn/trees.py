"""CART-style trees: the shared engine under DT, RF, AdaBoost and GBT.

Split search follows one convention everywhere: candidate thresholds are
midpoints between consecutive distinct sorted values, the best split is
the one with the largest criterion gain, and ties resolve to the lowest
feature index then the lowest threshold. Trees are stored flat in arrays
(feature < 0 marks a leaf) so batch application is a few vectorized
gathers instead of per-node Python.

The builder keeps one presorted index array per feature and partitions
those arrays stably at each split, so per-level work is O(n * d) instead
of re-sorting every node.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class Tree:
    """Flat binary tree; `value` rows hold leaf payloads (class
    distribution for classifiers, a single weight for regression)."""

    feature: np.ndarray    # (n_nodes,) int64, -1 for leaves
    threshold: np.ndarray  # (n_nodes,) float64
    left: np.ndarray       # (n_nodes,) int64
    right: np.ndarray      # (n_nodes,) int64
    value: np.ndarray      # (n_nodes, value_dim) float64

    @property
    def n_nodes(self) -> int:
        return self.feature.shape[0]

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index for every row of X."""
        n = X.shape[0]
        node = np.zeros(n, dtype=np.int64)
        active = np.flatnonzero(self.feature[node] >= 0)
        while active.size:
            nd = node[active]
            go_left = X[active, self.feature[nd]] <= self.threshold[nd]
            nxt = np.where(go_left, self.left[nd], self.right[nd])
            node[active] = nxt
            active = active[self.feature[nxt] >= 0]
        return node

    def leaf_values(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    def apply_one(self, x: np.ndarray) -> int:
        node = 0
        feature = self.feature
        while feature[node] >= 0:
            node = self.left[node] if x[feature[node]] <= self.threshold[node] else self.right[node]
        return int(node)

    def max_depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=np.int64)
        for i in range(self.n_nodes):  # parents precede children (preorder build)
            if self.feature[i] >= 0:
                depth[self.left[i]] = depth[i] + 1
                depth[self.right[i]] = depth[i] + 1
        return int(depth.max()) if self.n_nodes else 0


class StackedTrees:
    """Padded (tree, node) arrays for fast single-record ensemble scoring."""

    def __init__(self, trees: list[Tree]):
        t = len(trees)
        width = max(tr.n_nodes for tr in trees)
        vdim = trees[0].value.shape[1]
        self.feature = np.full((t, width), -1, dtype=np.int64)
        self.threshold = np.zeros((t, width), dtype=np.float64)
        self.left = np.zeros((t, width), dtype=np.int64)
        self.right = np.zeros((t, width), dtype=np.int64)
        self.value = np.zeros((t, width, vdim), dtype=np.float64)
        for i, tr in enumerate(trees):
            m = tr.n_nodes
            self.feature[i, :m] = tr.feature
            self.threshold[i, :m] = tr.threshold
            self.left[i, :m] = tr.left
            self.right[i, :m] = tr.right
            self.value[i, :m] = tr.value
        self.rows = np.arange(t)

    def leaf_values_one(self, x: np.ndarray) -> np.ndarray:
        """(n_trees, value_dim) leaf payloads for one record."""
        rows = self.rows
        node = np.zeros(rows.shape[0], dtype=np.int64)
        feat = self.feature[rows, node]
        pending = feat >= 0
        while pending.any():
            go_left = x[feat] <= self.threshold[rows, node]
            nxt = np.where(go_left, self.left[rows, node], self.right[rows, node])
            node = np.where(pending, nxt, node)
            feat = self.feature[rows, node]
            pending = feat >= 0
        return self.value[rows, node]


def _partition_orders(orders, go_left_mask):
    """Split every per-feature sorted index array by mask membership.

    Boolean gathers keep each array sorted, so children inherit presorted
    orders for free."""
    left_orders, right_orders = [], []
    for ord_f in orders:
        sel = go_left_mask[ord_f]
        left_orders.append(ord_f[sel])
        right_orders.append(ord_f[~sel])
    return left_orders, right_orders


def _candidate_boundaries(vals: np.ndarray, min_leaf: int) -> np.ndarray:
    """Positions b where a split between vals[b] and vals[b+1] is legal."""
    bnd = np.flatnonzero(vals[1:] != vals[:-1])
    if min_leaf > 1:
        n = vals.shape[0]
        bnd = bnd[(bnd + 1 >= min_leaf) & (n - bnd - 1 >= min_leaf)]
    return bnd


def _midpoints(vals: np.ndarray, bnd: np.ndarray) -> np.ndarray:
    thr = (vals[bnd] + vals[bnd + 1]) / 2.0
    # adjacent floats can round the midpoint up to the right value; pin to
    # the left value so "x <= threshold" always reproduces the positional split
    return np.where(thr >= vals[bnd + 1], vals[bnd], thr)


class ClassificationTreeBuilder:
    """Weighted-Gini CART with optional per-split feature subsampling."""

    def __init__(self, max_depth=20, min_samples_leaf=1, min_impurity_decrease=0.0,
                 max_features=None, class_count=4):
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf
        self.min_impurity_decrease = min_impurity_decrease
        self.max_features = max_features
        self.class_count = class_count

    def build(self, X, y, sample_weight=None, rng=None) -> Tree:
        n, d = X.shape
        if sample_weight is None:
            sample_weight = np.ones(n, dtype=np.float64)
        stats = np.zeros((n, self.class_count), dtype=np.float64)
        stats[np.arange(n), y] = sample_weight
        Xf = np.asfortranarray(X, dtype=np.float64)
        orders = [np.argsort(Xf[:, f], kind="stable").astype(np.int64) for f in range(d)]
        if self.max_features is not None and self.max_features < d and rng is None:
            raise ValueError("feature subsampling needs an rng")

        feature, threshold, left, right, value = [], [], [], [], []
        mask = np.zeros(n, dtype=bool)

        def node_payload(w_counts):
            tot = w_counts.sum()
            if tot <= 0.0:
                return np.full(self.class_count, 1.0 / self.class_count)
            return w_counts / tot

        # work items: (orders, depth, parent_row, is_left_child)
        stack = [(orders, 0, -1, False)]
        while stack:
            node_orders, depth, parent, is_left = stack.pop()
            node_id = len(feature)
            if parent >= 0:
                (left if is_left else right)[parent] = node_id

            idx0 = node_orders[0]
            w_counts = stats[idx0].sum(axis=0)
            w_total = w_counts.sum()
            pure = (w_counts > 0.0).sum() <= 1
            parent_gini = 0.0
            if w_total > 0.0:
                parent_gini = 1.0 - float(np.square(w_counts / w_total).sum())

            best = None  # (decrease, feat, threshold, boundary_pos)
            if depth < self.max_depth and idx0.shape[0] >= 2 * self.min_samples_leaf and not pure:
                if self.max_features is not None and self.max_features < d:
                    cand = np.sort(rng.choice(d, size=self.max_features, replace=False))
                else:
                    cand = range(d)
                for f in cand:
                    idx = node_orders[f]
                    vals = Xf[idx, f]
                    bnd = _candidate_boundaries(vals, self.min_samples_leaf)
                    if bnd.size == 0:
                        continue
                    cum = np.cumsum(stats[idx], axis=0)
                    wl = cum[bnd]
                    wr = w_counts - wl
                    sl = wl.sum(axis=1)
                    sr = wr.sum(axis=1)
                    with np.errstate(divide="ignore", invalid="ignore"):
                        gl = 1.0 - np.square(wl).sum(axis=1) / np.square(sl)
                        gr = 1.0 - np.square(wr).sum(axis=1) / np.square(sr)
                    gl = np.where(sl > 0.0, gl, 0.0)
                    gr = np.where(sr > 0.0, gr, 0.0)
                    dec = parent_gini - (sl * gl + sr * gr) / w_total
                    j = int(np.argmax(dec))  # first max: lowest threshold wins
                    if dec[j] > 0.0 and dec[j] >= self.min_impurity_decrease:
                        if best is None or dec[j] > best[0]:
                            thr = _midpoints(vals, bnd[j: j + 1])[0]
                            best = (float(dec[j]), int(f), float(thr), int(bnd[j]))

            if best is None:
                feature.append(-1)
                threshold.append(0.0)
                left.append(-1)
                right.append(-1)
                value.append(node_payload(w_counts))
                continue

            _, f, thr, b = best
            feature.append(f)
            threshold.append(thr)
            left.append(-1)
            right.append(-1)
            value.append(node_payload(w_counts))

            left_ids = node_orders[f][: b + 1]
            mask[left_ids] = True
            lo, ro = _partition_orders(node_orders, mask)
            mask[left_ids] = False
            stack.append((ro, depth + 1, node_id, False))
            stack.append((lo, depth + 1, node_id, True))

        return Tree(
            feature=np.array(feature, dtype=np.int64),
            threshold=np.array(threshold, dtype=np.float64),
            left=np.array(left, dtype=np.int64),
            right=np.array(right, dtype=np.int64),
            value=np.array(value, dtype=np.float64),
        )


class RegressionTreeBuilder:
    """Second-order (gradient/hessian) regression tree for boosting.

    Split gain and leaf weights follow the usual second-order expansion
    with an L2 regularizer on leaf weights:

        gain = [GL^2/(HL+l2) + GR^2/(HR+l2) - G^2/(H+l2)] / 2
        leaf = -G / (H + l2)
    """

    def __init__(self, max_depth=6, min_samples_leaf=1, l2=1.0):
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf
        self.l2 = l2

    def build(self, X, grad, hess) -> Tree:
        n, d = X.shape
        Xf = np.asfortranarray(X, dtype=np.float64)
        orders = [np.argsort(Xf[:, f], kind="stable").astype(np.int64) for f in range(d)]
        gh = np.column_stack([grad, hess])

        feature, threshold, left, right, value = [], [], [], [], []
        mask = np.zeros(n, dtype=bool)
        lam = self.l2

        stack = [(orders, 0, -1, False)]
        while stack:
            node_orders, depth, parent, is_left = stack.pop()
            node_id = len(feature)
            if parent >= 0:
                (left if is_left else right)[parent] = node_id

            idx0 = node_orders[0]
            G, H = gh[idx0].sum(axis=0)
            parent_score = G * G / (H + lam)

            best = None
            if depth < self.max_depth and idx0.shape[0] >= 2 * self.min_samples_leaf:
                for f in range(d):
                    idx = node_orders[f]
                    vals = Xf[idx, f]
                    bnd = _candidate_boundaries(vals, self.min_samples_leaf)
                    if bnd.size == 0:
                        continue
                    cum = np.cumsum(gh[idx], axis=0)
                    GL = cum[bnd, 0]
                    HL = cum[bnd, 1]
                    GR = G - GL
                    HR = H - HL
                    gain = 0.5 * (GL * GL / (HL + lam) + GR * GR / (HR + lam) - parent_score)
                    j = int(np.argmax(gain))
                    if gain[j] > 0.0 and (best is None or gain[j] > best[0]):
                        thr = _midpoints(vals, bnd[j: j + 1])[0]
                        best = (float(gain[j]), int(f), float(thr), int(bnd[j]))

            if best is None:
                feature.append(-1)
                threshold.append(0.0)
                left.append(-1)
                right.append(-1)
                value.append([-G / (H + lam)])
                continue

            _, f, thr, b = best
            feature.append(f)
            threshold.append(thr)
            left.append(-1)
            right.append(-1)
            value.append([0.0])

            left_ids = node_orders[f][: b + 1]
            mask[left_ids] = True
            lo, ro = _partition_orders(node_orders, mask)
            mask[left_ids] = False
            stack.append((ro, depth + 1, node_id, False))
            stack.append((lo, depth + 1, node_id, True))

        return Tree(
            feature=np.array(feature, dtype=np.int64),
            threshold=np.array(threshold, dtype=np.float64),
            left=np.array(left, dtype=np.int64),
            right=np.array(right, dtype=np.int64),
            value=np.array(value, dtype=np.float64),
        )


def gini_impurity(counts) -> float:
    """Gini impurity of a class-count vector; 0 for an empty vector."""
    counts = np.asarray(counts, dtype=np.float64)
    total = counts.sum()
    if total <= 0:
        return 0.0
    return float(1.0 - np.square(counts / total).sum())


def tree_to_state(tree: Tree) -> dict:
    return {
        "feature": tree.feature.astype(np.float64),
        "threshold": tree.threshold.copy(),
        "left": tree.left.astype(np.float64),
        "right": tree.right.astype(np.float64),
        "value": tree.value.copy(),
    }


def tree_from_state(state: dict) -> Tree:
    value = np.asarray(state["value"], dtype=np.float64)
    if value.ndim == 1:  # single-node tree round-trips as a flat row
        value = value.reshape(1, -1)
    return Tree(
        feature=np.asarray(state["feature"]).astype(np.int64),
        threshold=np.asarray(state["threshold"], dtype=np.float64).reshape(-1),
        left=np.asarray(state["left"]).astype(np.int64),
        right=np.asarray(state["right"]).astype(np.int64),
        value=value,
    )
