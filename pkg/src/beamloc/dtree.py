"""CART-style regression tree with a 2-D output.

Greedy binary splits minimizing the children's summed squared label error
(equivalent to maximizing the reduction in summed per-output variance),
thresholds at midpoints between consecutive sorted unique feature values,
ties broken by lowest feature index then lowest threshold. Leaves predict the
mean label of their members. Fit and predict are iterative, so tree depth is
never limited by the interpreter stack.
"""
from __future__ import annotations

import json
import sys
from dataclasses import dataclass

import numpy as np


@dataclass
class TreeNode:
    """Internal node (feature_index/threshold/left/right) or leaf (value)."""

    feature_index: int | None = None
    threshold: float | None = None
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    value: np.ndarray | None = None
    count: int = 0
    n_features: int | None = None  # set on the root at fit time

    @property
    def is_leaf(self) -> bool:
        return self.left is None


@dataclass(frozen=True)
class TreeConfig:
    max_depth: int | None = None
    min_samples_leaf: int = 1
    min_samples_split: int = 2

    def __post_init__(self):
        if self.min_samples_split < 2:
            raise ValueError("min_samples_split must be >= 2")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")
        if self.max_depth is not None and self.max_depth < 0:
            raise ValueError("max_depth must be >= 0")


def _partition_sse(x_col: np.ndarray, y: np.ndarray, threshold: float) -> float:
    """Children SSE computed from partition means in original row order.

    This is the canonical value used for final comparisons: identical
    partitions reached through different features produce bitwise-identical
    results here, so the lowest-(feature, threshold) tie-break is exact.
    """
    mask = x_col <= threshold
    total = 0.0
    for side in (mask, ~mask):
        part = y[side]
        if len(part) == 0:
            continue
        total += float(((part - part.mean(axis=0)) ** 2).sum())
    return total


def _best_split(x: np.ndarray, y: np.ndarray, min_leaf: int):
    """Lowest-children-SSE split, or None if no candidate separates the node.

    A cumulative-sum scan ranks the candidates per feature; the few within
    rounding distance of the per-feature minimum are re-evaluated canonically
    before the cross-feature comparison, keeping ties deterministic (lowest
    feature index, then lowest threshold).
    """
    n = len(x)
    total_sum = y.sum(axis=0)
    total_sq = float((y * y).sum())
    tie_window = 1e-9 * max(1.0, total_sq)
    best = None
    for j in range(x.shape[1]):
        order = np.argsort(x[:, j], kind="stable")
        xv = x[order, j]
        yv = y[order]
        boundaries = np.flatnonzero(xv[1:] != xv[:-1])
        if len(boundaries) == 0:
            continue
        n_left = boundaries + 1
        n_right = n - n_left
        valid = (n_left >= min_leaf) & (n_right >= min_leaf)
        if not np.any(valid):
            continue
        boundaries = boundaries[valid]
        n_left = n_left[valid]
        n_right = n_right[valid]
        cum_sum = np.cumsum(yv, axis=0)
        cum_sq = np.cumsum((yv * yv).sum(axis=1))
        sum_left = cum_sum[boundaries]
        sq_left = cum_sq[boundaries]
        sse_left = sq_left - (sum_left * sum_left).sum(axis=1) / n_left
        sum_right = total_sum - sum_left
        sse_right = (total_sq - sq_left) - (sum_right * sum_right).sum(axis=1) / n_right
        scan = np.maximum(sse_left, 0.0) + np.maximum(sse_right, 0.0)

        near = np.flatnonzero(scan <= scan.min() + tie_window)
        feature_best = None
        for k in near:
            lower = xv[boundaries[k]]
            upper = xv[boundaries[k] + 1]
            threshold = (lower + upper) / 2.0
            # the midpoint of two near-adjacent floats can round up to the
            # upper value; fall back to the lower one, same partition
            if threshold >= upper:
                threshold = lower
            children = _partition_sse(x[:, j], y, threshold)
            if feature_best is None or children < feature_best[0]:
                feature_best = (children, float(threshold))
        if best is None or feature_best[0] < best[0]:
            best = (feature_best[0], j, feature_best[1])
    if best is None:
        return None
    return best[1], best[2]


def fit_tree(features: np.ndarray, labels: np.ndarray, config: TreeConfig | None = None) -> TreeNode:
    """Grow the tree greedily until nodes are pure or constraints stop them.

    A node with remaining label error accepts the best split even when the
    immediate error reduction is zero, so distinct feature rows always reach
    zero training error at unlimited depth.
    """
    config = config or TreeConfig()
    features = np.atleast_2d(np.asarray(features, dtype=float))
    labels = np.atleast_2d(np.asarray(labels, dtype=float))
    if len(features) == 0:
        raise ValueError("empty training set")
    if len(features) != len(labels):
        raise ValueError("features and labels row counts differ")

    root = TreeNode(n_features=features.shape[1])
    stack = [(root, np.arange(len(features)), 0)]
    while stack:
        node, idx, depth = stack.pop()
        y = labels[idx]
        mean = y.mean(axis=0)
        node.count = len(idx)
        sse = float(((y - mean) ** 2).sum())
        depth_ok = config.max_depth is None or depth < config.max_depth
        split = None
        if sse > 0.0 and depth_ok and len(idx) >= config.min_samples_split:
            split = _best_split(features[idx], y, config.min_samples_leaf)
        if split is None:
            node.value = mean
            continue
        node.feature_index, node.threshold = split
        go_left = features[idx, node.feature_index] <= node.threshold
        node.left = TreeNode()
        node.right = TreeNode()
        stack.append((node.left, idx[go_left], depth + 1))
        stack.append((node.right, idx[~go_left], depth + 1))
    return root


def predict_tree(tree: TreeNode, features: np.ndarray) -> np.ndarray:
    """Route rows left iff feature <= threshold; return leaf means, (n, 2)."""
    features = np.atleast_2d(np.asarray(features, dtype=float))
    if tree.n_features is not None and features.shape[1] != tree.n_features:
        raise ValueError(f"expected {tree.n_features} feature columns, got {features.shape[1]}")
    out = np.empty((len(features), len(tree.value) if tree.is_leaf else 2))
    stack = [(tree, np.arange(len(features)))]
    while stack:
        node, rows = stack.pop()
        if len(rows) == 0:
            continue
        if node.is_leaf:
            out[rows] = node.value
            continue
        go_left = features[rows, node.feature_index] <= node.threshold
        stack.append((node.left, rows[go_left]))
        stack.append((node.right, rows[~go_left]))
    return out


def tree_depth(tree: TreeNode) -> int:
    depth = 0
    stack = [(tree, 0)]
    while stack:
        node, d = stack.pop()
        depth = max(depth, d)
        if not node.is_leaf:
            stack.append((node.left, d + 1))
            stack.append((node.right, d + 1))
    return depth


def leaf_nodes(tree: TreeNode) -> list[TreeNode]:
    leaves = []
    stack = [tree]
    while stack:
        node = stack.pop()
        if node.is_leaf:
            leaves.append(node)
        else:
            stack.extend((node.left, node.right))
    return leaves


def tree_to_dict(tree: TreeNode) -> dict:
    """Nested plain-dict form of the tree, built without recursion."""
    rendered: dict[int, dict] = {}
    order = []
    stack = [tree]
    while stack:
        node = stack.pop()
        order.append(node)
        if not node.is_leaf:
            stack.extend((node.left, node.right))
    for node in reversed(order):
        if node.is_leaf:
            rendered[id(node)] = {"value": [float(v) for v in node.value], "count": node.count}
        else:
            rendered[id(node)] = {
                "feature_index": node.feature_index,
                "threshold": node.threshold,
                "count": node.count,
                "left": rendered[id(node.left)],
                "right": rendered[id(node.right)],
            }
    return rendered[id(tree)]


def _dict_to_tree(doc: dict) -> TreeNode:
    root = TreeNode()
    stack = [(root, doc)]
    while stack:
        node, entry = stack.pop()
        node.count = entry["count"]
        if "value" in entry:
            node.value = np.asarray(entry["value"], dtype=float)
            continue
        node.feature_index = entry["feature_index"]
        node.threshold = entry["threshold"]
        node.left = TreeNode()
        node.right = TreeNode()
        stack.append((node.left, entry["left"]))
        stack.append((node.right, entry["right"]))
    return root


def save_tree(tree: TreeNode, path: str) -> None:
    doc = {"n_features": tree.n_features, "root": tree_to_dict(tree)}
    # the json encoder recurses once per tree level
    limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(limit, tree_depth(tree) * 4 + 1000))
    try:
        with open(path, "w") as fh:
            json.dump(doc, fh, sort_keys=True)
    finally:
        sys.setrecursionlimit(limit)


def load_tree(path: str) -> TreeNode:
    with open(path) as fh:
        doc = json.load(fh)
    tree = _dict_to_tree(doc["root"])
    tree.n_features = doc["n_features"]
    return tree
