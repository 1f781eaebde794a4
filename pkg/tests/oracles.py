"""Independent brute-force references used by unit and acceptance tests.

These deliberately avoid the library's own geometry and math helpers so that
agreement is evidence, not tautology.
"""
import numpy as np


def dense_los_oracle(p, q, buildings, samples: int = 10_000) -> bool:
    """Line-of-sight by dense sampling along the 3-D segment p -> q.

    A sample blocks the link iff it lies strictly inside a footprint (open
    interior, so edge and corner grazing never block) at a height strictly
    below the building roof.
    """
    t = np.linspace(0.0, 1.0, samples)
    xs = p[0] + t * (q[0] - p[0])
    ys = p[1] + t * (q[1] - p[1])
    zs = p[2] + t * (q[2] - p[2])
    for b in buildings:
        inside = (
            (xs > b.min_corner[0])
            & (xs < b.max_corner[0])
            & (ys > b.min_corner[1])
            & (ys < b.max_corner[1])
            & (zs < b.height)
        )
        if bool(np.any(inside)):
            return False
    return True


def brute_force_best_split(x: np.ndarray, y: np.ndarray):
    """Exhaustive best axis-aligned split by summed squared error.

    Returns (feature, threshold, sse_after) with thresholds at midpoints of
    consecutive sorted unique feature values, ties broken by lowest feature
    index then lowest threshold. Returns None if no split separates the data.
    """
    n, d = x.shape
    best = None
    for j in range(d):
        values = np.unique(x[:, j])
        for a, b in zip(values[:-1], values[1:]):
            thr = (a + b) / 2.0
            if thr >= b:
                # midpoint rounded up to the upper value; the lower value
                # induces the same partition with a proper threshold
                thr = a
            left = x[:, j] <= thr
            right = ~left
            sse = 0.0
            for mask in (left, right):
                part = y[mask]
                sse += float(np.sum((part - part.mean(axis=0)) ** 2))
            if best is None or sse < best[2]:
                best = (j, thr, sse)
    return best
