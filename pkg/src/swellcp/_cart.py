"""Compiled kernels for greedy CART regression trees.

Trees are flat arrays in preorder. Leaves have ``feature == -1``; internal
nodes route a row left iff ``x[feature] <= threshold``.
"""

import numpy as np
from numba import njit

LEAF = -1


@njit(cache=True, nogil=True)
def _best_split(X, y, idx, start, end, candidates, min_samples_leaf):
    m = end - start
    mean = 0.0
    for i in range(start, end):
        mean += y[idx[i]]
    mean /= m
    sst = 0.0
    for i in range(start, end):
        d = y[idx[i]] - mean
        sst += d * d
    # SSE(children) = sst - gain, gain = S_left^2 * m / (n_left * n_right) on centred targets
    tol = 1e-12 * sst
    best_gain = -1.0
    best_feature = -1
    best_threshold = 0.0
    vals = np.empty(m)
    cen = np.empty(m)
    for f in candidates:
        for i in range(m):
            vals[i] = X[idx[start + i], f]
            cen[i] = y[idx[start + i]] - mean
        order = np.argsort(vals, kind="mergesort")
        s_left = 0.0
        for i in range(m - 1):
            s_left += cen[order[i]]
            n_left = i + 1
            n_right = m - n_left
            if n_left < min_samples_leaf:
                continue
            if n_right < min_samples_leaf:
                break
            a = vals[order[i]]
            b = vals[order[i + 1]]
            if not a < b:
                continue
            gain = s_left * s_left * m / (n_left * n_right)
            if best_feature == -1 or gain > best_gain + tol:
                best_gain = gain
                best_feature = f
                thr = 0.5 * (a + b)
                if not thr < b:
                    thr = a
                best_threshold = thr
    return best_feature, best_threshold, mean


@njit(cache=True, nogil=True)
def build_tree(X, y, keys, max_features, min_samples_leaf, max_depth):
    """Grow one tree on rows ``X, y``.

    ``keys[node]`` holds one uniform draw per column; the node (in preorder)
    considers the ``max_features`` columns with the smallest keys.
    ``max_depth < 0`` means unlimited.
    """
    n, p = X.shape
    cap = 2 * n - 1
    feature = np.full(cap, LEAF, dtype=np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    value = np.zeros(cap)

    idx = np.arange(n)
    buf = np.empty(n, dtype=np.int64)
    # stack rows: start, end, depth, parent, is_left
    stack = np.empty((cap, 5), dtype=np.int64)
    top = 0
    stack[0, 0] = 0
    stack[0, 1] = n
    stack[0, 2] = 0
    stack[0, 3] = -1
    stack[0, 4] = 0
    top = 1
    count = 0
    while top > 0:
        top -= 1
        start = stack[top, 0]
        end = stack[top, 1]
        depth = stack[top, 2]
        parent = stack[top, 3]
        node = count
        count += 1
        if parent >= 0:
            if stack[top, 4] == 1:
                left[parent] = node
            else:
                right[parent] = node

        m = end - start
        lo = y[idx[start]]
        hi = lo
        total = 0.0
        for i in range(start, end):
            v = y[idx[i]]
            total += v
            if v < lo:
                lo = v
            if v > hi:
                hi = v
        value[node] = total / m

        if m < 2 * min_samples_leaf or lo == hi or (max_depth >= 0 and depth >= max_depth):
            continue

        candidates = np.sort(np.argsort(keys[node], kind="mergesort")[:max_features])
        f, thr, mean = _best_split(X, y, idx, start, end, candidates, min_samples_leaf)
        value[node] = mean
        if f < 0:
            continue
        feature[node] = f
        threshold[node] = thr

        # stable partition of idx[start:end]
        nl = 0
        for i in range(start, end):
            if X[idx[i], f] <= thr:
                buf[nl] = idx[i]
                nl += 1
        k = nl
        for i in range(start, end):
            if not X[idx[i], f] <= thr:
                buf[k] = idx[i]
                k += 1
        for i in range(m):
            idx[start + i] = buf[i]

        # right pushed first so the left child is numbered next
        stack[top, 0] = start + nl
        stack[top, 1] = end
        stack[top, 2] = depth + 1
        stack[top, 3] = node
        stack[top, 4] = 0
        top += 1
        stack[top, 0] = start
        stack[top, 1] = start + nl
        stack[top, 2] = depth + 1
        stack[top, 3] = node
        stack[top, 4] = 1
        top += 1

    return feature[:count], threshold[:count], left[:count], right[:count], value[:count]


@njit(cache=True, nogil=True)
def predict_trees(feature, threshold, left, right, value, offsets, X):
    """Per-tree predictions, shape ``(n_rows, n_trees)``, for trees packed back to back."""
    n = X.shape[0]
    n_trees = offsets.shape[0] - 1
    out = np.empty((n, n_trees))
    for t in range(n_trees):
        base = offsets[t]
        for r in range(n):
            node = 0
            while feature[base + node] != LEAF:
                if X[r, feature[base + node]] <= threshold[base + node]:
                    node = left[base + node]
                else:
                    node = right[base + node]
            out[r, t] = value[base + node]
    return out
