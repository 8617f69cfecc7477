"""Single CART-style decision tree, grown by a numba kernel.

Splits minimize weighted Gini impurity over candidate thresholds placed
at midpoints between consecutive distinct sorted feature values, with
ties broken by lowest feature index then lowest threshold. Feature
subsets per node come from an in-kernel xorshift64* stream seeded per
tree, so growth is deterministic and independent of scheduling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit


@dataclass
class Tree:
    """Flat node arrays; feature[i] < 0 marks node i as a leaf."""

    feature: np.ndarray  # int32
    threshold: np.ndarray  # float64
    left: np.ndarray  # int32
    right: np.ndarray  # int32
    count0: np.ndarray  # int64, class-0 training samples in the node
    count1: np.ndarray  # int64

    @property
    def n_nodes(self) -> int:
        return self.feature.size

    def max_depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=np.int64)
        out = 0
        for i in range(self.n_nodes):
            if self.feature[i] >= 0:
                depth[self.left[i]] = depth[i] + 1
                depth[self.right[i]] = depth[i] + 1
            out = max(out, int(depth[i]))
        return out


@njit(cache=True, nogil=True, inline="always")
def _rand_below(state, k):
    x = state[0]
    x ^= x >> np.uint64(12)
    x ^= x << np.uint64(25)
    x ^= x >> np.uint64(27)
    state[0] = x
    return int((x * np.uint64(0x2545F4914F6CDD1D)) % np.uint64(k))


@njit(cache=True, nogil=True)
def _grow(X, y, samples, max_depth, min_leaf, n_feats, seed):
    n = samples.size
    d = X.shape[1]
    max_nodes = 2 * max(1, n // min_leaf) + 3

    feature = np.full(max_nodes, -1, np.int32)
    threshold = np.zeros(max_nodes, np.float64)
    left = np.full(max_nodes, -1, np.int32)
    right = np.full(max_nodes, -1, np.int32)
    count0 = np.zeros(max_nodes, np.int64)
    count1 = np.zeros(max_nodes, np.int64)

    st_node = np.empty(max_nodes, np.int64)
    st_start = np.empty(max_nodes, np.int64)
    st_end = np.empty(max_nodes, np.int64)
    st_depth = np.empty(max_nodes, np.int64)

    work = samples.astype(np.int64)
    scratch = np.empty(n, np.int64)
    vals = np.empty(n, np.float64)
    feat_buf = np.empty(d, np.int64)
    state = np.empty(1, np.uint64)
    state[0] = np.uint64(seed) | np.uint64(1)

    n_nodes = 1
    sp = 0
    st_node[0] = 0
    st_start[0] = 0
    st_end[0] = n
    st_depth[0] = 0
    sp = 1

    while sp > 0:
        sp -= 1
        node = st_node[sp]
        start = st_start[sp]
        end = st_end[sp]
        depth = st_depth[sp]
        m = end - start

        pos = 0
        for i in range(start, end):
            pos += y[work[i]]
        neg = m - pos
        count0[node] = neg
        count1[node] = pos

        if pos == 0 or neg == 0 or depth >= max_depth or m < 2 * min_leaf:
            continue

        parent_score = (float(neg) * neg + float(pos) * pos) / m

        for i in range(d):
            feat_buf[i] = i
        k = n_feats if n_feats < d else d

        best_score = parent_score
        best_f = -1
        best_thr = 0.0
        best_nl = 0

        for j in range(k):
            r = j + _rand_below(state, d - j)
            tmp = feat_buf[j]
            feat_buf[j] = feat_buf[r]
            feat_buf[r] = tmp
            f = feat_buf[j]

            for i in range(m):
                vals[i] = X[work[start + i], f]
            order = np.argsort(vals[:m])

            cl1 = 0
            for i in range(m - 1):
                oi = order[i]
                cl1 += y[work[start + oi]]
                v = vals[oi]
                vnext = vals[order[i + 1]]
                if v == vnext:
                    continue
                nl = i + 1
                nr = m - nl
                if nl < min_leaf or nr < min_leaf:
                    continue
                l1 = cl1
                l0 = nl - l1
                r1 = pos - l1
                r0 = nr - r1
                score = (float(l0) * l0 + float(l1) * l1) / nl + (float(r0) * r0 + float(r1) * r1) / nr
                thr = 0.5 * (v + vnext)
                if thr == vnext:  # midpoint rounded up to the upper value
                    thr = v
                better = False
                if score > best_score:
                    better = True
                elif score == best_score and best_f >= 0:
                    if f < best_f:
                        better = True
                    elif f == best_f and thr < best_thr:
                        better = True
                if better:
                    best_score = score
                    best_f = f
                    best_thr = thr
                    best_nl = nl

        if best_f < 0:
            continue

        li = start
        ri = 0
        for i in range(start, end):
            idx = work[i]
            if X[idx, best_f] <= best_thr:
                work[li] = idx
                li += 1
            else:
                scratch[ri] = idx
                ri += 1
        for i in range(ri):
            work[li + i] = scratch[i]
        mid = start + best_nl

        left_id = n_nodes
        right_id = n_nodes + 1
        n_nodes += 2
        feature[node] = best_f
        threshold[node] = best_thr
        left[node] = left_id
        right[node] = right_id

        st_node[sp] = right_id
        st_start[sp] = mid
        st_end[sp] = end
        st_depth[sp] = depth + 1
        sp += 1
        st_node[sp] = left_id
        st_start[sp] = start
        st_end[sp] = mid
        st_depth[sp] = depth + 1
        sp += 1

    return feature[:n_nodes], threshold[:n_nodes], left[:n_nodes], right[:n_nodes], count0[:n_nodes], count1[:n_nodes]


@njit(cache=True, nogil=True)
def _leaf_fractions(feature, threshold, left, right, count0, count1, X):
    n = X.shape[0]
    out = np.empty(n, np.float64)
    for i in range(n):
        node = 0
        while feature[node] >= 0:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = count1[node] / (count0[node] + count1[node])
    return out


def fit_tree(
    X: np.ndarray,
    y: np.ndarray,
    sample_indices: np.ndarray,
    max_depth: int,
    min_samples_leaf: int,
    features_per_split: int,
    seed: int,
) -> Tree:
    """Grow one tree on X[sample_indices] (duplicates allowed for bootstraps)."""
    Xc = np.ascontiguousarray(X, dtype=np.float64)
    yc = np.ascontiguousarray(y, dtype=np.int64)
    idx = np.ascontiguousarray(sample_indices, dtype=np.int64)
    parts = _grow(Xc, yc, idx, max_depth, min_samples_leaf, features_per_split, np.uint64(seed & 0xFFFFFFFFFFFFFFFF))
    return Tree(*[p.copy() for p in parts])


def tree_leaf_fractions(tree: Tree, X: np.ndarray) -> np.ndarray:
    """Positive-class training fraction of the leaf each row lands in."""
    Xc = np.ascontiguousarray(X, dtype=np.float64)
    return _leaf_fractions(
        tree.feature, tree.threshold, tree.left, tree.right, tree.count0, tree.count1, Xc
    )
