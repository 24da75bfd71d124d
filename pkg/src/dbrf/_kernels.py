"""Compiled inner loops: split search, routing, voting and leaf scoring.

Everything here works on plain arrays so the functions can be called with the
GIL released from worker threads.
"""
import math

import numpy as np
from numba import njit

GINI = 0
ENTROPY = 1

METRIC_SUPP = 0
METRIC_CONF = 1
METRIC_F1 = 2
METRIC_GINI = 3
METRIC_ENTROPY = 4

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)


@njit(cache=True, nogil=True)
def _mix(x):
    x = (x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    x = (x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return x ^ (x >> np.uint64(31))


@njit(cache=True, nogil=True)
def _xlogx(v):
    return v * math.log(v) if v > 0 else 0.0


@njit(cache=True, nogil=True)
def build_tree(Xr, vals, voff, y, samples, n_classes, criterion, max_depth,
               min_leaf, min_split, mtry, seed):
    """Grow one CART tree on ``samples`` (row positions, duplicates allowed).

    ``Xr`` is the (n_features, n_rows) matrix of per-feature value ranks and
    ``vals[voff[f]:voff[f+1]]`` the sorted distinct values of feature ``f``.
    Returns flat node arrays; node ``i``'s children always have larger indices.
    """
    n_feat = Xr.shape[0]
    ns = samples.shape[0]
    C = n_classes
    cap = 2 * ns + 1
    feature = np.full(cap, -1, np.int32)
    threshold = np.zeros(cap, np.float64)
    left = np.full(cap, -1, np.int32)
    right = np.full(cap, -1, np.int32)
    leaf_of = np.full(cap, -1, np.int32)
    leaf_counts = np.zeros((ns + 1, C), np.int64)

    # bootstrap duplicates collapse into (row, weight) pairs; every count below is weighted
    srt_s = np.sort(samples)
    samp = np.empty(ns, np.int64)
    wts = np.empty(ns, np.int64)
    nu = 0
    for i in range(ns):
        if nu > 0 and samp[nu - 1] == srt_s[i]:
            wts[nu - 1] += 1
        else:
            samp[nu] = srt_s[i]
            wts[nu] = 1
            nu += 1
    wb = np.int64(ns + 1)
    max_u = 1
    for f in range(n_feat):
        u = voff[f + 1] - voff[f]
        if u > max_u:
            max_u = u
    hist = np.zeros(max_u * C, np.int64)
    bin_tot = np.zeros(max_u, np.int64)
    keys = np.empty(ns, np.int64)
    perm = np.arange(n_feat)
    cnt = np.zeros(C, np.int64)
    lc = np.zeros(C, np.int64)

    st_node = np.empty(cap, np.int64)
    st_start = np.empty(cap, np.int64)
    st_end = np.empty(cap, np.int64)
    st_depth = np.empty(cap, np.int64)
    sp = 0
    st_node[0] = 0
    st_start[0] = 0
    st_end[0] = nu
    st_depth[0] = 0
    sp = 1
    n_nodes = 1
    n_leaves = 0

    while sp > 0:
        sp -= 1
        node = st_node[sp]
        start = st_start[sp]
        end = st_end[sp]
        depth = st_depth[sp]

        cnt[:] = 0
        for i in range(start, end):
            cnt[y[samp[i]]] += wts[i]
        cmax = 0
        n = 0
        for c in range(C):
            n += cnt[c]
            if cnt[c] > cmax:
                cmax = cnt[c]

        best_f = -1
        best_r1 = 0
        best_r2 = 0
        splittable = (n >= min_split and n >= 2 * min_leaf and cmax < n
                      and (max_depth < 0 or depth < max_depth))
        if splittable:
            if criterion == GINI:
                sq = 0.0
                for c in range(C):
                    sq += cnt[c] * cnt[c]
                parent = sq / n
            else:
                s = 0.0
                for c in range(C):
                    s += _xlogx(cnt[c])
                parent = s - _xlogx(n)
            best = parent + 1e-12 * n

            # node-local RNG: depends only on (tree seed, node ordinal)
            state = _mix(seed ^ _mix(np.uint64(node) + _GOLDEN))
            for i in range(n_feat):
                perm[i] = i
            visited = 0
            for i in range(n_feat):
                if visited >= mtry:
                    break
                state += _GOLDEN
                j = i + np.int64(_mix(state) % np.uint64(n_feat - i))
                f = perm[j]
                perm[j] = perm[i]
                perm[i] = f

                lc[:] = 0
                nl = 0
                sql = 0.0
                sqr = 0.0
                sl = 0.0
                sr = 0.0
                if criterion == GINI:
                    for c in range(C):
                        sqr += cnt[c] * cnt[c]
                else:
                    for c in range(C):
                        sr += _xlogx(cnt[c])

                rmin = Xr[f, samp[start]]
                rmax = rmin
                for k in range(start, end):
                    r = Xr[f, samp[k]]
                    if r < rmin:
                        rmin = r
                    elif r > rmax:
                        rmax = r
                if rmin == rmax:
                    continue
                visited += 1

                span = rmax - rmin + 1
                if span * C <= 8 * n:
                    # counting pass over the node's rank range
                    for b in range(span):
                        bin_tot[b] = 0
                    for b in range(span * C):
                        hist[b] = 0
                    for k in range(start, end):
                        s_ = samp[k]
                        b = Xr[f, s_] - rmin
                        hist[b * C + y[s_]] += wts[k]
                        bin_tot[b] += wts[k]
                    prev = -1
                    for b in range(span):
                        if bin_tot[b] == 0:
                            continue
                        if prev >= 0 and nl >= min_leaf and n - nl >= min_leaf:
                            nr = n - nl
                            if criterion == GINI:
                                score = sql / nl + sqr / nr
                            else:
                                score = sl + sr - _xlogx(nl) - _xlogx(nr)
                            if score > best:
                                best = score
                                best_f = f
                                best_r1 = prev + rmin
                                best_r2 = b + rmin
                        for c in range(C):
                            h = hist[b * C + c]
                            if h == 0:
                                continue
                            a = lc[c]
                            r_ = cnt[c] - a
                            if criterion == GINI:
                                sql += (a + h) * (a + h) - a * a
                                sqr += (r_ - h) * (r_ - h) - r_ * r_
                            else:
                                sl += _xlogx(a + h) - _xlogx(a)
                                sr += _xlogx(r_ - h) - _xlogx(r_)
                            lc[c] = a + h
                        nl += bin_tot[b]
                        prev = b
                else:
                    m = 0
                    for k in range(start, end):
                        s_ = samp[k]
                        keys[m] = (np.int64(Xr[f, s_]) * C + y[s_]) * wb + wts[k]
                        m += 1
                    srt = np.sort(keys[:m])
                    prev_r = -1
                    for k in range(m):
                        rc = srt[k] // wb
                        w = srt[k] - rc * wb
                        r = rc // C
                        c = rc - r * C
                        if r != prev_r and prev_r >= 0 and nl >= min_leaf and n - nl >= min_leaf:
                            nr = n - nl
                            if criterion == GINI:
                                score = sql / nl + sqr / nr
                            else:
                                score = sl + sr - _xlogx(nl) - _xlogx(nr)
                            if score > best:
                                best = score
                                best_f = f
                                best_r1 = prev_r
                                best_r2 = r
                        a = lc[c]
                        r_ = cnt[c] - a
                        if criterion == GINI:
                            sql += (a + w) * (a + w) - a * a
                            sqr += (r_ - w) * (r_ - w) - r_ * r_
                        else:
                            sl += _xlogx(a + w) - _xlogx(a)
                            sr += _xlogx(r_ - w) - _xlogx(r_)
                        lc[c] = a + w
                        nl += w
                        prev_r = r

        if best_f < 0:
            leaf_of[node] = n_leaves
            for c in range(C):
                leaf_counts[n_leaves, c] = cnt[c]
            n_leaves += 1
            continue

        base = voff[best_f]
        lo = vals[base + best_r1]
        hi = vals[base + best_r2]
        thr = (lo + hi) / 2.0
        if thr >= hi or thr < lo:
            thr = lo
        feature[node] = best_f
        threshold[node] = thr

        i = start
        j = end - 1
        while i <= j:
            if Xr[best_f, samp[i]] <= best_r1:
                i += 1
            else:
                t = samp[i]
                samp[i] = samp[j]
                samp[j] = t
                t = wts[i]
                wts[i] = wts[j]
                wts[j] = t
                j -= 1
        mid = i

        lnode = n_nodes
        rnode = n_nodes + 1
        n_nodes += 2
        left[node] = lnode
        right[node] = rnode
        # right pushed first so the left subtree is expanded first
        st_node[sp] = rnode
        st_start[sp] = mid
        st_end[sp] = end
        st_depth[sp] = depth + 1
        sp += 1
        st_node[sp] = lnode
        st_start[sp] = start
        st_end[sp] = mid
        st_depth[sp] = depth + 1
        sp += 1

    return (feature[:n_nodes].copy(), threshold[:n_nodes].copy(), left[:n_nodes].copy(),
            right[:n_nodes].copy(), leaf_of[:n_nodes].copy(), leaf_counts[:n_leaves].copy())


@njit(cache=True, nogil=True)
def route_rows(X, feature, threshold, left, right, leaf_of, out, col):
    """Write the leaf id of every row of ``X`` into ``out[:, col]``."""
    for r in range(X.shape[0]):
        node = 0
        while feature[node] >= 0:
            if X[r, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[r, col] = leaf_of[node]


@njit(cache=True, nogil=True)
def route_packed(X, feature, threshold, left, right, leaf_of, node_off, t0, t1, out):
    """Route every row through trees ``t0..t1-1`` of a packed forest.

    Tree-outer order keeps one tree's nodes hot in cache while rows stream by.
    ``out`` is (rows, trees).
    """
    n = X.shape[0]
    for t in range(t0, t1):
        base = node_off[t]
        for r in range(n):
            node = base
            while feature[node] >= 0:
                if X[r, feature[node]] <= threshold[node]:
                    node = base + left[node]
                else:
                    node = base + right[node]
            out[r, t] = leaf_of[node]


@njit(cache=True, nogil=True)
def vote_counts(leaves, leaf_pred, leaf_off, n_classes):
    n, T = leaves.shape
    votes = np.zeros((n, n_classes), np.int64)
    for r in range(n):
        for t in range(T):
            votes[r, leaf_pred[leaf_off[t] + leaves[r, t]]] += 1
    return votes


@njit(cache=True, nogil=True)
def leaf_scores(leaves, y, leaf_pred, leaf_off, n_classes, metric, total_rows):
    """Score every leaf of every tree from the rows routed into it.

    Leaves no row reaches get the metric's minimum value.
    """
    n, T = leaves.shape
    C = n_classes
    scores = np.empty(leaf_off[T], np.float64)
    if metric == METRIC_GINI:
        floor = 1.0 / C - 1.0
    elif metric == METRIC_ENTROPY:
        floor = -math.log(C)
    else:
        floor = 0.0
    for t in range(T):
        L = leaf_off[t + 1] - leaf_off[t]
        counts = np.zeros((L, C), np.int64)
        for r in range(n):
            counts[leaves[r, t], y[r]] += 1
        for leaf in range(L):
            size = 0
            for c in range(C):
                size += counts[leaf, c]
            k = leaf_off[t] + leaf
            if size == 0:
                scores[k] = floor
                continue
            if metric == METRIC_GINI:
                s = 0.0
                for c in range(C):
                    p = counts[leaf, c] / size
                    s += p * p
                scores[k] = s - 1.0
            elif metric == METRIC_ENTROPY:
                s = 0.0
                for c in range(C):
                    if counts[leaf, c] > 0:
                        p = counts[leaf, c] / size
                        s += p * math.log(p)
                scores[k] = s
            else:
                supp = size / total_rows
                conf = counts[leaf, leaf_pred[k]] / size
                if metric == METRIC_SUPP:
                    scores[k] = supp
                elif metric == METRIC_CONF:
                    scores[k] = conf
                else:
                    scores[k] = 2.0 * supp * conf / (supp + conf) if supp + conf > 0 else 0.0
    return scores


@njit(cache=True, nogil=True)
def easy_mask(leaves, scores, leaf_off, sigma):
    n, T = leaves.shape
    out = np.ones(n, np.bool_)
    for r in range(n):
        for t in range(T):
            if not scores[leaf_off[t] + leaves[r, t]] > sigma:
                out[r] = False
                break
    return out
