"""numba-compiled kernels; same contracts as ``_numpy``."""

import numpy as np
from numba import njit


@njit(cache=True)
def _token_ranges(tok_starts, tok_ends, starts, ends):
    m = starts.shape[0]
    first = np.empty(m, dtype=np.int64)
    stop = np.empty(m, dtype=np.int64)
    for k in range(m):
        f = np.searchsorted(tok_ends, starts[k], side="right")
        s = np.searchsorted(tok_starts, ends[k], side="left")
        first[k] = f
        stop[k] = s if s > f else f
    return first, stop


def token_ranges(tok_starts, tok_ends, starts, ends):
    return _token_ranges(
        np.asarray(tok_starts, dtype=np.int64),
        np.asarray(tok_ends, dtype=np.int64),
        np.asarray(starts, dtype=np.int64),
        np.asarray(ends, dtype=np.int64),
    )


@njit(cache=True)
def _token_overlap_mask(tok_starts, tok_ends, starts, ends):
    n = tok_starts.shape[0]
    out = np.zeros(n, dtype=np.bool_)
    first, stop = _token_ranges(tok_starts, tok_ends, starts, ends)
    for k in range(first.shape[0]):
        for t in range(first[k], stop[k]):
            out[t] = True
    return out


def token_overlap_mask(tok_starts, tok_ends, starts, ends):
    return _token_overlap_mask(
        np.asarray(tok_starts, dtype=np.int64),
        np.asarray(tok_ends, dtype=np.int64),
        np.asarray(starts, dtype=np.int64),
        np.asarray(ends, dtype=np.int64),
    )


@njit(cache=True)
def _fully_covered(mask_starts, mask_ends, starts, ends, length):
    covered = np.zeros(length, dtype=np.bool_)
    for k in range(mask_starts.shape[0]):
        for c in range(mask_starts[k], mask_ends[k]):
            covered[c] = True
    out = np.empty(starts.shape[0], dtype=np.bool_)
    for k in range(starts.shape[0]):
        ok = True
        for c in range(starts[k], ends[k]):
            if not covered[c]:
                ok = False
                break
        out[k] = ok
    return out


def fully_covered(mask_starts, mask_ends, starts, ends, length):
    return _fully_covered(
        np.asarray(mask_starts, dtype=np.int64),
        np.asarray(mask_ends, dtype=np.int64),
        np.asarray(starts, dtype=np.int64),
        np.asarray(ends, dtype=np.int64),
        int(length),
    )


@njit(cache=True)
def _dominant_spans(starts, ends, rank, order):
    n = starts.shape[0]
    beaten = np.zeros(n, dtype=np.bool_)
    # order is sorted by start, so overlapping rivals of span i start inside
    # [starts[i] - maxlen + 1, ends[i]).
    sorted_starts = starts[order]
    maxlen = 0
    for i in range(n):
        if ends[i] - starts[i] > maxlen:
            maxlen = ends[i] - starts[i]
    for i in range(n):
        li = ends[i] - starts[i]
        lo = np.searchsorted(sorted_starts, starts[i] - maxlen + 1)
        hi = np.searchsorted(sorted_starts, ends[i])
        for p in range(lo, hi):
            j = order[p]
            if ends[j] - starts[j] > li and starts[i] < ends[j]:
                beaten[i] = True
                break
    keep = np.zeros(n, dtype=np.bool_)
    last_end = np.iinfo(np.int64).min
    for i in order:
        if beaten[i] or starts[i] < last_end:
            continue
        keep[i] = True
        last_end = ends[i]
    return keep


def dominant_spans(starts, ends, rank):
    starts = np.asarray(starts, dtype=np.int64)
    ends = np.asarray(ends, dtype=np.int64)
    rank = np.asarray(rank, dtype=np.int64)
    order = np.lexsort((np.arange(len(starts)), rank, starts)).astype(np.int64)
    return _dominant_spans(starts, ends, rank, order)


@njit(cache=True)
def _greedy_spans(starts, ends, order, size):
    n = starts.shape[0]
    keep = np.zeros(n, dtype=np.bool_)
    occupied = np.zeros(size, dtype=np.bool_)
    for i in order:
        free = True
        for c in range(starts[i], ends[i]):
            if occupied[c]:
                free = False
                break
        if free:
            for c in range(starts[i], ends[i]):
                occupied[c] = True
            keep[i] = True
    return keep


def greedy_spans(starts, ends, order):
    starts = np.asarray(starts, dtype=np.int64)
    ends = np.asarray(ends, dtype=np.int64)
    if len(starts) == 0:
        return np.zeros(0, dtype=np.bool_)
    return _greedy_spans(starts, ends, np.asarray(order, dtype=np.int64), int(ends.max()))


@njit(cache=True)
def _range_reduce(values, first, stop, want_all):
    out = np.zeros(first.shape[0], dtype=np.bool_)
    for k in range(first.shape[0]):
        if stop[k] <= first[k]:
            continue
        res = want_all
        for t in range(first[k], stop[k]):
            if want_all and not values[t]:
                res = False
                break
            if not want_all and values[t]:
                res = True
                break
        out[k] = res
    return out


def range_any(values, first, stop):
    return _range_reduce(
        np.asarray(values, dtype=np.bool_),
        np.asarray(first, dtype=np.int64),
        np.asarray(stop, dtype=np.int64),
        False,
    )


def range_all(values, first, stop):
    return _range_reduce(
        np.asarray(values, dtype=np.bool_),
        np.asarray(first, dtype=np.int64),
        np.asarray(stop, dtype=np.int64),
        True,
    )


@njit(cache=True)
def _logreg_loss_grad(X, y, w, b, l2):
    n, d = X.shape
    gw = np.zeros(d)
    gb = 0.0
    loss = 0.0
    for i in range(n):
        z = b
        for j in range(d):
            z += X[i, j] * w[j]
        if z >= 0:
            e = np.exp(-z)
            p = 1.0 / (1.0 + e)
            loss += z + np.log1p(e) - y[i] * z
        else:
            e = np.exp(z)
            p = e / (1.0 + e)
            loss += np.log1p(e) - y[i] * z
        r = p - y[i]
        for j in range(d):
            gw[j] += X[i, j] * r
        gb += r
    reg = 0.0
    for j in range(d):
        gw[j] = gw[j] / n + l2 * w[j]
        reg += w[j] * w[j]
    return loss / n + 0.5 * l2 * reg, gw, gb / n


def logreg_loss_grad(X, y, w, b, l2):
    loss, gw, gb = _logreg_loss_grad(
        np.ascontiguousarray(X, dtype=np.float64),
        np.asarray(y, dtype=np.float64),
        np.asarray(w, dtype=np.float64),
        float(b),
        float(l2),
    )
    return float(loss), gw, float(gb)
