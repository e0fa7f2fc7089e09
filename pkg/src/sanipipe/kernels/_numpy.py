"""Vectorised numpy kernels. Reference semantics for ``_numba``."""

import numpy as np


def token_ranges(tok_starts, tok_ends, starts, ends):
    """Half-open token index range ``[first, stop)`` overlapped by each span."""
    tok_starts = np.asarray(tok_starts, dtype=np.int64)
    tok_ends = np.asarray(tok_ends, dtype=np.int64)
    first = np.searchsorted(tok_ends, np.asarray(starts, dtype=np.int64), side="right")
    stop = np.searchsorted(tok_starts, np.asarray(ends, dtype=np.int64), side="left")
    return first.astype(np.int64), np.maximum(stop, first).astype(np.int64)


def token_overlap_mask(tok_starts, tok_ends, starts, ends):
    n = len(tok_starts)
    first, stop = token_ranges(tok_starts, tok_ends, starts, ends)
    diff = np.zeros(n + 1, dtype=np.int64)
    np.add.at(diff, first, 1)
    np.add.at(diff, stop, -1)
    return np.cumsum(diff[:n]) > 0


def fully_covered(mask_starts, mask_ends, starts, ends, length):
    """True where every character of ``[start, end)`` lies in some mask span."""
    length = int(length)
    diff = np.zeros(length + 1, dtype=np.int64)
    np.add.at(diff, np.asarray(mask_starts, dtype=np.int64), 1)
    np.add.at(diff, np.asarray(mask_ends, dtype=np.int64), -1)
    covered = np.cumsum(diff[:length]) > 0
    prefix = np.concatenate(([0], np.cumsum(covered)))
    starts = np.asarray(starts, dtype=np.int64)
    ends = np.asarray(ends, dtype=np.int64)
    return (prefix[ends] - prefix[starts]) == (ends - starts)


def dominant_spans(starts, ends, rank):
    """Keep spans with no strictly longer overlapping rival.

    Survivors that still overlap each other all have the same length; the
    leftmost one wins, and for identical spans the lowest ``rank`` wins.
    """
    starts = np.asarray(starts, dtype=np.int64)
    ends = np.asarray(ends, dtype=np.int64)
    rank = np.asarray(rank, dtype=np.int64)
    n = len(starts)
    keep = np.zeros(n, dtype=np.bool_)
    if n == 0:
        return keep
    lengths = ends - starts
    # Sweep lengths longest first; a span is beaten when a char it covers
    # is already covered by some longer span.
    beaten = np.zeros(n, dtype=np.bool_)
    diff = np.zeros(int(ends.max()) + 1, dtype=np.int64)
    covered = np.zeros(int(ends.max()), dtype=np.bool_)
    for L in np.unique(lengths)[::-1]:
        idx = np.flatnonzero(lengths == L)
        prefix = np.concatenate(([0], np.cumsum(covered)))
        beaten[idx] = prefix[ends[idx]] > prefix[starts[idx]]
        np.add.at(diff, starts[idx], 1)
        np.add.at(diff, ends[idx], -1)
        covered = np.cumsum(diff[:-1]) > 0
    order = np.lexsort((np.arange(n), rank, starts))
    last_end = np.iinfo(np.int64).min
    for i in order:
        if beaten[i] or starts[i] < last_end:
            continue
        keep[i] = True
        last_end = ends[i]
    return keep


def greedy_spans(starts, ends, order):
    """Accept spans in ``order`` unless they overlap an accepted one."""
    starts = np.asarray(starts, dtype=np.int64)
    ends = np.asarray(ends, dtype=np.int64)
    n = len(starts)
    keep = np.zeros(n, dtype=np.bool_)
    if n == 0:
        return keep
    occupied = np.zeros(int(ends.max()), dtype=np.bool_)
    for i in np.asarray(order, dtype=np.int64):
        s, e = starts[i], ends[i]
        if occupied[s:e].any():
            continue
        occupied[s:e] = True
        keep[i] = True
    return keep


def range_any(values, first, stop):
    values = np.asarray(values, dtype=np.int64)
    prefix = np.concatenate(([0], np.cumsum(values)))
    first = np.asarray(first, dtype=np.int64)
    stop = np.asarray(stop, dtype=np.int64)
    return (stop > first) & (prefix[stop] - prefix[first] > 0)


def range_all(values, first, stop):
    """All-true over a non-empty range; empty ranges give False."""
    values = np.asarray(values, dtype=np.int64)
    prefix = np.concatenate(([0], np.cumsum(values)))
    first = np.asarray(first, dtype=np.int64)
    stop = np.asarray(stop, dtype=np.int64)
    return (stop > first) & (prefix[stop] - prefix[first] == stop - first)


def logreg_loss_grad(X, y, w, b, l2):
    """Mean log-loss plus ``l2/2 * |w|^2`` and its gradient in (w, b)."""
    n = X.shape[0]
    z = X @ w + b
    p = np.exp(-np.logaddexp(0.0, -z))
    loss = np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * l2 * np.dot(w, w)
    r = p - y
    gw = X.T @ r / n + l2 * w
    gb = r.mean()
    return float(loss), gw, float(gb)
