"""Time the numba and numpy kernel backends on the same inputs.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--scale 1.0]

Both backends are imported directly (the SANIPIPE_KERNELS flag only picks
the one the library uses). Outputs are checked for equality before timing;
numba compile time is excluded by a warm-up call.
"""

import argparse
import time

import numpy as np

from sanipipe.kernels import _numba, _numpy


def _spans(rng, n, length, max_len):
    starts = np.sort(rng.integers(0, length - max_len, n))
    ends = starts + rng.integers(1, max_len, n)
    return starts.astype(np.int64), ends.astype(np.int64)


def make_cases(scale, seed=0):
    rng = np.random.default_rng(seed)
    n_tok = int(200_000 * scale)
    gaps = rng.integers(1, 3, n_tok)
    lens = rng.integers(1, 9, n_tok)
    tok_starts = np.cumsum(gaps + np.r_[0, lens[:-1]]).astype(np.int64)
    tok_ends = tok_starts + lens
    length = int(tok_ends[-1]) + 1
    n_span = int(20_000 * scale)
    s, e = _spans(rng, n_span, length, 40)
    rank = rng.integers(0, 2, n_span).astype(np.int64)
    order = np.lexsort((s, -(e - s))).astype(np.int64)
    ms, me = _spans(rng, n_span // 2, length, 60)
    first = np.sort(rng.integers(0, n_tok - 10, n_span)).astype(np.int64)
    stop = first + rng.integers(0, 10, n_span)
    flags = rng.random(n_tok) < 0.3
    X = rng.normal(size=(int(5_000 * scale), 64))
    y = (rng.random(X.shape[0]) < 0.5).astype(np.float64)
    w = rng.normal(size=64) * 0.1
    return {
        "token_ranges": (tok_starts, tok_ends, s, e),
        "token_overlap_mask": (tok_starts, tok_ends, s, e),
        "fully_covered": (ms, me, s, e, length),
        "dominant_spans": (s, e, rank),
        "greedy_spans": (s, e, order),
        "range_any": (flags, first, stop),
        "range_all": (flags, first, stop),
        "logreg_loss_grad": (X, y, w, 0.1, 1e-4),
    }


def _same(a, b):
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    return np.allclose(a, b, rtol=1e-10, atol=1e-12) if np.asarray(a).dtype.kind == "f" else np.array_equal(a, b)


def best_time(fn, args, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--scale", type=float, default=1.0)
    args = ap.parse_args()
    cases = make_cases(args.scale)
    print(f"{'kernel':<20} {'numpy ms':>10} {'numba ms':>10} {'speedup':>8}")
    for name, a in cases.items():
        f_np, f_nb = getattr(_numpy, name), getattr(_numba, name)
        out_nb = f_nb(*a)  # warm-up / compile
        if not _same(f_np(*a), out_nb):
            raise SystemExit(f"{name}: backends disagree")
        t_np = best_time(f_np, a, args.repeat)
        t_nb = best_time(f_nb, a, args.repeat)
        print(f"{name:<20} {t_np * 1e3:>10.2f} {t_nb * 1e3:>10.2f} {t_np / t_nb:>7.1f}x")


if __name__ == "__main__":
    main()
