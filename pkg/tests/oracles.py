"""Slow, straightforward reference implementations used as test oracles.

Nothing here imports the package under test. Each routine follows the
textbook definition with explicit loops so that it can be read line by line.
"""

from __future__ import annotations

import math


# ---------------------------------------------------------------------------
# Short-memory median correction
# ---------------------------------------------------------------------------

def naive_threshold(values, mode):
    diffs = []
    for i in range(1, len(values)):
        a, b = values[i - 1], values[i]
        if a == 0.0 or b == 0.0 or a == b:
            continue
        d = abs(b - a)
        if mode == "relative":
            d = d / abs(a)
        diffs.append(d)
    if not diffs:
        return math.inf
    diffs.sort()
    m = len(diffs)
    if m % 2:
        return diffs[m // 2]
    return (diffs[m // 2 - 1] + diffs[m // 2]) / 2.0


def _median(xs):
    xs = sorted(xs)
    m = len(xs)
    return xs[m // 2] if m % 2 else (xs[m // 2 - 1] + xs[m // 2]) / 2.0


def naive_repair(values, window_card=3, lookback=30, mode="relative", factor=1.0,
                 reference="corrected"):
    """Frame-by-frame correction with an exhaustive neighbour scan.

    Returns the corrected list and the number of missing and jump corrections.
    """
    values = [float(v) for v in values]
    n = len(values)
    thr = naive_threshold(values, mode) * factor
    out = list(values)
    accepted = [False] * n
    n_missing = n_jump = 0
    if all(v == 0.0 for v in values):
        return out, 0, 0
    for t in range(n):
        c = values[t]
        replace = False
        if c == 0.0:
            replace = True
            n_missing += 1
        else:
            if reference == "corrected":
                prev = out[t - 1] if t >= 1 else 0.0
                gap = 1
            else:
                prev, gap = 0.0, 1
                for i in range(t):
                    if accepted[i]:
                        prev, gap = values[i], t - i
            if prev != 0.0:
                change = abs(c - prev)
                if mode != "absolute":
                    change /= abs(prev)
                if change > thr * gap:
                    replace = True
                    n_jump += 1
        if not replace:
            accepted[t] = True
            continue
        # every earlier frame inside the horizon, nearest first
        candidates = []
        for i in range(t):
            if t - i <= lookback and out[i] != 0.0:
                candidates.append((t - i, out[i]))
        candidates.sort()
        w = [v for _, v in candidates[:window_card]]
        out[t] = _median(w) if w else 0.0
    first = next((i for i in range(n) if out[i] != 0.0), None)
    if first is not None:
        for i in range(first):
            out[i] = out[first]
    return out, n_missing, n_jump


# ---------------------------------------------------------------------------
# Robust local linear regression
# ---------------------------------------------------------------------------

def _wls_at(xs, ys, ws, x0):
    import numpy as np

    xs, ys, ws = map(lambda a: np.asarray(a, dtype=float), (xs, ys, ws))
    if ws.sum() <= 0:
        return None
    support = {x for x, w in zip(xs, ws) if w > 0}
    if len(support) < 2:
        return float((ws * ys).sum() / ws.sum())
    sw = np.sqrt(ws)
    A = np.stack([np.ones_like(xs), xs - x0], axis=1) * sw[:, None]
    coef, *_ = np.linalg.lstsq(A, ys * sw, rcond=None)
    return float(coef[0])


def naive_lowess(y, span, iterations):
    y = [float(v) for v in y]
    n = len(y)
    if n < 3:
        return list(y)
    q = span if span <= n else (n if n % 2 else n - 1)

    def neighbours(i):
        order = sorted(range(n), key=lambda j: (abs(j - i), j))
        return sorted(order[:q])

    def fit(robust):
        out = []
        for i in range(n):
            nb = neighbours(i)
            dmax = max(abs(j - i) for j in nb)
            ws = []
            for j in nb:
                u = abs(j - i) / dmax
                w = (1 - u ** 3) ** 3 if u < 1 else 0.0
                ws.append(w * robust[j])
            v = _wls_at(nb, [y[j] for j in nb], ws, i)
            out.append(y[i] if v is None else v)
        return out

    robust = [1.0] * n
    fitted = fit(robust)
    tol = 1e-12 * max(1.0, max(abs(v) for v in y))
    for _ in range(iterations):
        res = [abs(a - b) for a, b in zip(y, fitted)]
        s = _median(res)
        if s <= tol:
            s = sum(res) / n
            if s <= tol:
                break
        robust = []
        for r in res:
            u = r / (6 * s)
            robust.append((1 - u * u) ** 2 if u < 1 else 0.0)
        fitted = fit(robust)
    return fitted


# ---------------------------------------------------------------------------
# Peaks
# ---------------------------------------------------------------------------

def naive_peaks(x):
    """Local maxima (plateau midpoints) with their topographic prominence."""
    n = len(x)
    peaks = []
    i = 1
    while i < n - 1:
        if x[i] > x[i - 1]:
            j = i
            while j + 1 < n and x[j + 1] == x[i]:
                j += 1
            if j + 1 < n and x[j + 1] < x[i]:
                peaks.append((i + j) // 2)
            i = j + 1
        else:
            i += 1
    result = []
    for p in peaks:
        lo = p
        left_min = x[p]
        while lo > 0 and x[lo - 1] <= x[p]:
            lo -= 1
            left_min = min(left_min, x[lo])
        hi = p
        right_min = x[p]
        while hi < n - 1 and x[hi + 1] <= x[p]:
            hi += 1
            right_min = min(right_min, x[hi])
        result.append((p, x[p] - max(left_min, right_min)))
    return result


def naive_cycle(x, min_prominence, fallback=20):
    peaks = [p for p, prom in naive_peaks(x) if prom >= min_prominence]
    if len(peaks) < 3:
        return fallback
    cands = [peaks[i + 2] - peaks[i] for i in range(len(peaks) - 2)]
    s = sorted(cands)

    def quantile(q):
        pos = q * (len(s) - 1)
        lo = math.floor(pos)
        hi = min(lo + 1, len(s) - 1)
        return s[lo] + (s[hi] - s[lo]) * (pos - lo)

    q1, q3 = quantile(0.25), quantile(0.75)
    keep = [c for c in cands if q1 - 1.5 * (q3 - q1) <= c <= q3 + 1.5 * (q3 - q1)]
    best = max(keep.count(c) for c in keep)
    return min(c for c in keep if keep.count(c) == best)


# ---------------------------------------------------------------------------
# Nearest neighbours
# ---------------------------------------------------------------------------

def naive_knn(train_X, train_y, q, k):
    """Brute force with canonical training order and the documented tie rules."""
    pts = sorted(zip(map(tuple, train_X), train_y))
    dists = []
    for idx, (x, lab) in enumerate(pts):
        d = sum(abs(a - b) for a, b in zip(x, q))
        dists.append((d, idx, lab))
    dists.sort()
    top = dists[: min(k, len(dists))]
    votes, total = {}, {}
    for d, _, lab in top:
        votes[lab] = votes.get(lab, 0) + 1
        total[lab] = total.get(lab, 0.0) + d
    return sorted(votes, key=lambda lab: (-votes[lab], total[lab], lab))[0]
