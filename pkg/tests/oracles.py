"""Slow, loop-based reference implementations used only as test oracles.

Nothing here imports from the package; each function restates a definition
directly so a shared bug cannot hide in both places.
"""

import math
from fractions import Fraction


def mean(xs):
    return float(sum(Fraction(x) for x in xs) / len(xs))


def percentile_linear(xs, q):
    s = sorted(xs)
    pos = (len(s) - 1) * q
    lo = math.floor(pos)
    hi = min(lo + 1, len(s) - 1)
    return s[lo] + (s[hi] - s[lo]) * (pos - lo)


def central_moment(xs, k):
    """Exact rational moment about the exact mean, rounded once at the end."""
    fx = [Fraction(x) for x in xs]
    mu = sum(fx) / len(fx)
    return float(sum((x - mu) ** k for x in fx) / len(fx))


def sample_variance(xs):
    n = len(xs)
    if n < 2:
        return 0.0
    fx = [Fraction(x) for x in xs]
    mu = sum(fx) / n
    return float(sum((x - mu) ** 2 for x in fx) / (n - 1))


def entropy_normalized(xs):
    total = math.fsum(xs)
    if total <= 0:
        return 0.0
    return -math.fsum((x / total) * math.log(x / total) for x in xs if x > 0)


def ls_slope(xs):
    n = len(xs)
    if n < 2:
        return 0.0
    t_bar = (n - 1) / 2
    x_bar = mean(xs)
    num = math.fsum((i - t_bar) * (x - x_bar) for i, x in enumerate(xs))
    den = math.fsum((i - t_bar) ** 2 for i in range(n))
    return num / den


def _summary(vals):
    if not vals:
        return 0.0, 0.0, 0.0
    return max(vals), min(vals), mean(vals)


def rhr_features(xs):
    xs = [float(x) for x in xs]
    var = sample_variance(xs)
    m2 = central_moment(xs, 2)
    if var > 0:
        skew = central_moment(xs, 3) / var ** 1.5
        kurt = central_moment(xs, 4) / var ** 2 - 3
    else:
        skew = kurt = 0.0
    diffs = [b - a for a, b in zip(xs, xs[1:])]
    pos = [d for d in diffs if d > 0]
    neg = [-d for d in diffs if d < 0]
    ab = [abs(d) for d in diffs]
    s = sorted(xs)
    n = len(s)
    median = s[n // 2] if n % 2 else (s[n // 2 - 1] + s[n // 2]) / 2
    out = {
        "rhr_mean": mean(xs),
        "rhr_median": median,
        "rhr_variance": var,
        "rhr_std": math.sqrt(m2),
        "rhr_iqr": percentile_linear(xs, 0.75) - percentile_linear(xs, 0.25),
        "rhr_range": max(xs) - min(xs),
        "rhr_skewness": skew,
        "rhr_kurtosis": kurt,
        "rhr_second_moment": m2,
        "rhr_entropy": entropy_normalized(xs),
        "rhr_slope": ls_slope(xs),
    }
    for tag, vals in (("pos", pos), ("neg", neg), ("abs", ab)):
        mx, mn, av = _summary(vals)
        out[f"rhr_max_{tag}_change"] = mx
        out[f"rhr_min_{tag}_change"] = mn
        out[f"rhr_avg_{tag}_change"] = av
    out["rhr_no_change"] = float(sum(1 for d in diffs if d == 0))
    return out


def step_features(xs, interval=5, threshold=10):
    xs = [float(x) for x in xs]
    sums = [math.fsum(xs[i:i + interval]) for i in range(0, len(xs), interval)]
    states = [s >= threshold for s in sums]
    runs = []  # (state, [sums in run])
    for st, s in zip(states, sums):
        if runs and runs[-1][0] == st:
            runs[-1][1].append(s)
        else:
            runs.append((st, [s]))
    act = [len(r) for st, r in runs if st]
    sed = [len(r) for st, r in runs if not st]
    act_steps = [s for st, r in runs if st for s in r]
    out = {
        "steps_total": math.fsum(xs),
        "steps_avg": mean(xs),
        "steps_std": math.sqrt(central_moment(xs, 2)),
        "steps_variance": sample_variance(xs),
        "steps_entropy": entropy_normalized(xs),
        "steps_max_5min": max(sums),
        "steps_active_bouts": float(len(act)),
        "steps_sedentary_bouts": float(len(sed)),
    }
    for tag, vals in (("active", act), ("sedentary", sed)):
        mx, mn, av = _summary(vals)
        out[f"steps_max_{tag}_bout_len"] = mx
        out[f"steps_min_{tag}_bout_len"] = mn
        out[f"steps_avg_{tag}_bout_len"] = av
    mx, mn, av = _summary(act_steps)
    out["steps_min_active_bout_steps"] = mn
    out["steps_max_active_bout_steps"] = mx
    out["steps_avg_active_bout_steps"] = av
    out["steps_slope"] = ls_slope(xs)
    return out


def sample_entropy(xs, m, tol):
    """Exhaustive pair counting over the first N-m templates of length m and m+1."""
    n = len(xs)
    b = a = 0
    for i in range(n - m):
        for j in range(i + 1, n - m):
            if all(abs(xs[i + k] - xs[j + k]) <= tol for k in range(m)):
                b += 1
                if abs(xs[i + m] - xs[j + m]) <= tol:
                    a += 1
    if a == 0 or b == 0:
        return None
    return -math.log(a / b)


def m10_l5(xs, span10, span5):
    means10 = [mean(xs[i:i + span10]) for i in range(len(xs) - span10 + 1)]
    means5 = [mean(xs[i:i + span5]) for i in range(len(xs) - span5 + 1)]
    return max(means10), min(means5)


def intradaily_variability(xs):
    xs = [Fraction(x) for x in xs]
    n = len(xs)
    mu = sum(xs) / n
    num = n * sum((xs[i] - xs[i - 1]) ** 2 for i in range(1, n))
    den = (n - 1) * sum((x - mu) ** 2 for x in xs)
    return num / den


def mutual_information(a, b):
    n = len(a)
    joint, pa, pb = {}, {}, {}
    for x, y in zip(a, b):
        joint[(x, y)] = joint.get((x, y), 0) + 1
        pa[x] = pa.get(x, 0) + 1
        pb[y] = pb.get(y, 0) + 1
    return math.fsum((c / n) * math.log((c / n) / ((pa[x] / n) * (pb[y] / n)))
                     for (x, y), c in joint.items())


def auc_pairs(labels, scores):
    pos = [s for l, s in zip(labels, scores) if l]
    neg = [s for l, s in zip(labels, scores) if not l]
    total = 0.0
    for p in pos:
        for q in neg:
            total += 1.0 if p > q else 0.5 if p == q else 0.0
    return total / (len(pos) * len(neg))
