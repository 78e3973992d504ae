"""Per-window statistical and behavioral features of resting heart rate and steps."""

from __future__ import annotations

import numpy as np

from .errors import EmptyWindow
from .preprocess import WindowSpec, segment

RHR_FEATURES = (
    "rhr_mean",
    "rhr_median",
    "rhr_variance",
    "rhr_std",
    "rhr_iqr",
    "rhr_range",
    "rhr_skewness",
    "rhr_kurtosis",
    "rhr_second_moment",
    "rhr_entropy",
    "rhr_slope",
    "rhr_max_pos_change",
    "rhr_min_pos_change",
    "rhr_avg_pos_change",
    "rhr_max_neg_change",
    "rhr_min_neg_change",
    "rhr_avg_neg_change",
    "rhr_max_abs_change",
    "rhr_min_abs_change",
    "rhr_avg_abs_change",
    "rhr_no_change",
)

STEP_FEATURES = (
    "steps_total",
    "steps_avg",
    "steps_std",
    "steps_variance",
    "steps_entropy",
    "steps_max_5min",
    "steps_active_bouts",
    "steps_sedentary_bouts",
    "steps_max_active_bout_len",
    "steps_min_active_bout_len",
    "steps_avg_active_bout_len",
    "steps_max_sedentary_bout_len",
    "steps_min_sedentary_bout_len",
    "steps_avg_sedentary_bout_len",
    "steps_min_active_bout_steps",
    "steps_max_active_bout_steps",
    "steps_avg_active_bout_steps",
    "steps_slope",
)

SENSOR_FEATURES = RHR_FEATURES + STEP_FEATURES

BOUT_INTERVAL_MINUTES = 5
ACTIVE_THRESHOLD = 10.0  # steps per 5-minute interval; a sum of exactly 10 counts as active


def _window(values) -> np.ndarray:
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        raise EmptyWindow("feature window is empty")
    return x


def distribution_entropy(x: np.ndarray) -> float:
    """Shannon entropy (nats) of non-negative values normalized by their sum."""
    total = x.sum()
    if total <= 0:
        return 0.0
    p = x[x > 0] / total
    return float(-np.sum(p * np.log(p)))


def slope(x: np.ndarray) -> float:
    """Least-squares slope of ``x`` against its sample index."""
    n = x.size
    if n < 2:
        return 0.0
    t = np.arange(n) - (n - 1) / 2.0
    return float(np.dot(t, x - x.mean()) / np.dot(t, t))


def _stats(values):
    if values.max() == values.min():
        # exact zeros; np.mean of equal values can carry round-off into the moments
        return float(values[0]), 0.0, 0.0, 0.0, 0.0
    mean = values.mean()
    dev = values - mean
    m2 = np.mean(dev ** 2)
    m3 = np.mean(dev ** 3)
    m4 = np.mean(dev ** 4)
    n = values.size
    var_unbiased = m2 * n / (n - 1) if n > 1 else 0.0
    return mean, m2, m3, m4, var_unbiased


def _change_summary(d: np.ndarray):
    if d.size == 0:
        return 0.0, 0.0, 0.0
    return float(d.max()), float(d.min()), float(d.mean())


def extract_rhr_features(window) -> dict[str, float]:
    x = _window(window)
    mean, m2, m3, m4, var = _stats(x)
    if var > 0:
        skew = m3 / var ** 1.5
        kurt = m4 / var ** 2 - 3.0
    else:
        skew = kurt = 0.0
    q1, q3 = np.percentile(x, [25, 75])
    diffs = np.diff(x)
    pos = diffs[diffs > 0]
    neg = -diffs[diffs < 0]
    mx_p, mn_p, av_p = _change_summary(pos)
    mx_n, mn_n, av_n = _change_summary(neg)
    mx_a, mn_a, av_a = _change_summary(np.abs(diffs))
    values = (
        mean,
        np.median(x),
        var,
        np.sqrt(m2),
        q3 - q1,
        x.max() - x.min(),
        skew,
        kurt,
        m2,
        distribution_entropy(x),
        slope(x),
        mx_p, mn_p, av_p,
        mx_n, mn_n, av_n,
        mx_a, mn_a, av_a,
        np.count_nonzero(diffs == 0),
    )
    return dict(zip(RHR_FEATURES, map(float, values)))


def interval_sums(x: np.ndarray, width: int = BOUT_INTERVAL_MINUTES) -> np.ndarray:
    """Sums over consecutive ``width``-minute intervals; a short trailing interval is kept."""
    n_full = x.size // width
    sums = x[: n_full * width].reshape(n_full, width).sum(axis=1)
    if x.size % width:
        sums = np.append(sums, x[n_full * width:].sum())
    return sums


def bouts(active: np.ndarray) -> list[tuple[bool, int, int]]:
    """Maximal runs of equal activity state as (is_active, start, length)."""
    runs = []
    start = 0
    for i in range(1, active.size + 1):
        if i == active.size or active[i] != active[start]:
            runs.append((bool(active[start]), start, i - start))
            start = i
    return runs


def extract_step_features(window) -> dict[str, float]:
    x = _window(window)
    mean, m2, _, _, var = _stats(x)
    sums = interval_sums(x)
    active = sums >= ACTIVE_THRESHOLD
    runs = bouts(active)
    act_len = np.array([n for a, _, n in runs if a], dtype=float)
    sed_len = np.array([n for a, _, n in runs if not a], dtype=float)
    act_steps = sums[active]
    values = (
        x.sum(),
        mean,
        np.sqrt(m2),
        var,
        distribution_entropy(x),
        sums.max(),
        act_len.size,
        sed_len.size,
        *_change_summary(act_len),
        *_change_summary(sed_len),
        *(_change_summary(act_steps)[i] for i in (1, 0, 2)),
        slope(x),
    )
    return dict(zip(STEP_FEATURES, map(float, values)))


def window_features(rhr_window, steps_window) -> np.ndarray:
    """All 39 sensor features of one window, in ``SENSOR_FEATURES`` order."""
    r = extract_rhr_features(rhr_window)
    s = extract_step_features(steps_window)
    return np.array([r[k] for k in RHR_FEATURES] + [s[k] for k in STEP_FEATURES])


def feature_matrix(rhr, steps, spec: WindowSpec = WindowSpec()) -> np.ndarray:
    """WindowFeatureMatrix of shape (n_windows, 39)."""
    rows = [window_features(r, s) for r, s in zip(segment(rhr, spec), segment(steps, spec))]
    return np.vstack(rows)
