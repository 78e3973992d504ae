"""Histogram mutual information between features and a binary label; top-k ranking."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Feature sets reported as most informative for the original cohort; used
# verbatim by the ``paper-top10`` preset instead of re-ranking.
TOP10_RHYTHM = (
    "rhr_skewness.m10",
    "rhr_max_pos_change.m10",
    "steps_total.iv",
    "steps_avg.iv",
    "steps_std.iv",
    "steps_variance.mse",
    "steps_max_sedentary_bout_len.l5",
    "steps_avg_sedentary_bout_len.relative_amplitude",
    "steps_slope.mesor",
    "steps_slope.l5",
)
TOP10_SENSOR = (
    "rhr_mean",
    "rhr_median",
    "rhr_slope",
    "rhr_min_pos_change",
    "rhr_max_pos_change",
    "rhr_min_neg_change",
    "rhr_avg_neg_change",
    "rhr_min_abs_change",
    "steps_max_5min",
    "steps_max_active_bout_steps",
)
PRESETS = {"paper-top10": {"sensor": TOP10_SENSOR, "rhythm": TOP10_RHYTHM}}


@dataclass
class FeatureRanking:
    features: list[str]
    mi: list[float]
    k_selected: int

    @property
    def selected(self) -> list[str]:
        return self.features[: self.k_selected]

    def rows(self):
        for rank, (f, v) in enumerate(zip(self.features, self.mi), start=1):
            yield f, v, rank


def equal_width_bins(x, bins: int) -> np.ndarray:
    """Bin ids in [0, bins) over the observed range; a constant input maps to bin 0."""
    x = np.asarray(x, dtype=float)
    lo, hi = x.min(), x.max()
    if not hi > lo:
        return np.zeros(x.size, dtype=int)
    ids = np.floor((x - lo) / (hi - lo) * bins).astype(int)
    return np.clip(ids, 0, bins - 1)


def mi_from_ids(a, b) -> float:
    """Plug-in mutual information (nats) of two discrete label arrays."""
    a = np.unique(np.asarray(a), return_inverse=True)[1]
    b = np.unique(np.asarray(b), return_inverse=True)[1]
    joint = np.zeros((a.max() + 1, b.max() + 1))
    np.add.at(joint, (a, b), 1.0)
    p = joint / joint.sum()
    px = p.sum(axis=1, keepdims=True)
    py = p.sum(axis=0, keepdims=True)
    nz = p > 0
    mi = float(np.sum(p[nz] * np.log(p[nz] / (px @ py)[nz])))
    return max(mi, 0.0)


def mutual_information(feature_values, labels, bins: int = 10) -> float:
    x = np.asarray(feature_values, dtype=float)
    y = np.asarray(labels)
    if x.shape != y.shape or x.size < 2:
        raise ValueError("feature and labels need equal length >= 2")
    if bins < 2:
        raise ValueError("need at least 2 bins")
    if np.unique(y).size < 2:
        return 0.0
    return mi_from_ids(equal_width_bins(x, bins), y)


def select_top_k(matrix, labels, k: int, names, bins: int = 10) -> FeatureRanking:
    """Rank columns by MI with the label; ties keep the given (canonical) column order."""
    matrix = np.asarray(matrix, dtype=float)
    names = list(names)
    if k > len(names):
        raise ValueError(f"k={k} exceeds {len(names)} features")
    scores = [mutual_information(matrix[:, j], labels, bins) for j in range(matrix.shape[1])]
    order = sorted(range(len(names)), key=lambda j: (-scores[j], j))
    return FeatureRanking([names[j] for j in order], [scores[j] for j in order], k)
