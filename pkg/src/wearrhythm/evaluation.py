"""Subject-wise cross-validation, class balancing, normalization and metrics."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .errors import SingleClass
from .features import SENSOR_FEATURES
from .network import NetworkConfig, predict_proba
from .pipeline import RHYTHM_FEATURES, Sample
from .seeding import derive_seed
from .selection import PRESETS, select_top_k
from .training import TrainConfig, train

log = logging.getLogger(__name__)

METRIC_NAMES = ("sensitivity", "specificity", "auc_roc", "f_beta", "precision", "recall")


@dataclass(frozen=True)
class EvalConfig:
    n_folds: int = 5
    threshold: float = 0.5
    beta: float = 0.1
    features: str = "paper-top10"  # "paper-top10" | "mi"
    k_sensor: int = 10
    k_rhythm: int = 10
    mi_bins: int = 10
    global_ranking: bool = False
    period: int = 24
    subseq_len: int | None = None  # keep only the most recent k windows
    val_fraction: float = 0.2
    model: str = "network"  # "network" | "logistic"

    def __post_init__(self):
        if self.features not in ("paper-top10", "mi"):
            raise ValueError(f"unknown feature mode {self.features!r}")
        if self.model not in ("network", "logistic"):
            raise ValueError(f"unknown model {self.model!r}")
        if self.n_folds < 2:
            raise ValueError("need at least 2 folds")


# ---------------------------------------------------------------- metrics


@dataclass
class MetricReport:
    sensitivity: float
    specificity: float
    auc_roc: float
    f_beta: float
    precision: float
    recall: float
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    def to_dict(self) -> dict:
        return {k: (None if isinstance(v, float) and math.isnan(v) else v)
                for k, v in asdict(self).items()}


def auc_concordance(labels, scores) -> float:
    """P(score of a random positive > score of a random negative), ties count 1/2.

    NaN when only one class is present.
    """
    labels = np.asarray(labels).astype(bool)
    scores = np.asarray(scores, dtype=float)
    pos, neg = scores[labels], scores[~labels]
    if pos.size == 0 or neg.size == 0:
        return float("nan")
    diff = pos[:, None] - neg[None, :]
    return float((np.sum(diff > 0) + 0.5 * np.sum(diff == 0)) / diff.size)


def f_beta_score(precision: float, recall: float, beta: float) -> float:
    b2 = beta * beta
    denom = b2 * precision + recall
    return 0.0 if denom == 0 else (1 + b2) * precision * recall / denom


def metrics(labels, scores, threshold: float = 0.5, beta: float = 0.1) -> MetricReport:
    """Confusion metrics at ``threshold`` with infected (1) as the positive class."""
    labels = np.asarray(labels).astype(bool)
    pred = np.asarray(scores, dtype=float) >= threshold
    tp = int(np.sum(pred & labels))
    fp = int(np.sum(pred & ~labels))
    tn = int(np.sum(~pred & ~labels))
    fn = int(np.sum(~pred & labels))
    sens = tp / (tp + fn) if tp + fn else float("nan")
    spec = tn / (tn + fp) if tn + fp else float("nan")
    prec = tp / (tp + fp) if tp + fp else 0.0
    rec = 0.0 if math.isnan(sens) else sens
    return MetricReport(sens, spec, auc_concordance(labels, scores), f_beta_score(prec, rec, beta),
                        prec, sens, tp, fp, tn, fn)


def aggregate(reports: list[MetricReport]) -> dict[str, dict[str, float]]:
    out = {}
    for name in METRIC_NAMES:
        vals = np.array([getattr(r, name) for r in reports], dtype=float)
        vals = vals[np.isfinite(vals)]
        out[name] = {"mean": float(vals.mean()) if vals.size else None,
                     "std": float(vals.std()) if vals.size else None}
    return out


# ---------------------------------------------------------------- data prep


def balance_by_replication(labels) -> np.ndarray:
    """Indices with minority-class samples repeated cyclically until classes are equal."""
    labels = np.asarray(labels).astype(int)
    idx = {c: np.flatnonzero(labels == c) for c in (0, 1)}
    if idx[0].size == 0 or idx[1].size == 0:
        raise SingleClass("balancing needs both classes")
    minority = 0 if idx[0].size < idx[1].size else 1
    need = idx[1 - minority].size - idx[minority].size
    extra = np.resize(idx[minority], need) if need else np.array([], dtype=int)
    return np.concatenate([np.arange(labels.size), extra]).astype(int)


@dataclass
class Standardizer:
    mean: np.ndarray
    std: np.ndarray  # 1.0 where the training column was constant
    constant: np.ndarray

    @classmethod
    def fit(cls, x) -> "Standardizer":
        x = np.asarray(x, dtype=float)
        flat = x.reshape(-1, x.shape[-1])
        mean = flat.mean(axis=0)
        std = flat.std(axis=0)
        constant = ~(std > 0)
        return cls(mean, np.where(constant, 1.0, std), constant)

    def transform(self, x) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.mean) / self.std


def standardize(train, apply_to) -> np.ndarray:
    """Transform ``apply_to`` with the column statistics of ``train``."""
    return Standardizer.fit(train).transform(apply_to)


# ---------------------------------------------------------------- folds


@dataclass
class FoldPlan:
    folds: list[list[str]]  # test subjects per fold
    seed: int

    def train_test(self, k: int) -> tuple[set[str], set[str]]:
        test = set(self.folds[k])
        train = set().union(*(self.folds[j] for j in range(len(self.folds)) if j != k))
        return train, test


def plan_folds(subject_labels: dict[str, int], n_folds: int, seed: int) -> FoldPlan:
    """Label-stratified, seeded round-robin assignment of subjects to test folds."""
    rng = np.random.default_rng(derive_seed(seed, "folds"))
    folds = [[] for _ in range(n_folds)]
    pos = 0
    for label in sorted(set(subject_labels.values())):
        members = sorted(s for s, lab in subject_labels.items() if lab == label)
        for s in rng.permutation(members):
            folds[pos % n_folds].append(str(s))
            pos += 1
    return FoldPlan([sorted(f) for f in folds], seed)


def _subject_labels(samples) -> dict[str, int]:
    out = {}
    for s in samples:
        out[s.subject_id] = max(out.get(s.subject_id, 0), int(s.label))
    return out


def _split_validation(samples, idx, fraction, rng):
    """Subject-wise stratified split of ``idx`` into (fit, validation)."""
    labels = _subject_labels([samples[i] for i in idx])
    val_subjects = set()
    for label in (0, 1):
        members = sorted(s for s, lab in labels.items() if lab == label)
        n_val = int(round(fraction * len(members)))
        n_val = min(n_val, len(members) - 2)
        if n_val > 0:
            val_subjects.update(rng.choice(members, n_val, replace=False).tolist())
    fit = [i for i in idx if samples[i].subject_id not in val_subjects]
    val = [i for i in idx if samples[i].subject_id in val_subjects]
    return fit, val


# ---------------------------------------------------------------- per fold


@dataclass
class FeatureSelection:
    sensor: list[str]
    rhythm: list[str]
    sensor_mi: list[float] = field(default_factory=list)
    rhythm_mi: list[float] = field(default_factory=list)


def choose_features(samples, idx, cfg: EvalConfig) -> FeatureSelection:
    if cfg.features == "paper-top10":
        preset = PRESETS["paper-top10"]
        return FeatureSelection(list(preset["sensor"])[: cfg.k_sensor],
                                list(preset["rhythm"])[: cfg.k_rhythm])
    chosen = [samples[i] for i in idx]
    # window features: every window inherits its sample's label
    win = np.vstack([s.sensor for s in chosen])
    win_y = np.concatenate([np.full(s.sensor.shape[0], s.label) for s in chosen])
    sr = select_top_k(win, win_y, cfg.k_sensor, SENSOR_FEATURES, cfg.mi_bins)
    rm = np.vstack([s.rhythm[cfg.period] for s in chosen])
    rr = select_top_k(rm, [s.label for s in chosen], cfg.k_rhythm, RHYTHM_FEATURES, cfg.mi_bins)
    return FeatureSelection(sr.selected, rr.selected, sr.mi[: cfg.k_sensor], rr.mi[: cfg.k_rhythm])


def design_arrays(samples, idx, sel: FeatureSelection, cfg: EvalConfig):
    """(sensor (N, T, k_s), rhythm (N, k_r), labels) for the chosen columns."""
    s_cols = [SENSOR_FEATURES.index(f) for f in sel.sensor]
    r_cols = [RHYTHM_FEATURES.index(f) for f in sel.rhythm]
    sensor = np.stack([samples[i].sensor[:, s_cols] for i in idx]) if idx else None
    if sensor is not None and cfg.subseq_len:
        sensor = sensor[:, -cfg.subseq_len:]
    rhythm = np.stack([samples[i].rhythm[cfg.period][r_cols] for i in idx]) if idx else None
    y = np.array([samples[i].label for i in idx], dtype=float)
    return sensor, rhythm, y


@dataclass
class FittedModel:
    kind: str
    params: dict
    net: NetworkConfig | None
    selection: FeatureSelection
    sensor_scaler: Standardizer
    rhythm_scaler: Standardizer
    train_log: object = None

    def predict(self, sensor, rhythm) -> np.ndarray:
        s = self.sensor_scaler.transform(sensor)
        r = self.rhythm_scaler.transform(rhythm)
        if self.kind == "logistic":
            return logistic_predict(self.params, s, r)
        return predict_proba(self.params, self.net, s, r)


def fit_model(samples, idx, cfg: EvalConfig, net: NetworkConfig, tc: TrainConfig, seed: int,
              selection: FeatureSelection | None = None) -> FittedModel:
    """Selection -> validation split -> replication -> standardization -> training, on ``idx`` only."""
    rng = np.random.default_rng(derive_seed(seed, "fit"))
    sel = selection or choose_features(samples, idx, cfg)
    fit_idx, val_idx = _split_validation(samples, list(idx), cfg.val_fraction, rng)
    s_fit, r_fit, y_fit = design_arrays(samples, fit_idx, sel, cfg)
    sensor_scaler = Standardizer.fit(s_fit)
    rhythm_scaler = Standardizer.fit(r_fit)
    order = balance_by_replication(y_fit)
    s_tr = sensor_scaler.transform(s_fit)[order]
    r_tr = rhythm_scaler.transform(r_fit)[order]
    y_tr = y_fit[order]
    val = None
    if val_idx:
        s_v, r_v, y_v = design_arrays(samples, val_idx, sel, cfg)
        val = (sensor_scaler.transform(s_v), rhythm_scaler.transform(r_v), y_v)

    if cfg.model == "logistic":
        params = logistic_fit(s_tr, r_tr, y_tr)
        return FittedModel("logistic", params, None, sel, sensor_scaler, rhythm_scaler)

    net = replace(net, seq_len=s_tr.shape[1], sensor_dim=len(sel.sensor), rhythm_dim=len(sel.rhythm))
    tc = replace(tc, seed=derive_seed(seed, "train") % (2 ** 63))
    params, tlog = train(net, tc, s_tr if net.uses_sensor else None,
                         r_tr if net.uses_rhythm else None, y_tr, val=val)
    return FittedModel("network", params, net, sel, sensor_scaler, rhythm_scaler, tlog)


# trivial baseline: logistic regression on window-averaged sensor + rhythm features


def _logistic_design(sensor, rhythm):
    return np.hstack([sensor.mean(axis=1), rhythm, np.ones((rhythm.shape[0], 1))])


def logistic_fit(sensor, rhythm, y, l2=1e-2, iters=500, lr=0.1) -> dict:
    X = _logistic_design(sensor, rhythm)
    w = np.zeros(X.shape[1])
    for _ in range(iters):
        p = 1.0 / (1.0 + np.exp(-(X @ w)))
        w -= lr * (X.T @ (p - y) / y.size + l2 * np.r_[w[:-1], 0.0])
    return {"w": w}


def logistic_predict(params, sensor, rhythm) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-(_logistic_design(sensor, rhythm) @ params["w"])))


# ---------------------------------------------------------------- cross-validation


@dataclass
class FoldResult:
    fold: int
    test_subjects: list[str]
    report: MetricReport
    model: FittedModel
    scores: list[float]
    labels: list[int]


def run_fold(samples, plan: FoldPlan, k: int, cfg: EvalConfig, net: NetworkConfig,
             tc: TrainConfig, global_selection: FeatureSelection | None = None) -> FoldResult:
    train_subj, test_subj = plan.train_test(k)
    tr_idx = [i for i, s in enumerate(samples) if s.subject_id in train_subj]
    te_idx = [i for i, s in enumerate(samples) if s.subject_id in test_subj]
    model = fit_model(samples, tr_idx, cfg, net, tc, derive_seed(plan.seed, "fold", k),
                      selection=global_selection)
    s_te, r_te, y_te = design_arrays(samples, te_idx, model.selection, cfg)
    scores = model.predict(s_te, r_te)
    rep = metrics(y_te, scores, cfg.threshold, cfg.beta)
    return FoldResult(k, sorted(test_subj), rep, model, [float(x) for x in scores],
                      [int(x) for x in y_te])


@dataclass
class CVReport:
    folds: list[FoldResult]
    aggregate: dict
    plan: FoldPlan

    def summary(self) -> dict:
        return {
            "folds": [{"fold": f.fold, "test_subjects": f.test_subjects,
                       "selected_sensor": f.model.selection.sensor,
                       "selected_rhythm": f.model.selection.rhythm,
                       "best_epoch": getattr(f.model.train_log, "best_epoch", None),
                       **f.report.to_dict()} for f in self.folds],
            "aggregate": self.aggregate,
        }


def _run_fold_star(args):
    return run_fold(*args)


def cross_validate(samples: list[Sample], seed: int, cfg: EvalConfig = EvalConfig(),
                   net: NetworkConfig = NetworkConfig(), tc: TrainConfig = TrainConfig(),
                   jobs: int = 1) -> CVReport:
    labels = _subject_labels(samples)
    counts = np.bincount(list(labels.values()), minlength=2)
    if counts.min() < cfg.n_folds:
        log.warning("only %d subjects in the smaller class for %d folds", counts.min(), cfg.n_folds)
    plan = plan_folds(labels, cfg.n_folds, seed)
    global_sel = None
    if cfg.global_ranking and cfg.features == "mi":
        # deliberately leaky: ranks on every sample, mirroring whole-dataset selection
        global_sel = choose_features(samples, list(range(len(samples))), cfg)
    args = [(samples, plan, k, cfg, net, tc, global_sel) for k in range(cfg.n_folds)]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            folds = list(pool.map(_run_fold_star, args))
    else:
        folds = [run_fold(*a) for a in args]
    return CVReport(folds, aggregate([f.report for f in folds]), plan)


# ---------------------------------------------------------------- experiment axes

AXES = {
    "overlap": (0.0, 0.25, 0.5),
    "heads": (0, 1, 2, 4, 8),
    "subseq": tuple(range(1, 48)),
    "period": (24, 48, 96),
}


def apply_axis(axis: str, value, cfg: EvalConfig, net: NetworkConfig):
    """Config pair for one grid point; overlap is handled by re-featurizing."""
    if axis == "heads":
        return cfg, replace(net, heads=int(value))
    if axis == "subseq":
        return replace(cfg, subseq_len=int(value)), net
    if axis == "period":
        return replace(cfg, period=int(value)), net
    if axis == "overlap":
        return cfg, net
    raise ValueError(f"unknown axis {axis!r}")


def sweep_rows(axis: str, value, report: CVReport) -> dict:
    row = {"axis": axis, "value": value}
    for name, stats in report.aggregate.items():
        row[f"{name}_mean"] = stats["mean"]
        row[f"{name}_std"] = stats["std"]
    return row
