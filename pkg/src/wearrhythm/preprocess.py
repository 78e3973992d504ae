"""Minute-level day series: resting heart rate, gap handling, smoothing, windows."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import AllMissing, DayRejected, EmptySeries, InvalidSpec, LengthMismatch

log = logging.getLogger(__name__)

MINUTES_PER_DAY = 1440
MAX_MISSING_MINUTES = 144  # 10% of a day
RHR_LOOKAHEAD = 6  # minutes k..k+5


@dataclass(frozen=True)
class WindowSpec:
    width_minutes: int = 60
    overlap_fraction: float = 0.5

    def __post_init__(self):
        if self.width_minutes <= 0:
            raise InvalidSpec(f"window width must be positive, got {self.width_minutes}")
        if not 0.0 <= self.overlap_fraction < 1.0:
            raise InvalidSpec(f"overlap must lie in [0, 1), got {self.overlap_fraction}")
        step = self.width_minutes * (1.0 - self.overlap_fraction)
        if abs(step - round(step)) > 1e-9 or round(step) < 1:
            raise InvalidSpec(
                f"width {self.width_minutes} with overlap {self.overlap_fraction} "
                f"gives non-integer step {step}"
            )

    @property
    def step_minutes(self) -> int:
        return int(round(self.width_minutes * (1.0 - self.overlap_fraction)))


@dataclass
class DaySeries:
    """One gap-free, smoothed 24h record at minute resolution."""

    subject_id: str
    day: str
    rhr: np.ndarray
    steps: np.ndarray
    observed: np.ndarray  # True where heart rate was measured, False where interpolated
    label: int | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.rhr)
        if len(self.steps) != n or len(self.observed) != n:
            raise LengthMismatch("rhr, steps and provenance must have equal length")

    @property
    def interpolated_fraction(self) -> float:
        return float(1.0 - np.mean(self.observed))


def resting_heart_rate(hr, steps) -> np.ndarray:
    """Resting heart rate per minute.

    A minute counts as resting when the step total over it and the following
    five minutes is zero; the lookahead is clamped at the end of the series.
    Non-resting minutes repeat the most recent resting value, which starts at 0.
    """
    hr = np.asarray(hr, dtype=float)
    steps = np.asarray(steps, dtype=float)
    if hr.shape != steps.shape:
        raise LengthMismatch(f"hr has {hr.size} samples, steps has {steps.size}")
    n = hr.size
    csum = np.concatenate([[0.0], np.cumsum(steps)])
    stop = np.minimum(np.arange(n) + RHR_LOOKAHEAD, n)
    resting = (csum[stop] - csum[:n]) == 0

    out = np.empty(n)
    pre_hr = 0.0
    for k in range(n):
        if resting[k]:
            pre_hr = hr[k]
        out[k] = pre_hr
    return out


def gate_missing(hr_minutes) -> bool:
    """Accept a raw day unless more than 10% of its minutes are missing (NaN)."""
    hr_minutes = np.asarray(hr_minutes, dtype=float)
    missing = int(np.count_nonzero(~np.isfinite(hr_minutes)))
    missing += max(0, MINUTES_PER_DAY - hr_minutes.size)
    return missing <= MAX_MISSING_MINUTES


def interpolate_linear(values):
    """Fill NaN gaps by linear interpolation between bracketing observations.

    Leading and trailing gaps take the nearest observed value.

    Returns
    -------
    filled : ndarray
    observed : ndarray of bool
    """
    values = np.asarray(values, dtype=float)
    observed = np.isfinite(values)
    if not observed.any():
        raise AllMissing("no observed values to interpolate from")
    if observed.all():
        return values.copy(), observed
    x = np.arange(values.size)
    filled = np.interp(x, x[observed], values[observed])
    return filled, observed


def smooth_sma(series, window: int) -> np.ndarray:
    """Trailing simple moving average over ``window`` points, current point included.

    The first ``window - 1`` outputs average whatever prefix is available.
    """
    x = np.asarray(series, dtype=float)
    if x.size == 0:
        raise EmptySeries("cannot smooth an empty series")
    if window < 1:
        raise InvalidSpec(f"SMA window must be >= 1, got {window}")
    if window == 1:
        return x.copy()
    csum = np.concatenate([[0.0], np.cumsum(x)])
    idx = np.arange(1, x.size + 1)
    lo = np.maximum(idx - window, 0)
    return (csum[idx] - csum[lo]) / (idx - lo)


def window_starts(n_minutes: int, spec: WindowSpec) -> np.ndarray:
    if n_minutes < spec.width_minutes:
        raise InvalidSpec(f"series of {n_minutes} minutes is shorter than one window")
    count = (n_minutes - spec.width_minutes) // spec.step_minutes + 1
    return np.arange(count) * spec.step_minutes


def segment(values, spec: WindowSpec) -> list[np.ndarray]:
    """Slice a minute series into overlapping windows (views, in time order)."""
    values = np.asarray(values)
    return [values[s:s + spec.width_minutes] for s in window_starts(values.shape[0], spec)]


def minute_grid(times, values, day_start, how="last"):
    """Bin timestamped samples onto the 1440 minutes starting at ``day_start``.

    ``how="last"`` keeps the last sample inside each minute and leaves empty
    minutes as NaN; ``how="sum"`` adds samples and leaves empty minutes at 0.
    """
    times = np.asarray(times, dtype="datetime64[ms]")
    values = np.asarray(values, dtype=float)
    start = np.datetime64(day_start, "ms")
    offset = (times - start).astype("timedelta64[ms]").astype(np.int64)
    keep = (offset >= 0) & (offset < MINUTES_PER_DAY * 60_000)
    idx = offset[keep] // 60_000
    vals = values[keep]
    if how == "sum":
        return np.bincount(idx, weights=vals, minlength=MINUTES_PER_DAY).astype(float)
    out = np.full(MINUTES_PER_DAY, np.nan)
    if idx.size:
        # input is time-sorted, so the last entry of each run of equal minutes wins
        last = np.r_[idx[1:] != idx[:-1], True]
        out[idx[last]] = vals[last]
    return out


def build_day_series(hr_minutes, step_minutes, *, subject_id="", day="", sma_minutes=5,
                     label=None) -> DaySeries:
    """Raw minute grids -> gated, interpolated, RHR-converted, smoothed day.

    Raises
    ------
    DayRejected
        When more than 10% of heart-rate minutes are missing.
    """
    hr_minutes = np.asarray(hr_minutes, dtype=float)
    step_minutes = np.nan_to_num(np.asarray(step_minutes, dtype=float), nan=0.0)
    if not gate_missing(hr_minutes):
        n_missing = int(np.count_nonzero(~np.isfinite(hr_minutes)))
        raise DayRejected(f"{subject_id} {day}: {n_missing} of {MINUTES_PER_DAY} minutes missing")
    hr_filled, observed = interpolate_linear(hr_minutes)
    rhr = resting_heart_rate(hr_filled, step_minutes)
    meta = {"sma_minutes": sma_minutes, "begins_active": bool(rhr[0] == 0.0)}
    if meta["begins_active"]:
        log.info("%s %s begins active; leading resting heart rate is 0 until first rest",
                 subject_id, day)
    return DaySeries(
        subject_id=subject_id,
        day=day,
        rhr=smooth_sma(rhr, sma_minutes),
        steps=smooth_sma(step_minutes, sma_minutes),
        observed=observed,
        label=label,
        meta=meta,
    )
