"""Streams -> labeled day series -> per-sample sensor matrices and rhythm vectors."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import DayRejected
from .features import SENSOR_FEATURES, feature_matrix
from .ingest import LabeledDayRef, SubjectStream, raw_day_minutes, select_labeled_days
from .preprocess import DaySeries, WindowSpec, build_day_series, window_starts
from .rhythms import MSEParams, rhythm_matrix, rhythm_names

log = logging.getLogger(__name__)

RHYTHM_FEATURES = tuple(rhythm_names(SENSOR_FEATURES))


@dataclass(frozen=True)
class FeatureConfig:
    window: WindowSpec = field(default_factory=WindowSpec)
    sma_minutes: int = 5
    periods: tuple[int, ...] = (24,)
    mse: MSEParams = field(default_factory=MSEParams)


@dataclass
class Sample:
    subject_id: str
    day: str
    label: int
    sensor: np.ndarray  # (n_windows, 39)
    rhythm: dict[int, np.ndarray]  # period -> (351,)
    flags: list[str] = field(default_factory=list)


def day_series_for(stream: SubjectStream, ref: LabeledDayRef, sma_minutes: int = 5) -> DaySeries:
    hr, steps = raw_day_minutes(stream, ref)
    return build_day_series(hr, steps, subject_id=stream.subject_id, day=ref.day.isoformat(),
                            sma_minutes=sma_minutes, label=int(ref.label))


def labeled_day_series(streams, seed: int, sma_minutes: int = 5) -> list[DaySeries]:
    if isinstance(streams, dict):
        streams = list(streams.values())
    by_id = {s.subject_id: s for s in streams}
    days = []
    for ref in select_labeled_days(streams, seed):
        try:
            days.append(day_series_for(by_id[ref.subject_id], ref, sma_minutes))
        except DayRejected as exc:
            log.warning("dropping %s: %s", ref.subject_id, exc)
    return days


def featurize_day(day: DaySeries, cfg: FeatureConfig = FeatureConfig()) -> Sample:
    spec = cfg.window
    sensor = feature_matrix(day.rhr, day.steps, spec)
    starts = window_starts(len(day.rhr), spec)
    rhythm = {}
    flags = []
    for period in cfg.periods:
        vec, f = rhythm_matrix(sensor, starts, spec.width_minutes, spec.step_minutes, period,
                               cfg.mse, SENSOR_FEATURES)
        rhythm[int(period)] = vec
        flags += [f"{period}h:{x}" for x in f]
    label = -1 if day.label is None else int(day.label)
    return Sample(day.subject_id, day.day, label, sensor, rhythm, flags)


def featurize_days(days, cfg: FeatureConfig = FeatureConfig()) -> list[Sample]:
    return [featurize_day(d, cfg) for d in days]
