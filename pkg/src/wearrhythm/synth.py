"""Seeded synthetic wearable cohorts with known rhythm parameters.

Heart rate per minute is a 24h cosine around a subject-specific mesor, plus an
activity-coupled rise and Gaussian noise. Steps come from a two-state
(rest/active) process with geometric dwell times during waking hours and sparse
restless movement during sleep. Infected subjects get a disruption applied to
the day before symptom onset only; the disruption draws from its own random
stream, so the undisrupted parts of a cohort do not change with it.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from datetime import date, timedelta
from pathlib import Path

import numpy as np

from .ingest import Status, SubjectStream, write_streams
from .preprocess import MINUTES_PER_DAY
from .seeding import derive_seed

NIGHT_HOURS = (0.0, 8.0)
DAYTIME_HOURS = (9.0, 20.0)  # bouts starting here are eligible for extra rest


@dataclass(frozen=True)
class Disruption:
    amp_damp_fraction: float = 0.0  # heart-rate rhythm amplitude multiplied by (1 - this)
    acrophase_shift_hours: float = 0.0
    extra_daytime_rest_fraction: float = 0.0  # share of daytime active bouts turned to rest
    rhr_night_delta: float = 0.0  # bpm added between 00:00 and 08:00

    def __post_init__(self):
        for name in ("amp_damp_fraction", "extra_daytime_rest_fraction"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")


@dataclass(frozen=True)
class CohortSpec:
    n_healthy: int = 70
    n_infected: int = 25
    n_days: int = 3
    start_date: str = "2020-03-02"
    # heart rate
    rhr_base: float = 62.0
    rhr_base_sd: float = 4.0
    rhr_amp: float = 6.0
    rhr_amp_sd: float = 0.8
    acrophase_hours: float = 16.0
    acrophase_sd: float = 1.0
    hr_activity_gain: float = 0.2  # bpm per step/minute
    hr_noise_std: float = 1.5
    # activity
    wake_hour: float = 7.0
    sleep_hour: float = 23.0
    wake_jitter_hours: float = 0.5
    active_bout_mean_minutes: float = 12.0
    rest_bout_mean_minutes: float = 25.0
    active_step_rate: float = 70.0  # steps/minute while active
    active_rate_sd: float = 10.0
    awake_rest_move_prob: float = 0.2  # chance of a few steps in a resting waking minute
    night_move_prob: float = 0.04  # chance of restless steps in a sleeping minute
    night_move_steps: float = 5.0
    missing_minutes_per_day: int = 0  # one contiguous gap per day, e.g. charging
    disruption: Disruption = field(default_factory=Disruption)
    seed: int = 0

    def __post_init__(self):
        if self.n_healthy < 0 or self.n_infected < 0:
            raise ValueError("subject counts must be non-negative")
        if self.n_infected and self.n_days < 2:
            raise ValueError("infected subjects need at least 2 days (onset and the day before)")
        if isinstance(self.disruption, dict):
            object.__setattr__(self, "disruption", Disruption(**self.disruption))

    def to_dict(self) -> dict:
        return asdict(self)


def _geometric_states(rng, n, mean_active, mean_rest, start_active=False):
    """Alternating rest/active runs with geometric lengths; returns a bool mask."""
    out = np.zeros(n, dtype=bool)
    i = 0
    active = start_active
    while i < n:
        mean = mean_active if active else mean_rest
        length = int(rng.geometric(1.0 / max(mean, 1.0)))
        out[i:i + length] = active
        i += length
        active = not active
    return out


def _runs(mask):
    """(start, stop) of every run of True."""
    edges = np.diff(np.concatenate([[0], mask.astype(int), [0]]))
    return list(zip(np.flatnonzero(edges == 1), np.flatnonzero(edges == -1)))


def _subject_params(spec: CohortSpec, rng) -> dict:
    return {
        "mesor": float(spec.rhr_base + spec.rhr_base_sd * rng.standard_normal()),
        "amplitude": float(max(0.0, spec.rhr_amp + spec.rhr_amp_sd * rng.standard_normal())),
        "acrophase_hours": float((spec.acrophase_hours + spec.acrophase_sd * rng.standard_normal()) % 24),
        "active_step_rate": float(max(10.0, spec.active_step_rate + spec.active_rate_sd * rng.standard_normal())),
        "wake_hour": float(spec.wake_hour + spec.wake_jitter_hours * rng.uniform(-1, 1)),
        "sleep_hour": float(spec.sleep_hour + spec.wake_jitter_hours * rng.uniform(-1, 1)),
    }


def _day_activity(spec: CohortSpec, sp: dict, rng):
    """Minute step counts and the waking-active mask for one day."""
    minute_hours = np.arange(MINUTES_PER_DAY) / 60.0
    awake = (minute_hours >= sp["wake_hour"]) & (minute_hours < sp["sleep_hour"])
    active = _geometric_states(rng, MINUTES_PER_DAY, spec.active_bout_mean_minutes,
                               spec.rest_bout_mean_minutes) & awake
    steps = np.zeros(MINUTES_PER_DAY)
    steps[active] = rng.poisson(sp["active_step_rate"], active.sum())
    idle = awake & ~active
    fidget = idle & (rng.random(MINUTES_PER_DAY) < spec.awake_rest_move_prob)
    steps[fidget] = rng.poisson(3.0, fidget.sum())
    restless = ~awake & (rng.random(MINUTES_PER_DAY) < spec.night_move_prob)
    steps[restless] = rng.poisson(spec.night_move_steps, restless.sum())
    return steps, active


def _heart_rate(spec: CohortSpec, mesor, amplitude, acrophase, steps, rng, night_delta=0.0):
    t = np.arange(MINUTES_PER_DAY) / 60.0
    hr = mesor + amplitude * np.cos(2 * np.pi * (t - acrophase) / 24.0)
    hr = hr + spec.hr_activity_gain * steps
    if night_delta:
        hr = hr + night_delta * ((t >= NIGHT_HOURS[0]) & (t < NIGHT_HOURS[1]))
    if spec.hr_noise_std > 0:
        hr = hr + spec.hr_noise_std * rng.standard_normal(MINUTES_PER_DAY)
    return np.clip(hr, 25.0, 245.0)


def generate(spec: CohortSpec):
    """Returns (list of SubjectStream, ground-truth dict)."""
    start = date.fromisoformat(spec.start_date)
    dis = spec.disruption
    streams = []
    truth = {"cohort": spec.to_dict(), "subjects": {}}
    width = len(str(max(spec.n_healthy + spec.n_infected - 1, 1)))
    for i in range(spec.n_healthy + spec.n_infected):
        infected = i >= spec.n_healthy
        sid = f"{'I' if infected else 'H'}{i:0{width}d}"
        rng = np.random.default_rng(derive_seed(spec.seed, "synth", "subject", i))
        sp = _subject_params(spec, rng)
        onset = start + timedelta(days=spec.n_days - 1) if infected else None
        labeled_idx = spec.n_days - 2 if infected else None

        hr_days, step_days, day_truth = [], [], []
        for d in range(spec.n_days):
            drng = np.random.default_rng(derive_seed(spec.seed, "synth", "day", i, d))
            steps, active = _day_activity(spec, sp, drng)
            mesor, amp, phase, night = sp["mesor"], sp["amplitude"], sp["acrophase_hours"], 0.0
            disrupted = infected and d == labeled_idx
            if disrupted:
                xrng = np.random.default_rng(derive_seed(spec.seed, "synth", "disrupt", i))
                day0, day1 = (int(h * 60) for h in DAYTIME_HOURS)
                for a, b in _runs(active):
                    if xrng.random() < dis.extra_daytime_rest_fraction and day0 <= a < day1:
                        steps[a:b] = 0.0
                amp = amp * (1.0 - dis.amp_damp_fraction)
                phase = (phase + dis.acrophase_shift_hours) % 24
                night = dis.rhr_night_delta
            hr = _heart_rate(spec, mesor, amp, phase, steps, drng, night)
            keep = np.ones(MINUTES_PER_DAY, dtype=bool)
            if spec.missing_minutes_per_day:
                g0 = int(drng.integers(0, MINUTES_PER_DAY - spec.missing_minutes_per_day + 1))
                keep[g0:g0 + spec.missing_minutes_per_day] = False
            hr_days.append(np.where(keep, hr, np.nan))
            step_days.append(steps)
            day_truth.append({"date": (start + timedelta(days=d)).isoformat(), "mesor": mesor,
                              "amplitude": amp, "acrophase_hours": phase,
                              "rhr_night_delta": night, "disrupted": disrupted,
                              "total_steps": float(steps.sum())})

        minutes = np.datetime64(start.isoformat(), "ms") + np.arange(
            spec.n_days * MINUTES_PER_DAY) * np.timedelta64(60_000, "ms")
        hr_all = np.concatenate(hr_days)
        ok = np.isfinite(hr_all)
        steps_all = np.concatenate(step_days)
        streams.append(SubjectStream(
            subject_id=sid,
            hr_times=minutes[ok],
            hr_bpm=hr_all[ok],
            step_times=minutes.copy(),
            step_counts=steps_all,
            status=Status.COVID if infected else Status.HEALTHY,
            symptom_onset=onset,
        ))
        truth["subjects"][sid] = {
            "status": "covid" if infected else "healthy",
            "symptom_onset": onset.isoformat() if onset else None,
            "params": sp,
            "days": day_truth,
        }
    return streams, truth


def write_cohort(out_dir, streams, truth, provenance: dict | None = None) -> dict[str, Path]:
    out_dir = Path(out_dir)
    comment = json.dumps({"provenance": provenance}, sort_keys=True) if provenance else None
    paths = write_streams(streams, out_dir, header_comment=comment)
    gt = dict(truth)
    if provenance:
        gt["provenance"] = provenance
    paths["ground_truth"] = out_dir / "ground_truth.json"
    paths["ground_truth"].write_text(json.dumps(gt, indent=2, sort_keys=True) + "\n")
    return paths
