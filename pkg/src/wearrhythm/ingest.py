"""CSV ingest of raw wearable streams and selection of labeled 24h samples.

File contract::

    heart_rate.csv   subject_id,timestamp,bpm
    steps.csv        subject_id,timestamp,steps
    labels.csv       subject_id,status,symptom_onset[,utc_offset_minutes]

Timestamps are ISO-8601; naive timestamps are read as UTC.
"""

from __future__ import annotations

import csv
import enum
import itertools
import logging
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta, timezone
from pathlib import Path

import numpy as np

from .errors import MissingColumn
from .preprocess import MAX_MISSING_MINUTES, MINUTES_PER_DAY, minute_grid
from .seeding import derive_seed

log = logging.getLogger(__name__)

HR_COLUMNS = ("subject_id", "timestamp", "bpm")
STEP_COLUMNS = ("subject_id", "timestamp", "steps")
LABEL_COLUMNS = ("subject_id", "status", "symptom_onset")
BPM_RANGE = (20.0, 250.0)


class Status(enum.Enum):
    HEALTHY = "healthy"
    COVID = "covid"


class Label(enum.IntEnum):
    HEALTHY = 0
    INFECTED = 1


@dataclass(eq=False)
class SubjectStream:
    subject_id: str
    hr_times: np.ndarray  # datetime64[ms], UTC, strictly increasing
    hr_bpm: np.ndarray
    step_times: np.ndarray
    step_counts: np.ndarray
    status: Status
    symptom_onset: date | None = None
    utc_offset_minutes: int = 0

    def same_as(self, other: "SubjectStream") -> bool:
        return (
            self.subject_id == other.subject_id
            and self.status == other.status
            and self.symptom_onset == other.symptom_onset
            and self.utc_offset_minutes == other.utc_offset_minutes
            and np.array_equal(self.hr_times, other.hr_times)
            and np.array_equal(self.hr_bpm, other.hr_bpm)
            and np.array_equal(self.step_times, other.step_times)
            and np.array_equal(self.step_counts, other.step_counts)
        )

    def local_day_start(self, day: date) -> np.datetime64:
        """UTC instant of local midnight opening ``day``."""
        midnight = datetime(day.year, day.month, day.day) - timedelta(minutes=self.utc_offset_minutes)
        return np.datetime64(midnight, "ms")


@dataclass(frozen=True)
class LabeledDayRef:
    subject_id: str
    day: date
    day_start: np.datetime64  # UTC instant of local 00:00
    label: Label


@dataclass(frozen=True)
class Diagnostic:
    kind: str  # UnparseableRow, DuplicateTimestamp, OutOfOrder, InfectedWithoutOnset, ...
    file: str
    line: int | None
    message: str
    level: str = "error"


@dataclass
class ParseResult:
    streams: dict[str, SubjectStream] = field(default_factory=dict)
    diagnostics: list[Diagnostic] = field(default_factory=list)

    def errors(self, kind=None):
        return [d for d in self.diagnostics
                if d.level == "error" and (kind is None or d.kind == kind)]


def parse_timestamp(text: str) -> np.datetime64:
    text = text.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    ts = datetime.fromisoformat(text)
    if ts.tzinfo is not None:
        ts = ts.astimezone(timezone.utc).replace(tzinfo=None)
    return np.datetime64(ts, "ms")


def _open_rows(path: Path, required):
    """Yield (line_number, row_dict); raise MissingColumn on a bad header."""
    with open(path, newline="") as fh:
        # leading "# ..." lines carry provenance and are skipped
        skipped = 0
        first = fh.readline()
        while first.startswith("#"):
            skipped += 1
            first = fh.readline()
        if not first.strip():
            return
        reader = csv.DictReader(itertools.chain([first], fh))
        missing = [c for c in required if c not in (reader.fieldnames or [])]
        if missing:
            raise MissingColumn(f"{path.name}: missing column(s) {', '.join(missing)}")
        for row in reader:
            yield reader.line_num + skipped, row


def _read_series(path: Path, value_col: str, convert, diagnostics):
    per_subject: dict[str, list[tuple[np.datetime64, float, int]]] = {}
    for line, row in _open_rows(path, ("subject_id", "timestamp", value_col)):
        try:
            sid = row["subject_id"].strip()
            if not sid:
                raise ValueError("empty subject_id")
            ts = parse_timestamp(row["timestamp"])
            value = convert(row[value_col])
        except (ValueError, TypeError, AttributeError) as exc:
            diagnostics.append(Diagnostic("UnparseableRow", path.name, line, str(exc)))
            continue
        per_subject.setdefault(sid, []).append((ts, value, line))

    out = {}
    for sid, rows in per_subject.items():
        times = [r[0] for r in rows]
        if any(b < a for a, b in zip(times, times[1:])):
            diagnostics.append(Diagnostic("OutOfOrder", path.name, None,
                                          f"{sid}: rows re-sorted by timestamp", "warning"))
        # stable sort by time keeps file order among equal stamps, so the later row wins below
        rows.sort(key=lambda r: r[0])
        dedup: list[tuple[np.datetime64, float, int]] = []
        for r in rows:
            if dedup and dedup[-1][0] == r[0]:
                diagnostics.append(Diagnostic(
                    "DuplicateTimestamp", path.name, r[2],
                    f"{sid}: duplicate timestamp {r[0]}, keeping the later row", "warning"))
                dedup[-1] = r
            else:
                dedup.append(r)
        out[sid] = (np.array([r[0] for r in dedup], dtype="datetime64[ms]"),
                    np.array([r[1] for r in dedup], dtype=float))
    return out


def _bpm(text: str) -> float:
    v = float(text)
    if not BPM_RANGE[0] < v < BPM_RANGE[1]:
        raise ValueError(f"bpm {v} outside {BPM_RANGE}")
    return v


def _count(text: str) -> float:
    v = float(text)
    if v < 0 or v != int(v):
        raise ValueError(f"step count {text!r} is not a non-negative integer")
    return v


def parse_streams(hr_path, steps_path, labels_path) -> ParseResult:
    """Read the three CSV files into one SubjectStream per labeled subject with heart-rate data."""
    hr_path, steps_path, labels_path = Path(hr_path), Path(steps_path), Path(labels_path)
    result = ParseResult()
    diags = result.diagnostics

    hr = _read_series(hr_path, "bpm", _bpm, diags)
    steps = _read_series(steps_path, "steps", _count, diags)

    labels = {}
    for line, row in _open_rows(labels_path, LABEL_COLUMNS):
        sid = (row["subject_id"] or "").strip()
        try:
            status = Status((row["status"] or "").strip().lower())
            onset_txt = (row["symptom_onset"] or "").strip()
            onset = date.fromisoformat(onset_txt) if onset_txt else None
            offset = int((row.get("utc_offset_minutes") or "0").strip() or 0)
        except ValueError as exc:
            diags.append(Diagnostic("UnparseableRow", labels_path.name, line, str(exc)))
            continue
        if status is Status.COVID and onset is None:
            diags.append(Diagnostic("InfectedWithoutOnset", labels_path.name, line,
                                    f"{sid}: covid status requires symptom_onset"))
            continue
        labels[sid] = (status, onset, offset)

    for sid in sorted(hr):
        if sid not in labels:
            diags.append(Diagnostic("UnlabeledSubject", hr_path.name, None,
                                    f"{sid}: no usable row in {labels_path.name}", "warning"))
            continue
        status, onset, offset = labels[sid]
        st, sv = steps.get(sid, (np.array([], dtype="datetime64[ms]"), np.array([], dtype=float)))
        result.streams[sid] = SubjectStream(sid, hr[sid][0], hr[sid][1], st, sv,
                                            status, onset, offset)
    return result


def _iso(times: np.ndarray) -> np.ndarray:
    return np.datetime_as_string(times, unit="auto", timezone="UTC")


def write_streams(streams, out_dir, header_comment: str | None = None) -> dict[str, Path]:
    """Serialize streams back to the ingest CSV contract."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {k: out_dir / f"{k}.csv" for k in ("heart_rate", "steps", "labels")}
    ordered = sorted(streams, key=lambda s: s.subject_id)

    def _fmt(v):
        return str(int(v)) if float(v).is_integer() else repr(float(v))

    with open(paths["heart_rate"], "w", newline="") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        fh.write(",".join(HR_COLUMNS) + "\n")
        for s in ordered:
            for t, v in zip(_iso(s.hr_times), s.hr_bpm):
                fh.write(f"{s.subject_id},{t},{_fmt(v)}\n")
    with open(paths["steps"], "w", newline="") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        fh.write(",".join(STEP_COLUMNS) + "\n")
        for s in ordered:
            for t, v in zip(_iso(s.step_times), s.step_counts):
                fh.write(f"{s.subject_id},{t},{int(v)}\n")
    with open(paths["labels"], "w", newline="") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LABEL_COLUMNS + ("utc_offset_minutes",))
        for s in ordered:
            onset = s.symptom_onset.isoformat() if s.symptom_onset else ""
            w.writerow([s.subject_id, s.status.value, onset, s.utc_offset_minutes])
    return paths


def covered_minutes(stream: SubjectStream, day: date) -> int:
    start = stream.local_day_start(day)
    off = (stream.hr_times - start).astype(np.int64)
    inside = off[(off >= 0) & (off < MINUTES_PER_DAY * 60_000)]
    return int(np.unique(inside // 60_000).size)


def day_passes_gate(stream: SubjectStream, day: date) -> bool:
    return MINUTES_PER_DAY - covered_minutes(stream, day) <= MAX_MISSING_MINUTES


def candidate_days(stream: SubjectStream) -> list[date]:
    """Local calendar days touched by any heart-rate sample."""
    if stream.hr_times.size == 0:
        return []
    local = stream.hr_times + np.timedelta64(stream.utc_offset_minutes, "m")
    days = np.unique(local.astype("datetime64[D]"))
    return [d.astype(object) for d in days]


def eligible_days(stream: SubjectStream) -> list[date]:
    return [d for d in candidate_days(stream) if day_passes_gate(stream, d)]


def select_labeled_days(streams, rng_seed: int) -> list[LabeledDayRef]:
    """One labeled 24h sample per subject.

    Infected samples are the day before symptom onset; healthy samples are a
    seeded uniform pick among days passing the coverage gate. Each subject's
    pick depends only on (seed, subject_id), so the result does not depend on
    iteration order. Subjects with no usable day are dropped with a warning.
    """
    if isinstance(streams, dict):
        streams = streams.values()
    refs = []
    for s in sorted(streams, key=lambda s: s.subject_id):
        if s.status is Status.COVID:
            day = s.symptom_onset - timedelta(days=1)
            if not day_passes_gate(s, day):
                log.warning("NoEligibleDay: %s day before onset (%s) fails the coverage gate",
                            s.subject_id, day)
                continue
            label = Label.INFECTED
        else:
            days = eligible_days(s)
            if not days:
                log.warning("NoEligibleDay: %s has no day passing the coverage gate", s.subject_id)
                continue
            rng = np.random.default_rng(derive_seed(rng_seed, "select_labeled_days", s.subject_id))
            day = days[int(rng.integers(len(days)))]
            label = Label.HEALTHY
        refs.append(LabeledDayRef(s.subject_id, day, s.local_day_start(day), label))
    return refs


def raw_day_minutes(stream: SubjectStream, ref: LabeledDayRef):
    """Heart-rate (NaN where missing) and step minute grids for a labeled day."""
    hr = minute_grid(stream.hr_times, stream.hr_bpm, ref.day_start, how="last")
    steps = minute_grid(stream.step_times, stream.step_counts, ref.day_start, how="sum")
    return hr, steps
