"""CSV/JSON artifacts written and re-read by the command-line stages.

Every CSV starts with one ``# {json}`` line holding provenance and record
metadata; readers return that header alongside the rows.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import numpy as np

from .errors import InputMissing
from .features import SENSOR_FEATURES
from .pipeline import RHYTHM_FEATURES, Sample
from .preprocess import DaySeries


def _num(v) -> str:
    v = float(v)
    return str(int(v)) if v.is_integer() else repr(v)


def _write_csv(path: Path, header: dict, columns, rows) -> Path:
    buf = io.StringIO()
    buf.write("# " + json.dumps(header, sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    w.writerows(rows)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(buf.getvalue())
    return path


def read_csv(path) -> tuple[dict, list[str], list[list[str]]]:
    """(header metadata, column names, rows as strings)."""
    path = Path(path)
    if not path.exists():
        raise InputMissing(f"file not found: {path}")
    lines = path.read_text().splitlines()
    meta = {}
    while lines and lines[0].startswith("#"):
        text = lines.pop(0)[1:].strip()
        try:
            meta.update(json.loads(text))
        except json.JSONDecodeError:
            pass
    rows = list(csv.reader(lines))
    if not rows:
        raise InputMissing(f"{path}: no header row")
    return meta, rows[0], rows[1:]


def _stem(subject_id: str, day: str) -> str:
    return f"{subject_id}_{day}"


# ---------------------------------------------------------------- day series


def write_day(out_dir, day: DaySeries, provenance: dict) -> Path:
    header = {"provenance": provenance, "subject_id": day.subject_id, "day": day.day,
              "label": day.label, "meta": day.meta}
    rows = ((m, _num(r), _num(s), "observed" if o else "interpolated")
            for m, (r, s, o) in enumerate(zip(day.rhr, day.steps, day.observed)))
    return _write_csv(Path(out_dir) / f"day_{_stem(day.subject_id, day.day)}.csv", header,
                      ("minute", "rhr", "steps", "provenance"), rows)


def read_day(path) -> DaySeries:
    meta, cols, rows = read_csv(path)
    if cols[:4] != ["minute", "rhr", "steps", "provenance"]:
        raise InputMissing(f"{path}: not a day-series file (columns {cols})")
    rhr = np.array([float(r[1]) for r in rows])
    steps = np.array([float(r[2]) for r in rows])
    observed = np.array([r[3] == "observed" for r in rows])
    return DaySeries(str(meta.get("subject_id", Path(path).stem)), str(meta.get("day", "")),
                     rhr, steps, observed, meta.get("label"), dict(meta.get("meta") or {}))


def day_files(directory) -> list[Path]:
    return sorted(Path(directory).glob("day_*.csv"))


# ---------------------------------------------------------------- features


def write_sample(out_dir, sample: Sample, window_starts, provenance: dict) -> tuple[Path, Path]:
    out_dir = Path(out_dir)
    stem = _stem(sample.subject_id, sample.day)
    header = {"provenance": provenance, "subject_id": sample.subject_id, "day": sample.day,
              "label": sample.label}
    f_rows = ([i, int(s), *map(_num, row)]
              for i, (s, row) in enumerate(zip(window_starts, sample.sensor)))
    fp = _write_csv(out_dir / f"features_{stem}.csv", {**header},
                    ("window", "start_minute", *SENSOR_FEATURES), f_rows)
    periods = sorted(sample.rhythm)
    cols = [f"{name}.{p}" for p in periods for name in RHYTHM_FEATURES]
    values = [_num(v) for p in periods for v in sample.rhythm[p]]
    rp = _write_csv(out_dir / f"rhythms_{stem}.csv", {**header, "flags": sample.flags},
                    cols, [values])
    return fp, rp


def read_sample(features_path, rhythms_path) -> Sample:
    meta, cols, rows = read_csv(features_path)
    if cols[2:] != list(SENSOR_FEATURES):
        raise InputMissing(f"{features_path}: unexpected feature columns")
    sensor = np.array([[float(v) for v in r[2:]] for r in rows])
    rmeta, rcols, rrows = read_csv(rhythms_path)
    flat = np.array([float(v) for v in rrows[0]])
    rhythm = {}
    n = len(RHYTHM_FEATURES)
    for i in range(0, len(rcols), n):
        period = int(rcols[i].rsplit(".", 1)[1])
        rhythm[period] = flat[i:i + n]
    label = meta.get("label")
    return Sample(str(meta["subject_id"]), str(meta["day"]), -1 if label is None else int(label),
                  sensor, rhythm, list(rmeta.get("flags", [])))


def sample_files(directory) -> list[tuple[Path, Path]]:
    directory = Path(directory)
    pairs = []
    for fp in sorted(directory.glob("features_*.csv")):
        rp = directory / ("rhythms_" + fp.name[len("features_"):])
        if not rp.exists():
            raise InputMissing(f"missing rhythm file for {fp.name}")
        pairs.append((fp, rp))
    return pairs


# ---------------------------------------------------------------- json


def write_json(path, data) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, sort_keys=True, allow_nan=False) + "\n")
    return path


def write_table(path, header: dict, columns, rows) -> Path:
    return _write_csv(Path(path), header, columns,
                      ([_num(v) if isinstance(v, (float, np.floating)) else
                        ("" if v is None else v) for v in row] for row in rows))
