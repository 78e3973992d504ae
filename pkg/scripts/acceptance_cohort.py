"""Cross-validate the 70/25 synthetic cohort with each input branch.

Writes one JSON summary per branch plus a comparison table to --out.

    python3 scripts/acceptance_cohort.py --out runs/cohort --inputs both sensor rhythm
"""

import argparse
import json
import time
from dataclasses import replace
from pathlib import Path

from wearrhythm.artifacts import write_json
from wearrhythm.cli import _featurize_all
from wearrhythm.evaluation import EvalConfig, cross_validate
from wearrhythm.network import NetworkConfig
from wearrhythm.pipeline import FeatureConfig, labeled_day_series
from wearrhythm.seeding import derive_seed
from wearrhythm.synth import CohortSpec, Disruption, generate
from wearrhythm.training import TrainConfig

COHORT = CohortSpec(70, 25, disruption=Disruption(0.5, 0.0, 0.5, 3.0), seed=42)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs/cohort")
    ap.add_argument("--inputs", nargs="+", default=["both", "sensor", "rhythm"],
                    choices=("both", "sensor", "rhythm"))
    ap.add_argument("--seed", type=int, default=42, help="cross-validation seed")
    ap.add_argument("--features", default="paper-top10", choices=("paper-top10", "mi"))
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    t0 = time.perf_counter()
    streams, _ = generate(COHORT)
    days = labeled_day_series(streams, derive_seed(args.seed, "ingest"))
    samples = _featurize_all(days, FeatureConfig(), args.jobs)
    print(f"featurized {len(samples)} samples in {time.perf_counter() - t0:.1f}s")

    table = {}
    for inputs in args.inputs:
        t0 = time.perf_counter()
        report = cross_validate(samples, args.seed, EvalConfig(features=args.features),
                                replace(NetworkConfig(), inputs=inputs), TrainConfig(), args.jobs)
        elapsed = time.perf_counter() - t0
        summary = report.summary()
        write_json(out / f"summary_{inputs}.json", {"cohort": COHORT.to_dict(), "inputs": inputs,
                                                    "seconds": round(elapsed, 1), **summary})
        table[inputs] = {k: v["mean"] for k, v in summary["aggregate"].items()}
        print(f"{inputs:>6}: " + "  ".join(f"{k}={v:.4f}" for k, v in table[inputs].items())
              + f"  ({elapsed:.0f}s)")
    write_json(out / "comparison.json", table)


if __name__ == "__main__":
    main()
