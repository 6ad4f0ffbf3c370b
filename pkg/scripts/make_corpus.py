"""Regenerate the shipped river corpus and covariate schema.

The corpus deliberately contains no snowy-weather samples: missions run
under snow must therefore land in an unsupported covariate bin and trip the
coverage arm of the reliability check.
"""

from __future__ import annotations

import json
import random
from pathlib import Path

OUT_DIR = Path(__file__).resolve().parent.parent / "scenarios"

SCHEMA = {
    "attributes": [
        {"name": "weather", "kind": "categorical", "labels": ["clear", "rain", "snow"]},
        {"name": "daylight", "kind": "categorical", "labels": ["day", "night"]},
        {"name": "terrain", "kind": "categorical", "labels": ["water", "bank"]},
    ]
}

# snow is intentionally absent
TRAINING_BINS = [
    ("clear", "day", "water"),
    ("clear", "day", "bank"),
    ("clear", "night", "water"),
    ("clear", "night", "bank"),
    ("rain", "day", "water"),
    ("rain", "day", "bank"),
    ("rain", "night", "water"),
    ("rain", "night", "bank"),
]

SAMPLES_PER_BIN = 7
POSITIVE_PER_BIN = 4
EXTRA_CLEAR_DAY_WATER = 4


def main() -> None:
    rng = random.Random(20260101)
    corpus = []
    idx = 0
    for weather, daylight, terrain in TRAINING_BINS:
        for j in range(SAMPLES_PER_BIN):
            idx += 1
            corpus.append({
                "sample_id": f"river-{idx:03d}",
                "covariates": {"weather": weather, "daylight": daylight, "terrain": terrain},
                "contains_target": j < POSITIVE_PER_BIN,
            })
    for _ in range(EXTRA_CLEAR_DAY_WATER):
        idx += 1
        corpus.append({
            "sample_id": f"river-{idx:03d}",
            "covariates": {"weather": "clear", "daylight": "day", "terrain": "water"},
            "contains_target": rng.random() < 0.5,
        })

    OUT_DIR.mkdir(parents=True, exist_ok=True)
    with open(OUT_DIR / "river_schema.json", "w", encoding="utf-8") as fh:
        json.dump(SCHEMA, fh, indent=2)
        fh.write("\n")
    with open(OUT_DIR / "river_corpus.json", "w", encoding="utf-8") as fh:
        json.dump(corpus, fh, indent=2)
        fh.write("\n")
    print(f"wrote {len(corpus)} samples to {OUT_DIR}")


if __name__ == "__main__":
    main()
