"""Sweep the conditional TPR across operating contexts and fpr settings.

Prints, for every covariate bin of the shipped river corpus, the reliability
score the runtime lookup would return at several tolerated false-alarm
rates, plus the training mass behind it.  Handy for choosing the
covariate_coverage threshold of a scenario.
"""

from __future__ import annotations

from pathlib import Path

from hotlsim.covariate_model import (
    SyntheticSimilarityGenerator,
    build_profile,
    conditional_tpr,
    load_corpus,
    load_schema,
)

ROOT = Path(__file__).resolve().parent.parent / "scenarios"
FPRS = [0.01, 0.05, 0.1, 0.2]


def main() -> None:
    schema = load_schema(ROOT / "river_schema.json")
    corpus = load_corpus(ROOT / "river_corpus.json", schema)
    gen = SyntheticSimilarityGenerator(schema=schema, seed=7)
    profile = build_profile(corpus, schema, gen, min_support=10)

    header = "bin".ljust(42) + "mass".rjust(7) + "".join(f"tpr@{f}".rjust(10) for f in FPRS)
    print(header)
    print("-" * len(header))
    for key in sorted(profile.bins):
        mapping = dict(token.split("=") for token in key.split("|"))
        vector = schema.vector_from_mapping(mapping)
        row = key.ljust(42) + f"{profile.training_mass.get(key, 0.0):7.3f}"
        for fpr in FPRS:
            tpr = conditional_tpr(profile, vector, fpr)
            row += ("  unsupp.".rjust(10) if tpr is None else f"{tpr:10.3f}")
        print(row)

    # a context the corpus never saw
    snow = schema.vector_from_mapping(
        {"weather": "snow", "daylight": "day", "terrain": "water"}
    )
    print()
    print("snow/day/water:", conditional_tpr(profile, snow, 0.05),
          "(unsupported -> coverage score 0, loss of reliability)")


if __name__ == "__main__":
    main()
