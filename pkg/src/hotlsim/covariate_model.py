"""Context-conditioned reliability model for a surrogate detector.

The model is built offline from an annotated corpus: every ordered pair of
corpus samples (self-pairs included, N^2 pairs for N samples) gets a
similarity score from an injected, seeded generator.  Pairs are bucketed by
the query sample's covariate bin, and each bin keeps two empirical score
distributions: one over pairs where both members contain the target class
("match") and one over the rest ("non-match").

At runtime, an observed covariate vector is mapped to its bin and the model
answers: at a tolerated false-alarm rate, what fraction of matched-pair
scores clears the score threshold that non-matched pairs only exceed that
often?  Bins with too little training mass answer "unsupported", which
downstream policy treats as loss of reliability rather than as an error.
"""

from __future__ import annotations

import bisect
import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable

from .errors import EmptyCorpus, InvalidFpr, SchemaMismatch
from .seeding import stable_seed


# ---------------------------------------------------------------------------
# Schema and vectors


@dataclass(frozen=True)
class CategoricalAttribute:
    name: str
    labels: tuple[str, ...]

    def __post_init__(self):
        if not self.name:
            raise SchemaMismatch("attribute name must be non-empty")
        if len(self.labels) < 2:
            raise SchemaMismatch(f"categorical attribute {self.name!r} needs >= 2 labels")
        if len(set(self.labels)) != len(self.labels):
            raise SchemaMismatch(f"categorical attribute {self.name!r} has duplicate labels")


@dataclass(frozen=True)
class ContinuousAttribute:
    name: str
    lo: float
    hi: float
    bin_count: int

    def __post_init__(self):
        if not self.name:
            raise SchemaMismatch("attribute name must be non-empty")
        if not self.lo < self.hi:
            raise SchemaMismatch(f"continuous attribute {self.name!r} needs lo < hi")
        if self.bin_count < 1:
            raise SchemaMismatch(f"continuous attribute {self.name!r} needs bin_count >= 1")

    def bin_index(self, value: float) -> int:
        # equal-width bins; hi lands in the last bin
        width = (self.hi - self.lo) / self.bin_count
        idx = int((value - self.lo) / width)
        return min(max(idx, 0), self.bin_count - 1)


Attribute = CategoricalAttribute | ContinuousAttribute


@dataclass(frozen=True)
class CovariateSchema:
    """Ordered attribute definitions for the operating context."""

    attributes: tuple[Attribute, ...]

    def __post_init__(self):
        names = [a.name for a in self.attributes]
        if len(set(names)) != len(names):
            raise SchemaMismatch("attribute names must be unique")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(a.name for a in self.attributes)

    def validate_value(self, attr: Attribute, value: object) -> None:
        if isinstance(attr, CategoricalAttribute):
            if value not in attr.labels:
                raise SchemaMismatch(
                    f"value {value!r} not an allowed label of {attr.name!r}"
                )
        else:
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                raise SchemaMismatch(f"attribute {attr.name!r} expects a number")
            if not (attr.lo <= float(value) <= attr.hi):
                raise SchemaMismatch(
                    f"value {value!r} outside [{attr.lo}, {attr.hi}] for {attr.name!r}"
                )

    def validate_vector(self, vector: "CovariateVector") -> None:
        if len(vector.values) != len(self.attributes):
            raise SchemaMismatch(
                f"vector arity {len(vector.values)} != schema arity {len(self.attributes)}"
            )
        for attr, value in zip(self.attributes, vector.values):
            self.validate_value(attr, value)

    def bin_key(self, vector: "CovariateVector") -> str:
        """Canonical bin key, "attr=label|attr=binIndex|..." in schema order."""
        self.validate_vector(vector)
        tokens = []
        for attr, value in zip(self.attributes, vector.values):
            if isinstance(attr, CategoricalAttribute):
                tokens.append(f"{attr.name}={value}")
            else:
                tokens.append(f"{attr.name}={attr.bin_index(float(value))}")
        return "|".join(tokens)

    def vector_from_mapping(self, mapping: dict) -> "CovariateVector":
        """Build a vector from {attribute name: value}; unknown keys are errors."""
        unknown = set(mapping) - set(self.names)
        if unknown:
            raise SchemaMismatch(f"unknown covariate attributes: {sorted(unknown)}")
        missing = set(self.names) - set(mapping)
        if missing:
            raise SchemaMismatch(f"missing covariate attributes: {sorted(missing)}")
        vector = CovariateVector(tuple(mapping[name] for name in self.names))
        self.validate_vector(vector)
        return vector

    def vector_to_mapping(self, vector: "CovariateVector") -> dict:
        return {name: value for name, value in zip(self.names, vector.values)}

    def distance(self, a: "CovariateVector", b: "CovariateVector") -> float:
        """Normalized mismatch in [0, 1]: mean per-attribute distance.

        Categorical attributes contribute 0/1, continuous ones the absolute
        difference scaled by the attribute's range.
        """
        self.validate_vector(a)
        self.validate_vector(b)
        total = 0.0
        for attr, va, vb in zip(self.attributes, a.values, b.values):
            if isinstance(attr, CategoricalAttribute):
                total += 0.0 if va == vb else 1.0
            else:
                total += abs(float(va) - float(vb)) / (attr.hi - attr.lo)
        return total / len(self.attributes)


@dataclass(frozen=True)
class CovariateVector:
    """One observed value per schema attribute, in schema order."""

    values: tuple[object, ...]


@dataclass(frozen=True)
class AnnotatedSample:
    sample_id: str
    covariates: CovariateVector
    contains_target: bool


@dataclass(frozen=True)
class PairRecord:
    query_id: str
    gallery_id: str
    similarity: float
    matched: bool
    pair_covariates: CovariateVector


# ---------------------------------------------------------------------------
# Empirical score distributions


@dataclass(frozen=True)
class EmpiricalCdf:
    """Step CDF over a non-empty multiset of scores in [0, 1]."""

    sorted_scores: tuple[float, ...]

    def __post_init__(self):
        if not self.sorted_scores:
            raise ValueError("EmpiricalCdf needs at least one score")
        if any(b < a for a, b in zip(self.sorted_scores, self.sorted_scores[1:])):
            raise ValueError("scores must be nondecreasing")

    @classmethod
    def from_scores(cls, scores: Iterable[float]) -> "EmpiricalCdf":
        return cls(tuple(sorted(scores)))

    @property
    def count(self) -> int:
        return len(self.sorted_scores)

    def cdf(self, s: float) -> float:
        return bisect.bisect_right(self.sorted_scores, s) / self.count

    def survival(self, s: float) -> float:
        """Fraction of scores strictly greater than s."""
        n = self.count
        return (n - bisect.bisect_right(self.sorted_scores, s)) / n

    def inverse(self, q: float) -> float:
        """Smallest observed score s with cdf(s) >= q, for q in (0, 1]."""
        n = self.count
        lo, hi = 1, n
        while lo < hi:
            mid = (lo + hi) // 2
            if mid / n >= q:
                hi = mid
            else:
                lo = mid + 1
        return self.sorted_scores[lo - 1]

    def upper_quantile(self, fpr: float) -> float:
        """Smallest observed score s whose survival fraction is <= fpr."""
        scores = self.sorted_scores
        n = self.count
        lo, hi = 0, n - 1
        while lo < hi:
            mid = (lo + hi) // 2
            if (n - bisect.bisect_right(scores, scores[mid])) / n <= fpr:
                hi = mid
            else:
                lo = mid + 1
        return scores[lo]


# ---------------------------------------------------------------------------
# Similarity generation (surrogate for an embedding-distance model)

SimilarityGenerator = Callable[[AnnotatedSample, AnnotatedSample, bool], float]


@dataclass(frozen=True)
class SyntheticSimilarityGenerator:
    """Seeded stand-in for pairwise embedding similarity.

    Matched pairs score around ``matched_base``, non-matched around
    ``unmatched_base``; covariate distance between the two samples pulls the
    score down and a per-pair Gaussian perturbation is added.  The per-pair
    noise is derived by hashing (seed, query_id, gallery_id), so the score of
    a pair never depends on enumeration order.
    """

    schema: CovariateSchema
    seed: int
    matched_base: float = 0.75
    unmatched_base: float = 0.25
    covariate_weight: float = 0.15
    noise_sigma: float = 0.08

    def __call__(self, query: AnnotatedSample, gallery: AnnotatedSample, matched: bool) -> float:
        base = self.matched_base if matched else self.unmatched_base
        shift = self.covariate_weight * self.schema.distance(query.covariates, gallery.covariates)
        rng = random.Random(stable_seed(self.seed, "simpair", query.sample_id, gallery.sample_id))
        noisy = base - shift + rng.gauss(0.0, self.noise_sigma)
        return min(max(noisy, 0.0), 1.0)


# ---------------------------------------------------------------------------
# Training profile


@dataclass
class BinStats:
    match_cdf: EmpiricalCdf | None
    nonmatch_cdf: EmpiricalCdf | None
    support: int


@dataclass
class TrainingProfile:
    schema: CovariateSchema
    bins: dict[str, BinStats]
    min_support: int
    training_mass: dict[str, float] = field(default_factory=dict)

    def total_pairs(self) -> int:
        return sum(b.support for b in self.bins.values())


@dataclass(frozen=True)
class CoverageResult:
    score: float
    supported: bool


def build_profile(
    corpus: list[AnnotatedSample],
    schema: CovariateSchema,
    sim_gen: SimilarityGenerator,
    min_support: int = 10,
) -> TrainingProfile:
    """Enumerate all N^2 ordered pairs and bucket their scores by query bin."""
    if not corpus:
        raise EmptyCorpus("corpus is empty")
    if min_support < 1:
        raise ValueError("min_support must be >= 1")
    seen: set[str] = set()
    for sample in corpus:
        if sample.sample_id in seen:
            raise ValueError(f"duplicate sample_id {sample.sample_id!r}")
        seen.add(sample.sample_id)
        schema.validate_vector(sample.covariates)

    match_scores: dict[str, list[float]] = {}
    nonmatch_scores: dict[str, list[float]] = {}
    for query in corpus:
        key = schema.bin_key(query.covariates)
        match_scores.setdefault(key, [])
        nonmatch_scores.setdefault(key, [])
        for gallery in corpus:
            matched = query.contains_target and gallery.contains_target
            score = sim_gen(query, gallery, matched)
            if not 0.0 <= score <= 1.0:
                raise ValueError(f"similarity {score} outside [0, 1]")
            (match_scores if matched else nonmatch_scores)[key].append(score)

    bins: dict[str, BinStats] = {}
    for key in match_scores:
        m, nm = match_scores[key], nonmatch_scores[key]
        bins[key] = BinStats(
            match_cdf=EmpiricalCdf.from_scores(m) if m else None,
            nonmatch_cdf=EmpiricalCdf.from_scores(nm) if nm else None,
            support=len(m) + len(nm),
        )

    n = len(corpus)
    mass: dict[str, float] = {}
    for sample in corpus:
        key = schema.bin_key(sample.covariates)
        mass[key] = mass.get(key, 0.0) + 1.0 / n

    return TrainingProfile(schema=schema, bins=bins, min_support=min_support, training_mass=mass)


def conditional_tpr(profile: TrainingProfile, x: CovariateVector, fpr: float) -> float | None:
    """True-positive rate at a tolerated false-positive rate, given context x.

    The score threshold is set where the bin's non-match scores exceed it
    with frequency <= fpr; the returned value is the fraction of match
    scores above that threshold.  Returns None (unsupported) when the bin has
    no data, too little support, or lacks either score population — an
    out-of-distribution signal, not an error.
    """
    if not (0.0 < fpr < 1.0) or math.isnan(fpr):
        raise InvalidFpr(f"fpr must be in (0, 1), got {fpr}")
    key = profile.schema.bin_key(x)
    stats = profile.bins.get(key)
    if stats is None or stats.support < profile.min_support:
        return None
    if stats.match_cdf is None or stats.nonmatch_cdf is None:
        return None
    threshold = stats.nonmatch_cdf.upper_quantile(fpr)
    return stats.match_cdf.survival(threshold)


def coverage_score(profile: TrainingProfile, x: CovariateVector, operating_fpr: float) -> CoverageResult:
    """Scalar runtime-reliability score: conditional TPR, 0 when unsupported."""
    tpr = conditional_tpr(profile, x, operating_fpr)
    if tpr is None:
        return CoverageResult(score=0.0, supported=False)
    return CoverageResult(score=tpr, supported=True)


# ---------------------------------------------------------------------------
# JSON serialization


def schema_to_dict(schema: CovariateSchema) -> dict:
    out = []
    for attr in schema.attributes:
        if isinstance(attr, CategoricalAttribute):
            out.append({"name": attr.name, "kind": "categorical", "labels": list(attr.labels)})
        else:
            out.append({
                "name": attr.name, "kind": "continuous",
                "lo": attr.lo, "hi": attr.hi, "bin_count": attr.bin_count,
            })
    return {"attributes": out}


def schema_from_dict(data: dict) -> CovariateSchema:
    attrs: list[Attribute] = []
    for spec in data.get("attributes", []):
        kind = spec.get("kind")
        if kind == "categorical":
            attrs.append(CategoricalAttribute(spec["name"], tuple(spec["labels"])))
        elif kind == "continuous":
            attrs.append(ContinuousAttribute(
                spec["name"], float(spec["lo"]), float(spec["hi"]), int(spec["bin_count"]),
            ))
        else:
            raise SchemaMismatch(f"unknown attribute kind {kind!r}")
    if not attrs:
        raise SchemaMismatch("schema has no attributes")
    return CovariateSchema(tuple(attrs))


def load_schema(path: str | Path) -> CovariateSchema:
    with open(path, "r", encoding="utf-8") as fh:
        return schema_from_dict(json.load(fh))


def corpus_from_list(data: list, schema: CovariateSchema) -> list[AnnotatedSample]:
    corpus = []
    for entry in data:
        extra = set(entry) - {"sample_id", "covariates", "contains_target"}
        if extra:
            raise SchemaMismatch(f"unknown sample fields: {sorted(extra)}")
        corpus.append(AnnotatedSample(
            sample_id=str(entry["sample_id"]),
            covariates=schema.vector_from_mapping(entry["covariates"]),
            contains_target=bool(entry["contains_target"]),
        ))
    return corpus


def corpus_to_list(corpus: list[AnnotatedSample], schema: CovariateSchema) -> list:
    return [
        {
            "sample_id": s.sample_id,
            "covariates": schema.vector_to_mapping(s.covariates),
            "contains_target": s.contains_target,
        }
        for s in corpus
    ]


def load_corpus(path: str | Path, schema: CovariateSchema) -> list[AnnotatedSample]:
    with open(path, "r", encoding="utf-8") as fh:
        return corpus_from_list(json.load(fh), schema)


def profile_to_dict(profile: TrainingProfile) -> dict:
    return {
        "schema": schema_to_dict(profile.schema),
        "min_support": profile.min_support,
        "bins": {
            key: {
                "match_scores": list(b.match_cdf.sorted_scores) if b.match_cdf else None,
                "nonmatch_scores": list(b.nonmatch_cdf.sorted_scores) if b.nonmatch_cdf else None,
                "support": b.support,
            }
            for key, b in profile.bins.items()
        },
        "training_mass": dict(profile.training_mass),
    }


def profile_from_dict(data: dict) -> TrainingProfile:
    schema = schema_from_dict(data["schema"])
    bins = {}
    for key, spec in data["bins"].items():
        bins[key] = BinStats(
            match_cdf=EmpiricalCdf(tuple(spec["match_scores"])) if spec["match_scores"] else None,
            nonmatch_cdf=EmpiricalCdf(tuple(spec["nonmatch_scores"])) if spec["nonmatch_scores"] else None,
            support=int(spec["support"]),
        )
    return TrainingProfile(
        schema=schema,
        bins=bins,
        min_support=int(data["min_support"]),
        training_mass={k: float(v) for k, v in data["training_mass"].items()},
    )


def save_profile(profile: TrainingProfile, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(profile_to_dict(profile), fh, sort_keys=True)


def load_profile(path: str | Path) -> TrainingProfile:
    with open(path, "r", encoding="utf-8") as fh:
        return profile_from_dict(json.load(fh))
