"""Semantic cue handling: agreement/variance/uncertainty scoring,
the regeneration loop for unreliable cues, synthetic cue generation,
and the line-oriented JSON cue file used to cache cues across runs.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    CueFileError,
    InsufficientVariantsError,
    InvalidInputError,
    MissingCueError,
    RegenerationFailedError,
)
from .numerics import cosine

CUE_FILE_VERSION = 1


@dataclass
class CueSet:
    """Positive/negative cue embeddings plus paraphrase variants.

    Agreement, variance and uncertainty are unset (None) until the cue set
    is scored against an image embedding.
    """

    positive: np.ndarray
    negative: np.ndarray
    variants: list = field(default_factory=list)
    agreement: float | None = None
    variance: float | None = None
    uncertainty: float | None = None

    def __post_init__(self):
        self.positive = np.asarray(self.positive, dtype=np.float64)
        self.negative = np.asarray(self.negative, dtype=np.float64)
        self.variants = [np.asarray(v, dtype=np.float64) for v in self.variants]
        dims = {self.positive.shape, self.negative.shape} | {v.shape for v in self.variants}
        if len(dims) != 1:
            raise InvalidInputError(f"cue embeddings disagree on dimension: {dims}")

    @property
    def dim(self) -> int:
        return self.positive.shape[0]


def agreement(image_emb, positive, negative) -> float:
    """Positive-cue similarity minus negative-cue similarity, floored at 0."""
    return max(0.0, cosine(image_emb, positive) - cosine(image_emb, negative))


def cue_variance(image_emb, variants) -> float:
    """Unbiased sample variance of image-variant cosine similarities."""
    if len(variants) < 2:
        raise InsufficientVariantsError(f"need >= 2 variants, got {len(variants)}")
    sims = np.array([cosine(image_emb, v) for v in variants])
    return float(np.var(sims, ddof=1))


def uncertainty(agr: float, var: float, only_variance: bool = False) -> float:
    """Var / (1 + Agr); with `only_variance` the agreement term is dropped."""
    if agr < 0.0 or var < 0.0:
        raise InvalidInputError("agreement and variance must be non-negative")
    if only_variance:
        return var
    return var / (1.0 + agr)


def score_cue_set(cue_set: CueSet, image_emb, only_variance: bool = False) -> CueSet:
    """Return a copy with agreement/variance/uncertainty filled in."""
    agr = agreement(image_emb, cue_set.positive, cue_set.negative)
    var = cue_variance(image_emb, cue_set.variants)
    unc = uncertainty(agr, var, only_variance=only_variance)
    return replace(cue_set, agreement=agr, variance=var, uncertainty=unc)


def regenerate_if_uncertain(cue_set, image_emb, threshold, generator, max_rounds=3,
                            only_variance=False):
    """Regenerate cues until uncertainty drops below `threshold`.

    `generator(round_index)` must return a fresh CueSet deterministically.
    After `max_rounds` failed attempts the lowest-uncertainty candidate
    seen (input included) is returned.
    """
    if threshold <= 0.0:
        raise InvalidInputError("threshold must be positive")
    if max_rounds < 1:
        raise InvalidInputError("max_rounds must be at least 1")
    best = score_cue_set(cue_set, image_emb, only_variance=only_variance)
    if best.uncertainty <= threshold:
        return best
    for round_index in range(max_rounds):
        try:
            candidate = generator(round_index)
        except Exception as exc:  # noqa: BLE001 - contract: carry best seen
            raise RegenerationFailedError(
                f"cue generator failed on round {round_index}: {exc}", best_candidate=best
            ) from exc
        candidate = score_cue_set(candidate, image_emb, only_variance=only_variance)
        if candidate.uncertainty < best.uncertainty:
            best = candidate
        if best.uncertainty <= threshold:
            return best
    return best


def synthesize_cues(concept_centroid, distractor_centroid, noise_scale, variant_count,
                    rng) -> CueSet:
    """Desk-scale stand-in for external cue generation.

    Positive cues sit near the concept centroid, negative cues near a
    distractor centroid; variants are noisy paraphrases of the positive cue.
    """
    if noise_scale < 0.0:
        raise InvalidInputError("noise_scale must be non-negative")
    if variant_count < 2:
        raise InsufficientVariantsError("variant_count must be at least 2")
    centroid = np.asarray(concept_centroid, dtype=np.float64)
    distractor = np.asarray(distractor_centroid, dtype=np.float64)
    d = centroid.shape[0]
    positive = centroid + noise_scale * rng.standard_normal(d)
    negative = distractor + noise_scale * rng.standard_normal(d)
    variants = [positive + noise_scale * rng.standard_normal(d) for _ in range(variant_count)]
    return CueSet(positive=positive, negative=negative, variants=variants)


class CueTable:
    """Map from (sample_id, option_id) to CueSet; read-only after loading."""

    def __init__(self, dim: int):
        self.dim = int(dim)
        self._entries: dict[tuple[str, int], CueSet] = {}

    def put(self, sample_id: str, option_id: int, cue_set: CueSet):
        if cue_set.dim != self.dim:
            raise CueFileError(
                f"cue dimension {cue_set.dim} != table dimension {self.dim} "
                f"for ({sample_id!r}, {option_id})"
            )
        self._entries[(str(sample_id), int(option_id))] = cue_set

    def get(self, sample_id: str, option_id: int) -> CueSet:
        key = (str(sample_id), int(option_id))
        if key not in self._entries:
            raise MissingCueError(sample_id, option_id)
        return self._entries[key]

    def __contains__(self, key):
        return key in self._entries

    def __len__(self):
        return len(self._entries)

    def items(self):
        return self._entries.items()

    def __eq__(self, other):
        if not isinstance(other, CueTable) or self.dim != other.dim:
            return False
        if set(self._entries) != set(other._entries):
            return False
        for key, mine in self._entries.items():
            theirs = other._entries[key]
            if not (np.array_equal(mine.positive, theirs.positive)
                    and np.array_equal(mine.negative, theirs.negative)
                    and len(mine.variants) == len(theirs.variants)
                    and all(np.array_equal(a, b) for a, b in zip(mine.variants, theirs.variants))):
                return False
        return True


def save_cue_table(table: CueTable, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"dim": table.dim, "version": CUE_FILE_VERSION}) + "\n")
        for (sample_id, option_id), cs in sorted(table.items()):
            record = {
                "sample_id": sample_id,
                "option_id": option_id,
                "positive": cs.positive.tolist(),
                "negative": cs.negative.tolist(),
                "variants": [v.tolist() for v in cs.variants],
            }
            fh.write(json.dumps(record) + "\n")


def load_cue_table(path) -> CueTable:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise CueFileError("cue file is empty (missing header line)")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise CueFileError(f"line 1: header is not valid JSON: {exc}") from exc
    if not isinstance(header, dict) or "dim" not in header or "version" not in header:
        raise CueFileError("line 1: header must declare 'dim' and 'version'")
    if header["version"] != CUE_FILE_VERSION:
        raise CueFileError(f"unsupported cue file version {header['version']!r}")
    table = CueTable(dim=header["dim"])
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CueFileError(f"line {lineno}: invalid JSON: {exc}") from exc
        for fieldname in ("sample_id", "option_id", "positive", "negative", "variants"):
            if fieldname not in record:
                raise CueFileError(f"line {lineno}: missing field {fieldname!r}")
        cs = CueSet(
            positive=record["positive"],
            negative=record["negative"],
            variants=record["variants"],
        )
        table.put(record["sample_id"], record["option_id"], cs)
    return table
