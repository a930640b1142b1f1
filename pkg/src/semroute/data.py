"""Synthetic multiple-choice embedding task.

Concepts are random unit centroids. Each sample's input embedding is a
rotated, noisy view of one centroid; option text embeddings sit near the
centroids of their concepts; cues are synthesized per option. The rotation
makes the input-to-concept map non-trivial so routing quality matters.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .cues import CueSet, CueTable, regenerate_if_uncertain, score_cue_set, synthesize_cues
from .errors import DataError, InvalidInputError
from .numerics import seeded_rng


@dataclass
class Sample:
    sample_id: str
    input_emb: np.ndarray
    options: list              # list of (text_emb, CueSet | None)
    correct: int
    category: str

    def __post_init__(self):
        if len(self.options) < 2:
            raise InvalidInputError("a sample needs at least 2 options")
        if not 0 <= self.correct < len(self.options):
            raise InvalidInputError("correct index out of range")


def _unit_rows(rng, n, d):
    m = rng.standard_normal((n, d))
    return m / np.linalg.norm(m, axis=1, keepdims=True)


def _random_rotation(rng, d):
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    return q * np.sign(np.diag(r))


def generate_dataset(config, seed: int):
    """Build (train, held_out) lists of fully cue-scored samples."""
    rng = seeded_rng(seed)
    d = config.d
    n_concepts = config.n_concepts
    if config.option_count > n_concepts:
        raise InvalidInputError(
            f"option_count {config.option_count} exceeds concept count {n_concepts}"
        )
    centroids = _unit_rows(rng, n_concepts, d)
    rotation = _random_rotation(rng, d)

    total = config.train_size + config.eval_size
    # exact class balance up to remainder, then shuffled
    concept_ids = np.resize(np.arange(n_concepts), total)
    rng.shuffle(concept_ids)

    samples = []
    for idx in range(total):
        c = int(concept_ids[idx])
        input_emb = (config.input_scale * centroids[c] @ rotation
                     + config.input_noise * rng.standard_normal(d))

        distractors = [j for j in range(n_concepts) if j != c]
        rng.shuffle(distractors)
        option_concepts = [c] + distractors[: config.option_count - 1]
        order = rng.permutation(config.option_count)
        option_concepts = [option_concepts[int(i)] for i in order]
        correct = option_concepts.index(c)

        options = []
        for oc in option_concepts:
            text_emb = centroids[oc] + config.option_noise * rng.standard_normal(d)
            distractor_pool = [j for j in range(n_concepts) if j != oc]
            neg_concept = int(distractor_pool[int(rng.integers(len(distractor_pool)))])

            def make_cues(_round=None, _oc=oc, _neg=neg_concept):
                return synthesize_cues(
                    config.cue_scale * centroids[_oc], config.cue_scale * centroids[_neg],
                    config.cue_scale * config.cue_noise, config.variant_count, rng,
                )

            cs = regenerate_if_uncertain(
                make_cues(), input_emb,
                threshold=config.unc_threshold,
                generator=make_cues,
                max_rounds=config.max_regen_rounds,
                only_variance=config.only_variance,
            )
            options.append((text_emb, cs))
        samples.append(Sample(
            sample_id=f"s{idx:05d}",
            input_emb=input_emb,
            options=options,
            correct=correct,
            category=f"c{c}",
        ))
    return samples[: config.train_size], samples[config.train_size:]


# -- dataset files ---------------------------------------------------------

def save_dataset(samples, path):
    """One JSON object per sample; cues are stored in the cue file instead."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"version": 1, "count": len(samples)}) + "\n")
        for s in samples:
            fh.write(json.dumps({
                "sample_id": s.sample_id,
                "input_emb": s.input_emb.tolist(),
                "options": [t.tolist() for t, _ in s.options],
                "correct": s.correct,
                "category": s.category,
            }) + "\n")


def load_dataset(path, cue_table: CueTable | None = None, only_variance: bool = False):
    """Load samples; if a cue table is given, attach and score its cues."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise DataError(f"dataset file {path} is empty")
    samples = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            input_emb = np.asarray(rec["input_emb"], dtype=np.float64)
            options = []
            for oid, text in enumerate(rec["options"]):
                cs = None
                if cue_table is not None and (rec["sample_id"], oid) in cue_table:
                    cs = score_cue_set(
                        cue_table.get(rec["sample_id"], oid), input_emb,
                        only_variance=only_variance,
                    )
                options.append((np.asarray(text, dtype=np.float64), cs))
            samples.append(Sample(
                sample_id=rec["sample_id"],
                input_emb=input_emb,
                options=options,
                correct=rec["correct"],
                category=rec["category"],
            ))
        except (KeyError, json.JSONDecodeError, TypeError) as exc:
            raise DataError(f"{path} line {lineno}: {exc}") from exc
    return samples


def cue_table_from_samples(samples, dim: int) -> CueTable:
    table = CueTable(dim=dim)
    for s in samples:
        for oid, (_, cs) in enumerate(s.options):
            if cs is not None:
                table.put(s.sample_id, oid, CueSet(cs.positive, cs.negative, cs.variants))
    return table
