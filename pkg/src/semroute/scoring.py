"""Option-aware reweighting of the shared Top-K experts and answer scoring.

One Top-K set is selected per sample; every option reuses it and only
reweights within it. Teacher mode derives each option's direction from its
cue difference; student mode derives it from the option text embedding via
the same semantic projection (cue-free inference).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, InvalidRoutingError, MissingCueError, ShapeError
from .model import Model, base_logits, expert_forward, route, semantic_direction
from .numerics import cosine, softmax


@dataclass
class OptionRepresentation:
    option_gate: np.ndarray   # distribution over the K selected experts
    aggregated: np.ndarray    # gate-weighted sum of expert outputs (dim d)
    score: float              # cosine against the option text embedding


def option_gate(routing_logits, topk, s_j, lambda_o: float) -> np.ndarray:
    """Softmax over the Top-K entries of (routing_logits + lambda_o * s_j).

    Only the topk components of s_j are read; the result is a distribution
    over exactly K entries, ordered like `topk`.
    """
    if len(topk) == 0:
        raise InvalidRoutingError("empty Top-K set")
    routing_logits = np.asarray(routing_logits, dtype=np.float64)
    s_j = np.asarray(s_j, dtype=np.float64)
    if s_j.shape != routing_logits.shape:
        raise ShapeError("direction length must match logits length")
    if lambda_o < 0.0:
        raise InvalidInputError("lambda_o must be non-negative")
    idx = list(topk)
    return softmax(routing_logits[idx] + lambda_o * s_j[idx])


def aggregate(gate, expert_outputs) -> np.ndarray:
    """Convex combination of the selected expert outputs."""
    gate = np.asarray(gate, dtype=np.float64)
    if gate.size != len(expert_outputs):
        raise ShapeError(f"{gate.size} weights for {len(expert_outputs)} outputs")
    return sum(w * h for w, h in zip(gate, expert_outputs))


def score_option(aggregated, option_text_emb) -> float:
    return cosine(aggregated, option_text_emb)


def predict(scores) -> int:
    """Highest-scoring option; ties go to the lower index."""
    if len(scores) == 0:
        raise InvalidInputError("no scores to predict from")
    return int(np.argmax(scores))


def score_all_options(sample, model: Model, mode: str,
                      lambda_a: float = 0.5, lambda_o: float = 0.5):
    """Score every option of a sample under one shared Top-K selection.

    Returns (GatingDecision, list of OptionRepresentation).
    """
    if mode not in ("teacher", "student"):
        raise InvalidInputError(f"unknown mode {mode!r}")
    w_sem = model.params["semantic"]

    if mode == "teacher":
        correct_cues = sample.options[sample.correct][1]
        if correct_cues is None:
            raise MissingCueError(sample.sample_id, sample.correct)
        s_a = semantic_direction(correct_cues.positive, correct_cues.negative, w_sem)
        decision = route(sample.input_emb, model, s_a, lambda_a, mode="teacher")
        routing_logits = decision.teacher_logits
    else:
        decision = route(sample.input_emb, model, None, 0.0, mode="student")
        routing_logits = decision.base_logits

    outputs = expert_forward(sample.input_emb, model, decision.topk)

    reps = []
    for oid, (text_emb, cue_set) in enumerate(sample.options):
        if mode == "teacher":
            if cue_set is None:
                raise MissingCueError(sample.sample_id, oid)
            s_j = semantic_direction(cue_set.positive, cue_set.negative, w_sem)
        else:
            s_j = base_logits(text_emb, w_sem)
        gate = option_gate(routing_logits, decision.topk, s_j, lambda_o)
        agg = aggregate(gate, outputs)
        reps.append(OptionRepresentation(
            option_gate=gate,
            aggregated=agg,
            score=score_option(agg, text_emb),
        ))
    return decision, reps
