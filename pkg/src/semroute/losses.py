"""Training losses: uncertainty-weighted main loss, cue-guided contrastive
loss, router distillation, and their unweighted sum.

These are the reference (plain numpy) definitions; the batched
differentiable versions in `graph.py` are checked against them.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .numerics import binary_cross_entropy, cosine, kl_divergence

WEIGHT_CLIP = (0.1, 1.0)  # per-option weight range after clipping


@dataclass
class LossBreakdown:
    main: float
    contrast: float
    distill: float
    total: float
    option_weights: list


def option_weight(unc: float) -> float:
    """1/(1+unc), clipped to [0.1, 1.0]."""
    if unc < 0.0:
        raise InvalidInputError("uncertainty must be non-negative")
    return float(np.clip(1.0 / (1.0 + unc), *WEIGHT_CLIP))


def main_loss(scores, label: int, uncs, temperature: float):
    """Per-option BCE, each option weighted by its cue confidence."""
    if not 0 <= label < len(scores):
        raise InvalidInputError(f"label {label} out of range for {len(scores)} options")
    if len(uncs) != len(scores):
        raise InvalidInputError("scores and uncertainties misaligned")
    weights = [option_weight(u) for u in uncs]
    loss = sum(
        w * binary_cross_entropy(s, 1 if j == label else 0, temperature)
        for j, (w, s) in enumerate(zip(weights, scores))
    )
    return float(loss), weights


def contrastive_loss(h_correct, h_wrong, c_pos, c_neg, lambda_c: float) -> float:
    """Pull the correct option's representation toward the positive cues,
    push the pooled wrong representation toward higher negative-cue cost."""
    return -lambda_c * (cosine(h_correct, c_pos) - cosine(h_wrong, c_neg))


def wrong_representation(reps, label: int) -> np.ndarray:
    """Score-weighted pooling of the incorrect options' representations.

    Weights are a softmax over the incorrect options' scores, so the result
    is always a convex combination.
    """
    wrong = [(r.score, r.aggregated) for j, r in enumerate(reps) if j != label]
    if not wrong:
        raise InvalidInputError("need at least one incorrect option")
    scores = np.array([s for s, _ in wrong])
    e = np.exp(scores - scores.max())
    omega = e / e.sum()
    return sum(w * h for w, h in zip(omega, (h for _, h in wrong)))


def distill_loss(g_teacher, g_student) -> float:
    """KL(teacher || student); the teacher side is a fixed target."""
    return kl_divergence(g_teacher, g_student)


def total_loss(main: float, contrast: float, distill: float) -> float:
    for v in (main, contrast, distill):
        if not np.isfinite(v):
            raise InvalidInputError("loss terms must be finite")
    return main + contrast + distill
