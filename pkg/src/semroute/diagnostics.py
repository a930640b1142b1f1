"""Routing-quality metrics: semantic-alignment score, routing sharpness,
per-category routing variance, and expert selection-frequency heatmaps.

All outputs are plain CSV; plotting is left to external tools.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, InvalidRoutingError
from .numerics import cosine


@dataclass
class RoutingDiagnostics:
    sim: float
    sharpness: float
    per_category_variance: dict      # category -> raw variance (also kept x10)
    selection_frequency: np.ndarray  # (categories, E), rows ordered by category list
    categories: list


def sim_score(expert_outputs, gate, reference_direction) -> float:
    """Cosine between the gate-weighted Top-K representation and the
    reference semantic direction (the correct answer's cue difference)."""
    gate = np.asarray(gate, dtype=np.float64)
    if gate.size != len(expert_outputs):
        raise InvalidInputError("gate and expert outputs misaligned")
    h_topk = sum(w * h for w, h in zip(gate, expert_outputs))
    return cosine(h_topk, reference_direction)


def routing_sharpness(gate, topk, n_experts: int) -> float:
    """Mean gate weight of selected experts minus the unselected mean."""
    gate = np.asarray(gate, dtype=np.float64)
    if gate.size != n_experts:
        raise InvalidInputError("gate length must equal the expert count")
    selected = sorted(set(int(i) for i in topk))
    if len(selected) >= n_experts:
        raise InvalidRoutingError("sharpness undefined when every expert is selected")
    sel_mask = np.zeros(n_experts, dtype=bool)
    sel_mask[selected] = True
    return float(gate[sel_mask].mean() - gate[~sel_mask].mean())


def routing_variance(gates_by_category) -> dict:
    """Per-category mean (over experts) of the across-sample variance of
    each expert's gate weight. Returns raw values; report x10 for display."""
    out = {}
    for category, gates in gates_by_category.items():
        if len(gates) < 2:
            raise InvalidInputError(f"category {category!r} needs >= 2 samples")
        g = np.stack([np.asarray(v, dtype=np.float64) for v in gates])
        out[category] = float(np.var(g, axis=0, ddof=1).mean())
    return out


def selection_heatmap(decisions, n_experts: int):
    """Fraction of each category's samples whose Top-K contains each expert.

    `decisions` is a list of (category, topk). Returns (categories, matrix)
    with rows in sorted category order; every row sums to K.
    """
    if not decisions:
        raise InvalidInputError("empty decision log")
    categories = sorted({c for c, _ in decisions})
    counts = {c: np.zeros(n_experts) for c in categories}
    totals = {c: 0 for c in categories}
    for category, topk in decisions:
        totals[category] += 1
        for i in topk:
            counts[category][int(i)] += 1.0
    matrix = np.stack([counts[c] / totals[c] for c in categories])
    return categories, matrix


def write_heatmap_csv(path, categories, matrix):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["category"] + [f"expert{i}" for i in range(matrix.shape[1])])
        for category, row in zip(categories, matrix):
            writer.writerow([category] + [repr(float(v)) for v in row])


def read_heatmap_csv(path):
    with open(path, "r", newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    categories = [r[0] for r in rows[1:]]
    matrix = np.array([[float(v) for v in r[1:]] for r in rows[1:]])
    return categories, matrix


def write_diagnostics_csv(path, run_id, per_category, sim_mean, sharpness_by_category):
    """One row per category: run_id, category, sharpness, variance raw/x10, sim."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["run_id", "category", "sharpness", "variance_raw",
                         "variance_x10", "sim_mean"])
        for category in sorted(per_category):
            var = per_category[category]
            writer.writerow([
                run_id, category,
                repr(float(sharpness_by_category[category])),
                repr(float(var)), repr(float(10.0 * var)),
                repr(float(sim_mean)),
            ])
