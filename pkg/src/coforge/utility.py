"""Latent utility fitting from pairwise preferences.

The estimator is Bradley-Terry maximum likelihood with an L2 penalty:
maximize Σ w·log σ(θ_w − θ_l) − λ‖θ‖² over score vectors θ, where
P(i beats j) = σ(θ_i − θ_j). The penalty keeps the optimum finite even for
undefeated items and pins the translation gauge at mean zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal, Optional, Sequence

import numpy as np

from .errors import ValidationError
from .model import ConstructionGraph

PreferenceSource = Literal["human", "judge"]


@dataclass
class PreferenceRecord:
    """One observed comparison: winner over loser, from a human or a judge."""

    winner_id: str
    loser_id: str
    source: PreferenceSource
    justification: Optional[str] = None
    event_index: int = 0

    def __post_init__(self) -> None:
        if self.winner_id == self.loser_id:
            raise ValidationError(f"record compares {self.winner_id} with itself")
        if self.source not in ("human", "judge"):
            raise ValidationError(f"unknown preference source: {self.source}")

    def to_dict(self) -> dict:
        return {
            "winner_id": self.winner_id,
            "loser_id": self.loser_id,
            "source": self.source,
            "justification": self.justification,
            "event_index": self.event_index,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PreferenceRecord":
        return cls(
            winner_id=data["winner_id"],
            loser_id=data["loser_id"],
            source=data["source"],
            justification=data.get("justification"),
            event_index=int(data.get("event_index", 0)),
        )


@dataclass
class UtilityEstimate:
    """Fitted scores plus the diagnostics needed to trust them."""

    scores: dict[str, float]
    regularization: float
    iterations_used: int
    converged: bool
    log_likelihood: float

    def sorted_scores(self) -> list[tuple[str, float]]:
        """(id, score) pairs by descending score; id breaks exact ties."""
        return sorted(self.scores.items(), key=lambda kv: (-kv[1], int(kv[0]) if kv[0].isdigit() else 0, kv[0]))

    def to_dict(self) -> dict:
        return {
            "scores": dict(self.scores),
            "regularization": self.regularization,
            "iterations_used": self.iterations_used,
            "converged": self.converged,
            "log_likelihood": self.log_likelihood,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "UtilityEstimate":
        return cls(
            scores={k: float(v) for k, v in data["scores"].items()},
            regularization=float(data["regularization"]),
            iterations_used=int(data["iterations_used"]),
            converged=bool(data["converged"]),
            log_likelihood=float(data["log_likelihood"]),
        )


@dataclass
class AggregationSpec:
    """How child or component utilities combine into one number."""

    operator: Literal["mean", "max", "min"] = "mean"
    weights: Optional[Sequence[float]] = None

    def __post_init__(self) -> None:
        if self.operator not in ("mean", "max", "min"):
            raise ValidationError(f"unknown aggregation operator: {self.operator}")
        if self.weights is not None:
            weights = list(self.weights)
            if any(w < 0 for w in weights):
                raise ValidationError("aggregation weights must be nonnegative")
            if abs(sum(weights) - 1.0) > 1e-9:
                raise ValidationError("aggregation weights must sum to 1")
            self.weights = weights


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # tanh form keeps σ(-x) = 1 - σ(x) exact in floating point
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def fit_utilities(
    records: Sequence[PreferenceRecord],
    ids: Sequence[str],
    lam: float = 0.01,
    max_iterations: int = 10_000,
    tolerance: float = 1e-8,
    human_weight: float = 2.0,
) -> UtilityEstimate:
    """Fit scores to the comparisons by gradient ascent with a fixed step.

    Human-sourced records count human_weight times a judge record. The step
    size 1/(0.5·max_i W_i + 2λ), with W_i the total weight touching item i,
    upper-bounds the objective's curvature, so ascent is monotone.
    converged reports whether the gradient max-norm reached tolerance.
    """
    if not ids:
        raise ValidationError("cannot fit utilities over an empty id list")
    if lam <= 0:
        raise ValidationError("regularization must be positive")
    index = {item: i for i, item in enumerate(ids)}
    if len(index) != len(ids):
        raise ValidationError("duplicate ids in fit request")
    for record in records:
        if record.winner_id not in index or record.loser_id not in index:
            raise ValidationError(
                f"record {record.winner_id} over {record.loser_id} references "
                "an id outside the fit set"
            )

    n = len(ids)
    if not records:
        return UtilityEstimate(
            scores={item: 0.0 for item in ids},
            regularization=lam,
            iterations_used=0,
            converged=True,
            log_likelihood=0.0,
        )

    winner = np.array([index[r.winner_id] for r in records], dtype=np.intp)
    loser = np.array([index[r.loser_id] for r in records], dtype=np.intp)
    weight = np.array(
        [human_weight if r.source == "human" else 1.0 for r in records], dtype=float
    )

    per_item = np.bincount(winner, weights=weight, minlength=n) + np.bincount(
        loser, weights=weight, minlength=n
    )
    step = 1.0 / (0.5 * float(per_item.max()) + 2.0 * lam)

    theta = np.zeros(n)
    iterations = 0
    converged = False
    for iterations in range(1, max_iterations + 1):
        margin = theta[winner] - theta[loser]
        pull = weight * _sigmoid(-margin)
        grad = (
            np.bincount(winner, weights=pull, minlength=n)
            - np.bincount(loser, weights=pull, minlength=n)
            - 2.0 * lam * theta
        )
        if float(np.abs(grad).max()) <= tolerance:
            converged = True
            iterations -= 1
            break
        theta += step * grad

    theta -= theta.mean()
    margin = theta[winner] - theta[loser]
    log_likelihood = float(np.sum(weight * -np.logaddexp(0.0, -margin)))
    scores = {item: float(theta[index[item]]) for item in ids}
    for value in scores.values():
        if not math.isfinite(value):
            raise ValidationError("fit produced a non-finite score")
    return UtilityEstimate(
        scores=scores,
        regularization=lam,
        iterations_used=iterations,
        converged=converged,
        log_likelihood=log_likelihood,
    )


def lift_utility(
    graph: ConstructionGraph,
    parent_id: str,
    estimate: UtilityEstimate,
    spec: AggregationSpec,
) -> float:
    """Aggregate the scores of a node's refinements into a parent score."""
    children = graph.refinements_of(parent_id)
    scored = [estimate.scores[c] for c in children if c in estimate.scores]
    if not scored:
        raise ValidationError(f"utility undefined at {parent_id}: no scored refinements")
    if spec.operator == "mean":
        return sum(scored) / len(scored)
    if spec.operator == "max":
        return max(scored)
    return min(scored)


def scalarize(local_utilities: Sequence[float], spec: AggregationSpec) -> float:
    """Collapse a vector of component utilities into one scalar."""
    values = list(local_utilities)
    if not values:
        raise ValidationError("cannot scalarize an empty utility vector")
    if spec.weights is not None:
        if len(spec.weights) != len(values):
            raise ValidationError(
                f"length mismatch: {len(spec.weights)} weights for {len(values)} utilities"
            )
        return float(sum(w * v for w, v in zip(spec.weights, values)))
    if spec.operator == "mean":
        return float(sum(values) / len(values))
    if spec.operator == "max":
        return float(max(values))
    return float(min(values))
