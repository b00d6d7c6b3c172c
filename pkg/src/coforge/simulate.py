"""Monte-Carlo harness: seeded tournaments over synthetic candidates.

Each trial runs one single-elimination tournament over the same candidate
set with a fresh bracket shuffle and fresh judge-noise stream.  Match logs
accumulate across trials into one pooled preference log, which is then fit
once so the recovered ordering can be compared against the planted one.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Any

from ._util import kendall_tau, stable_seed
from .backends import ArtifactJudge, BackendConfig, GeneratorRequest
from .backends.mock import embed_utility_tag, mock_generate
from .errors import ValidationError
from .tournament import run_tournament
from .utility import PreferenceRecord, UtilityEstimate, fit_utilities


@dataclass
class TrialRow:
    trial: int
    bracket_seed: int
    argmax_in_final: bool
    matches: int
    running_frequency: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "trial": self.trial,
            "bracket_seed": self.bracket_seed,
            "argmax_in_final": self.argmax_in_final,
            "matches": self.matches,
            "running_frequency": self.running_frequency,
        }


@dataclass
class SimulationReport:
    n_candidates: int
    noise_p: float
    trials: int
    seed: int
    argmax_final_frequency: float
    mean_matches: float
    kendall_tau: float | None
    true_utilities: dict[str, float]
    fitted: UtilityEstimate | None
    record_count: int
    rows: list[TrialRow] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return {
            "n_candidates": self.n_candidates,
            "noise_p": self.noise_p,
            "trials": self.trials,
            "seed": self.seed,
            "argmax_final_frequency": self.argmax_final_frequency,
            "mean_matches": self.mean_matches,
            "kendall_tau": self.kendall_tau,
            "true_utilities": dict(self.true_utilities),
            "fitted_utilities": dict(self.fitted.scores) if self.fitted else None,
            "fit_converged": self.fitted.converged if self.fitted else None,
            "record_count": self.record_count,
        }

    def summary_lines(self) -> list[str]:
        lines = [
            f"candidates             {self.n_candidates}",
            f"judge correctness p    {self.noise_p}",
            f"trials                 {self.trials}",
            f"seed                   {self.seed}",
            f"argmax in final pair   {self.argmax_final_frequency:.4f}",
            f"mean matches per trial {self.mean_matches:.2f}",
            f"pooled records         {self.record_count}",
        ]
        if self.kendall_tau is not None:
            lines.append(f"kendall tau            {self.kendall_tau:.4f}")
        return lines


def synthetic_candidates(n: int, seed: int) -> dict[str, str]:
    """n mock artifacts with distinct planted utilities, keyed by id."""
    contents = mock_generate(
        BackendConfig(kind="mock"),
        GeneratorRequest(
            target_level=1,
            parent_content=f"simulation problem (seed {seed})",
            sample_count=n,
            seed=stable_seed(seed, "candidates"),
        ),
    )
    # Planted utilities are sampled without replacement so no two collide.
    rng = random.Random(stable_seed(seed, "utilities"))
    levels = [value / 1_000_000 for value in rng.sample(range(1, 1_000_000), n)]
    return {
        str(i + 1): embed_utility_tag(content, levels[i])
        for i, content in enumerate(contents)
    }


def simulate(
    n_candidates: int,
    noise_p: float,
    trials: int,
    seed: int,
    fit: bool = True,
) -> SimulationReport:
    if n_candidates < 2:
        raise ValidationError("need at least 2 candidates")
    if not 0.5 < noise_p <= 1.0:
        raise ValidationError("judge correctness must be in (0.5, 1]")
    if trials < 1:
        raise ValidationError("need at least 1 trial")

    candidates = synthetic_candidates(n_candidates, seed)
    config = BackendConfig(kind="mock")
    true_utilities = _planted_utilities(candidates)
    argmax_id = max(true_utilities, key=lambda cid: true_utilities[cid])
    ids = sorted(candidates, key=int)

    rows: list[TrialRow] = []
    pooled: list[PreferenceRecord] = []
    hits = 0
    total_matches = 0
    for trial in range(trials):
        bracket_seed = stable_seed(seed, "bracket", trial)
        judge = ArtifactJudge(
            config,
            specification=f"simulation problem (seed {seed})",
            content_lookup=candidates.__getitem__,
            session_seed=stable_seed(seed, "judge", trial),
            noise_p=noise_p,
        )
        outcome = run_tournament(ids, judge, seed=bracket_seed, parallelism=1)
        hit = argmax_id in outcome.finalists
        hits += hit
        total_matches += len(outcome.match_log)
        pooled.extend(
            PreferenceRecord(winner_id=m.winner, loser_id=_loser(m), source="judge")
            for m in outcome.match_log
        )
        rows.append(
            TrialRow(
                trial=trial,
                bracket_seed=bracket_seed,
                argmax_in_final=hit,
                matches=len(outcome.match_log),
                running_frequency=hits / (trial + 1),
            )
        )

    fitted = fit_utilities(pooled, ids) if fit else None
    tau = None
    if fitted is not None:
        tau = kendall_tau(
            [fitted.scores[cid] for cid in ids],
            [true_utilities[cid] for cid in ids],
        )
    return SimulationReport(
        n_candidates=n_candidates,
        noise_p=noise_p,
        trials=trials,
        seed=seed,
        argmax_final_frequency=hits / trials,
        mean_matches=total_matches / trials,
        kendall_tau=tau,
        true_utilities=true_utilities,
        fitted=fitted,
        record_count=len(pooled),
        rows=rows,
    )


def _planted_utilities(candidates: dict[str, str]) -> dict[str, float]:
    from .backends.mock import hidden_utility

    return {cid: hidden_utility(content) for cid, content in candidates.items()}


def _loser(match) -> str:
    a, b = match.match
    return b if match.winner == a else a
