"""Single-elimination pairwise selection down to a finalist pair.

The field is shuffled once from the run seed, then adjacent candidates play
knockout rounds until two remain. The final is never played: the pair is
handed onward for refinement and the human verdict. Odd rounds give one bye
to the last candidate in round order.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from random import Random
from typing import Callable, Optional, Protocol, Sequence

from .errors import BackendFailure, ValidationError


class PairwiseJudge(Protocol):
    """Anything that can pick a winner between two candidate ids.

    draw_index is the match's ordinal within the whole tournament, assigned
    before dispatch, so stochastic judges stay deterministic under
    concurrent judging.
    """

    name: str

    def decide(self, candidate_a: str, candidate_b: str, draw_index: int) -> tuple[str, str]:
        """Returns (winner_id, justification)."""
        ...


@dataclass
class Bracket:
    """Pairings for the knockout. Only round 0 is known at seed time; later
    rounds are appended as winners emerge. planned_match_counts fixes the
    shape up front (last entry is the unplayed final-pair round)."""

    entrants: list[str]
    rounds: list[list[tuple[str, str]]]
    byes: list[tuple[int, str]]
    planned_match_counts: list[int]

    @property
    def depth(self) -> int:
        return len(self.planned_match_counts)

    def to_dict(self) -> dict:
        return {
            "entrants": list(self.entrants),
            "rounds": [[list(m) for m in rnd] for rnd in self.rounds],
            "byes": [list(b) for b in self.byes],
            "planned_match_counts": list(self.planned_match_counts),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Bracket":
        return cls(
            entrants=list(data["entrants"]),
            rounds=[[(a, b) for a, b in rnd] for rnd in data["rounds"]],
            byes=[(int(r), c) for r, c in data["byes"]],
            planned_match_counts=[int(x) for x in data["planned_match_counts"]],
        )


@dataclass
class MatchResult:
    round: int
    match: tuple[str, str]
    winner: str
    justification: str
    judge_name: str

    def __post_init__(self) -> None:
        if self.winner not in self.match:
            raise ValidationError(f"winner {self.winner} not in match {self.match}")

    def to_dict(self) -> dict:
        return {
            "round": self.round,
            "match": list(self.match),
            "winner": self.winner,
            "justification": self.justification,
            "judge_name": self.judge_name,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MatchResult":
        return cls(
            round=int(data["round"]),
            match=(data["match"][0], data["match"][1]),
            winner=data["winner"],
            justification=data["justification"],
            judge_name=data["judge_name"],
        )


@dataclass
class TournamentOutcome:
    finalists: tuple[str, str]
    match_log: list[MatchResult]
    summary: str
    seed: int
    bracket: Bracket

    def to_dict(self) -> dict:
        return {
            "finalists": list(self.finalists),
            "match_log": [m.to_dict() for m in self.match_log],
            "summary": self.summary,
            "seed": self.seed,
            "bracket": self.bracket.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TournamentOutcome":
        return cls(
            finalists=(data["finalists"][0], data["finalists"][1]),
            match_log=[MatchResult.from_dict(m) for m in data["match_log"]],
            summary=data["summary"],
            seed=int(data["seed"]),
            bracket=Bracket.from_dict(data["bracket"]),
        )


class TournamentAbort(BackendFailure):
    """Judge kept failing; carries whatever was decided before the failure."""

    def __init__(self, message: str, match_log: list[MatchResult], bracket: Bracket):
        super().__init__(message)
        self.match_log = match_log
        self.bracket = bracket


def _pair_round(order: Sequence[str]) -> tuple[list[tuple[str, str]], Optional[str]]:
    matches = [(order[2 * i], order[2 * i + 1]) for i in range(len(order) // 2)]
    bye = order[-1] if len(order) % 2 else None
    return matches, bye


def seed_bracket(candidates: Sequence[str], seed: int) -> Bracket:
    """Shuffle the field deterministically and pair round 0."""
    if len(candidates) < 2:
        raise ValidationError("a tournament needs at least 2 candidates")
    if len(set(candidates)) != len(candidates):
        raise ValidationError("duplicate candidate ids")
    order = list(candidates)
    Random(seed).shuffle(order)
    matches, bye = _pair_round(order)
    plan = []
    remaining = len(order)
    while remaining > 2:
        plan.append(remaining // 2)
        remaining = remaining // 2 + remaining % 2
    plan.append(1)
    return Bracket(
        entrants=order,
        rounds=[matches],
        byes=[(0, bye)] if bye is not None else [],
        planned_match_counts=plan,
    )


def run_tournament(
    candidates: Sequence[str],
    judge: PairwiseJudge,
    seed: int,
    parallelism: int = 4,
    retries: int = 2,
    retry_delay: float = 0.5,
    summarizer: Optional[Callable[[str], str]] = None,
    summary_budget: int = 8000,
) -> TournamentOutcome:
    """Play every round in bracket order until two candidates remain.

    Matches inside a round may be judged concurrently; results are committed
    in bracket order so the log and any stochastic draws are reproducible.
    Judge failures are retried with exponential backoff; a match that still
    fails aborts the run with the partial log preserved.
    """
    bracket = seed_bracket(candidates, seed)
    match_log: list[MatchResult] = []
    current = list(bracket.entrants)
    round_index = 0
    ordinal = 0

    def judged(args: tuple[int, tuple[str, str]]) -> tuple[str, str]:
        draw_index, (a, b) = args
        delay = retry_delay
        for attempt in range(retries + 1):
            try:
                return judge.decide(a, b, draw_index)
            except BackendFailure:
                if attempt == retries:
                    raise
                time.sleep(delay)
                delay *= 2
        raise AssertionError("unreachable")

    while len(current) > 2:
        if round_index == 0:
            matches = bracket.rounds[0]
            bye = bracket.byes[0][1] if bracket.byes else None
        else:
            matches, bye = _pair_round(current)
            bracket.rounds.append(matches)
            if bye is not None:
                bracket.byes.append((round_index, bye))

        jobs = [(ordinal + i, match) for i, match in enumerate(matches)]
        ordinal += len(matches)
        outcomes: list[tuple[str, str] | Exception]
        if parallelism > 1 and len(jobs) > 1:
            with ThreadPoolExecutor(max_workers=min(parallelism, len(jobs))) as pool:
                futures = [pool.submit(judged, job) for job in jobs]
                outcomes = []
                for future in futures:
                    try:
                        outcomes.append(future.result())
                    except Exception as exc:  # noqa: BLE001 - committed in order below
                        outcomes.append(exc)
        else:
            outcomes = []
            for job in jobs:
                try:
                    outcomes.append(judged(job))
                except Exception as exc:  # noqa: BLE001
                    outcomes.append(exc)

        winners = []
        for (draw_index, match), outcome in zip(jobs, outcomes):
            if isinstance(outcome, Exception):
                raise TournamentAbort(
                    f"judge failed on match {match} after {retries} retries: {outcome}",
                    match_log,
                    bracket,
                ) from outcome
            winner, justification = outcome
            match_log.append(
                MatchResult(
                    round=round_index,
                    match=match,
                    winner=winner,
                    justification=justification,
                    judge_name=judge.name,
                )
            )
            winners.append(winner)
        current = winners + ([bye] if bye is not None else [])
        round_index += 1

    finalists = (current[0], current[1])
    if round_index > 0:
        bracket.rounds.append([finalists])
    summary = (
        summarize_justifications(match_log, summarizer, summary_budget) if match_log else ""
    )
    return TournamentOutcome(
        finalists=finalists,
        match_log=match_log,
        summary=summary,
        seed=seed,
        bracket=bracket,
    )


def summarize_justifications(
    match_log: Sequence[MatchResult],
    summarizer: Optional[Callable[[str], str]] = None,
    char_budget: int = 8000,
) -> str:
    """One text block from the match justifications.

    Without a summarizer backend this is the deterministic concatenation
    with match headers. Over budget, earlier rounds are dropped first.
    """
    if not match_log:
        raise ValidationError("cannot summarize an empty match log")
    lines = [
        f"round {m.round + 1}, {m.match[0]} vs {m.match[1]}, winner {m.winner}: "
        f"{m.justification}"
        for m in match_log
    ]
    text = "\n".join(lines)
    if summarizer is not None:
        text = summarizer(text)
    if len(text) > char_budget:
        text = "(earlier rounds omitted)\n" + text[-char_budget:]
    return text
