"""Event-sourced co-construction sessions.

A session owns everything the engine has experienced: the artifact graph,
the preference log, and an append-only event log. Human commands and system
steps both land in that log, and because every backend call is seeded from
(session seed, purpose, iteration), replaying the command events rebuilds
the exact same state byte for byte.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field
from typing import Literal, Optional

from ._util import canonical_json, payload_digest, stable_digest, stable_seed, unified_diff
from .backends import (
    ArtifactJudge,
    BackendConfig,
    GeneratorRequest,
    generate_refinements,
    make_summarizer,
    strip_utility_tag,
)
from .errors import BackendFailure, UnknownIdError, ValidationError, WrongStatusError
from .model import Artifact, ConstructionGraph
from .tournament import TournamentAbort, TournamentOutcome, run_tournament
from .utility import PreferenceRecord, UtilityEstimate, fit_utilities

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1

Status = Literal[
    "awaiting-spec-review", "generating", "awaiting-human-feedback", "accepted", "aborted"
]
TERMINAL_STATUSES = ("accepted", "aborted")

FEEDBACK_KINDS = (
    "binary-choice",
    "nl-critique",
    "direct-edit",
    "spec-edit",
    "accept",
    "abort",
    "execution-report",
)

# Events that drive state when replaying; everything else is derived output
# that the driven operations regenerate.
COMMAND_KINDS = (
    "session-created",
    "spec-edit",
    "spec-approved",
    "iteration-started",
    "binary-choice",
    "nl-critique",
    "direct-edit",
    "execution-report",
    "accept",
    "abort",
)


@dataclass
class Event:
    index: int
    kind: str
    source: Literal["human", "system"]
    payload: dict

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "kind": self.kind,
            "source": self.source,
            "payload": self.payload,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Event":
        return cls(
            index=int(data["index"]),
            kind=data["kind"],
            source=data["source"],
            payload=dict(data["payload"]),
        )


@dataclass
class SessionPolicy:
    """The fixed iteration strategy plus backend wiring.

    judge_backend and generator_backend are names into the backends map, so
    a session file stays self-contained and credential-free.
    """

    sample_count: int = 16
    temperature: float = 1.0
    reviewer_mode: Literal["preemptive", "lazy"] = "lazy"
    judge_backend: str = "mock"
    generator_backend: str = "mock"
    human_record_weight: float = 2.0
    max_iterations: int = 50
    context_budget: int = 8000
    judge_noise_p: Optional[float] = None
    backends: dict[str, BackendConfig] = field(
        default_factory=lambda: {"mock": BackendConfig(kind="mock")}
    )

    def __post_init__(self) -> None:
        if self.sample_count < 2:
            raise ValidationError("sample_count must be at least 2")
        if self.max_iterations < 1:
            raise ValidationError("max_iterations must be at least 1")
        if self.reviewer_mode not in ("preemptive", "lazy"):
            raise ValidationError(f"unknown reviewer_mode: {self.reviewer_mode}")
        if self.human_record_weight <= 0:
            raise ValidationError("human_record_weight must be positive")
        if self.context_budget < 100:
            raise ValidationError("context_budget must be at least 100")
        if self.judge_noise_p is not None and not 0.5 < self.judge_noise_p <= 1.0:
            raise ValidationError("judge_noise_p must be in (0.5, 1]")
        for name in (self.generator_backend, self.judge_backend):
            if name not in self.backends:
                raise ValidationError(f"policy references unknown backend: {name}")

    def generator_config(self) -> BackendConfig:
        return self.backends[self.generator_backend]

    def judge_config(self) -> BackendConfig:
        return self.backends[self.judge_backend]

    def to_dict(self) -> dict:
        return {
            "sample_count": self.sample_count,
            "temperature": self.temperature,
            "reviewer_mode": self.reviewer_mode,
            "judge_backend": self.judge_backend,
            "generator_backend": self.generator_backend,
            "human_record_weight": self.human_record_weight,
            "max_iterations": self.max_iterations,
            "context_budget": self.context_budget,
            "judge_noise_p": self.judge_noise_p,
            "backends": {name: cfg.to_dict() for name, cfg in self.backends.items()},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SessionPolicy":
        return cls(
            sample_count=int(data.get("sample_count", 16)),
            temperature=float(data.get("temperature", 1.0)),
            reviewer_mode=data.get("reviewer_mode", "lazy"),
            judge_backend=data.get("judge_backend", "mock"),
            generator_backend=data.get("generator_backend", "mock"),
            human_record_weight=float(data.get("human_record_weight", 2.0)),
            max_iterations=int(data.get("max_iterations", 50)),
            context_budget=int(data.get("context_budget", 8000)),
            judge_noise_p=data.get("judge_noise_p"),
            backends=(
                {
                    name: BackendConfig.from_dict(cfg)
                    for name, cfg in data["backends"].items()
                }
                if data.get("backends")
                else {"mock": BackendConfig(kind="mock")}
            ),
        )


@dataclass
class IterationRecord:
    index: int
    candidate_ids: list[str]
    tournament_outcome: Optional[TournamentOutcome]
    finalist_program_ids: Optional[tuple[str, str]]
    human_feedback_indices: list[int]
    context_summary: str
    generation_context: str
    error: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "candidate_ids": list(self.candidate_ids),
            "tournament_outcome": (
                self.tournament_outcome.to_dict() if self.tournament_outcome else None
            ),
            "finalist_program_ids": (
                list(self.finalist_program_ids) if self.finalist_program_ids else None
            ),
            "human_feedback_indices": list(self.human_feedback_indices),
            "context_summary": self.context_summary,
            "generation_context": self.generation_context,
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "IterationRecord":
        finalists = data.get("finalist_program_ids")
        outcome = data.get("tournament_outcome")
        return cls(
            index=int(data["index"]),
            candidate_ids=list(data["candidate_ids"]),
            tournament_outcome=TournamentOutcome.from_dict(outcome) if outcome else None,
            finalist_program_ids=(finalists[0], finalists[1]) if finalists else None,
            human_feedback_indices=[int(i) for i in data["human_feedback_indices"]],
            context_summary=data["context_summary"],
            generation_context=data.get("generation_context", ""),
            error=data.get("error"),
        )


@dataclass
class SessionState:
    session_id: str
    problem_statement: str
    graph: ConstructionGraph
    preference_log: list[PreferenceRecord]
    event_log: list[Event]
    iterations: list[IterationRecord]
    current_finalists: Optional[tuple[str, str]]
    utility_snapshot: Optional[UtilityEstimate]
    policy: SessionPolicy
    seed: int
    status: Status

    def to_document(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "session": {
                "session_id": self.session_id,
                "problem_statement": self.problem_statement,
                "preference_log": [r.to_dict() for r in self.preference_log],
                "current_finalists": (
                    list(self.current_finalists) if self.current_finalists else None
                ),
                "utility_snapshot": (
                    self.utility_snapshot.to_dict() if self.utility_snapshot else None
                ),
                "policy": self.policy.to_dict(),
                "seed": self.seed,
                "status": self.status,
            },
            "graph": self.graph.to_dict(),
            "events": [e.to_dict() for e in self.event_log],
            "iterations": [it.to_dict() for it in self.iterations],
        }

    @classmethod
    def from_document(cls, doc: dict) -> "SessionState":
        session = doc["session"]
        finalists = session.get("current_finalists")
        snapshot = session.get("utility_snapshot")
        return cls(
            session_id=session["session_id"],
            problem_statement=session["problem_statement"],
            graph=ConstructionGraph.from_dict(doc["graph"]),
            preference_log=[PreferenceRecord.from_dict(r) for r in session["preference_log"]],
            event_log=[Event.from_dict(e) for e in doc["events"]],
            iterations=[IterationRecord.from_dict(it) for it in doc["iterations"]],
            current_finalists=(finalists[0], finalists[1]) if finalists else None,
            utility_snapshot=UtilityEstimate.from_dict(snapshot) if snapshot else None,
            policy=SessionPolicy.from_dict(session["policy"]),
            seed=int(session["seed"]),
            status=session["status"],
        )


def session_digest(state: SessionState) -> str:
    return payload_digest(state.to_document())


def _append_event(state: SessionState, kind: str, source: str, payload: dict) -> Event:
    event = Event(index=len(state.event_log), kind=kind, source=source, payload=payload)
    state.event_log.append(event)
    return event


def _require_status(state: SessionState, *allowed: str) -> None:
    if state.status not in allowed:
        raise WrongStatusError(
            f"operation requires status in {list(allowed)}, session is {state.status}"
        )


def current_specification(state: SessionState) -> Artifact:
    specs = state.graph.artifacts_at_level(0)
    if not specs:
        raise ValidationError("session has no specification artifact")
    return specs[-1]


def display_content(artifact: Artifact) -> str:
    """Artifact text with the mock utility trailer stripped."""
    text, _ = strip_utility_tag(artifact.content)
    return text


def _cap_context(text: str, budget: int) -> str:
    if len(text) <= budget:
        return text
    return "(older context omitted)\n" + text[-budget:]


def _extend_context(state: SessionState, addition: str) -> None:
    if not state.iterations:
        return
    record = state.iterations[-1]
    joined = f"{record.context_summary}\n{addition}" if record.context_summary else addition
    record.context_summary = _cap_context(joined, state.policy.context_budget)


def _refit(state: SessionState) -> Optional[UtilityEstimate]:
    ids = sorted(
        {r.winner_id for r in state.preference_log}
        | {r.loser_id for r in state.preference_log},
        key=int,
    )
    if not ids:
        return None
    estimate = fit_utilities(
        state.preference_log, ids, human_weight=state.policy.human_record_weight
    )
    state.utility_snapshot = estimate
    return estimate


def _log_refit(state: SessionState, estimate: UtilityEstimate) -> None:
    _append_event(
        state,
        "utilities-refit",
        "system",
        {
            "record_count": len(state.preference_log),
            "converged": estimate.converged,
            "iterations_used": estimate.iterations_used,
            "score_digest": payload_digest(estimate.to_dict()),
        },
    )


# -- lifecycle operations ------------------------------------------------------


def create_session(problem_statement: str, policy: SessionPolicy, seed: int) -> SessionState:
    """Open a session and generate the level-0 specification.

    A backend failure does not raise: the session comes back aborted with
    the failure recorded, so the caller always gets an inspectable state.
    """
    if not problem_statement.strip():
        raise ValidationError("problem statement must be nonempty")
    state = SessionState(
        session_id=stable_digest(seed, problem_statement),
        problem_statement=problem_statement,
        graph=ConstructionGraph(),
        preference_log=[],
        event_log=[],
        iterations=[],
        current_finalists=None,
        utility_snapshot=None,
        policy=policy,
        seed=seed,
        status="generating",
    )
    _append_event(
        state,
        "session-created",
        "human",
        {
            "problem_statement": problem_statement,
            "policy": policy.to_dict(),
            "seed": seed,
        },
    )
    request = GeneratorRequest(
        target_level=0,
        parent_content=problem_statement,
        context="",
        sample_count=1,
        temperature=policy.temperature,
        seed=stable_seed(seed, "spec"),
    )
    try:
        (content,) = generate_refinements(policy.generator_config(), request)
    except BackendFailure as exc:
        state.status = "aborted"
        _append_event(state, "creation-failed", "system", {"error": str(exc)})
        return state
    spec_id = state.graph.add_artifact(0, content, provenance="generated")
    _append_event(state, "spec-generated", "system", {"artifact_id": spec_id})
    state.status = (
        "awaiting-spec-review" if policy.reviewer_mode == "preemptive" else "generating"
    )
    return state


def edit_specification(state: SessionState, new_content: str) -> SessionState:
    """Replace the working specification before any generation happens."""
    _require_status(state, "awaiting-spec-review")
    if not new_content.strip():
        raise ValidationError("specification content must be nonempty")
    original = current_specification(state)
    if new_content == original.content or new_content == display_content(original):
        raise ValidationError("edited specification is identical to the current one")
    spec_id = state.graph.add_artifact(0, new_content, provenance="human-edited")
    _append_event(
        state,
        "spec-edit",
        "human",
        {
            "artifact_id": spec_id,
            "replaces": original.id,
            "content": new_content,
            "diff": unified_diff(display_content(original), new_content, "specification"),
        },
    )
    state.status = "generating"
    return state


def approve_specification(state: SessionState) -> SessionState:
    """Accept the generated specification unchanged and move on."""
    _require_status(state, "awaiting-spec-review")
    _append_event(
        state,
        "spec-approved",
        "human",
        {"artifact_id": current_specification(state).id},
    )
    state.status = "generating"
    return state


def ensure_can_iterate(state: SessionState) -> None:
    _require_status(state, "generating")
    if len(state.iterations) >= state.policy.max_iterations:
        raise WrongStatusError(
            f"iteration limit reached ({state.policy.max_iterations})"
        )


def run_iteration(state: SessionState) -> SessionState:
    """One full cycle: sample k designs, run the knockout, generate the two
    finalist programs, refit utilities, and wait for the human.

    A backend failure mid-cycle keeps whatever was already built, records
    the iteration as failed, and leaves the session generating.
    """
    ensure_can_iterate(state)
    policy = state.policy
    index = len(state.iterations)
    spec = current_specification(state)
    context = state.iterations[-1].context_summary if state.iterations else ""
    _append_event(
        state,
        "iteration-started",
        "human",
        {"index": index, "specification_id": spec.id},
    )

    record = IterationRecord(
        index=index,
        candidate_ids=[],
        tournament_outcome=None,
        finalist_program_ids=None,
        human_feedback_indices=[],
        context_summary="",
        generation_context=context,
    )

    def fail(message: str) -> SessionState:
        record.error = message
        state.iterations.append(record)
        _append_event(state, "iteration-failed", "system", {"index": index, "error": message})
        state.status = "generating"
        return state

    generator = policy.generator_config()
    try:
        texts = generate_refinements(
            generator,
            GeneratorRequest(
                target_level=1,
                parent_content=spec.content,
                context=context,
                sample_count=policy.sample_count,
                temperature=policy.temperature,
                seed=stable_seed(state.seed, "candidates", index),
            ),
        )
    except BackendFailure as exc:
        return fail(f"candidate generation failed: {exc}")
    candidate_ids = [
        state.graph.add_artifact(1, text, parent_id=spec.id, provenance="generated")
        for text in texts
    ]
    record.candidate_ids = candidate_ids
    _append_event(
        state,
        "candidates-generated",
        "system",
        {
            "ids": candidate_ids,
            "parent_id": spec.id,
            "content_digest": payload_digest(texts),
        },
    )

    judge_config = policy.judge_config()
    judge = ArtifactJudge(
        judge_config,
        specification=display_content(spec),
        content_lookup=lambda aid: state.graph.get(aid).content,
        session_seed=stable_seed(state.seed, "judge-noise", index),
        noise_p=policy.judge_noise_p,
    )

    def commit_matches(results) -> None:
        for result in results:
            event = _append_event(
                state,
                "match-judged",
                "system",
                {
                    "round": result.round,
                    "match": list(result.match),
                    "winner": result.winner,
                    "judge_name": result.judge_name,
                },
            )
            loser = result.match[0] if result.winner == result.match[1] else result.match[1]
            state.preference_log.append(
                PreferenceRecord(
                    winner_id=result.winner,
                    loser_id=loser,
                    source="judge",
                    justification=result.justification,
                    event_index=event.index,
                )
            )

    try:
        outcome = run_tournament(
            candidate_ids,
            judge,
            seed=stable_seed(state.seed, "bracket", index),
            parallelism=judge_config.parallelism,
            retries=judge_config.max_retries,
            retry_delay=judge_config.retry_delay,
            summarizer=make_summarizer(judge_config),
            summary_budget=policy.context_budget,
        )
    except TournamentAbort as exc:
        commit_matches(exc.match_log)
        return fail(f"tournament aborted: {exc.message}")
    commit_matches(outcome.match_log)
    record.tournament_outcome = outcome
    _append_event(
        state,
        "tournament-completed",
        "system",
        {
            "finalists": list(outcome.finalists),
            "match_count": len(outcome.match_log),
            "summary_digest": payload_digest(outcome.summary),
        },
    )

    program_ids = []
    spec_text = display_content(spec)
    for finalist in outcome.finalists:
        code_context = f"Specification:\n{spec_text}"
        if context:
            code_context += f"\n\n{context}"
        try:
            (program_text,) = generate_refinements(
                generator,
                GeneratorRequest(
                    target_level=2,
                    parent_content=state.graph.get(finalist).content,
                    context=code_context,
                    sample_count=1,
                    temperature=policy.temperature,
                    seed=stable_seed(state.seed, "program", index, finalist),
                    template="code-generation",
                ),
            )
        except BackendFailure as exc:
            return fail(f"program generation failed for {finalist}: {exc}")
        program_ids.append(
            state.graph.add_artifact(2, program_text, parent_id=finalist, provenance="generated")
        )
    record.finalist_program_ids = (program_ids[0], program_ids[1])
    _append_event(
        state,
        "programs-generated",
        "system",
        {"ids": program_ids, "parents": list(outcome.finalists)},
    )

    estimate = _refit(state)
    assert estimate is not None  # the tournament just added records
    _log_refit(state, estimate)

    record.context_summary = _cap_context(
        f"Iteration {index + 1} tournament summary:\n{outcome.summary}",
        policy.context_budget,
    )
    state.iterations.append(record)
    state.current_finalists = (program_ids[0], program_ids[1])
    _append_event(
        state,
        "iteration-completed",
        "system",
        {"index": index, "finalist_program_ids": program_ids},
    )
    state.status = "awaiting-human-feedback"
    return state


# -- feedback ------------------------------------------------------------------


def apply_feedback(state: SessionState, kind: str, payload: dict) -> SessionState:
    """Apply one human feedback event.

    Validates everything first, so an error leaves the state untouched.
    """
    if kind not in FEEDBACK_KINDS:
        raise ValidationError(f"unknown feedback kind: {kind}")
    if kind == "spec-edit":
        return edit_specification(state, payload.get("content", ""))
    if state.status in TERMINAL_STATUSES:
        raise WrongStatusError(f"session is {state.status}; no further feedback accepted")
    if kind == "accept":
        return _apply_accept(state, payload)
    if kind == "abort":
        return _apply_abort(state, payload)
    _require_status(state, "awaiting-human-feedback")
    if kind == "binary-choice":
        return _apply_choice(state, payload)
    if kind == "nl-critique":
        return _apply_critique(state, payload)
    if kind == "direct-edit":
        return _apply_edit(state, payload)
    return _apply_execution_report(state, payload)


def _apply_accept(state: SessionState, payload: dict) -> SessionState:
    artifact_id = payload.get("artifact_id")
    if artifact_id is None and state.current_finalists:
        raise ValidationError("accept requires the chosen artifact id")
    if artifact_id is not None:
        state.graph.get(artifact_id)
    _append_event(state, "accept", "human", {"artifact_id": artifact_id})
    state.status = "accepted"
    return state


def _apply_abort(state: SessionState, payload: dict) -> SessionState:
    _append_event(state, "abort", "human", {"reason": payload.get("reason", "")})
    state.status = "aborted"
    return state


def _apply_choice(state: SessionState, payload: dict) -> SessionState:
    if not state.current_finalists:
        raise ValidationError("no finalist pair to choose from")
    chosen = payload.get("chosen_id")
    if chosen not in state.current_finalists:
        raise UnknownIdError(
            f"choice {chosen!r} is not a current finalist {list(state.current_finalists)}"
        )
    other = (
        state.current_finalists[0]
        if chosen == state.current_finalists[1]
        else state.current_finalists[1]
    )
    justification = payload.get("justification") or None
    event = _append_event(
        state,
        "binary-choice",
        "human",
        {"chosen_id": chosen, "justification": justification},
    )
    state.preference_log.append(
        PreferenceRecord(
            winner_id=chosen,
            loser_id=other,
            source="human",
            justification=justification,
            event_index=event.index,
        )
    )
    chosen_parent = state.graph.abstraction_of(chosen)
    other_parent = state.graph.abstraction_of(other)
    if chosen_parent and other_parent and chosen_parent != other_parent:
        state.preference_log.append(
            PreferenceRecord(
                winner_id=chosen_parent,
                loser_id=other_parent,
                source="human",
                justification=justification,
                event_index=event.index,
            )
        )
    estimate = _refit(state)
    if estimate is not None:
        _log_refit(state, estimate)
    line = f"Human chose program {chosen} over {other}."
    if justification:
        line += f" Reason: {justification}"
    _extend_context(state, line)
    if state.iterations:
        state.iterations[-1].human_feedback_indices.append(event.index)
    state.status = "generating"
    return state


def _apply_critique(state: SessionState, payload: dict) -> SessionState:
    text = payload.get("text", "")
    if not text.strip():
        raise ValidationError("critique text must be nonempty")
    target = payload.get("target_id")
    if target is not None:
        state.graph.get(target)
    event = _append_event(
        state, "nl-critique", "human", {"text": text, "target_id": target}
    )
    _extend_context(state, f"Critique: {text}")
    if state.iterations:
        state.iterations[-1].human_feedback_indices.append(event.index)
    state.status = "generating"
    return state


def _apply_edit(state: SessionState, payload: dict) -> SessionState:
    target_id = payload.get("target_id")
    if target_id is None:
        raise ValidationError("direct-edit requires a target_id")
    original = state.graph.get(target_id)
    content = payload.get("content", "")
    if not content.strip():
        raise ValidationError("replacement content must be nonempty")
    if content == original.content or content == display_content(original):
        raise ValidationError("replacement content is identical to the original")
    edited_id = state.graph.add_artifact(
        original.level,
        content,
        parent_id=original.parent_id,
        provenance="human-edited",
    )
    event = _append_event(
        state,
        "direct-edit",
        "human",
        {
            "target_id": target_id,
            "artifact_id": edited_id,
            "content": content,
            "diff": unified_diff(
                display_content(original), content, f"artifact-{target_id}"
            ),
        },
    )
    state.preference_log.append(
        PreferenceRecord(
            winner_id=edited_id,
            loser_id=target_id,
            source="human",
            justification="human rewrote the artifact; edited version preferred",
            event_index=event.index,
        )
    )
    estimate = _refit(state)
    if estimate is not None:
        _log_refit(state, estimate)
    _extend_context(state, f"Human directly edited artifact {target_id}.")
    if state.iterations:
        state.iterations[-1].human_feedback_indices.append(event.index)
    state.status = "generating"
    return state


def _apply_execution_report(state: SessionState, payload: dict) -> SessionState:
    target_id = payload.get("target_id")
    if target_id is None:
        raise ValidationError("execution-report requires a target_id")
    artifact = state.graph.get(target_id)
    ran = bool(payload.get("ran"))
    excerpt = str(payload.get("log", ""))[:2000]
    event = _append_event(
        state,
        "execution-report",
        "human",
        {"target_id": target_id, "ran": ran, "log": excerpt},
    )
    artifact.metadata["execution"] = {"ran": ran, "log": excerpt, "event_index": event.index}
    outcome = "ran cleanly" if ran else "failed to run"
    line = f"Execution report for {target_id}: {outcome}."
    if excerpt:
        line += f" Log: {excerpt.splitlines()[0][:200]}"
    _extend_context(state, line)
    if state.iterations:
        state.iterations[-1].human_feedback_indices.append(event.index)
    state.status = "generating"
    return state


# -- persistence and replay ------------------------------------------------


def save_session(state: SessionState, path: str) -> None:
    document = canonical_json(state.to_document(), indent=2) + "\n"
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(document)


def load_session(path: str) -> SessionState:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            doc = json.load(handle)
    except FileNotFoundError:
        raise UnknownIdError(f"no session file at {path}") from None
    except json.JSONDecodeError as exc:
        raise ValidationError(f"not a valid session file: {exc}") from None
    if not isinstance(doc, dict) or "schema_version" not in doc:
        raise ValidationError("not a session document: missing schema_version")
    if doc["schema_version"] != SCHEMA_VERSION:
        raise ValidationError(
            f"schema version mismatch: file has {doc['schema_version']}, "
            f"supported is {SCHEMA_VERSION}"
        )
    try:
        state = SessionState.from_document(doc)
    except (KeyError, TypeError, IndexError) as exc:
        raise ValidationError(f"malformed session document: {exc!r}") from None
    findings = state.graph.validate()
    if findings:
        details = "; ".join(f.message for f in findings[:5])
        raise ValidationError(f"session graph fails validation: {details}")
    _check_references(state)
    return state


def _check_references(state: SessionState) -> None:
    def must_exist(artifact_id: str, where: str) -> None:
        if artifact_id not in state.graph:
            raise ValidationError(f"{where} references missing artifact {artifact_id}")

    for record in state.preference_log:
        must_exist(record.winner_id, "preference log")
        must_exist(record.loser_id, "preference log")
    if state.current_finalists:
        for artifact_id in state.current_finalists:
            must_exist(artifact_id, "current finalists")
    for iteration in state.iterations:
        for artifact_id in iteration.candidate_ids:
            must_exist(artifact_id, f"iteration {iteration.index}")
        if iteration.finalist_program_ids:
            for artifact_id in iteration.finalist_program_ids:
                must_exist(artifact_id, f"iteration {iteration.index}")
    indices = [e.index for e in state.event_log]
    if indices != list(range(len(indices))):
        raise ValidationError("event log indices are not contiguous from 0")


def replay(event_log: list[Event], policy: SessionPolicy, seed: int) -> SessionState:
    """Rebuild a session by re-executing its command events.

    Only valid with mock backends: live backends cannot promise identical
    output. The regenerated event log must match the input exactly; any
    divergence (wrong seed, edited log, nondeterminism) raises.
    """
    if not event_log:
        raise ValidationError("cannot replay an empty event log")
    indices = [e.index for e in event_log]
    if indices != list(range(len(indices))):
        missing = sorted(set(range(len(indices))) - set(indices))
        raise ValidationError(f"gap in event indices: missing {missing[:5]}")
    for name in (policy.generator_backend, policy.judge_backend):
        if policy.backends[name].kind != "mock":
            raise ValidationError(
                f"replay requires mock backends; {name} is {policy.backends[name].kind}"
            )
    state: Optional[SessionState] = None
    for event in event_log:
        if event.kind not in COMMAND_KINDS:
            continue
        if state is None:
            if event.kind != "session-created":
                raise ValidationError("log does not start with session-created")
            state = create_session(event.payload["problem_statement"], policy, seed)
            continue
        if event.index != len(state.event_log):
            raise ValidationError(
                f"replay diverged: command at index {event.index} arrived while "
                f"the rebuilt log has {len(state.event_log)} events"
            )
        if event.kind == "spec-edit":
            edit_specification(state, event.payload["content"])
        elif event.kind == "spec-approved":
            approve_specification(state)
        elif event.kind == "iteration-started":
            run_iteration(state)
        else:
            apply_feedback(state, event.kind, event.payload)
    if state is None:
        raise ValidationError("log contains no command events")
    original = [e.to_dict() for e in event_log]
    rebuilt = [e.to_dict() for e in state.event_log]
    if original != rebuilt:
        first_bad = next(
            (i for i, (a, b) in enumerate(zip(original, rebuilt)) if a != b),
            min(len(original), len(rebuilt)),
        )
        raise ValidationError(
            f"replay diverged from recorded log at event {first_bad}"
        )
    return state


def replay_check(state: SessionState) -> SessionState:
    """Replay a state's own log and require byte-identical serialization."""
    rebuilt = replay(state.event_log, state.policy, state.seed)
    original_bytes = canonical_json(state.to_document(), indent=2)
    rebuilt_bytes = canonical_json(rebuilt.to_document(), indent=2)
    if original_bytes != rebuilt_bytes:
        raise ValidationError("replay produced a different serialized state")
    return rebuilt


def event_lines(state: SessionState) -> list[str]:
    """Line-delimited export: index, kind, payload digest."""
    return [
        f"{event.index}\t{event.kind}\t{payload_digest(event.payload)}"
        for event in state.event_log
    ]
