"""Terminal front end for full co-construction runs against mock or live backends."""

from __future__ import annotations

import functools
import json
import os
import sys
from typing import Optional

import click

from ._util import canonical_json
from .errors import EngineError, UnknownIdError, ValidationError
from .session import (
    SessionPolicy,
    SessionState,
    apply_feedback,
    approve_specification,
    create_session,
    current_specification,
    display_content,
    edit_specification,
    event_lines,
    load_session,
    replay_check,
    run_iteration,
    save_session,
)

DEFAULT_PROBLEM = "Build a command-line tool that deduplicates log lines."


def engine_errors_to_exit_code(fn):
    """Engine errors print their envelope on stderr and exit 1."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except EngineError as err:
            click.echo(canonical_json(err.envelope()), err=True)
            sys.exit(1)

    return wrapper


@click.group()
@click.option(
    "--storage",
    default="sessions",
    show_default=True,
    help="Directory holding one JSON file per session.",
)
@click.pass_context
def main(ctx, storage):
    """Co-construction engine: sample, judge, refit, and steer from the terminal."""
    ctx.ensure_object(dict)
    ctx.obj["storage"] = storage


def _session_path(storage: str, session_id: str) -> str:
    return os.path.join(storage, f"{session_id}.json")


def _resolve(storage: str, session_id: Optional[str]) -> SessionState:
    if session_id:
        return load_session(_session_path(storage, session_id))
    if not os.path.isdir(storage):
        raise UnknownIdError(f"no session storage at {storage!r}")
    candidates = [
        os.path.join(storage, name)
        for name in os.listdir(storage)
        if name.endswith(".json")
    ]
    if not candidates:
        raise UnknownIdError(f"no sessions in {storage!r}")
    candidates.sort(key=lambda p: (os.path.getmtime(p), p))
    return load_session(candidates[-1])


def _save(storage: str, state: SessionState) -> None:
    save_session(state, _session_path(storage, state.session_id))


def _policy_from_options(
    config: Optional[str], mock: bool, k: Optional[int], temperature: Optional[float],
    preemptive: bool,
) -> SessionPolicy:
    doc: dict = {}
    if config:
        try:
            with open(config, "r", encoding="utf-8") as handle:
                doc = json.load(handle)
        except FileNotFoundError:
            raise ValidationError(f"no backend config file at {config!r}") from None
        except json.JSONDecodeError as err:
            raise ValidationError(f"backend config is not valid JSON: {err}") from None
        if not isinstance(doc, dict):
            raise ValidationError("backend config must be a JSON object")
    if not mock and not config:
        raise ValidationError("--live requires --config with named backends")
    if mock:
        doc["judge_backend"] = "mock"
        doc["generator_backend"] = "mock"
        backends = doc.get("backends")
        if backends is not None and "mock" not in backends:
            backends["mock"] = {"kind": "mock"}
    if k is not None:
        doc["sample_count"] = k
    if temperature is not None:
        doc["temperature"] = temperature
    if preemptive:
        doc["reviewer_mode"] = "preemptive"
    return SessionPolicy.from_dict(doc)


session_option = click.option("--session", default=None, help="Session id (default: most recent).")
json_option = click.option("--json", "as_json", is_flag=True, help="Machine-readable output.")


@main.command()
@click.argument("problem", required=False)
@click.option("--mock/--live", default=True, help="Backend family for this session.")
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--k", type=int, default=None, help="Candidates sampled per iteration.")
@click.option("--temperature", type=float, default=None)
@click.option("--config", default=None, help="JSON file with policy overrides and named backends.")
@click.option("--preemptive", is_flag=True, help="Review the specification before iterating.")
@json_option
@click.pass_context
@engine_errors_to_exit_code
def new(ctx, problem, mock, seed, k, temperature, config, preemptive, as_json):
    """Create a session and generate its initial specification."""
    policy = _policy_from_options(config, mock, k, temperature, preemptive)
    state = create_session(problem or DEFAULT_PROBLEM, policy, seed)
    _save(ctx.obj["storage"], state)
    if as_json:
        click.echo(canonical_json(state.to_document()))
        return
    click.echo(f"session {state.session_id} created, status {state.status}")
    spec = current_specification(state)
    click.echo(f"specification artifact {spec.id}:")
    click.echo(display_content(spec))


@main.group()
def spec():
    """Review the current specification."""


@spec.command("show")
@session_option
@json_option
@click.pass_context
@engine_errors_to_exit_code
def spec_show(ctx, session, as_json):
    state = _resolve(ctx.obj["storage"], session)
    artifact = current_specification(state)
    if as_json:
        click.echo(canonical_json(artifact.to_dict()))
        return
    click.echo(f"artifact {artifact.id} ({artifact.provenance}):")
    click.echo(display_content(artifact))


@spec.command("edit")
@click.option("--content", default=None, help="New specification text.")
@click.option("--file", "path", default=None, type=click.Path(exists=True))
@session_option
@json_option
@click.pass_context
@engine_errors_to_exit_code
def spec_edit(ctx, content, path, session, as_json):
    """Replace the specification; refinements now grow from the edit."""
    if (content is None) == (path is None):
        raise click.UsageError("pass exactly one of --content or --file")
    if path is not None:
        with open(path, "r", encoding="utf-8") as handle:
            content = handle.read()
    state = _resolve(ctx.obj["storage"], session)
    edit_specification(state, content)
    _save(ctx.obj["storage"], state)
    new_spec = current_specification(state)
    if as_json:
        click.echo(canonical_json({"artifact_id": new_spec.id, "status": state.status}))
        return
    click.echo(f"specification replaced by artifact {new_spec.id}, status {state.status}")


@spec.command("approve")
@session_option
@json_option
@click.pass_context
@engine_errors_to_exit_code
def spec_approve(ctx, session, as_json):
    state = _resolve(ctx.obj["storage"], session)
    approve_specification(state)
    _save(ctx.obj["storage"], state)
    if as_json:
        click.echo(canonical_json({"status": state.status}))
        return
    click.echo(f"specification approved, status {state.status}")


@main.command()
@session_option
@json_option
@click.pass_context
@engine_errors_to_exit_code
def iterate(ctx, session, as_json):
    """Sample candidates, run the knockout, and emit the finalist pair."""
    state = _resolve(ctx.obj["storage"], session)
    run_iteration(state)
    _save(ctx.obj["storage"], state)
    record = state.iterations[-1]
    if record.error:
        envelope = {"code": "backend-failure", "message": record.error, "detail": None}
        click.echo(canonical_json(envelope), err=True)
        sys.exit(1)
    matches = len(record.tournament_outcome.match_log)
    if as_json:
        click.echo(
            canonical_json(
                {
                    "iteration": record.index,
                    "finalists": list(record.finalist_program_ids),
                    "matches": matches,
                    "status": state.status,
                }
            )
        )
        return
    a, b = record.finalist_program_ids
    click.echo(f"iteration {record.index + 1} complete: {matches} matches played")
    click.echo(f"finalists: {a} {b}")
    click.echo("compare with `coforge show lineage <id>`, then `coforge feedback choose <id>`")


@main.group()
def feedback():
    """Steer the next iteration."""


def _apply_and_report(ctx, session, kind, payload, as_json, message):
    state = _resolve(ctx.obj["storage"], session)
    apply_feedback(state, kind, payload)
    _save(ctx.obj["storage"], state)
    if as_json:
        click.echo(canonical_json({"status": state.status, "events": len(state.event_log)}))
    else:
        click.echo(message.format(status=state.status))


@feedback.command()
@click.argument("artifact_id")
@click.option("--why", default=None, help="Optional justification to record.")
@session_option
@json_option
@click.pass_context
@engine_errors_to_exit_code
def choose(ctx, artifact_id, why, session, as_json):
    """Prefer one finalist program over the other."""
    payload = {"chosen_id": artifact_id}
    if why:
        payload["justification"] = why
    _apply_and_report(
        ctx, session, "binary-choice", payload, as_json,
        f"choice of {artifact_id} recorded, status {{status}}",
    )


@feedback.command()
@click.argument("text")
@click.option("--target", default=None, help="Artifact the critique is about.")
@session_option
@json_option
@click.pass_context
@engine_errors_to_exit_code
def critique(ctx, text, target, session, as_json):
    """Free-text guidance folded into the next generation context."""
    payload = {"text": text}
    if target:
        payload["target_id"] = target
    _apply_and_report(
        ctx, session, "nl-critique", payload, as_json,
        "critique recorded, status {status}",
    )


@feedback.command()
@click.argument("target_id")
@click.option("--content", default=None)
@click.option("--file", "path", default=None, type=click.Path(exists=True))
@session_option
@json_option
@click.pass_context
@engine_errors_to_exit_code
def edit(ctx, target_id, content, path, session, as_json):
    """Rewrite an artifact by hand; records the edit as a preference."""
    if (content is None) == (path is None):
        raise click.UsageError("pass exactly one of --content or --file")
    if path is not None:
        with open(path, "r", encoding="utf-8") as handle:
            content = handle.read()
    _apply_and_report(
        ctx, session, "direct-edit",
        {"target_id": target_id, "content": content}, as_json,
        f"edit of {target_id} recorded, status {{status}}",
    )


@feedback.command()
@click.argument("target_id")
@click.option("--ok/--failed", "ran", default=True, help="Did the program run?")
@click.option("--log", default="", help="Captured output.")
@session_option
@json_option
@click.pass_context
@engine_errors_to_exit_code
def execution(ctx, target_id, ran, log, session, as_json):
    """Attach an execution result to a program."""
    _apply_and_report(
        ctx, session, "execution-report",
        {"target_id": target_id, "ran": ran, "log": log}, as_json,
        f"execution report for {target_id} recorded, status {{status}}",
    )


@feedback.command()
@click.argument("artifact_id", required=False)
@session_option
@json_option
@click.pass_context
@engine_errors_to_exit_code
def accept(ctx, artifact_id, session, as_json):
    """Accept a finalist (or the session as-is when nothing was produced)."""
    payload = {"artifact_id": artifact_id} if artifact_id else {}
    _apply_and_report(
        ctx, session, "accept", payload, as_json,
        "accepted, status {status}",
    )


@feedback.command()
@click.option("--reason", default="", help="Why the session is being abandoned.")
@session_option
@json_option
@click.pass_context
@engine_errors_to_exit_code
def abort(ctx, reason, session, as_json):
    _apply_and_report(
        ctx, session, "abort", {"reason": reason}, as_json,
        "aborted, status {status}",
    )


@main.group()
def show():
    """Inspect a session."""


@show.command("state")
@session_option
@json_option
@click.pass_context
@engine_errors_to_exit_code
def show_state(ctx, session, as_json):
    state = _resolve(ctx.obj["storage"], session)
    if as_json:
        click.echo(canonical_json(state.to_document()))
        return
    click.echo(f"session       {state.session_id}")
    click.echo(f"status        {state.status}")
    click.echo(f"problem       {state.problem_statement}")
    click.echo(f"iterations    {len(state.iterations)}")
    click.echo(f"artifacts     {len(state.graph)}")
    click.echo(f"preferences   {len(state.preference_log)}")
    click.echo(f"events        {len(state.event_log)}")
    if state.current_finalists:
        click.echo(f"finalists     {state.current_finalists[0]} {state.current_finalists[1]}")


@show.command("lineage")
@click.argument("artifact_id")
@session_option
@json_option
@click.pass_context
@engine_errors_to_exit_code
def show_lineage(ctx, artifact_id, session, as_json):
    state = _resolve(ctx.obj["storage"], session)
    chain = [state.graph.get(aid) for aid in state.graph.lineage(artifact_id)]
    if as_json:
        click.echo(canonical_json([a.to_dict() for a in chain]))
        return
    for artifact in chain:
        level = state.graph.levels[artifact.level]
        click.echo(f"-- level {artifact.level} ({level.name}), artifact {artifact.id}, "
                   f"{artifact.provenance} --")
        click.echo(display_content(artifact))


@show.command("utilities")
@session_option
@json_option
@click.pass_context
@engine_errors_to_exit_code
def show_utilities(ctx, session, as_json):
    state = _resolve(ctx.obj["storage"], session)
    estimate = state.utility_snapshot
    if estimate is None:
        if as_json:
            click.echo(canonical_json({"utilities": []}))
        else:
            click.echo("no fitted utilities yet")
        return
    rows = estimate.sorted_scores()
    if as_json:
        click.echo(canonical_json(
            {"utilities": [{"artifact_id": aid, "score": score} for aid, score in rows]}
        ))
        return
    click.echo("artifact_id\tscore")
    for aid, score in rows:
        click.echo(f"{aid}\t{score:+.6f}")


@show.command("matches")
@session_option
@json_option
@click.pass_context
@engine_errors_to_exit_code
def show_matches(ctx, session, as_json):
    state = _resolve(ctx.obj["storage"], session)
    if as_json:
        rows = [
            {"iteration": record.index, "matches": [m.to_dict() for m in record.tournament_outcome.match_log]}
            for record in state.iterations
            if record.tournament_outcome
        ]
        click.echo(canonical_json(rows))
        return
    for record in state.iterations:
        if not record.tournament_outcome:
            continue
        click.echo(f"iteration {record.index + 1}:")
        for m in record.tournament_outcome.match_log:
            a, b = m.match
            click.echo(f"  round {m.round + 1}: {a} vs {b} -> {m.winner}")


@show.command("events")
@session_option
@click.pass_context
@engine_errors_to_exit_code
def show_events(ctx, session):
    state = _resolve(ctx.obj["storage"], session)
    for line in event_lines(state):
        click.echo(line)


@show.command("artifact")
@click.argument("artifact_id")
@session_option
@json_option
@click.pass_context
@engine_errors_to_exit_code
def show_artifact(ctx, artifact_id, session, as_json):
    state = _resolve(ctx.obj["storage"], session)
    artifact = state.graph.get(artifact_id)
    if as_json:
        click.echo(canonical_json(artifact.to_dict()))
        return
    click.echo(display_content(artifact))


@main.command()
@click.option("--out", default=None, type=click.Path(), help="Write here instead of stdout.")
@session_option
@click.pass_context
@engine_errors_to_exit_code
def export(ctx, out, session):
    """Emit the canonical session file."""
    state = _resolve(ctx.obj["storage"], session)
    text = canonical_json(state.to_document(), indent=2) + "\n"
    if out:
        with open(out, "w", encoding="utf-8") as handle:
            handle.write(text)
        click.echo(f"wrote {out}")
    else:
        click.echo(text, nl=False)


@main.command()
@click.argument("path", required=False)
@session_option
@click.pass_context
@engine_errors_to_exit_code
def replay(ctx, path, session):
    """Re-execute the event log and verify it rebuilds identical state."""
    if path:
        state = load_session(path)
    else:
        state = _resolve(ctx.obj["storage"], session)
    replay_check(state)
    click.echo("deterministic")


@main.command()
@click.option("--n", default=16, show_default=True, type=int, help="Candidates per trial.")
@click.option("--p", default=1.0, show_default=True, type=float, help="Judge correctness.")
@click.option("--trials", default=100, show_default=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--out", default=None, type=click.Path(), help="Directory for tables and figures.")
@click.option("--no-fit", is_flag=True, help="Skip the pooled utility fit.")
@json_option
@engine_errors_to_exit_code
def simulate(n, p, trials, seed, out, no_fit, as_json):
    """Monte-Carlo tournament statistics over synthetic candidates."""
    from .simulate import simulate as run_simulation

    report = run_simulation(n, p, trials, seed, fit=not no_fit)
    if as_json:
        click.echo(canonical_json(report.to_dict()))
    else:
        for line in report.summary_lines():
            click.echo(line)
    if out:
        from .report import write_report

        for path in write_report(report, out):
            click.echo(f"wrote {path}", err=as_json)


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True, type=int)
@click.pass_context
@engine_errors_to_exit_code
def serve(ctx, host, port):
    """Run the HTTP service (SERVICE_PORT overrides --port)."""
    from .service import ServiceConfig, serve as run_service

    run_service(ServiceConfig(host=host, port=port, storage_dir=ctx.obj["storage"]))


if __name__ == "__main__":
    main()
