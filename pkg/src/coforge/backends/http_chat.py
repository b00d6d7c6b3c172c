"""Client for OpenAI-style chat-completion endpoints.

One POST per generation batch (n = sample_count) and one per judgment.
Transient transport problems and 5xx responses are retried with exponential
backoff; unparseable judge verdicts are re-sampled the same number of times.
"""

from __future__ import annotations

import logging
import os
import time

import requests

from ..errors import BackendFailure, ValidationError
from ..tournament import MatchResult
from .base import (
    BackendConfig,
    GeneratorRequest,
    JudgeRequest,
    load_template,
    parse_verdict,
    render_template,
    template_for_level,
)

log = logging.getLogger(__name__)


def _headers(config: BackendConfig) -> dict[str, str]:
    headers = {"Content-Type": "application/json"}
    if config.auth_env_var:
        credential = os.environ.get(config.auth_env_var, "")
        if not credential:
            raise BackendFailure(
                f"credential environment variable {config.auth_env_var} is not set"
            )
        headers["Authorization"] = f"Bearer {credential}"
    return headers


def _post_chat(
    config: BackendConfig, prompt: str, temperature: float, n: int
) -> list[str]:
    headers = _headers(config)
    body = {
        "model": config.model_name,
        "messages": [{"role": "user", "content": prompt}],
        "temperature": temperature,
        "n": n,
    }
    delay = config.retry_delay
    failure: BackendFailure | None = None
    for attempt in range(config.max_retries + 1):
        if attempt:
            log.warning("retrying %s (attempt %d): %s", config.endpoint_url, attempt + 1, failure)
            time.sleep(delay)
            delay *= 2
        try:
            response = requests.post(
                config.endpoint_url, json=body, headers=headers, timeout=config.timeout
            )
        except requests.RequestException as exc:
            failure = BackendFailure(f"request to {config.endpoint_url} failed: {exc}")
            continue
        if response.status_code >= 500:
            failure = BackendFailure(f"server error {response.status_code}")
            continue
        if response.status_code != 200:
            # client errors will not improve on retry
            raise BackendFailure(
                f"endpoint rejected request with status {response.status_code}",
                detail=response.text[:500],
            )
        try:
            payload = response.json()
            contents = [choice["message"]["content"] for choice in payload["choices"]]
        except (ValueError, KeyError, TypeError) as exc:
            failure = BackendFailure(f"malformed completion payload: {exc}")
            continue
        return contents
    assert failure is not None
    raise failure


def http_generate(config: BackendConfig, request: GeneratorRequest) -> list[str]:
    template = load_template(config, template_for_level(request))
    prompt = render_template(
        template, {"parent": request.parent_content, "context": request.context}
    )
    contents = _post_chat(config, prompt, request.temperature, request.sample_count)
    if len(contents) != request.sample_count:
        raise BackendFailure(
            f"expected {request.sample_count} completions, got {len(contents)}"
        )
    if any(not text for text in contents):
        raise BackendFailure("backend returned an empty completion")
    return contents


def http_judge(config: BackendConfig, request: JudgeRequest) -> MatchResult:
    template = load_template(config, "judgment")
    prompt = render_template(
        template,
        {
            "specification": request.specification,
            "candidate_a": request.candidate_a,
            "candidate_b": request.candidate_b,
            "rubric": request.rubric or "",
        },
    )
    last_error: Exception | None = None
    for _ in range(config.max_retries + 1):
        content = _post_chat(config, prompt, 0.0, 1)[0]
        try:
            winner, justification = parse_verdict(content)
        except ValidationError as exc:
            last_error = exc
            continue
        return MatchResult(
            round=0,
            match=("1", "2"),
            winner=str(winner),
            justification=justification,
            judge_name=config.model_name or "http-judge",
        )
    raise BackendFailure(f"unparseable verdict after retries: {last_error}")


def http_summarize(config: BackendConfig, justifications: str) -> str:
    template = load_template(config, "summarization")
    prompt = render_template(template, {"justifications": justifications})
    return _post_chat(config, prompt, 0.0, 1)[0]
