"""Generation and judgment backends behind one dispatch surface."""

from __future__ import annotations

from typing import Callable, Optional

from .._util import stable_seed
from ..tournament import MatchResult
from .base import (
    TEMPLATE_NAMES,
    BackendConfig,
    GeneratorRequest,
    JudgeRequest,
    load_template,
    parse_verdict,
    render_template,
)
from .mock import hidden_utility, mock_generate, mock_judge, strip_utility_tag


def generate_refinements(config: BackendConfig, request: GeneratorRequest) -> list[str]:
    """Sample request.sample_count candidate texts from the backend."""
    if config.kind == "mock":
        return mock_generate(config, request)
    from .http_chat import http_generate

    return http_generate(config, request)


def judge_pair(
    config: BackendConfig,
    request: JudgeRequest,
    noise_p: Optional[float] = None,
    draw_seed: int = 0,
) -> MatchResult:
    """Adjudicate one pair; winner is the positional label "1" or "2"."""
    if config.kind == "mock":
        return mock_judge(config, request, noise_p=noise_p, draw_seed=draw_seed)
    from .http_chat import http_judge

    return http_judge(config, request)


def make_summarizer(config: BackendConfig) -> Optional[Callable[[str], str]]:
    """Summarization backend for tournament justifications.

    None for the mock backend: the caller's deterministic header
    concatenation already is the mock summary.
    """
    if config.kind == "mock":
        return None
    from .http_chat import http_summarize

    return lambda text: http_summarize(config, text)


class ArtifactJudge:
    """Adapts content-level pairwise judging to id-level tournament play.

    Noise draws are keyed by (session seed, match ordinal), so concurrent
    judging cannot reorder them.
    """

    def __init__(
        self,
        config: BackendConfig,
        specification: str,
        content_lookup: Callable[[str], str],
        session_seed: int = 0,
        noise_p: Optional[float] = None,
        rubric: Optional[str] = None,
    ):
        self.config = config
        self.specification = specification
        self.content_lookup = content_lookup
        self.session_seed = session_seed
        self.noise_p = noise_p
        self.rubric = rubric
        self.name = "mock-judge" if config.kind == "mock" else (config.model_name or "http-judge")

    def decide(self, candidate_a: str, candidate_b: str, draw_index: int) -> tuple[str, str]:
        request = JudgeRequest(
            specification=self.specification,
            candidate_a=self.content_lookup(candidate_a),
            candidate_b=self.content_lookup(candidate_b),
            rubric=self.rubric,
        )
        result = judge_pair(
            self.config,
            request,
            noise_p=self.noise_p,
            draw_seed=stable_seed(self.session_seed, draw_index),
        )
        winner = candidate_a if result.winner == "1" else candidate_b
        return winner, result.justification


__all__ = [
    "ArtifactJudge",
    "BackendConfig",
    "GeneratorRequest",
    "JudgeRequest",
    "MatchResult",
    "TEMPLATE_NAMES",
    "generate_refinements",
    "hidden_utility",
    "judge_pair",
    "load_template",
    "make_summarizer",
    "mock_generate",
    "mock_judge",
    "parse_verdict",
    "render_template",
    "strip_utility_tag",
]
