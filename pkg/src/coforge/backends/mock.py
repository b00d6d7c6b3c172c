"""Deterministic stand-in backends.

Every output is a pure function of the request and its seed, so whole
sessions replay bit-for-bit and tests never need a live endpoint. Generated
content carries a hidden synthetic utility in a trailer line; the mock judge
reads those trailers instead of understanding the text.
"""

from __future__ import annotations

import hashlib
import re
from random import Random

from .._util import stable_seed
from ..errors import ValidationError
from ..tournament import MatchResult
from .base import BackendConfig, GeneratorRequest, JudgeRequest

UTILITY_TAG = re.compile(r"\n?\n?\[\[utility:(-?\d+\.\d{6})\]\]\s*\Z")

_COMPONENT_NAMES = [
    "intake", "planner", "resolver", "store", "scheduler", "renderer",
    "validator", "dispatcher", "cache", "reporter", "indexer", "gateway",
]
_QUALITIES = [
    "strict input validation", "a flat module layout", "explicit error paths",
    "a single source of truth for state", "small composable interfaces",
    "separation of parsing from execution", "idempotent writes",
    "a narrow public surface", "pure core logic with effects at the edges",
]


def embed_utility_tag(body: str, utility: float) -> str:
    return f"{body}\n\n[[utility:{utility:.6f}]]"


def strip_utility_tag(content: str) -> tuple[str, float | None]:
    """Display text and the hidden score, if the trailer is present."""
    match = UTILITY_TAG.search(content)
    if not match:
        return content, None
    return content[: match.start()], float(match.group(1))


def hidden_utility(content: str) -> float:
    """Tag value when present; otherwise a stable hash-derived stand-in so
    untagged (e.g. human-edited) text still sorts deterministically."""
    _, tagged = strip_utility_tag(content)
    if tagged is not None:
        return tagged
    digest = hashlib.sha256(content.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") / 2**64


def _parent_digest(parent_content: str) -> str:
    return hashlib.sha256(parent_content.encode("utf-8")).hexdigest()[:8]


def mock_generate(config: BackendConfig, request: GeneratorRequest) -> list[str]:
    """Exactly sample_count texts, distinct and reproducible.

    Each sample is derived from (seed, sample index, parent hash); the
    context only shows up as quoted echo lines so tests can assert it was
    threaded through.
    """
    digest = _parent_digest(request.parent_content)
    samples = []
    for index in range(request.sample_count):
        rng = Random(stable_seed(request.seed, index, digest))
        utility = round(rng.random(), 6)
        picks = rng.sample(_QUALITIES, 3)
        components = rng.sample(_COMPONENT_NAMES, 3)
        if request.target_level == 0:
            body = "\n".join(
                [
                    f"Specification variant {index + 1} (problem {digest})",
                    f"Goal: solve the stated problem with {picks[0]}.",
                    f"Inputs are checked before use; outputs favor {picks[1]}.",
                    f"Edge cases: empty input, oversized input, repeated calls.",
                    _context_echo(request.context),
                ]
            )
        elif request.target_level == 1:
            body = "\n".join(
                [
                    f"Design variant {index + 1} for parent {digest}",
                    "Components:",
                    f"  - {components[0]}: owns {picks[0]}",
                    f"  - {components[1]}: owns {picks[1]}",
                    f"  - {components[2]}: owns {picks[2]}",
                    f"Data flow: {components[0]} feeds {components[1]}, "
                    f"which drives {components[2]}.",
                    _context_echo(request.context),
                ]
            )
        else:
            body = "\n".join(
                [
                    f"# program variant {index + 1} derived from design {digest}",
                    f"# emphasizes {picks[0]}",
                    "def main(argv):",
                    f"    state = setup_{components[0]}(argv)",
                    f"    result = run_{components[1]}(state)",
                    f"    return emit_{components[2]}(result)",
                    _context_echo(request.context, comment_prefix="# "),
                ]
            )
        samples.append(embed_utility_tag(body.rstrip("\n"), utility))
    return samples


def _context_echo(context: str, comment_prefix: str = "") -> str:
    if not context:
        return ""
    first_line = context.strip().splitlines()[0][:120]
    return f"{comment_prefix}(context noted: {first_line})"


def mock_judge(
    config: BackendConfig,
    request: JudgeRequest,
    noise_p: float | None = None,
    draw_seed: int = 0,
) -> MatchResult:
    """Compare hidden utilities; ties go to candidate [1].

    With noise_p < 1 the true verdict is kept with probability noise_p and
    flipped otherwise, drawn from the given seed so runs replay exactly.
    """
    if noise_p is not None and not 0.5 < noise_p <= 1.0:
        raise ValidationError("noise_p must be in (0.5, 1]")
    utility_a = hidden_utility(request.candidate_a)
    utility_b = hidden_utility(request.candidate_b)
    winner = 1 if utility_a >= utility_b else 2
    if noise_p is not None and noise_p < 1.0:
        if Random(draw_seed).random() >= noise_p:
            winner = 3 - winner
    justification = (
        f"candidate [{winner}] matches the specification more closely; "
        f"the alternative covers less of the stated behavior"
    )
    return MatchResult(
        round=0,
        match=("1", "2"),
        winner=str(winner),
        justification=justification,
        judge_name="mock-judge",
    )
