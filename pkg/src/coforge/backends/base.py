"""Shared backend types: request shapes, config, verdict parsing, templates.

Two implementations exist behind the same contract: a deterministic mock
(pure function of seed and inputs, for tests and simulation) and an HTTP
client for chat-completion endpoints.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from importlib.resources import files
from typing import Literal, Optional

from ..errors import ValidationError

BackendKind = Literal["mock", "http-chat"]

TEMPLATE_NAMES = (
    "specification",
    "refinement",
    "judgment",
    "summarization",
    "code-generation",
)


@dataclass
class GeneratorRequest:
    """Inputs for sampling candidate refinements of one parent artifact."""

    target_level: int
    parent_content: str
    context: str = ""
    sample_count: int = 1
    temperature: float = 1.0
    seed: int = 0
    template: Optional[str] = None

    def __post_init__(self) -> None:
        if self.sample_count < 1:
            raise ValidationError("sample_count must be at least 1")
        if not math.isfinite(self.temperature) or self.temperature < 0:
            raise ValidationError("temperature must be finite and nonnegative")
        if self.target_level < 0:
            raise ValidationError("target_level must be nonnegative")


@dataclass
class JudgeRequest:
    """One pairwise comparison to adjudicate."""

    specification: str
    candidate_a: str
    candidate_b: str
    rubric: Optional[str] = None

    def __post_init__(self) -> None:
        if not self.candidate_a or not self.candidate_b:
            raise ValidationError("judge candidates must be nonempty")
        if self.candidate_a == self.candidate_b:
            raise ValidationError("judge candidates must be distinct")


@dataclass
class BackendConfig:
    """Where generations and judgments come from.

    The credential itself is never held here, only the name of the
    environment variable that supplies it at call time.
    """

    kind: BackendKind = "mock"
    endpoint_url: str = ""
    model_name: str = ""
    auth_env_var: str = ""
    timeout: float = 30.0
    max_retries: int = 2
    retry_delay: float = 0.5
    parallelism: int = 4
    prompt_templates: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.kind not in ("mock", "http-chat"):
            raise ValidationError(f"unknown backend kind: {self.kind}")
        if self.kind == "http-chat" and (not self.endpoint_url or not self.model_name):
            raise ValidationError("http-chat backend requires endpoint_url and model_name")
        if self.timeout <= 0:
            raise ValidationError("timeout must be positive")
        if self.max_retries < 0:
            raise ValidationError("max_retries must be nonnegative")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "endpoint_url": self.endpoint_url,
            "model_name": self.model_name,
            "auth_env_var": self.auth_env_var,
            "timeout": self.timeout,
            "max_retries": self.max_retries,
            "retry_delay": self.retry_delay,
            "parallelism": self.parallelism,
            "prompt_templates": dict(self.prompt_templates),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "BackendConfig":
        return cls(
            kind=data["kind"],
            endpoint_url=data.get("endpoint_url", ""),
            model_name=data.get("model_name", ""),
            auth_env_var=data.get("auth_env_var", ""),
            timeout=float(data.get("timeout", 30.0)),
            max_retries=int(data.get("max_retries", 2)),
            retry_delay=float(data.get("retry_delay", 0.5)),
            parallelism=int(data.get("parallelism", 4)),
            prompt_templates=dict(data.get("prompt_templates", {})),
        )


_MARKER = re.compile(r"\[([12])\]")


def parse_verdict(raw: str) -> tuple[int, str]:
    """Extract the judge's choice from free text.

    The last "[1]" or "[2]" in the text is the verdict; everything before
    it is kept as the justification.
    """
    matches = list(_MARKER.finditer(raw))
    if not matches:
        raise ValidationError(f"unparseable verdict: no [1]/[2] marker in {raw!r}")
    last = matches[-1]
    return int(last.group(1)), raw[: last.start()].strip()


_PLACEHOLDER = re.compile(r"\{([a-z_]+)\}")


def render_template(template: str, values: dict[str, str]) -> str:
    """Substitute {name} placeholders; unknown names stay literal, so braces
    inside candidate code never break rendering."""
    return _PLACEHOLDER.sub(
        lambda m: values[m.group(1)] if m.group(1) in values else m.group(0), template
    )


def load_template(config: BackendConfig, name: str) -> str:
    """Inline override from the config if present, else the packaged file."""
    if name in config.prompt_templates:
        return config.prompt_templates[name]
    if name not in TEMPLATE_NAMES:
        raise ValidationError(f"unknown template name: {name}")
    return files("coforge.backends").joinpath("templates", f"{name}.txt").read_text(
        encoding="utf-8"
    )


def template_for_level(request: GeneratorRequest) -> str:
    """Template name for a generation request when not set explicitly."""
    if request.template is not None:
        return request.template
    return "specification" if request.target_level == 0 else "refinement"
