"""Preference-guided construction engine.

Explores a layered space of candidate artifacts (specification, structure,
program), narrows each batch with pairwise-judged knockout brackets, fits
latent utilities to the accumulated comparisons, and folds human feedback
back into the next round.
"""

from __future__ import annotations

from .errors import (
    BackendFailure,
    EngineError,
    UnknownIdError,
    ValidationError,
    WrongStatusError,
)
from .model import (
    AbstractionLevel,
    Artifact,
    ConstructionGraph,
    ValidationFinding,
    default_levels,
)
from .utility import (
    AggregationSpec,
    PreferenceRecord,
    UtilityEstimate,
    fit_utilities,
    lift_utility,
)
from .tournament import (
    Bracket,
    MatchResult,
    TournamentAbort,
    TournamentOutcome,
    run_tournament,
    seed_bracket,
    summarize_justifications,
)
from .backends import (
    ArtifactJudge,
    BackendConfig,
    GeneratorRequest,
    JudgeRequest,
    generate_refinements,
    judge_pair,
)
from .session import (
    Event,
    IterationRecord,
    SessionPolicy,
    SessionState,
    apply_feedback,
    approve_specification,
    create_session,
    edit_specification,
    load_session,
    replay,
    replay_check,
    run_iteration,
    save_session,
)
from .simulate import SimulationReport, simulate

__version__ = "0.1.0"

__all__ = [
    "AbstractionLevel",
    "AggregationSpec",
    "Artifact",
    "ArtifactJudge",
    "BackendConfig",
    "BackendFailure",
    "Bracket",
    "ConstructionGraph",
    "EngineError",
    "Event",
    "GeneratorRequest",
    "IterationRecord",
    "JudgeRequest",
    "MatchResult",
    "PreferenceRecord",
    "SessionPolicy",
    "SessionState",
    "SimulationReport",
    "TournamentAbort",
    "TournamentOutcome",
    "UnknownIdError",
    "UtilityEstimate",
    "ValidationError",
    "ValidationFinding",
    "WrongStatusError",
    "apply_feedback",
    "approve_specification",
    "create_session",
    "default_levels",
    "edit_specification",
    "fit_utilities",
    "generate_refinements",
    "judge_pair",
    "lift_utility",
    "load_session",
    "replay",
    "replay_check",
    "run_iteration",
    "run_tournament",
    "save_session",
    "seed_bracket",
    "simulate",
    "summarize_justifications",
    "__version__",
]
