"""Layered DAG of candidate artifacts across abstraction levels.

Artifacts live on contiguous levels 0..J. Every artifact above level 0
points at exactly one parent on the level above it; the graph records the
inverse (children) index so one-to-many refinement lookups are O(1). The
structure is append-only: artifacts are never deleted and ids are never
reused.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Optional

from .errors import UnknownIdError, ValidationError

ContentKind = Literal["natural-language", "structural-text", "source-text"]
Provenance = Literal["generated", "human-edited", "seed"]

PROVENANCES = ("generated", "human-edited", "seed")


@dataclass(frozen=True)
class AbstractionLevel:
    """One stratum of the hierarchy; index 0 is the most abstract."""

    index: int
    name: str
    content_kind: ContentKind


def default_levels() -> list[AbstractionLevel]:
    """The stock three-level hierarchy for software construction."""
    return [
        AbstractionLevel(0, "specification", "natural-language"),
        AbstractionLevel(1, "structural-description", "structural-text"),
        AbstractionLevel(2, "program", "source-text"),
    ]


@dataclass
class Artifact:
    """One candidate solution at one abstraction level (may be partial)."""

    id: str
    level: int
    content: str
    parent_id: Optional[str]
    provenance: Provenance
    created_at: int
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "level": self.level,
            "content": self.content,
            "parent_id": self.parent_id,
            "provenance": self.provenance,
            "created_at": self.created_at,
            "metadata": self.metadata,
        }


@dataclass
class ValidationFinding:
    code: str
    message: str
    artifact_id: Optional[str] = None


class ConstructionGraph:
    """The explored portion of the construction space.

    Single-writer: mutations must be serialized by the owning session.
    """

    def __init__(self, levels: Optional[list[AbstractionLevel]] = None):
        self.levels: list[AbstractionLevel] = list(levels) if levels else default_levels()
        _check_levels(self.levels)
        self.artifacts: dict[str, Artifact] = {}
        self.children_index: dict[str, list[str]] = {}
        self._next_id = 1

    def __len__(self) -> int:
        return len(self.artifacts)

    def __contains__(self, artifact_id: str) -> bool:
        return artifact_id in self.artifacts

    def get(self, artifact_id: str) -> Artifact:
        try:
            return self.artifacts[artifact_id]
        except KeyError:
            raise UnknownIdError(f"unknown artifact id: {artifact_id}") from None

    def add_artifact(
        self,
        level: int,
        content: str,
        parent_id: Optional[str] = None,
        provenance: Provenance = "generated",
        metadata: Optional[dict] = None,
        created_at: Optional[int] = None,
    ) -> str:
        """Insert a new artifact and return its fresh id.

        Level 0 artifacts must be parentless; others must name a parent one
        level above. Empty content is allowed only for seed artifacts.
        """
        if not 0 <= level < len(self.levels):
            raise ValidationError(f"level {level} out of range 0..{len(self.levels) - 1}")
        if level == 0:
            if parent_id is not None:
                raise ValidationError("level-0 artifacts cannot have a parent")
        else:
            if parent_id is None:
                raise ValidationError(f"artifacts at level {level} require a parent")
            parent = self.artifacts.get(parent_id)
            if parent is None:
                raise UnknownIdError(f"unknown parent: {parent_id}")
            if parent.level != level - 1:
                raise ValidationError(
                    f"level/parent mismatch: parent {parent_id} is at level "
                    f"{parent.level}, expected {level - 1}"
                )
        if provenance not in PROVENANCES:
            raise ValidationError(f"unknown provenance: {provenance}")
        if not content and provenance != "seed":
            raise ValidationError("empty content is allowed only for seed artifacts")

        artifact_id = str(self._next_id)
        self._next_id += 1
        artifact = Artifact(
            id=artifact_id,
            level=level,
            content=content,
            parent_id=parent_id,
            provenance=provenance,
            created_at=created_at if created_at is not None else int(artifact_id),
            metadata=dict(metadata or {}),
        )
        self.artifacts[artifact_id] = artifact
        self.children_index.setdefault(artifact_id, [])
        if parent_id is not None:
            self.children_index.setdefault(parent_id, []).append(artifact_id)
        return artifact_id

    def refinements_of(self, artifact_id: str) -> list[str]:
        """Children of the artifact, in insertion order."""
        self.get(artifact_id)
        return list(self.children_index.get(artifact_id, []))

    def abstraction_of(self, artifact_id: str) -> Optional[str]:
        """Parent id, or None for level-0 artifacts."""
        return self.get(artifact_id).parent_id

    def lineage(self, artifact_id: str) -> list[str]:
        """Chain [root, ..., artifact_id]; length is level + 1."""
        chain = [self.get(artifact_id).id]
        seen = {artifact_id}
        current = self.artifacts[artifact_id]
        while current.parent_id is not None:
            if current.parent_id in seen:
                raise ValidationError(f"parent cycle at {current.parent_id}")
            current = self.get(current.parent_id)
            seen.add(current.id)
            chain.append(current.id)
        chain.reverse()
        return chain

    def artifacts_at_level(self, level: int) -> list[Artifact]:
        ordered = sorted(self.artifacts.values(), key=lambda a: int(a.id))
        return [a for a in ordered if a.level == level]

    def validate(self) -> list[ValidationFinding]:
        """Check every structural invariant; empty report means well-formed.

        Never raises: deserialized graphs are validated with this before
        they are trusted.
        """
        findings: list[ValidationFinding] = []
        level_indices = [lv.index for lv in self.levels]
        if level_indices != list(range(len(self.levels))):
            findings.append(
                ValidationFinding("bad-levels", f"level indices not contiguous: {level_indices}")
            )
        for artifact in self.artifacts.values():
            if not 0 <= artifact.level < len(self.levels):
                findings.append(
                    ValidationFinding(
                        "level-out-of-range",
                        f"artifact {artifact.id} at undefined level {artifact.level}",
                        artifact.id,
                    )
                )
            if artifact.level == 0 and artifact.parent_id is not None:
                findings.append(
                    ValidationFinding(
                        "level-mismatch",
                        f"level-0 artifact {artifact.id} has a parent",
                        artifact.id,
                    )
                )
            if artifact.level > 0 and artifact.parent_id is None:
                findings.append(
                    ValidationFinding(
                        "level-mismatch",
                        f"artifact {artifact.id} at level {artifact.level} has no parent",
                        artifact.id,
                    )
                )
            if artifact.parent_id is not None:
                parent = self.artifacts.get(artifact.parent_id)
                if parent is None:
                    findings.append(
                        ValidationFinding(
                            "dangling-parent",
                            f"artifact {artifact.id} points at missing parent "
                            f"{artifact.parent_id}",
                            artifact.id,
                        )
                    )
                elif parent.level != artifact.level - 1:
                    findings.append(
                        ValidationFinding(
                            "level-mismatch",
                            f"artifact {artifact.id} (level {artifact.level}) has parent "
                            f"{parent.id} at level {parent.level}",
                            artifact.id,
                        )
                    )
            if not artifact.content and artifact.provenance != "seed":
                findings.append(
                    ValidationFinding(
                        "empty-content",
                        f"non-seed artifact {artifact.id} has empty content",
                        artifact.id,
                    )
                )
        # Parent cycles (possible only in corrupt/deserialized graphs).
        for artifact in self.artifacts.values():
            seen: set[str] = set()
            node: Optional[Artifact] = artifact
            while node is not None and node.parent_id is not None:
                if node.parent_id in seen or node.parent_id == artifact.id:
                    findings.append(
                        ValidationFinding(
                            "cycle", f"parent cycle through {artifact.id}", artifact.id
                        )
                    )
                    break
                seen.add(node.id)
                node = self.artifacts.get(node.parent_id)
        # children_index must be the exact inverse of parent links.
        derived: dict[str, list[str]] = {aid: [] for aid in self.artifacts}
        for artifact in sorted(self.artifacts.values(), key=lambda a: int(a.id)):
            if artifact.parent_id in derived:
                derived[artifact.parent_id].append(artifact.id)
        for aid, children in self.children_index.items():
            if aid not in self.artifacts:
                findings.append(
                    ValidationFinding("index-desync", f"children index for unknown id {aid}", aid)
                )
            elif sorted(children, key=int) != sorted(derived.get(aid, []), key=int):
                findings.append(
                    ValidationFinding(
                        "index-desync",
                        f"children index for {aid} does not match parent links",
                        aid,
                    )
                )
        for aid in derived:
            if derived[aid] and aid not in self.children_index:
                findings.append(
                    ValidationFinding("index-desync", f"missing children index for {aid}", aid)
                )
        return findings

    # -- serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "levels": [
                {"index": lv.index, "name": lv.name, "content_kind": lv.content_kind}
                for lv in self.levels
            ],
            "artifacts": [
                a.to_dict()
                for a in sorted(self.artifacts.values(), key=lambda a: int(a.id))
            ],
            "next_id": self._next_id,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ConstructionGraph":
        levels = [
            AbstractionLevel(lv["index"], lv["name"], lv["content_kind"])
            for lv in data["levels"]
        ]
        graph = cls.__new__(cls)
        graph.levels = levels
        graph.artifacts = {}
        graph.children_index = {}
        graph._next_id = int(data["next_id"])
        for row in data["artifacts"]:
            artifact = Artifact(
                id=row["id"],
                level=int(row["level"]),
                content=row["content"],
                parent_id=row["parent_id"],
                provenance=row["provenance"],
                created_at=int(row["created_at"]),
                metadata=dict(row.get("metadata", {})),
            )
            graph.artifacts[artifact.id] = artifact
            graph.children_index.setdefault(artifact.id, [])
            if artifact.parent_id is not None:
                graph.children_index.setdefault(artifact.parent_id, []).append(artifact.id)
        return graph

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ConstructionGraph):
            return NotImplemented
        return self.to_dict() == other.to_dict()


def _check_levels(levels: list[AbstractionLevel]) -> None:
    if len(levels) < 2:
        raise ValidationError("hierarchy needs at least levels 0 and 1")
    indices = [lv.index for lv in levels]
    if indices != list(range(len(levels))):
        raise ValidationError(f"level indices must be contiguous from 0, got {indices}")
