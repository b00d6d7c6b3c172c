"""Small shared helpers: stable seeding, canonical JSON, rank statistics."""

from __future__ import annotations

import difflib
import hashlib
import json
from typing import Any, Mapping, Sequence


def stable_seed(*parts: object) -> int:
    """Derive a 63-bit seed from arbitrary parts, stable across processes.

    Python's builtin hash() is salted per process; replay and the mock
    backends need seeds that survive serialization, so everything is routed
    through sha256 of a canonical string form.
    """
    material = "\x1f".join(str(p) for p in parts)
    digest = hashlib.sha256(material.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def stable_digest(*parts: object, length: int = 12) -> str:
    """Short hex digest of the given parts (for ids and payload digests)."""
    material = "\x1f".join(str(p) for p in parts)
    return hashlib.sha256(material.encode("utf-8")).hexdigest()[:length]


def canonical_json(value: Any, indent: int | None = None) -> str:
    """Serialize to canonical JSON: sorted keys, no NaN, stable float repr."""
    if indent is None:
        return json.dumps(
            value, sort_keys=True, separators=(",", ":"), ensure_ascii=False, allow_nan=False
        )
    return json.dumps(value, sort_keys=True, indent=indent, ensure_ascii=False, allow_nan=False)


def payload_digest(payload: Any) -> str:
    return stable_digest(canonical_json(payload))


def unified_diff(before: str, after: str, name: str = "artifact") -> str:
    """Unified diff between two text bodies, stable headers, no timestamps."""
    lines = difflib.unified_diff(
        before.splitlines(keepends=True),
        after.splitlines(keepends=True),
        fromfile=f"a/{name}",
        tofile=f"b/{name}",
    )
    return "".join(lines)


def kendall_tau(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Kendall rank correlation by direct pair counting (tau-a).

    Suitable for the small candidate sets used here; ties count as neither
    concordant nor discordant.
    """
    n = len(xs)
    if n != len(ys):
        raise ValueError("sequences must have equal length")
    if n < 2:
        raise ValueError("need at least two observations")
    concordant = discordant = 0
    for i in range(n):
        for j in range(i + 1, n):
            dx = xs[i] - xs[j]
            dy = ys[i] - ys[j]
            prod = dx * dy
            if prod > 0:
                concordant += 1
            elif prod < 0:
                discordant += 1
    return (concordant - discordant) / (n * (n - 1) / 2)
