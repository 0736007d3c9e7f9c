"""False-positive filters and the M1-M4 method variants.

Strategy 1 drops events of things the knowledge graph knows nothing about
before detection.  Strategy 2 drops environment conflicts whose property
already sits at the resident's preferred value.
"""
from __future__ import annotations

import enum
from typing import Iterable, Mapping, Sequence

from .detector import Conflict, ConflictKind, detect_all
from .kg_core import KnowledgeGraph
from .rules import HomeContext, IntervalEvent

__all__ = [
    "DEFAULT_EPS",
    "Method",
    "MissingContextError",
    "MissingReadingError",
    "filter_inert_events",
    "filter_contextual",
    "run_method",
]

DEFAULT_EPS = 0.5


class MissingContextError(LookupError):
    """Context or readings needed by strategy 2 are absent."""


class MissingReadingError(MissingContextError):
    def __init__(self, env: str, loc: str):
        super().__init__(f"no current reading for {env}@{loc}")
        self.env = env
        self.loc = loc


class Method(enum.Enum):
    M1 = "M1"
    M2 = "M2"
    M3 = "M3"
    M4 = "M4"

    @property
    def filters_events(self) -> bool:
        return self in (Method.M2, Method.M4)

    @property
    def filters_context(self) -> bool:
        return self in (Method.M3, Method.M4)


def filter_inert_events(events: Sequence[IntervalEvent], kg: KnowledgeGraph) -> list[IntervalEvent]:
    known = kg.services
    return [e for e in events if e.service in known]


def _conflict_time(c: Conflict) -> float | None:
    if not c.events:
        return None
    return max(e.st for e in c.events)


def filter_contextual(
    conflicts: Iterable[Conflict],
    ctx: HomeContext,
    readings: Mapping[tuple[str, str], object],
    eps: float = DEFAULT_EPS,
) -> set[Conflict]:
    """Drop opposite/cumulative conflicts over a property that already
    reads as preferred.

    The preference is the one active when the later event starts, falling
    back to any preference for that property and location.  Conflicts with
    no applicable preference are kept.
    """
    out = set()
    for c in conflicts:
        if c.kind not in (ConflictKind.OPP, ConflictKind.CUM):
            out.add(c)
            continue
        key = (c.env, c.loc)
        if key not in readings:
            raise MissingReadingError(*key)
        pref = ctx.preferred_value(c.env, c.loc, _conflict_time(c))
        if pref is None:
            pref = ctx.preferred_value(c.env, c.loc)
        if pref is not None and _same(readings[key], pref, eps):
            continue
        out.add(c)
    return out


def _same(reading, pref, eps: float) -> bool:
    if isinstance(reading, str) or isinstance(pref, str):
        return str(reading).lower() == str(pref).lower()
    return abs(float(reading) - float(pref)) <= eps


def run_method(
    method: Method | str,
    events: Sequence[IntervalEvent],
    firings,
    rules,
    kg3: KnowledgeGraph,
    ctx: HomeContext | None = None,
    readings: Mapping | None = None,
    zeta: float = 5.0,
    eps: float = DEFAULT_EPS,
    **detect_kw,
) -> list[Conflict]:
    """Detector wrapped with the filters the method variant calls for."""
    method = Method(method)
    if method.filters_events:
        events = filter_inert_events(events, kg3)
    found = detect_all(events, firings, rules, kg3, zeta=zeta, **detect_kw)
    if method.filters_context:
        if readings is None or ctx is None:
            raise MissingContextError(f"method {method.value} needs a context and readings")
        kept = filter_contextual(found, ctx, readings, eps)
        found = [c for c in found if c in kept]
    return found
