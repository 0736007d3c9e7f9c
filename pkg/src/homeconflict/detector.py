"""Conflict taxonomy and detection over interval events and rule firings.

Four kinds are detected:

* ``FFConf``  - two rules command one service with different functionalities
  within ``zeta`` minutes at the same location;
* ``OppConf`` - two overlapping services push a shared property in opposite
  directions;
* ``CumConf`` - two overlapping services push a shared property the same way;
* ``TraConf`` - one service's impact on a property can fire another service's
  trigger.
"""
from __future__ import annotations

import enum
import json
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .kg_core import KnowledgeGraph, Relation, Stage, Triple
from .rules import (
    EcaRule,
    EnvComparison,
    IntervalEvent,
    RuleFiring,
    evaluate_trigger,
    format_clock,
    parse_clock,
    rule_invokes,
)

__all__ = [
    "DEFAULT_ZETA",
    "ConflictKind",
    "Conflict",
    "InputConsistencyError",
    "find_overlaps",
    "detect_ff",
    "detect_pairwise",
    "detect_transitive",
    "detect_all",
    "trigger_directions",
    "PairMatcher",
    "check_inputs",
    "conflict_to_json",
    "conflict_from_json",
    "dump_conflicts",
    "load_conflicts",
]

DEFAULT_ZETA = 5.0


class InputConsistencyError(ValueError):
    def __init__(self, problems: Sequence[str]):
        super().__init__("inconsistent inputs:\n  " + "\n  ".join(problems))
        self.problems = list(problems)


class ConflictKind(enum.Enum):
    FF = "FFConf"
    OPP = "OppConf"
    CUM = "CumConf"
    TRA = "TraConf"


_KIND_ORDER = {k: i for i, k in enumerate(ConflictKind)}


@dataclass(frozen=True)
class Conflict:
    """One detected conflict and its evidence.

    Environment conflicts carry the two triples (``a``, ``b``) and the two
    events; for ``TraConf`` ``a`` is the impact edge of the earlier service
    and ``b`` the trigger edge into the later one.  ``FFConf`` carries the
    two rule ids, the shared service and the firing times.
    """

    kind: ConflictKind
    loc: str
    env: str | None = None
    a: Triple | None = None
    b: Triple | None = None
    events: tuple[IntervalEvent, ...] = ()
    rules: tuple[str, ...] = ()
    service: str | None = None
    functionalities: tuple[str, ...] = ()
    times: tuple[float, ...] = ()

    @property
    def services(self) -> tuple[str, ...]:
        if self.kind is ConflictKind.FF:
            return (self.service,)
        return (self.a.service, self.b.service)

    def key(self) -> tuple:
        """Identity used for scoring: timestamps are ignored."""
        if self.kind is ConflictKind.FF:
            return (self.kind.value, tuple(sorted(self.rules)), self.env, self.loc)
        pair = self.services
        if self.kind is not ConflictKind.TRA:
            pair = tuple(sorted(pair))
        return (self.kind.value, pair, self.env, self.loc)

    def sort_key(self) -> tuple:
        times = self.times or tuple(x for e in self.events for x in (e.st, e.et))
        ents = self.key()[1]
        return (_KIND_ORDER[self.kind], ents, self.env or "", self.loc, times, self.rules,
                tuple(t.sort_key() for t in (self.a, self.b) if t is not None))


# -------------------------------------------------------------------- overlaps


def _event_key(e: IntervalEvent):
    return (e.st, e.et, e.service, e.loc)


def find_overlaps(
    events: Iterable[IntervalEvent], slack: float = 0.0
) -> list[tuple[IntervalEvent, IntervalEvent]]:
    """Same-location pairs with ``e_i.st <= e_j.st <= e_i.et + slack``.

    Events are sorted by start time and swept per location, so each
    unordered pair is emitted once with the earlier-starting event first.
    ``slack=0`` gives the plain overlap relation.
    """
    by_loc: dict[str, list[IntervalEvent]] = defaultdict(list)
    for e in events:
        by_loc[e.loc].append(e)
    pairs = []
    for loc in sorted(by_loc):
        evs = sorted(by_loc[loc], key=_event_key)
        n = len(evs)
        for i in range(n):
            ei = evs[i]
            limit = ei.et + slack
            j = i + 1
            while j < n and evs[j].st <= limit:
                pairs.append((ei, evs[j]))
                j += 1
    pairs.sort(key=lambda p: (_event_key(p[0]), _event_key(p[1])))
    return pairs


# ---------------------------------------------------------------- rule lookups


def _rule_map(rules) -> dict[str, EcaRule]:
    if isinstance(rules, Mapping):
        return dict(rules)
    return {r.id: r for r in rules}


def trigger_directions(rules: Iterable[EcaRule]) -> dict[tuple[str, str], list[EcaRule]]:
    """Map ``(env, service)`` to the rules whose env trigger commands service."""
    out: dict[tuple[str, str], list[EcaRule]] = defaultdict(list)
    for r in rules:
        inv = rule_invokes(r)
        if isinstance(r.trig, EnvComparison) and inv is not None:
            out[(r.trig.env, inv[0])].append(r)
    return dict(out)


def _can_fire(sign: Relation, op: str) -> bool:
    # A rising property can satisfy ">" and "="; a falling one "<" and "=".
    if op == "=":
        return True
    return (sign is Relation.INCREASE) == (op == ">")


# ---------------------------------------------------------------- FF conflicts


def detect_ff(
    firings: Iterable[RuleFiring], rules, zeta: float = DEFAULT_ZETA
) -> set[Conflict]:
    """Pairs of firings less than ``zeta`` apart that command one service two ways."""
    if zeta <= 0:
        raise ValueError("zeta must be positive")
    by_id = _rule_map(rules)
    fs = sorted(firings)
    missing = sorted({f.rule for f in fs if f.rule not in by_id})
    if missing:
        raise InputConsistencyError([f"firing references unknown rule {m!r}" for m in missing])
    inv = {f.rule: rule_invokes(by_id[f.rule]) for f in fs}
    out = set()
    for i, fi in enumerate(fs):
        ai = inv[fi.rule]
        if ai is None:
            continue
        for fj in fs[i + 1 :]:
            if fj.time - fi.time >= zeta:
                break
            aj = inv[fj.rule]
            if aj is None or fj.loc != fi.loc or aj[0] != ai[0] or aj[1] == ai[1]:
                continue
            (r1, f1), (r2, f2) = sorted([(fi.rule, ai[1]), (fj.rule, aj[1])])
            out.add(
                Conflict(
                    ConflictKind.FF,
                    fi.loc,
                    rules=(r1, r2),
                    service=ai[0],
                    functionalities=(f1, f2),
                    times=(fi.time, fj.time),
                )
            )
    return out


# ------------------------------------------------------- environment conflicts


class PairMatcher:
    """Triple matches per service pair, cached since pairs repeat a lot in a day.

    ``impacts(si, sj)`` lists (kind, triple_i, triple_j) over shared properties;
    ``transitive(si, sj)`` lists (impact, trigger, rules) chains from si to sj.
    """

    def __init__(self, kg3: KnowledgeGraph, rules, readings, strict: bool):
        if kg3.stage is not Stage.KG3:
            raise ValueError(f"conflict detection needs a KG3 graph, got {kg3.stage.value}")
        if strict and readings is None:
            raise ValueError("strict transitive checking needs readings")
        self.kg = kg3
        self.directions = None if rules is None else trigger_directions(_rule_map(rules).values())
        self.readings = readings
        self.strict = strict
        self._impact: dict[tuple, list] = {}
        self._tra: dict[tuple, list] = {}

    def impacts(self, si: str, sj: str):
        key = (si, sj)
        if key not in self._impact:
            found = []
            for al in sorted(self.kg.touching(si)):
                if not al.r.is_impact or al.h != si:
                    continue
                for be in sorted(self.kg.touching(sj)):
                    if not be.r.is_impact or be.h != sj or al.t != be.t:
                        continue
                    kind = ConflictKind.CUM if al.r is be.r else ConflictKind.OPP
                    found.append((kind, al, be))
            self._impact[key] = found
        return self._impact[key]

    def transitive(self, si: str, sj: str):
        key = (si, sj)
        if key not in self._tra:
            found = []
            for al in sorted(self.kg.touching(si)):
                if not al.r.is_impact or al.h != si:
                    continue
                for be in sorted(self.kg.touching(sj)):
                    if be.r is not Relation.TRIGGER or be.t != sj or al.t != be.h:
                        continue
                    rules = self._firing_rules(al, sj)
                    if rules is not None and not rules:
                        continue
                    found.append((al, be, rules))
            self._tra[key] = found
        return self._tra[key]

    def _firing_rules(self, al: Triple, sj: str):
        if self.directions is None:
            return None
        cands = self.directions.get((al.t, sj))
        if cands is None:
            return None
        return [r for r in cands if _can_fire(al.r, r.trig.op)]

    def tra_conflicts(self, ei: IntervalEvent, ej: IntervalEvent):
        if ei.st > ej.st:
            return
        for al, be, rules in self.transitive(ei.service, ej.service):
            if self.strict:
                reading = self.readings.get((al.t, ej.loc))
                if rules is None or not any(evaluate_trigger(r.trig, reading) for r in rules):
                    continue
            yield Conflict(ConflictKind.TRA, ei.loc, env=al.t, a=al, b=be, events=(ei, ej))


def _ordered(ei, ej):
    return (ei, ej) if _event_key(ei) <= _event_key(ej) else (ej, ei)


def _pair_conflicts(m: PairMatcher, ei: IntervalEvent, ej: IntervalEvent, impacts=True):
    if ei.service == ej.service or ei.loc != ej.loc:
        return
    if impacts:
        evs = _ordered(ei, ej)
        for kind, al, be in m.impacts(ei.service, ej.service):
            a, b = sorted((al, be), key=lambda t: (t.service, t.sort_key()))
            yield Conflict(kind, ei.loc, env=al.t, a=a, b=b, events=evs)
    yield from m.tra_conflicts(ei, ej)
    yield from m.tra_conflicts(ej, ei)


def detect_pairwise(
    pairs: Iterable[tuple[IntervalEvent, IntervalEvent]],
    kg3: KnowledgeGraph,
    rules=None,
    readings: Mapping | None = None,
    strict: bool = False,
) -> set[Conflict]:
    """Classify each event pair against the profiled graph.

    With ``rules`` given, a trigger edge only yields ``TraConf`` when the
    impact direction can satisfy the comparator of some rule behind that
    edge (a rise can fire ``>``, a fall ``<``).  ``strict`` additionally
    requires such a rule's condition to hold on ``readings``.
    """
    m = PairMatcher(kg3, rules, readings, strict)
    out = set()
    for ei, ej in pairs:
        out.update(_pair_conflicts(m, ei, ej))
    return out


def detect_transitive(
    events: Iterable[IntervalEvent],
    kg3: KnowledgeGraph,
    rules=None,
    horizon: float = DEFAULT_ZETA,
    readings: Mapping | None = None,
    strict: bool = False,
) -> set[Conflict]:
    """``TraConf`` for same-location pairs where the later service starts
    after the earlier one ended, but within ``horizon`` minutes of it."""
    m = PairMatcher(kg3, rules, readings, strict)
    out = set()
    for ei, ej in find_overlaps(events, slack=horizon):
        if ej.st > ei.et:
            out.update(_pair_conflicts(m, ei, ej, impacts=False))
    return out


def check_inputs(events, firings, rules, placements: Mapping[str, str] | None) -> None:
    problems = []
    by_id = _rule_map(rules)
    for f in firings:
        if f.rule not in by_id:
            problems.append(f"firing at {format_clock(f.time)} references unknown rule {f.rule!r}")
    if placements is not None:
        for s in sorted({e.service for e in events} - set(placements)):
            problems.append(f"service {s!r} appears in events but has no placement")
        for e in events:
            loc = placements.get(e.service)
            if loc is not None and loc != e.loc:
                problems.append(
                    f"event {e.service}@{format_clock(e.st)} is in {e.loc!r} "
                    f"but the service is placed in {loc!r}"
                )
    if problems:
        raise InputConsistencyError(problems)


def detect_all(
    events: Sequence[IntervalEvent],
    firings: Sequence[RuleFiring],
    rules,
    kg3: KnowledgeGraph,
    zeta: float = DEFAULT_ZETA,
    horizon: float | None = None,
    readings: Mapping | None = None,
    strict: bool = False,
    placements: Mapping[str, str] | None = None,
) -> list[Conflict]:
    """All four conflict kinds, deduplicated and deterministically sorted.

    ``horizon`` (default ``zeta``) bounds how long after an activation ends a
    later service may still be counted as transitively triggered by it.
    """
    check_inputs(events, firings, rules, placements)
    if horizon is None:
        horizon = zeta
    m = PairMatcher(kg3, rules, readings, strict)
    found = set(detect_ff(firings, rules, zeta))
    for ei, ej in find_overlaps(events, slack=horizon):
        found.update(_pair_conflicts(m, ei, ej, impacts=ej.st <= ei.et))
    return sorted(found, key=Conflict.sort_key)


# ------------------------------------------------------------------------- io


def _triple_json(tr: Triple) -> dict:
    return {"service": tr.service, "triple": tr.as_list()}


def conflict_to_json(c: Conflict, **extra) -> dict:
    rec = {"kind": c.kind.value}
    rec.update(extra)
    if c.kind is ConflictKind.FF:
        rec.update(
            loc=c.loc,
            service=c.service,
            rules=list(c.rules),
            functionalities=list(c.functionalities),
            times=[format_clock(t) for t in c.times],
        )
        return rec
    rec.update(
        env=c.env,
        loc=c.loc,
        a=_triple_json(c.a),
        b=_triple_json(c.b),
        events=[e.to_json() for e in c.events],
    )
    return rec


def conflict_from_json(obj: Mapping) -> Conflict:
    kind = ConflictKind(obj["kind"])
    if kind is ConflictKind.FF:
        return Conflict(
            kind,
            obj["loc"],
            rules=tuple(obj["rules"]),
            service=obj.get("service"),
            functionalities=tuple(obj.get("functionalities", ())),
            times=tuple(parse_clock(t) for t in obj.get("times", ())),
        )
    events = tuple(
        IntervalEvent(e["service"], parse_clock(e["st"]), parse_clock(e["et"]), e["loc"])
        for e in obj.get("events", ())
    )
    return Conflict(
        kind,
        obj["loc"],
        env=obj.get("env"),
        a=Triple(*obj["a"]["triple"]),
        b=Triple(*obj["b"]["triple"]),
        events=events,
    )


def dumps_conflicts(conflicts: Iterable[Conflict], **extra) -> str:
    return "".join(
        json.dumps(conflict_to_json(c, **extra), separators=(",", ":")) + "\n"
        for c in sorted(conflicts, key=Conflict.sort_key)
    )


def dump_conflicts(conflicts: Iterable[Conflict], path, **extra) -> None:
    Path(path).write_text(dumps_conflicts(conflicts, **extra), encoding="utf-8")


def load_conflicts(path) -> list[tuple[Conflict, dict]]:
    """Read ``conflicts.jsonl``; returns each conflict with its raw record."""
    out = []
    path = Path(path)
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            out.append((conflict_from_json(obj), obj))
        except (json.JSONDecodeError, KeyError, ValueError, TypeError) as exc:
            raise ValueError(f"{path}:{lineno}: bad conflict record: {exc}") from None
    return out
