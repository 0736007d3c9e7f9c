"""Profile a seed graph to one home: completion, tailoring, refinement."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .kg_core import KnowledgeGraph, Relation, Stage, Triple
from .rules import (
    EcaRule,
    EnvComparison,
    EnvPreference,
    HomeContext,
    IntervalEvent,
    RuleFiring,
    rule_invokes,
)

__all__ = ["Profile", "complete", "tailor", "refine", "infer_preferences", "profile"]

log = logging.getLogger(__name__)


def _require(kg: KnowledgeGraph, stage: Stage) -> None:
    if kg.stage is not stage:
        raise ValueError(f"expected a {stage.value} graph, got {kg.stage.value}")


def complete(seed: KnowledgeGraph, rules: Iterable[EcaRule]) -> KnowledgeGraph:
    """Add ``(env, T, service)`` for every rule whose environment trigger
    commands a service.  Service-to-service rules add nothing."""
    _require(seed, Stage.SEED)
    added = set()
    for r in rules:
        inv = rule_invokes(r)
        if isinstance(r.trig, EnvComparison) and inv is not None:
            added.add(Triple(r.trig.env, Relation.TRIGGER, inv[0]))
    return seed.replace(triples=seed.triples | added, stage=Stage.KG1)


def tailor(
    kg1: KnowledgeGraph, placements: Mapping[str, str], warnings: list[str] | None = None
) -> KnowledgeGraph:
    """Group services by location and drop triples of unplaced services.

    Each triple has exactly one service endpoint, so a placed triple always
    falls inside one location block.
    """
    _require(kg1, Stage.KG1)
    warn = warnings if warnings is not None else []
    kept, partition, dropped = set(), {}, set()
    for tr in kg1.triples:
        loc = placements.get(tr.service)
        if loc is None:
            dropped.add(tr.service)
            continue
        kept.add(tr)
        partition.setdefault(loc, set()).add(tr.service)
    for s in sorted(dropped):
        msg = f"service {s!r} has no placement; its triples were dropped"
        log.warning(msg)
        warn.append(msg)
    support = {tr: n for tr, n in kg1.support.items() if tr in kept}
    return kg1.replace(triples=frozenset(kept), stage=Stage.KG2, partition=partition, support=support)


def infer_preferences(
    rules: Sequence[EcaRule],
    firings: Iterable[RuleFiring],
    events: Sequence[IntervalEvent],
) -> list[EnvPreference]:
    """Turn executed rules' setpoints into preferences.

    The preference spans the activation of the rule's commanded service (or
    of its triggering service, for setpoint-only rules) that covers the
    firing time at the firing location.
    """
    by_id = {r.id: r for r in rules}
    out = []
    for f in sorted(firings):
        rule = by_id.get(f.rule)
        if rule is None or not rule.action.setpoints:
            continue
        inv = rule_invokes(rule)
        service = inv[0] if inv else getattr(rule.trig, "service", None)
        span = next(
            (e for e in events if e.service == service and e.loc == f.loc and e.active_at(f.time)),
            None,
        )
        if span is None:
            continue
        for sp in rule.action.setpoints:
            out.append(EnvPreference(sp.env, sp.value.value, span.st, span.et, f.loc))
    return out


def _merge_prefs(explicit: Sequence[EnvPreference], inferred: Iterable[EnvPreference]):
    merged = list(explicit)
    for p in inferred:
        clash = any(
            q.env == p.env and q.loc == p.loc and q.st <= p.et and p.st <= q.et for q in explicit
        )
        if not clash:
            merged.append(p)
    return merged


def _decide(service: str, env: str, kg2: KnowledgeGraph, ctx: HomeContext) -> Relation | None:
    loc = (kg2.partition and next((l for l, s in kg2.partition.items() if service in s), None)) or (
        ctx.placements.get(service)
    )
    signs = set()
    for p in ctx.preferences_for(env, loc) if loc else ():
        if isinstance(p.value, str):
            continue
        out = ctx.outdoor_average(env, p.st, p.et)
        if out is None or out == p.value:
            continue
        signs.add(Relation.INCREASE if out > p.value else Relation.DECREASE)
    return signs.pop() if len(signs) == 1 else None


def refine(
    kg2: KnowledgeGraph,
    ctx: HomeContext,
    warnings: list[str] | None = None,
) -> KnowledgeGraph:
    """Keep one impact sign per (service, property) pair.

    Where the context has a preference for the property at the service's
    location, the sign follows the outdoor state: warmer outside than
    preferred means the pass-through service raises the property.  Otherwise
    the sign with more mining support wins, ties going to ``+``.
    """
    _require(kg2, Stage.KG2)
    warn = warnings if warnings is not None else []
    drop = set()
    for service, env in kg2.ambiguous_pairs():
        keep = _decide(service, env, kg2, ctx)
        if keep is None:
            up = kg2.support.get(Triple(service, Relation.INCREASE, env), 1)
            down = kg2.support.get(Triple(service, Relation.DECREASE, env), 1)
            keep = Relation.DECREASE if down > up else Relation.INCREASE
            if up == down:
                msg = f"unresolved ambiguity for ({service}, {env}); kept '+'"
                log.warning(msg)
                warn.append(msg)
        other = Relation.DECREASE if keep is Relation.INCREASE else Relation.INCREASE
        drop.add(Triple(service, other, env))
    kept = kg2.triples - drop
    support = {tr: n for tr, n in kg2.support.items() if tr in kept}
    return kg2.replace(triples=kept, stage=Stage.KG3, support=support)


@dataclass
class Profile:
    kg1: KnowledgeGraph
    kg2: KnowledgeGraph
    kg3: KnowledgeGraph
    context: HomeContext
    warnings: list[str] = field(default_factory=list)


def profile(
    seed: KnowledgeGraph,
    rules: Sequence[EcaRule],
    ctx: HomeContext,
    firings: Iterable[RuleFiring] = (),
    events: Sequence[IntervalEvent] = (),
) -> Profile:
    """Run completion, tailoring and refinement in order.

    Preferences inferred from executed rules are merged into the context;
    explicit preferences win where they overlap.
    """
    warnings: list[str] = []
    inferred = infer_preferences(rules, firings, events)
    ctx = HomeContext(tuple(_merge_prefs(ctx.prefs, inferred)), ctx.outdoor, ctx.placements)
    kg1 = complete(seed, rules)
    kg2 = tailor(kg1, ctx.placements, warnings)
    kg3 = refine(kg2, ctx, warnings)
    return Profile(kg1, kg2, kg3, ctx, warnings)
