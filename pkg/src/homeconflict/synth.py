"""Synthetic smart-home datasets with planted ground-truth conflicts.

Each home gets random placements of a thing pool over its rooms, a
whole-day preference and outdoor state per property, a KG3 profiled from
the shipped seed graph, and a day of interval events.  A fixed number of
conflicts is planted by construction: candidate conflict identities are
enumerated against the home's KG3, sampled kind by kind, and realised as
event pairs (or rule firings for function conflicts).  The remaining events
are background noise drawn uniformly from the pool.
"""
from __future__ import annotations

import json
import math
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from importlib import resources
from pathlib import Path
from typing import Sequence

from .detector import Conflict, ConflictKind, PairMatcher, dumps_conflicts
from .kg_core import KnowledgeGraph, load_triples, save_triples
from .profiler import profile
from .rules import (
    EcaRule,
    EnvPreference,
    HomeContext,
    IntervalEvent,
    OutdoorState,
    RuleFiring,
    dump_events,
    dump_firings,
    format_rule,
    load_rules,
    rule_invokes,
)

__all__ = [
    "SynthConfig",
    "SynthHome",
    "SynthDataset",
    "InfeasibleInjectionError",
    "generate",
    "generate_home",
    "write_dataset",
    "load_config",
    "default_seed_graph",
    "default_synth_rules",
    "default_things",
]


LAST_MINUTE = 1439
_KINDS = (ConflictKind.FF, ConflictKind.OPP, ConflictKind.CUM, ConflictKind.TRA)


class InfeasibleInjectionError(ValueError):
    """The home cannot host the requested number of planted conflicts."""


def _default_rooms():
    return ["kitchen", "living_room", "bathroom", "bedroom", "study_room"]


def _default_ranges():
    return {
        "temperature": [22, 28],
        "humidity": [45, 55],
        "co2": [350, 450],
        "brightness": [60, 70],
        "sound": [10, 70],
        "smoke": [0, 100],
        "ventilation": [0, 3],
    }


@dataclass
class SynthConfig:
    n_homes: int = 10
    n_things: int = 130
    n_events: int = 300
    duration_min: int = 60
    duration_max: int = 120
    rooms: list = field(default_factory=_default_rooms)
    env_ranges: dict = field(default_factory=_default_ranges)
    n_injected_conflicts: int = 277
    rng_seed: int = 7
    n_noise_firings: int = 10
    zeta: float = 5.0
    eps: float = 0.5
    weather: list = field(default_factory=lambda: ["sunny", "cloudy"])
    # share of readings without a planted environment conflict that sit at the preference
    settled_rate: float = 0.5

    def __post_init__(self):
        for name in ("n_homes", "n_things", "duration_min", "duration_max"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        for name in ("n_events", "n_injected_conflicts", "n_noise_firings"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must not be negative")
        if self.duration_min > self.duration_max:
            raise ValueError("duration_min exceeds duration_max")
        if not self.rooms or len(set(self.rooms)) != len(self.rooms):
            raise ValueError("rooms must be a non-empty list of distinct names")
        if self.zeta <= 0:
            raise ValueError("zeta must be positive")
        if not 0.0 <= self.settled_rate <= 1.0:
            raise ValueError("settled_rate must lie in [0, 1]")
        ranges = {}
        for env, bounds in self.env_ranges.items():
            lo, hi = bounds
            if int(lo) != lo or int(hi) != hi or lo > hi:
                raise ValueError(f"range for {env} must be integers with lo <= hi")
            ranges[env] = [int(lo), int(hi)]
        self.env_ranges = ranges

    def quota(self, k: int) -> int:
        """Planted conflicts for home ``k`` (1-based); the remainder goes to the first homes."""
        base, extra = divmod(self.n_injected_conflicts, self.n_homes)
        return base + (1 if k <= extra else 0)

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, obj: dict) -> "SynthConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(obj) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**obj)


def load_config(path) -> SynthConfig:
    return SynthConfig.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def _data(name: str):
    return resources.files("homeconflict") / "data" / name


def default_seed_graph() -> KnowledgeGraph:
    with resources.as_file(_data("seed_kg.jsonl")) as p:
        return load_triples(p)


def default_synth_rules() -> list[EcaRule]:
    with resources.as_file(_data("synth_rules.txt")) as p:
        return load_rules(p)


def default_things() -> list[str]:
    text = _data("things.txt").read_text(encoding="utf-8")
    return [x.strip() for x in text.splitlines() if x.strip() and not x.startswith("#")]


@dataclass
class SynthHome:
    index: int
    events: list[IntervalEvent]
    firings: list[RuleFiring]
    context: HomeContext
    readings: dict
    kg3: KnowledgeGraph
    truth: list[Conflict]
    warnings: list[str] = field(default_factory=list)

    @property
    def name(self) -> str:
        return f"home_{self.index}"


@dataclass
class SynthDataset:
    config: SynthConfig
    rules: list[EcaRule]
    homes: list[SynthHome]

    def truth_keys(self) -> set:
        return {(h.name,) + c.key() for h in self.homes for c in h.truth}


# ------------------------------------------------------------------ candidates


def _thing_pool(cfg: SynthConfig, seed: KnowledgeGraph, inert: Sequence[str], rng) -> list[str]:
    impactful = sorted(seed.services)
    if cfg.n_things <= len(impactful):
        return sorted(rng.sample(impactful, cfg.n_things))
    spare = [t for t in inert if t not in seed.services]
    need = cfg.n_things - len(impactful)
    if need > len(spare):
        raise ValueError(f"thing pool has only {len(impactful) + len(spare)} names, asked for {cfg.n_things}")
    return impactful + spare[:need]


def _env_candidates(kg3, rules, placements):
    """Opp/Cum/Tra identities realisable by one event pair in one room."""
    m = PairMatcher(kg3, rules, None, False)
    by_room: dict[str, list[str]] = {}
    for s in sorted(kg3.services):
        if s in placements:
            by_room.setdefault(placements[s], []).append(s)
    out = []
    for room in sorted(by_room):
        svcs = by_room[room]
        for i, si in enumerate(svcs):
            for sj in svcs[i + 1 :]:
                for kind, al, be in m.impacts(si, sj):
                    out.append((kind, (si, sj), al.t, room, (al, be)))
            for sj in svcs:
                if sj == si:
                    continue
                seen = set()
                for al, be, _ in m.transitive(si, sj):
                    if al.t not in seen:
                        seen.add(al.t)
                        out.append((ConflictKind.TRA, (si, sj), al.t, room, (al, be)))
    return out


def _ff_candidates(rules, placements):
    out = []
    inv = [(r, rule_invokes(r)) for r in rules]
    for i, (ri, ai) in enumerate(inv):
        for rj, aj in inv[i + 1 :]:
            if ai and aj and ai[0] == aj[0] and ai[1] != aj[1] and ai[0] in placements:
                out.append((ConflictKind.FF, tuple(sorted((ri.id, rj.id))), None, placements[ai[0]], (ri, rj)))
    return out


def _pick(cands, quota: int, event_budget: int, rng, home: int):
    """Round-robin over kinds, random within a kind, without replacement."""
    groups = {k: [c for c in cands if c[0] is k] for k in _KINDS}
    for g in groups.values():
        rng.shuffle(g)
    chosen, env_used = [], 0
    while len(chosen) < quota:
        progressed = False
        for k in _KINDS:
            if len(chosen) == quota:
                break
            if k is not ConflictKind.FF and env_used >= event_budget:
                continue
            if groups[k]:
                chosen.append(groups[k].pop())
                env_used += k is not ConflictKind.FF
                progressed = True
        if not progressed:
            raise InfeasibleInjectionError(
                f"home_{home}: only {len(chosen)} of {quota} conflicts can be planted "
                f"({len(cands)} candidate identities, {event_budget} event pairs available)"
            )
    return chosen


# ------------------------------------------------------------------ generation


def _interval(cfg: SynthConfig, rng, st: int | None = None) -> tuple[int, int]:
    if st is None:
        st = rng.randint(0, LAST_MINUTE)
    dur = rng.randint(cfg.duration_min, cfg.duration_max)
    return st, min(st + dur, LAST_MINUTE)


def generate_home(
    cfg: SynthConfig,
    k: int,
    seed: KnowledgeGraph,
    rules: Sequence[EcaRule],
    inert: Sequence[str],
) -> SynthHome:
    """Generate home ``k`` (1-based) from its own stream seeded ``rng_seed + k``."""
    rng = random.Random(cfg.rng_seed + k)
    quota = cfg.quota(k)
    if quota and cfg.n_events == 0:
        raise InfeasibleInjectionError(f"home_{k}: cannot plant conflicts without events")

    pool = _thing_pool(cfg, seed, inert, rng)
    placements = {t: rng.choice(cfg.rooms) for t in pool}
    envs = sorted(cfg.env_ranges)
    prefs = tuple(
        EnvPreference(env, rng.randint(*cfg.env_ranges[env]), 0, LAST_MINUTE, room)
        for env in envs
        for room in cfg.rooms
    )
    outdoor = tuple(OutdoorState(env, rng.randint(*cfg.env_ranges[env]), 0, LAST_MINUTE) for env in envs)
    if cfg.weather:
        outdoor += (OutdoorState("weather", rng.choice(cfg.weather), 0, LAST_MINUTE),)
    ctx = HomeContext(prefs, outdoor, placements)
    prof = profile(seed, rules, ctx)
    kg3 = prof.kg3

    cands = _env_candidates(kg3, rules, placements) + _ff_candidates(rules, placements)
    cands.sort(key=lambda c: (c[0].value, c[1], c[2] or "", c[3]))
    chosen = _pick(cands, quota, cfg.n_events // 2, rng, k)

    events, firings, truth = [], [], []
    must_differ = set()
    for kind, pair, env, room, (x, y) in chosen:
        if kind is ConflictKind.FF:
            gap = rng.randint(0, math.ceil(cfg.zeta) - 1)
            t1 = rng.randint(0, LAST_MINUTE - gap)
            first, second = (x, y) if rng.random() < 0.5 else (y, x)
            firings += [RuleFiring(t1, first.id, room), RuleFiring(t1 + gap, second.id, room)]
            fa, fb = rule_invokes(x)[1], rule_invokes(y)[1]
            (r1, f1), (r2, f2) = sorted([(x.id, fa), (y.id, fb)])
            truth.append(
                Conflict(kind, room, rules=(r1, r2), service=rule_invokes(x)[0],
                         functionalities=(f1, f2), times=(t1, t1 + gap))
            )
            continue
        si, sj = pair
        if kind is not ConflictKind.TRA and rng.random() < 0.5:
            si, sj = sj, si
        st1, et1 = _interval(cfg, rng)
        st2, et2 = _interval(cfg, rng, rng.randint(st1, et1))
        e1, e2 = IntervalEvent(si, st1, et1, room), IntervalEvent(sj, st2, et2, room)
        events += [e1, e2]
        if kind is ConflictKind.TRA:
            truth.append(Conflict(kind, room, env=env, a=x, b=y, events=(e1, e2)))
        else:
            a, b = sorted((x, y), key=lambda t: (t.service, t.sort_key()))
            evs = tuple(sorted((e1, e2), key=lambda e: (e.st, e.et, e.service, e.loc)))
            truth.append(Conflict(kind, room, env=env, a=a, b=b, events=evs))
            must_differ.add((env, room))

    for _ in range(cfg.n_events - len(events)):
        thing = rng.choice(pool)
        st, et = _interval(cfg, rng)
        events.append(IntervalEvent(thing, st, et, placements[thing]))

    callable_rules = [r for r in rules if rule_invokes(r) and rule_invokes(r)[0] in placements]
    for _ in range(cfg.n_noise_firings if callable_rules else 0):
        r = rng.choice(callable_rules)
        firings.append(RuleFiring(rng.randint(0, LAST_MINUTE), r.id, placements[rule_invokes(r)[0]]))

    readings = {}
    for env in envs:
        lo, hi = cfg.env_ranges[env]
        for room in cfg.rooms:
            pref = ctx.preferred_value(env, room)
            value = rng.randint(lo, hi)
            if (env, room) in must_differ:
                options = [v for v in range(lo, hi + 1) if abs(v - pref) > cfg.eps]
                if not options:
                    raise InfeasibleInjectionError(
                        f"home_{k}: range of {env} leaves no reading away from the preference"
                    )
                value = rng.choice(options)
            elif pref is not None and rng.random() < cfg.settled_rate:
                value = pref
            readings[(env, room)] = value

    events.sort(key=lambda e: (e.st, e.et, e.service, e.loc))
    firings.sort()
    truth.sort(key=Conflict.sort_key)
    return SynthHome(k, events, firings, ctx, readings, kg3, truth, prof.warnings)


def _generate_one(args):
    return generate_home(*args)


def generate(
    cfg: SynthConfig,
    seed: KnowledgeGraph | None = None,
    rules: Sequence[EcaRule] | None = None,
    things: Sequence[str] | None = None,
    jobs: int = 1,
) -> SynthDataset:
    """Generate every home; output does not depend on ``jobs``."""
    seed = seed if seed is not None else default_seed_graph()
    rules = list(rules) if rules is not None else default_synth_rules()
    things = list(things) if things is not None else default_things()
    work = [(cfg, k, seed, rules, things) for k in range(1, cfg.n_homes + 1)]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            homes = list(ex.map(_generate_one, work))
    else:
        homes = [_generate_one(w) for w in work]
    return SynthDataset(cfg, rules, homes)


# ------------------------------------------------------------------------ io


def _dump_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def write_dataset(ds: SynthDataset, out_dir) -> Path:
    """Write ``home_<k>/`` trees, ``ground_truth.jsonl`` and ``synth_config.json``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rules_text = "".join(format_rule(r, with_id=True) + "\n" for r in ds.rules)
    truth_lines = []
    for h in ds.homes:
        d = out / h.name
        d.mkdir(exist_ok=True)
        dump_events(h.events, d / "events.csv")
        dump_firings(h.firings, d / "firings.csv")
        _dump_json(h.context.to_json(), d / "context.json")
        _dump_json({f"{env}@{loc}": v for (env, loc), v in sorted(h.readings.items())}, d / "readings.json")
        (d / "rules.txt").write_text(rules_text, encoding="utf-8")
        save_triples(h.kg3, d / "kg3.jsonl", warnings=h.warnings)
        truth_lines.append(dumps_conflicts(h.truth, home=h.name))
    (out / "ground_truth.jsonl").write_text("".join(truth_lines), encoding="utf-8")
    _dump_json(ds.config.to_json(), out / "synth_config.json")
    return out
