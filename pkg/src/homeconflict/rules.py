"""ECA rules, interval events and home context.

Rule surface syntax::

    rule     := trigger "->" action
    trigger  := IDENT CMP value | VERB IDENT
    action   := command {"AND" command}
    command  := VERB IDENT | IDENT "=" value
    value    := NUMBER [UNIT] | WORD

Verbs are ``turn on``, ``turn off``, ``open``, ``close``, ``pull up`` and
``pull down``; comparators are ``<``, ``>`` and ``=``.  ``→`` is accepted as
an alias for ``->``.  Multi-word identifiers are joined with underscores.
"""
from __future__ import annotations

import csv
import json
import operator
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence, Union

from .kg_core import normalize_entity

__all__ = [
    "VERBS",
    "Quantity",
    "EnvComparison",
    "ServiceEvent",
    "ServiceCommand",
    "EnvSetpoint",
    "Action",
    "EcaRule",
    "IoTService",
    "ServiceImpact",
    "IntervalEvent",
    "EnvPreference",
    "OutdoorState",
    "HomeContext",
    "RuleFiring",
    "RuleSyntaxError",
    "UnknownVerbError",
    "UnknownComparatorError",
    "InputFormatError",
    "parse_rule",
    "format_rule",
    "parse_rules",
    "load_rules",
    "rule_invokes",
    "parse_clock",
    "format_clock",
    "load_events",
    "dump_events",
    "load_activity_records",
    "load_context",
    "load_firings",
    "dump_firings",
    "load_readings",
    "evaluate_trigger",
    "derive_firings",
    "check_rule_references",
]

DAY_MINUTES = 24 * 60

# Two-word verbs first so "turn on" wins over a bare "turn".
VERBS: dict[tuple[str, ...], str] = {
    ("turn", "on"): "turn_on",
    ("turn", "off"): "turn_off",
    ("pull", "up"): "pull_up",
    ("pull", "down"): "pull_down",
    ("open",): "open",
    ("close",): "close",
}
_VERB_TEXT = {v: " ".join(k) for k, v in VERBS.items()}
COMPARATORS = ("<", ">", "=")
_CMP_FUNCS = {"<": operator.lt, ">": operator.gt, "=": operator.eq}


class RuleSyntaxError(ValueError):
    def __init__(self, msg: str, pos: int, text: str = ""):
        super().__init__(f"{msg} at position {pos}" + (f" in {text!r}" if text else ""))
        self.pos = pos
        self.text = text


class UnknownVerbError(RuleSyntaxError):
    pass


class UnknownComparatorError(RuleSyntaxError):
    pass


class InputFormatError(ValueError):
    """A data file failed to parse; the message names file and line."""


# --------------------------------------------------------------------------- AST


@dataclass(frozen=True)
class Quantity:
    value: Union[float, str]
    unit: str | None = None

    def __str__(self):
        if isinstance(self.value, str):
            return self.value
        v = self.value
        txt = str(int(v)) if float(v).is_integer() else f"{float(v):.6f}".rstrip("0").rstrip(".")
        return txt + (self.unit or "")


@dataclass(frozen=True)
class EnvComparison:
    env: str
    op: str
    value: Quantity

    def __str__(self):
        return f"{self.env} {self.op} {self.value}"


@dataclass(frozen=True)
class ServiceEvent:
    service: str
    functionality: str

    def __str__(self):
        return f"{_VERB_TEXT[self.functionality]} {self.service}"


@dataclass(frozen=True)
class ServiceCommand:
    service: str
    functionality: str

    def __str__(self):
        return f"{_VERB_TEXT[self.functionality]} {self.service}"


@dataclass(frozen=True)
class EnvSetpoint:
    env: str
    value: Quantity

    def __str__(self):
        return f"{self.env} = {self.value}"


TriggerCond = Union[EnvComparison, ServiceEvent]
Command = Union[ServiceCommand, EnvSetpoint]


@dataclass(frozen=True)
class Action:
    commands: tuple[Command, ...]

    def __post_init__(self):
        if not self.commands:
            raise ValueError("an action needs at least one command")

    @property
    def command(self) -> ServiceCommand | None:
        for c in self.commands:
            if isinstance(c, ServiceCommand):
                return c
        return None

    @property
    def setpoints(self) -> tuple[EnvSetpoint, ...]:
        return tuple(c for c in self.commands if isinstance(c, EnvSetpoint))

    def __str__(self):
        return " AND ".join(str(c) for c in self.commands)


@dataclass(frozen=True)
class EcaRule:
    id: str
    trig: TriggerCond
    action: Action

    def __str__(self):
        return format_rule(self)


@dataclass(frozen=True)
class IoTService:
    id: str
    functionalities: frozenset[str]
    qualities: Mapping[str, object] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "id", normalize_entity(self.id))
        if not self.functionalities:
            raise ValueError(f"service {self.id!r} must offer at least one functionality")


@dataclass(frozen=True)
class ServiceImpact:
    service: str
    eff: str  # "+" or "-"
    env: str


# ------------------------------------------------------------------------ lexer

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<arrow>->|→)
  | (?P<cmp>[<>=!]+)
  | (?P<num>\d+(?:\.\d+)?)(?P<unit>%|[A-Za-z]+)?
  | (?P<word>[A-Za-z_][A-Za-z0-9_']*)
    """,
    re.VERBOSE,
)


@dataclass
class _Tok:
    kind: str
    text: str
    pos: int
    unit: str | None = None


def _tokenize(text: str) -> list[_Tok]:
    toks, pos = [], 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise RuleSyntaxError(f"unexpected character {text[pos]!r}", pos, text)
        kind = m.lastgroup if m.lastgroup != "unit" else "num"
        if kind == "num":
            toks.append(_Tok("num", m.group("num"), pos, m.group("unit")))
        elif kind == "cmp":
            if m.group() not in COMPARATORS:
                raise UnknownComparatorError(f"unknown comparator {m.group()!r}", pos, text)
            toks.append(_Tok("cmp", m.group(), pos))
        elif kind == "word":
            toks.append(_Tok("word", m.group(), pos))
        elif kind == "arrow":
            toks.append(_Tok("arrow", "->", pos))
        pos = m.end()
    toks.append(_Tok("eof", "", len(text)))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def error(self, msg, cls=RuleSyntaxError, pos=None):
        return cls(msg, self.tok.pos if pos is None else pos, self.text)

    def _is_and(self, t: _Tok) -> bool:
        return t.kind == "word" and t.text.lower() == "and"

    def verb(self) -> str | None:
        for words, name in VERBS.items():
            n = len(words)
            seg = self.toks[self.i : self.i + n]
            if len(seg) == n and all(
                t.kind == "word" and t.text.lower() == w for t, w in zip(seg, words)
            ):
                self.i += n
                return name
        return None

    def ident_words(self) -> list[_Tok]:
        out = []
        while self.tok.kind == "word" and not self._is_and(self.tok):
            out.append(self.tok)
            self.i += 1
        return out

    def ident(self, what: str) -> str:
        words = self.ident_words()
        if not words:
            raise self.error(f"expected {what}")
        return normalize_entity(" ".join(t.text for t in words))

    def value(self) -> Quantity:
        t = self.tok
        if t.kind == "num":
            self.i += 1
            return Quantity(float(t.text), t.unit)
        if t.kind == "word" and not self._is_and(t):
            self.i += 1
            return Quantity(t.text.lower())
        raise self.error("expected a value")

    def _not_a_comparison(self, words: list[_Tok]):
        if len(words) > 1:
            return self.error(f"unknown verb {words[0].text!r}", UnknownVerbError, words[0].pos)
        return self.error("expected comparator")

    def trigger(self) -> TriggerCond:
        verb = self.verb()
        if verb is not None:
            return ServiceEvent(self.ident("service name"), verb)
        words = self.ident_words()
        if not words:
            raise self.error("expected trigger")
        if self.tok.kind != "cmp":
            raise self._not_a_comparison(words)
        op = self.tok.text
        self.i += 1
        env = normalize_entity(" ".join(t.text for t in words))
        return EnvComparison(env, op, self.value())

    def command(self) -> Command:
        verb = self.verb()
        if verb is not None:
            return ServiceCommand(self.ident("service name"), verb)
        words = self.ident_words()
        if not words:
            raise self.error("expected command")
        if self.tok.kind != "cmp":
            raise self._not_a_comparison(words)
        if self.tok.text != "=":
            raise self.error("a setpoint must use '='")
        self.i += 1
        env = normalize_entity(" ".join(t.text for t in words))
        return EnvSetpoint(env, self.value())

    def rule(self, rule_id: str) -> EcaRule:
        trig = self.trigger()
        if self.tok.kind != "arrow":
            raise self.error("expected '->'")
        self.i += 1
        cmds = [self.command()]
        while self._is_and(self.tok):
            self.i += 1
            cmds.append(self.command())
        if self.tok.kind != "eof":
            raise self.error(f"unexpected {self.tok.text!r}")
        if sum(isinstance(c, ServiceCommand) for c in cmds) > 1:
            raise RuleSyntaxError("a rule may invoke at most one service", 0, self.text)
        return EcaRule(rule_id, trig, Action(tuple(cmds)))


def parse_rule(text: str, rule_id: str = "R") -> EcaRule:
    """Parse one rule body (without the ``<id>:`` prefix).

    >>> str(parse_rule("temperature > 25C → close window").action)
    'close window'
    """
    return _Parser(text).rule(rule_id)


def format_rule(rule: EcaRule, with_id: bool = False) -> str:
    body = f"{rule.trig} -> {rule.action}"
    return f"{rule.id}: {body}" if with_id else body


def parse_rules(lines: Iterable[str], source: str = "<rules>") -> list[EcaRule]:
    """Parse ``rules.txt`` content: one rule per line, ``<id>:`` prefix optional.

    Rules without an id are numbered ``R<k>`` by their position among rules.
    Blank lines and ``#`` comments are skipped.
    """
    rules, seen = [], set()
    k = 0
    for lineno, line in enumerate(lines, 1):
        body = line.strip()
        if not body or body.startswith("#"):
            continue
        k += 1
        rule_id = f"R{k}"
        if ":" in body:
            head, rest = body.split(":", 1)
            if re.fullmatch(r"[A-Za-z0-9_.-]+", head.strip()):
                rule_id, body = head.strip(), rest.strip()
        if rule_id in seen:
            raise InputFormatError(f"{source}:{lineno}: duplicate rule id {rule_id!r}")
        seen.add(rule_id)
        try:
            rules.append(parse_rule(body, rule_id))
        except RuleSyntaxError as exc:
            raise InputFormatError(f"{source}:{lineno}: {exc}") from exc
    return rules


def load_rules(path) -> list[EcaRule]:
    path = Path(path)
    return parse_rules(path.read_text(encoding="utf-8").splitlines(), str(path))


def rule_invokes(rule: EcaRule) -> tuple[str, str] | None:
    cmd = rule.action.command
    return None if cmd is None else (cmd.service, cmd.functionality)


# ------------------------------------------------------------------------ time


def parse_clock(text: str) -> float:
    """``HH:MM`` or ``HH:MM:SS`` to minutes since midnight.

    >>> parse_clock("14:00")
    840.0
    >>> round(parse_clock("04:33:39") - parse_clock("04:30:23"), 4)
    3.2667
    """
    parts = str(text).strip().split(":")
    if len(parts) not in (2, 3) or not all(p.isdigit() for p in parts):
        raise ValueError(f"bad clock time {text!r}")
    h, m = int(parts[0]), int(parts[1])
    s = int(parts[2]) if len(parts) == 3 else 0
    if h > 23 or m > 59 or s > 59:
        raise ValueError(f"clock time out of range: {text!r}")
    return h * 60 + m + s / 60


def format_clock(minutes: float) -> str:
    secs = int(round(minutes * 60))
    h, rem = divmod(secs, 3600)
    m, s = divmod(rem, 60)
    return f"{h:02d}:{m:02d}" + (f":{s:02d}" if s else "")


def _clock(v) -> float:
    return float(v) if isinstance(v, (int, float)) else parse_clock(v)


# ---------------------------------------------------------------------- events


@dataclass(frozen=True)
class IntervalEvent:
    service: str
    st: float
    et: float
    loc: str

    def __post_init__(self):
        object.__setattr__(self, "service", normalize_entity(self.service))
        object.__setattr__(self, "loc", normalize_entity(self.loc))
        if self.st > self.et:
            raise ValueError(f"event {self.service} starts after it ends")
        if self.st < 0 or self.et >= DAY_MINUTES:
            raise ValueError(f"event {self.service} is outside a single day")

    @property
    def duration(self) -> float:
        return self.et - self.st

    def active_at(self, t: float) -> bool:
        return self.st <= t <= self.et

    def to_json(self) -> dict:
        return {
            "service": self.service,
            "st": format_clock(self.st),
            "et": format_clock(self.et),
            "loc": self.loc,
        }


EVENT_FIELDS = ("service", "start", "end", "location")


def load_events(path) -> list[IntervalEvent]:
    """Read ``events.csv`` (header ``service,start,end,location``)."""
    path = Path(path)
    events = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or set(EVENT_FIELDS) - set(reader.fieldnames):
            raise InputFormatError(f"{path}:1: header must contain {','.join(EVENT_FIELDS)}")
        for row in reader:
            lineno = reader.line_num
            try:
                st, et = parse_clock(row["start"]), parse_clock(row["end"])
                if st > et:
                    raise ValueError(
                        f"start {row['start']} is after end {row['end']} "
                        "(events may not span midnight)"
                    )
                events.append(IntervalEvent(row["service"], st, et, row["location"]))
            except (ValueError, TypeError, AttributeError) as exc:
                raise InputFormatError(f"{path}:{lineno}: {exc}") from None
    return events


def dump_events(events: Iterable[IntervalEvent], path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(EVENT_FIELDS)
        for e in events:
            w.writerow([e.service, format_clock(e.st), format_clock(e.et), e.loc])


_ACTIVITY_RE = re.compile(
    r"^(?P<name>.+?)\s+(?P<date>\d{1,2}/\d{1,2}/\d{4})\s+"
    r"(?P<st>\d{1,2}:\d{2}:\d{2})\s+(?P<et>\d{1,2}:\d{2}:\d{2})\s+(?P<loc>.+?)\s*$"
)


def load_activity_records(path) -> list[IntervalEvent]:
    """Read activity-annotated sensor logs in the five-line block layout.

    Each block is an activity header (``name date start end location``)
    followed by tab-separated rows of sensor ids, thing names, start times and
    end times.  Every thing activation becomes an event at the activity's
    location.
    """
    path = Path(path)
    lines = [(i, ln.rstrip("\n")) for i, ln in enumerate(path.read_text().splitlines(), 1)]
    lines = [(i, ln) for i, ln in lines if ln.strip()]
    events = []
    k = 0
    while k < len(lines):
        lineno, header = lines[k]
        m = _ACTIVITY_RE.match(header.strip())
        if m is None:
            raise InputFormatError(f"{path}:{lineno}: expected an activity header")
        if k + 4 >= len(lines):
            raise InputFormatError(f"{path}:{lineno}: truncated activity block")
        rows = [[c.strip() for c in lines[k + j][1].split("\t") if c.strip()] for j in range(1, 5)]
        ids, things, starts, ends = rows
        if not (len(ids) == len(things) == len(starts) == len(ends)):
            raise InputFormatError(f"{path}:{lineno}: ragged activity block")
        loc = m.group("loc")
        for thing, st, et in zip(things, starts, ends):
            try:
                a, b = parse_clock(st), parse_clock(et)
                if a > b:
                    raise ValueError(f"{thing} activation {st}-{et} spans midnight")
                events.append(IntervalEvent(thing, a, b, loc))
            except ValueError as exc:
                raise InputFormatError(f"{path}:{lineno}: {exc}") from None
        k += 5
    return events


# --------------------------------------------------------------------- context


@dataclass(frozen=True)
class EnvPreference:
    env: str
    value: Union[float, str]
    st: float
    et: float
    loc: str

    def __post_init__(self):
        object.__setattr__(self, "env", normalize_entity(self.env))
        object.__setattr__(self, "loc", normalize_entity(self.loc))
        if self.st > self.et:
            raise ValueError(f"preference for {self.env} has st > et")


@dataclass(frozen=True)
class OutdoorState:
    env: str
    value: Union[float, str]
    st: float
    et: float

    def __post_init__(self):
        object.__setattr__(self, "env", normalize_entity(self.env))
        if self.st > self.et:
            raise ValueError(f"outdoor state for {self.env} has st > et")


@dataclass(frozen=True)
class HomeContext:
    prefs: tuple[EnvPreference, ...] = ()
    outdoor: tuple[OutdoorState, ...] = ()
    placements: Mapping[str, str] = field(default_factory=dict)

    def preferences_for(self, env: str, loc: str, at: float | None = None) -> list[EnvPreference]:
        return [
            p
            for p in self.prefs
            if p.env == env and p.loc == loc and (at is None or p.st <= at <= p.et)
        ]

    def preferred_value(self, env: str, loc: str, at: float | None = None):
        hits = self.preferences_for(env, loc, at)
        return hits[0].value if hits else None

    def outdoor_average(self, env: str, st: float, et: float) -> float | None:
        """Time-weighted mean of numeric outdoor states overlapping ``[st, et]``."""
        total = weight = 0.0
        point = []
        for o in self.outdoor:
            if o.env != env or isinstance(o.value, str):
                continue
            lo, hi = max(st, o.st), min(et, o.et)
            if lo > hi:
                continue
            if hi > lo:
                total += (hi - lo) * o.value
                weight += hi - lo
            else:
                point.append(o.value)
        if weight > 0:
            return total / weight
        if point:
            return sum(point) / len(point)
        return None

    def with_prefs(self, extra: Iterable[EnvPreference]) -> "HomeContext":
        return HomeContext(tuple(self.prefs) + tuple(extra), self.outdoor, self.placements)

    def to_json(self) -> dict:
        def num(v):
            return int(v) if isinstance(v, float) and v.is_integer() else v

        return {
            "prefs": [
                {"env": p.env, "value": num(p.value), "st": format_clock(p.st),
                 "et": format_clock(p.et), "loc": p.loc}
                for p in self.prefs
            ],
            "outdoor": [
                {"env": o.env, "value": num(o.value), "st": format_clock(o.st),
                 "et": format_clock(o.et)}
                for o in self.outdoor
            ],
            "placements": dict(sorted(self.placements.items())),
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "HomeContext":
        prefs = tuple(
            EnvPreference(p["env"], p["value"], _clock(p["st"]), _clock(p["et"]), p["loc"])
            for p in obj.get("prefs", ())
        )
        outdoor = tuple(
            OutdoorState(o["env"], o["value"], _clock(o["st"]), _clock(o["et"]))
            for o in obj.get("outdoor", ())
        )
        placements = {
            normalize_entity(s): normalize_entity(loc)
            for s, loc in obj.get("placements", {}).items()
        }
        return cls(prefs, outdoor, placements)


def load_context(path) -> HomeContext:
    path = Path(path)
    try:
        return HomeContext.from_json(json.loads(path.read_text(encoding="utf-8")))
    except json.JSONDecodeError as exc:
        raise InputFormatError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from None
    except (KeyError, TypeError, ValueError) as exc:
        raise InputFormatError(f"{path}: malformed context: {exc}") from None


def load_readings(path) -> dict[tuple[str, str], object]:
    """``{"temperature@bedroom": 25}`` to ``{("temperature", "bedroom"): 25}``."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InputFormatError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from None
    out = {}
    for key, value in raw.items():
        env, sep, loc = key.partition("@")
        if not sep:
            raise InputFormatError(f"{path}: reading key {key!r} is not 'env@location'")
        out[(normalize_entity(env), normalize_entity(loc))] = value
    return out


# --------------------------------------------------------------------- firings


@dataclass(frozen=True, order=True)
class RuleFiring:
    time: float
    rule: str
    loc: str

    def __post_init__(self):
        object.__setattr__(self, "loc", normalize_entity(self.loc))


def load_firings(path, rules: Sequence[EcaRule] | None = None) -> list[RuleFiring]:
    """Read ``firings.csv`` (header ``rule,time,location``)."""
    path = Path(path)
    known = None if rules is None else {r.id for r in rules}
    out = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or {"rule", "time", "location"} - set(reader.fieldnames):
            raise InputFormatError(f"{path}:1: header must contain rule,time,location")
        for row in reader:
            try:
                f = RuleFiring(parse_clock(row["time"]), row["rule"].strip(), row["location"])
            except (ValueError, AttributeError) as exc:
                raise InputFormatError(f"{path}:{reader.line_num}: {exc}") from None
            if known is not None and f.rule not in known:
                raise InputFormatError(f"{path}:{reader.line_num}: unknown rule {f.rule!r}")
            out.append(f)
    return out


def dump_firings(firings: Iterable[RuleFiring], path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("rule", "time", "location"))
        for f in firings:
            w.writerow([f.rule, format_clock(f.time), f.loc])


def evaluate_trigger(cond: EnvComparison, reading) -> bool:
    """Evaluate an environment comparison against a current reading.

    Symbolic values only support ``=``; a missing reading is false.
    """
    if reading is None:
        return False
    target = cond.value.value
    if isinstance(target, str) or isinstance(reading, str):
        return cond.op == "=" and str(reading).lower() == str(target).lower()
    return _CMP_FUNCS[cond.op](float(reading), float(target))


def derive_firings(
    rules: Sequence[EcaRule],
    events: Sequence[IntervalEvent],
    readings: Mapping[tuple[str, str], object],
) -> list[RuleFiring]:
    """Infer rule firings from service activations.

    A rule fires at the start of an event of the service it commands if its
    trigger holds there: an environment comparison against ``readings`` at the
    event's location, or a service event with that service active at the time.
    """
    by_service: dict[str, list[IntervalEvent]] = {}
    for e in events:
        by_service.setdefault(e.service, []).append(e)
    out = set()
    for rule in rules:
        inv = rule_invokes(rule)
        if inv is None:
            continue
        for e in by_service.get(inv[0], ()):
            trig = rule.trig
            if isinstance(trig, EnvComparison):
                ok = evaluate_trigger(trig, readings.get((trig.env, e.loc)))
            else:
                ok = any(
                    o.loc == e.loc and o.active_at(e.st) for o in by_service.get(trig.service, ())
                )
            if ok:
                out.add(RuleFiring(e.st, rule.id, e.loc))
    return sorted(out)


def check_rule_references(
    rules: Iterable[EcaRule], env_vocab: Iterable[str], placements: Mapping[str, str]
) -> list[str]:
    """Problems with triggers naming unknown properties or unplaced services."""
    vocab = set(env_vocab)
    problems = []
    for r in rules:
        if isinstance(r.trig, EnvComparison):
            if r.trig.env not in vocab:
                problems.append(f"{r.id}: trigger property {r.trig.env!r} is not in the vocabulary")
        elif r.trig.service not in placements:
            problems.append(f"{r.id}: trigger service {r.trig.service!r} has no placement")
    return problems
