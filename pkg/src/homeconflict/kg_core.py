"""Immutable triple store for service/environment knowledge graphs.

Triples relate IoT services to environment properties.  Impact triples
(``+``/``-``) point from a service to a property; trigger triples (``T``)
point from a property to the service whose rule it can fire.
"""
from __future__ import annotations

import enum
import functools
import json
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping

__all__ = [
    "Relation",
    "Stage",
    "Triple",
    "KnowledgeGraph",
    "MalformedTripleError",
    "TripleParseError",
    "normalize_entity",
    "default_env_vocab",
    "load_env_vocab",
    "insert",
    "triples_touching",
    "load_triples",
    "save_triples",
]

_WS = re.compile(r"\s+")


class MalformedTripleError(ValueError):
    """A triple violates the head/tail role invariants."""


class TripleParseError(ValueError):
    def __init__(self, path, lineno: int, msg: str):
        super().__init__(f"{path}:{lineno}: {msg}")
        self.path = path
        self.lineno = lineno


def normalize_entity(name: str) -> str:
    """Lowercase *name* and collapse internal whitespace to underscores.

    >>> normalize_entity("  Kitchen   Hood ")
    'kitchen_hood'
    """
    norm = _WS.sub("_", str(name).strip().lower())
    if not norm:
        raise ValueError("entity name must be non-empty")
    return norm


class Relation(enum.Enum):
    INCREASE = "+"
    DECREASE = "-"
    TRIGGER = "T"

    @property
    def is_impact(self) -> bool:
        return self is not Relation.TRIGGER

    @classmethod
    def parse(cls, s: str) -> "Relation":
        try:
            return cls(s)
        except ValueError:
            raise ValueError(f"unknown relation {s!r} (expected '+', '-' or 'T')") from None


class Stage(enum.Enum):
    SEED = "Seed"
    KG1 = "KG1"
    KG2 = "KG2"
    KG3 = "KG3"

    @property
    def rank(self) -> int:
        return list(Stage).index(self)


@dataclass(frozen=True)
class Triple:
    h: str
    r: Relation
    t: str

    def __post_init__(self):
        object.__setattr__(self, "h", normalize_entity(self.h))
        object.__setattr__(self, "t", normalize_entity(self.t))
        if not isinstance(self.r, Relation):
            object.__setattr__(self, "r", Relation.parse(self.r))
        if self.h == self.t:
            raise MalformedTripleError(f"head equals tail in {self}")

    def sort_key(self) -> tuple[str, str, str]:
        return (self.h, self.r.value, self.t)

    def __lt__(self, other):
        if not isinstance(other, Triple):
            return NotImplemented
        return self.sort_key() < other.sort_key()

    @property
    def service(self) -> str:
        return self.t if self.r is Relation.TRIGGER else self.h

    @property
    def env(self) -> str:
        return self.h if self.r is Relation.TRIGGER else self.t

    def as_list(self) -> list[str]:
        return [self.h, self.r.value, self.t]

    def __str__(self):
        return f"({self.h},{self.r.value},{self.t})"


def load_env_vocab(path) -> frozenset[str]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return frozenset(normalize_entity(x) for x in lines if x.strip() and not x.startswith("#"))


@functools.lru_cache(maxsize=None)
def default_env_vocab() -> frozenset[str]:
    with resources.as_file(resources.files("homeconflict") / "data" / "env_vocab.txt") as p:
        return load_env_vocab(p)


def _check_roles(tr: Triple, vocab: frozenset[str]) -> None:
    if tr.r.is_impact:
        if tr.t not in vocab or tr.h in vocab:
            raise MalformedTripleError(
                f"impact triple {tr} must link a service head to an environment-property tail"
            )
    elif tr.h not in vocab or tr.t in vocab:
        raise MalformedTripleError(
            f"trigger triple {tr} must link an environment-property head to a service tail"
        )


@dataclass(frozen=True)
class KnowledgeGraph:
    """A set of triples tagged with its profiling stage.

    ``support`` counts how many mining witnesses backed each impact triple;
    profiling uses it to break ambiguity when no context applies.
    """

    triples: frozenset[Triple] = frozenset()
    stage: Stage = Stage.SEED
    partition: Mapping[str, frozenset[str]] | None = None
    env_vocab: frozenset[str] = field(default_factory=default_env_vocab)
    support: Mapping[Triple, int] = field(default_factory=dict, compare=False)
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "triples", frozenset(self.triples))
        for tr in self.triples:
            _check_roles(tr, self.env_vocab)
        if self.partition is not None:
            object.__setattr__(
                self,
                "partition",
                {loc: frozenset(s) for loc, s in sorted(self.partition.items())},
            )
        index: dict[str, set[Triple]] = {}
        for tr in self.triples:
            index.setdefault(tr.h, set()).add(tr)
            index.setdefault(tr.t, set()).add(tr)
        object.__setattr__(self, "_index", {k: frozenset(v) for k, v in index.items()})

    def __len__(self):
        return len(self.triples)

    def __iter__(self):
        return iter(sorted(self.triples))

    def __contains__(self, tr):
        return tr in self.triples

    def touching(self, entity: str) -> frozenset[Triple]:
        return self._index.get(entity, frozenset())

    @property
    def services(self) -> frozenset[str]:
        return frozenset(tr.service for tr in self.triples)

    def replace(self, **changes) -> "KnowledgeGraph":
        kw = dict(
            triples=self.triples,
            stage=self.stage,
            partition=self.partition,
            env_vocab=self.env_vocab,
            support=self.support,
        )
        kw.update(changes)
        return KnowledgeGraph(**kw)

    def signs(self, service: str, env: str) -> set[Relation]:
        return {
            tr.r
            for tr in self.touching(service)
            if tr.r.is_impact and tr.h == service and tr.t == env
        }

    def ambiguous_pairs(self) -> list[tuple[str, str]]:
        seen: dict[tuple[str, str], set[Relation]] = {}
        for tr in self.triples:
            if tr.r.is_impact:
                seen.setdefault((tr.h, tr.t), set()).add(tr.r)
        return sorted(k for k, v in seen.items() if len(v) > 1)


def insert(kg: KnowledgeGraph, tr: Triple) -> KnowledgeGraph:
    _check_roles(tr, kg.env_vocab)
    if tr in kg.triples:
        return kg
    return kg.replace(triples=kg.triples | {tr})


def triples_touching(kg: KnowledgeGraph, s: str) -> frozenset[Triple]:
    return kg.touching(normalize_entity(s))


def _meta_path(path: Path) -> Path:
    return path.with_name(path.stem + ".meta.json")


def _parse_record(obj, path, lineno) -> tuple[Triple, int | None]:
    if not isinstance(obj, dict) or not {"h", "r", "t"} <= obj.keys():
        raise TripleParseError(path, lineno, "expected an object with keys 'h', 'r', 't'")
    try:
        tr = Triple(obj["h"], Relation.parse(obj["r"]), obj["t"])
    except ValueError as exc:
        raise TripleParseError(path, lineno, str(exc)) from None
    return tr, obj.get("support")


def load_triples(path, meta_path=None, env_vocab: Iterable[str] | None = None) -> KnowledgeGraph:
    """Read a ``triples.jsonl`` file (plus its stage sidecar, if any).

    The sidecar is ``<stem>.meta.json`` by default; a sibling
    ``profile_meta.json`` is also honoured when it names this file.
    """
    path = Path(path)
    vocab = frozenset(env_vocab) if env_vocab is not None else default_env_vocab()
    triples, support = [], {}
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise TripleParseError(path, lineno, f"invalid JSON: {exc.msg}") from None
            tr, n = _parse_record(obj, path, lineno)
            try:
                _check_roles(tr, vocab)
            except MalformedTripleError as exc:
                raise TripleParseError(path, lineno, str(exc)) from None
            triples.append(tr)
            if n is not None:
                support[tr] = int(n)

    meta = {}
    if meta_path is None:
        cand = _meta_path(path)
        if cand.exists():
            meta = json.loads(cand.read_text(encoding="utf-8"))
        else:
            prof = path.with_name("profile_meta.json")
            if prof.exists():
                m = json.loads(prof.read_text(encoding="utf-8"))
                if m.get("triples_file") == path.name:
                    meta = m
    else:
        meta = json.loads(Path(meta_path).read_text(encoding="utf-8"))

    partition = meta.get("partition")
    return KnowledgeGraph(
        triples=frozenset(triples),
        stage=Stage(meta.get("stage", "Seed")),
        partition=partition,
        env_vocab=vocab,
        support=support,
    )


def dumps_triples(kg: KnowledgeGraph) -> str:
    out = []
    for tr in sorted(kg.triples):
        rec = {"h": tr.h, "r": tr.r.value, "t": tr.t}
        if tr in kg.support:
            rec["support"] = kg.support[tr]
        out.append(json.dumps(rec, separators=(",", ":")))
    return "".join(line + "\n" for line in out)


def graph_meta(kg: KnowledgeGraph, triples_file: str | None = None, **extra) -> dict:
    meta = {"stage": kg.stage.value}
    if triples_file is not None:
        meta["triples_file"] = triples_file
    if kg.partition is not None:
        meta["partition"] = {loc: sorted(s) for loc, s in kg.partition.items()}
    meta.update(extra)
    return meta


def save_triples(kg: KnowledgeGraph, path, meta_path=None, **extra_meta) -> None:
    """Write triples in canonical (h, r, t) order.

    Non-seed graphs also get a JSON sidecar carrying stage and partition.
    """
    path = Path(path)
    path.write_text(dumps_triples(kg), encoding="utf-8")
    if meta_path is None and kg.stage is Stage.SEED and kg.partition is None and not extra_meta:
        stale = _meta_path(path)
        if stale.exists():
            stale.unlink()
        return
    meta_path = Path(meta_path) if meta_path is not None else _meta_path(path)
    meta = graph_meta(kg, triples_file=path.name, **extra_meta)
    meta_path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
