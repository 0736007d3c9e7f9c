"""Seed knowledge-graph mining from service descriptions.

Each description phrase is preprocessed (lowercase, stop words removed,
lemmatized by lookup), embedded as the mean of its token vectors, and
compared by cosine similarity against every phrase of each property's
increase and decrease corpora.  A similarity strictly above ``theta`` emits
an impact triple.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .kg_core import KnowledgeGraph, Relation, Triple, default_env_vocab, normalize_entity
from .rules import InputFormatError

__all__ = [
    "DEFAULT_THETA",
    "ServiceDescription",
    "PropertyCorpus",
    "EmbeddingTable",
    "Witness",
    "preprocess",
    "embed_phrase",
    "cosine",
    "mine_relations",
    "seed_graph",
    "load_descriptions",
    "load_corpora",
    "load_embeddings",
    "load_stopwords",
    "load_lemmas",
]

DEFAULT_THETA = 0.6

_WORD = re.compile(r"[a-z0-9']+")
_POSSESSIVE = re.compile(r"'s$|'$")


@dataclass(frozen=True)
class ServiceDescription:
    service: str
    phrases: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "service", normalize_entity(self.service))
        phrases = tuple(p.strip() for p in self.phrases)
        if not phrases or not all(phrases):
            raise ValueError(f"description of {self.service!r} needs non-empty phrases")
        object.__setattr__(self, "phrases", phrases)


@dataclass(frozen=True)
class PropertyCorpus:
    env: str
    inset: tuple[str, ...]
    deset: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "env", normalize_entity(self.env))
        if not self.inset or not self.deset:
            raise ValueError(f"corpus for {self.env!r} needs both increase and decrease phrases")
        both = set(self.inset) & set(self.deset)
        if both:
            raise ValueError(f"corpus for {self.env!r} lists {sorted(both)} as both")


class EmbeddingTable:
    """Token to vector lookup with a fixed dimension."""

    def __init__(self, vectors: Mapping[str, Sequence[float]]):
        if not vectors:
            raise ValueError("embedding table is empty")
        arrs = {k: np.asarray(v, dtype=float) for k, v in vectors.items()}
        dims = {a.shape for a in arrs.values()}
        if len(dims) != 1 or len(next(iter(dims))) != 1 or next(iter(dims))[0] < 1:
            raise ValueError("all embedding vectors must share one positive dimension")
        self.dim = next(iter(dims))[0]
        self.vectors = arrs

    def __contains__(self, token):
        return token in self.vectors

    def __getitem__(self, token):
        return self.vectors[token]

    def __len__(self):
        return len(self.vectors)


@dataclass(frozen=True)
class Witness:
    phrase: str
    corpus_phrase: str
    score: float


def preprocess(text: str, stopwords: Iterable[str] = (), lemma_map: Mapping[str, str] | None = None) -> list[str]:
    """Tokenize, drop stop words and lemmatize through ``lemma_map``.

    Possessive endings are stripped before lookup; unknown tokens pass
    through unchanged.
    """
    stop = set(stopwords)
    lemmas = lemma_map or {}
    out = []
    for raw in _WORD.findall(text.lower().replace("’", "'")):
        tok = _POSSESSIVE.sub("", raw).strip("'")
        if not tok or tok in stop:
            continue
        tok = lemmas.get(tok, tok)
        if tok in stop:
            continue
        out.append(tok)
    return out


def embed_phrase(tokens: Sequence[str], table: EmbeddingTable) -> np.ndarray:
    vecs = [table[t] for t in tokens if t in table]
    if not vecs:
        return np.zeros(table.dim)
    return np.mean(vecs, axis=0)


def cosine(v, w) -> float:
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    if v.shape != w.shape:
        raise ValueError(f"dimension mismatch: {v.shape} vs {w.shape}")
    nv, nw = np.linalg.norm(v), np.linalg.norm(w)
    if nv == 0 or nw == 0:
        return 0.0
    return float(np.clip(np.dot(v, w) / (nv * nw), -1.0, 1.0))


def mine_relations(
    descs: Iterable[ServiceDescription],
    corpora: Iterable[PropertyCorpus],
    table: EmbeddingTable,
    theta: float = DEFAULT_THETA,
    stopwords: Iterable[str] = (),
    lemma_map: Mapping[str, str] | None = None,
) -> dict[Triple, tuple[Witness, ...]]:
    """Mine impact triples; each maps to the witnesses that fired it."""
    if not 0 < theta < 1:
        raise ValueError(f"theta must lie in (0, 1), got {theta}")
    stop = frozenset(stopwords)

    def emb(text):
        return embed_phrase(preprocess(text, stop, lemma_map), table)

    corpus_vecs = []
    for c in sorted(corpora, key=lambda c: c.env):
        for rel, phrases in ((Relation.INCREASE, c.inset), (Relation.DECREASE, c.deset)):
            for w in phrases:
                corpus_vecs.append((c.env, rel, w, emb(w)))

    found: dict[Triple, list[Witness]] = {}
    for d in descs:
        for phrase in d.phrases:
            v = emb(phrase)
            for env, rel, w, wv in corpus_vecs:
                score = cosine(v, wv)
                if score > theta:
                    found.setdefault(Triple(d.service, rel, env), []).append(Witness(phrase, w, score))
    return {
        tr: tuple(sorted(set(ws), key=lambda x: (x.phrase, x.corpus_phrase)))
        for tr, ws in sorted(found.items())
    }


def seed_graph(mined: Mapping[Triple, Sequence[Witness]], env_vocab=None) -> KnowledgeGraph:
    return KnowledgeGraph(
        triples=frozenset(mined),
        env_vocab=env_vocab if env_vocab is not None else default_env_vocab(),
        support={tr: len(ws) for tr, ws in mined.items()},
    )


# ---------------------------------------------------------------------------- io


def _jsonl(path):
    path = Path(path)
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                yield lineno, json.loads(line)
            except json.JSONDecodeError as exc:
                raise InputFormatError(f"{path}:{lineno}: invalid JSON: {exc.msg}") from None


def load_descriptions(path) -> list[ServiceDescription]:
    out = []
    for lineno, obj in _jsonl(path):
        try:
            out.append(ServiceDescription(obj["service"], tuple(obj["phrases"])))
        except (KeyError, TypeError, ValueError) as exc:
            raise InputFormatError(f"{path}:{lineno}: bad description: {exc}") from None
    return out


def load_corpora(path) -> list[PropertyCorpus]:
    out = []
    for lineno, obj in _jsonl(path):
        try:
            out.append(PropertyCorpus(obj["env"], tuple(obj["inset"]), tuple(obj["deset"])))
        except (KeyError, TypeError, ValueError) as exc:
            raise InputFormatError(f"{path}:{lineno}: bad corpus: {exc}") from None
    envs = [c.env for c in out]
    if len(envs) != len(set(envs)):
        raise InputFormatError(f"{path}: corpora must cover distinct properties")
    return out


def load_embeddings(path) -> EmbeddingTable:
    """Read ``token<TAB>f1 f2 ... fd`` lines."""
    path = Path(path)
    vectors = {}
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip() or line.startswith("#"):
                continue
            tok, sep, rest = line.rstrip("\n").partition("\t")
            try:
                if not sep:
                    raise ValueError("missing tab separator")
                vectors[tok.strip().lower()] = [float(x) for x in rest.split()]
            except ValueError as exc:
                raise InputFormatError(f"{path}:{lineno}: {exc}") from None
    try:
        return EmbeddingTable(vectors)
    except ValueError as exc:
        raise InputFormatError(f"{path}: {exc}") from None


def load_stopwords(path) -> frozenset[str]:
    text = Path(path).read_text(encoding="utf-8")
    return frozenset(w.strip().lower() for w in text.splitlines() if w.strip() and not w.startswith("#"))


def load_lemmas(path) -> dict[str, str]:
    path = Path(path)
    out = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise InputFormatError(f"{path}:{lineno}: expected 'inflected<TAB>base'")
        out[parts[0].strip().lower()] = parts[1].strip().lower()
    return out
