"""Scoring detected conflicts against ground truth, and runtime benchmarks.

Conflicts are matched on identity (kind, service pair, property, location;
rule pair for function conflicts), never on timestamps.  Records carrying a
``home`` field are matched within their home only.
"""
from __future__ import annotations

import json
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable, Hashable, Iterable, Sequence

from .detector import DEFAULT_ZETA, Conflict, load_conflicts
from .filters import DEFAULT_EPS, Method, run_method
from .kg_core import load_triples
from .rules import load_context, load_events, load_firings, load_readings, load_rules

__all__ = [
    "Score",
    "BenchRow",
    "confusion",
    "prf",
    "score",
    "identities",
    "load_identities",
    "load_home",
    "detect_home",
    "evaluate_dataset",
    "bench",
    "prefix_workload",
    "dump_report",
]


@dataclass(frozen=True)
class Score:
    tp: int
    fp: int
    fn: int
    precision: float
    recall: float
    f1: float

    def to_json(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class BenchRow:
    n_events: int
    mean_ms: float
    runs: int


def _ident(x) -> Hashable:
    return x.key() if isinstance(x, Conflict) else x


def confusion(detected: Iterable, truth: Iterable) -> tuple[int, int, int]:
    """(TP, FP, FN) over conflict identities; duplicates collapse."""
    d = {_ident(x) for x in detected}
    t = {_ident(x) for x in truth}
    return len(d & t), len(d - t), len(t - d)


def prf(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    """Precision, recall and their harmonic mean.

    With nothing detected, precision is 1 if nothing was missed and 0
    otherwise; with nothing to find, recall is 1.

    >>> prf(72, 28, 0)
    (0.72, 1.0, 0.8372093023255813)
    """
    if min(tp, fp, fn) < 0:
        raise ValueError("confusion counts must be non-negative")
    if tp + fp == 0:
        precision = 1.0 if fn == 0 else 0.0
    else:
        precision = tp / (tp + fp)
    recall = 1.0 if tp + fn == 0 else tp / (tp + fn)
    if precision + recall == 0:
        return precision, recall, 0.0
    return precision, recall, 2 * precision * recall / (precision + recall)


def score(detected: Iterable, truth: Iterable) -> Score:
    tp, fp, fn = confusion(detected, truth)
    return Score(tp, fp, fn, *prf(tp, fp, fn))


def identities(conflicts: Iterable[Conflict], home: str | None = None) -> set:
    return {((home,) if home is not None else ()) + c.key() for c in conflicts}


def load_identities(path) -> set:
    """Identities from a ``conflicts.jsonl``, prefixed by ``home`` where present."""
    out = set()
    for c, raw in load_conflicts(path):
        home = raw.get("home")
        out.add(((home,) if home is not None else ()) + c.key())
    return out


# ------------------------------------------------------------- dataset runs


def load_home(home_dir) -> dict:
    """Inputs of one generated home, keyed by ``run_method`` argument names."""
    d = Path(home_dir)
    rules = load_rules(d / "rules.txt")
    return dict(
        events=load_events(d / "events.csv"),
        firings=load_firings(d / "firings.csv", rules),
        rules=rules,
        kg3=load_triples(d / "kg3.jsonl"),
        ctx=load_context(d / "context.json"),
        readings=load_readings(d / "readings.json"),
    )


def detect_home(home_dir, method="M1", zeta=DEFAULT_ZETA, eps=DEFAULT_EPS, horizon=None) -> list[Conflict]:
    return run_method(method, zeta=zeta, eps=eps, horizon=horizon, **load_home(home_dir))


def _detect_job(args):
    home_dir, method, zeta, eps, horizon = args
    return identities(detect_home(home_dir, method, zeta, eps, horizon), Path(home_dir).name)


def evaluate_dataset(
    root,
    methods: Sequence[str] = ("M1", "M2", "M3", "M4"),
    zeta: float = DEFAULT_ZETA,
    eps: float = DEFAULT_EPS,
    horizon: float | None = None,
    jobs: int = 1,
) -> dict:
    """Run each method on every ``home_<k>`` under ``root`` and score it
    against ``ground_truth.jsonl``.  Returns the report dictionary."""
    root = Path(root)
    homes = sorted(
        (p for p in root.iterdir() if p.is_dir() and p.name.startswith("home_")),
        key=lambda p: int(p.name.split("_", 1)[1]),
    )
    truth = load_identities(root / "ground_truth.jsonl")
    report = {"zeta": zeta, "eps": eps, "homes": [h.name for h in homes], "methods": {}}
    for method in methods:
        Method(method)
        jobs_in = [(h, method, zeta, eps, horizon) for h in homes]
        if jobs > 1 and len(homes) > 1:
            with ProcessPoolExecutor(max_workers=jobs) as ex:
                found = list(ex.map(_detect_job, jobs_in))
        else:
            found = [_detect_job(j) for j in jobs_in]
        per_home, all_found = {}, set()
        for h, det in zip(homes, found):
            home_truth = {t for t in truth if t[0] == h.name}
            per_home[h.name] = dict(score(det, home_truth).to_json(), n_detected=len(det))
            all_found |= det
        report["methods"][method] = {
            "aggregate": dict(score(all_found, truth).to_json(), n_detected=len(all_found)),
            "per_home": per_home,
        }
    return report


# ---------------------------------------------------------------- benchmark


def bench(
    make_run: Callable[[int], Callable[[], object]],
    sizes: Sequence[int],
    runs: int = 10,
    warmup: int = 1,
    timer: Callable[[], float] = time.perf_counter,
) -> list[BenchRow]:
    """Mean wall-clock milliseconds of ``make_run(n)()`` per size.

    Warm-up calls are excluded from the mean.
    """
    if runs < 1:
        raise ValueError("runs must be at least 1")
    rows = []
    for n in sizes:
        fn = make_run(n)
        for _ in range(warmup):
            fn()
        times = []
        for _ in range(runs):
            t0 = timer()
            fn()
            times.append((timer() - t0) * 1000.0)
        rows.append(BenchRow(n, statistics.fmean(times), runs))
    return rows


def prefix_workload(home_dir, method="M1", zeta=DEFAULT_ZETA, eps=DEFAULT_EPS) -> Callable[[int], Callable[[], object]]:
    """Benchmark closures over the earliest ``n`` events of one home.

    Taking a time-ordered prefix keeps event density fixed as ``n`` grows,
    like adding more days of a household's log.
    """
    inputs = load_home(home_dir)
    events = sorted(inputs.pop("events"), key=lambda e: (e.st, e.et, e.service))

    def make(n: int):
        if n > len(events):
            raise ValueError(f"home has {len(events)} events, asked for {n}")
        sub = events[:n]
        return lambda: run_method(method, sub, zeta=zeta, eps=eps, **inputs)

    return make


def dump_report(report: dict, path) -> None:
    Path(path).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
