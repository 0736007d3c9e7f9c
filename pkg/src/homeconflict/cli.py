"""Command-line entry point.

Subcommands: ``mine``, ``profile``, ``detect``, ``synth``, ``eval``, ``bench``.
Exit codes: 0 success, 2 input error, 3 missing context or readings.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import tempfile
from pathlib import Path

from . import __version__
from .detector import DEFAULT_ZETA, dumps_conflicts
from .evaluation import bench, evaluate_dataset, load_identities, prefix_workload, score
from .filters import DEFAULT_EPS, MissingContextError, run_method
from .kg_core import Stage, load_triples, save_triples
from .nlp_miner import (
    DEFAULT_THETA,
    load_corpora,
    load_descriptions,
    load_embeddings,
    load_lemmas,
    load_stopwords,
    mine_relations,
    seed_graph,
)
from .profiler import profile
from .rules import (
    load_activity_records,
    load_context,
    load_events,
    load_firings,
    load_readings,
    load_rules,
)
from .synth import SynthConfig, generate, load_config, write_dataset

log = logging.getLogger("homeconflict")

EXIT_OK, EXIT_INPUT, EXIT_CONTEXT = 0, 2, 3


def _write(text: str, out: str) -> None:
    if out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def cmd_mine(args) -> int:
    stop = load_stopwords(args.stopwords) if args.stopwords else frozenset()
    lemmas = load_lemmas(args.lemmas) if args.lemmas else {}
    mined = mine_relations(
        load_descriptions(args.descriptions),
        load_corpora(args.corpora),
        load_embeddings(args.embeddings),
        theta=args.theta,
        stopwords=stop,
        lemma_map=lemmas,
    )
    kg = seed_graph(mined)
    save_triples(kg, args.out)
    if args.witnesses:
        recs = [
            {"triple": tr.as_list(), "phrase": w.phrase, "corpus_phrase": w.corpus_phrase,
             "score": round(w.score, 6)}
            for tr, ws in mined.items()
            for w in ws
        ]
        _write("".join(json.dumps(r, separators=(",", ":")) + "\n" for r in recs), args.witnesses)
    log.info("mined %d triples over %d services", len(kg), len(kg.services))
    return EXIT_OK


def _load_events(path, fmt):
    return load_activity_records(path) if fmt == "records" else load_events(path)


def cmd_profile(args) -> int:
    seed = load_triples(args.seed)
    if seed.stage is not Stage.SEED:
        raise ValueError(f"{args.seed} holds a {seed.stage.value} graph, expected a seed graph")
    rules = load_rules(args.rules) if args.rules else []
    ctx = load_context(args.context)
    events = _load_events(args.events, args.events_format) if args.events else ()
    firings = load_firings(args.firings, rules) if args.firings else ()
    prof = profile(seed, rules, ctx, firings, events)
    out = Path(args.out)
    meta = Path(args.meta) if args.meta else out.with_name("profile_meta.json")
    save_triples(prof.kg3, out, meta_path=meta, warnings=prof.warnings)
    for w in prof.warnings:
        print(f"warning: {w}", file=sys.stderr)
    return EXIT_OK


def cmd_detect(args) -> int:
    kg3 = load_triples(args.kg3)
    if kg3.stage is not Stage.KG3:
        raise ValueError(f"{args.kg3} holds a {kg3.stage.value} graph; run 'profile' first")
    rules = load_rules(args.rules) if args.rules else []
    events = _load_events(args.events, args.events_format)
    firings = load_firings(args.firings, rules) if args.firings else []
    ctx = load_context(args.context) if args.context else None
    readings = load_readings(args.readings) if args.readings else None
    found = run_method(
        args.method,
        events,
        firings,
        rules,
        kg3,
        ctx=ctx,
        readings=readings,
        zeta=args.zeta,
        eps=args.eps,
        horizon=args.horizon,
        strict=args.strict,
        placements=ctx.placements if ctx is not None and ctx.placements else None,
    )
    _write(dumps_conflicts(found), args.out)
    log.info("%d conflicts", len(found))
    return EXIT_OK


def cmd_synth(args) -> int:
    cfg = load_config(args.config) if args.config else SynthConfig()
    if args.seed is not None:
        cfg.rng_seed = args.seed
    ds = generate(cfg, jobs=args.jobs)
    write_dataset(ds, args.out_dir)
    log.info("wrote %d homes, %d planted conflicts", len(ds.homes), sum(len(h.truth) for h in ds.homes))
    return EXIT_OK


def cmd_eval(args) -> int:
    if args.dataset:
        report = evaluate_dataset(
            args.dataset, methods=args.methods, zeta=args.zeta, eps=args.eps,
            horizon=args.horizon, jobs=args.jobs,
        )
    else:
        if not (args.detected and args.truth):
            raise ValueError("eval needs either --dataset or both --detected and --truth")
        s = score(load_identities(args.detected), load_identities(args.truth))
        report = {"aggregate": s.to_json()}
        if args.method:
            report["method"] = args.method
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    _write(text, args.out)
    return EXIT_OK


def cmd_bench(args) -> int:
    sizes = [int(x) for x in args.sizes.split(",") if x.strip()] if args.sizes else []
    if any(n < 0 for n in sizes):
        raise ValueError("sizes must be non-negative")
    with tempfile.TemporaryDirectory() as tmp:
        home = args.home
        if home is None:
            cfg = SynthConfig(n_homes=1, n_events=max(sizes, default=0) or 1, n_injected_conflicts=0,
                              rng_seed=args.seed)
            write_dataset(generate(cfg), tmp)
            home = Path(tmp) / "home_1"
        rows = bench(prefix_workload(home, method=args.method, zeta=args.zeta), sizes,
                     runs=args.runs, warmup=args.warmup)
    report = {
        "method": args.method,
        "runs": args.runs,
        "rows": [{"n_events": r.n_events, "mean_ms": round(r.mean_ms, 4)} for r in rows],
    }
    _write(json.dumps(report, indent=2, sort_keys=True) + "\n", args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="homeconflict", description="Smart-home rule conflict detection.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    m = sub.add_parser("mine", help="mine a seed knowledge graph from service descriptions")
    m.add_argument("--descriptions", required=True, help="service descriptions (jsonl)")
    m.add_argument("--corpora", required=True, help="increase/decrease phrase lists per property (jsonl)")
    m.add_argument("--embeddings", required=True, help="token<TAB>vector table")
    m.add_argument("--stopwords", help="one stop word per line")
    m.add_argument("--lemmas", help="inflected<TAB>base lookup")
    m.add_argument("--theta", type=float, default=DEFAULT_THETA, help="cosine threshold (default %(default)s)")
    m.add_argument("--witnesses", help="also write the phrase matches behind each triple (jsonl)")
    m.add_argument("--out", required=True, help="seed triples output (jsonl)")
    m.set_defaults(func=cmd_mine)

    pr = sub.add_parser("profile", help="complete, tailor and refine a seed graph for one home")
    pr.add_argument("--seed", required=True, help="seed triples (jsonl)")
    pr.add_argument("--rules", help="ECA rules, one per line")
    pr.add_argument("--context", required=True, help="preferences, outdoor states and placements (json)")
    pr.add_argument("--events", help="events used to infer preferences from executed rules")
    pr.add_argument("--events-format", choices=("csv", "records"), default="csv")
    pr.add_argument("--firings", help="rule firings (csv: rule,time,location)")
    pr.add_argument("--out", required=True, help="KG3 output (jsonl)")
    pr.add_argument("--meta", help="metadata output (default: profile_meta.json beside --out)")
    pr.set_defaults(func=cmd_profile)

    d = sub.add_parser("detect", help="detect conflicts among events and rule firings")
    d.add_argument("--kg3", required=True, help="profiled graph (jsonl)")
    d.add_argument("--events", required=True, help="interval events")
    d.add_argument("--events-format", choices=("csv", "records"), default="csv")
    d.add_argument("--rules", help="ECA rules, one per line")
    d.add_argument("--firings", help="rule firings (csv: rule,time,location)")
    d.add_argument("--context", help="home context (json); required by M3/M4")
    d.add_argument("--readings", help="current readings {\"env@loc\": value}; required by M3/M4")
    d.add_argument("--zeta", type=float, default=DEFAULT_ZETA, help="firing window in minutes (default %(default)s)")
    d.add_argument("--horizon", type=float, help="minutes after an activation ends that it can still trigger another (default: zeta)")
    d.add_argument("--eps", type=float, default=DEFAULT_EPS, help="reading/preference tolerance (default %(default)s)")
    d.add_argument("--method", choices=("M1", "M2", "M3", "M4"), default="M1")
    d.add_argument("--strict", action="store_true", help="require trigger conditions to hold on readings")
    d.add_argument("--out", default="-", help="conflicts output (jsonl; '-' for stdout)")
    d.set_defaults(func=cmd_detect)

    s = sub.add_parser("synth", help="generate a synthetic dataset with planted conflicts")
    s.add_argument("--config", help="SynthConfig as json (default: built-in defaults)")
    s.add_argument("--seed", type=int, help="override rng_seed")
    s.add_argument("--jobs", type=int, default=1, help="homes generated in parallel")
    s.add_argument("--out-dir", required=True)
    s.set_defaults(func=cmd_synth)

    e = sub.add_parser("eval", help="score detections against ground truth")
    e.add_argument("--detected", help="conflicts (jsonl)")
    e.add_argument("--truth", help="ground-truth conflicts (jsonl)")
    e.add_argument("--dataset", help="synthetic dataset directory; runs and scores every method")
    e.add_argument("--methods", nargs="+", default=["M1", "M2", "M3", "M4"], choices=("M1", "M2", "M3", "M4"))
    e.add_argument("--method", choices=("M1", "M2", "M3", "M4"), help="label recorded with --detected")
    e.add_argument("--zeta", type=float, default=DEFAULT_ZETA)
    e.add_argument("--horizon", type=float)
    e.add_argument("--eps", type=float, default=DEFAULT_EPS)
    e.add_argument("--jobs", type=int, default=1, help="homes detected in parallel")
    e.add_argument("--out", default="-", help="report.json ('-' for stdout)")
    e.set_defaults(func=cmd_eval)

    b = sub.add_parser("bench", help="mean detection time over event-count prefixes")
    b.add_argument("--sizes", default="100,200,300", help="comma-separated event counts")
    b.add_argument("--runs", type=int, default=10)
    b.add_argument("--warmup", type=int, default=1)
    b.add_argument("--home", help="generated home directory to draw events from (default: a fresh synthetic home)")
    b.add_argument("--seed", type=int, default=7, help="seed for the fresh home")
    b.add_argument("--method", choices=("M1", "M2", "M3", "M4"), default="M1")
    b.add_argument("--zeta", type=float, default=DEFAULT_ZETA)
    b.add_argument("--out", default="-")
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except MissingContextError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONTEXT
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
