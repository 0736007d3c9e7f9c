#!/usr/bin/env python3
"""Build the shipped fixture embedding table.

Every token is a weighted mix of named concept axes plus a small
deterministic jitter, so phrases embed predictably without a neural model.
Property names sit between their two direction axes; direction modifiers
(increase/decrease and friends) live on shared up/down axes.

Usage: python scripts/make_fixture_embeddings.py [--check]
"""
import argparse
import hashlib
import json
import sys
from pathlib import Path

DATA = Path(__file__).resolve().parents[1] / "src" / "homeconflict" / "data"

AXES = [
    "heat", "cold", "wet", "dry", "light", "dark", "loud", "quiet",
    "smoky", "clean", "airflow", "sealed", "co2up", "co2down",
    "up", "down", "thing", "act",
]
N_JITTER = 4
JITTER = 0.12

H = 0.7071

PROFILES = {
    # property names: neutral between the two directions
    "temperature": {"heat": H, "cold": H},
    "humidity": {"wet": H, "dry": H},
    "brightness": {"light": H, "dark": H},
    "volume": {"loud": H, "quiet": H},
    "sound": {"loud": H, "quiet": H},
    "smoke": {"smoky": H, "clean": H},
    "ventilation": {"airflow": H, "sealed": H},
    "co2": {"co2up": H, "co2down": H},
    "carbon": {"co2up": H, "co2down": H},
    "dioxide": {"co2up": H, "co2down": H},
    # direction modifiers
    "increase": {"up": 1.0},
    "high": {"up": 1.0},
    "add": {"up": 0.9, "act": 0.3},
    "produce": {"up": 0.8, "act": 0.4},
    "decrease": {"down": 1.0},
    "low": {"down": 1.0},
    "remove": {"down": 0.9, "act": 0.3},
    "extract": {"down": 0.9, "act": 0.3},
    "filter": {"down": 0.8, "clean": 0.4},
    "block": {"down": 0.8, "act": 0.3},
    "poor": {"down": 1.0},
    # temperature
    "hot": {"heat": 1.0},
    "hotness": {"heat": 1.0},
    "heat": {"heat": 1.0},
    "warm": {"heat": 0.95, "thing": 0.1},
    "warmth": {"heat": 0.95},
    "cold": {"cold": 1.0},
    "coldness": {"cold": 1.0},
    "cool": {"cold": 0.95, "act": 0.1},
    "freeze": {"cold": 0.9, "act": 0.3},
    "boil": {"heat": 0.7, "wet": 0.4, "act": 0.3},
    "bake": {"heat": 0.8, "act": 0.4},
    "cook": {"heat": 0.7, "act": 0.6},
    "breeze": {"airflow": 0.8, "cold": 0.3},
    "fireplace": {"heat": 1.0},
    # humidity
    "humid": {"wet": 1.0},
    "moisture": {"wet": 1.0},
    "damp": {"wet": 0.95},
    "steam": {"wet": 0.85, "heat": 0.35},
    "wet": {"wet": 1.0},
    "dry": {"dry": 1.0},
    "dehumidify": {"dry": 1.0},
    "arid": {"dry": 0.95},
    "shower": {"wet": 0.7, "thing": 0.6},
    # brightness
    "light": {"light": 1.0},
    "bright": {"light": 1.0},
    "illuminate": {"light": 1.0},
    "sunlight": {"light": 0.9, "heat": 0.3},
    "dark": {"dark": 1.0},
    "darken": {"dark": 1.0},
    "shade": {"dark": 0.9, "thing": 0.2},
    "dim": {"dark": 0.6, "light": 0.4},
    "display": {"light": 0.5, "act": 0.5},
    # sound
    "loud": {"loud": 1.0},
    "noise": {"loud": 1.0},
    "music": {"loud": 0.8, "thing": 0.4},
    "ring": {"loud": 0.9, "act": 0.2},
    "play": {"act": 0.8, "loud": 0.3},
    "quiet": {"quiet": 1.0},
    "silence": {"quiet": 1.0},
    "muffle": {"quiet": 0.95, "act": 0.2},
    "soundproof": {"quiet": 1.0},
    # smoke
    "burn": {"smoky": 0.85, "heat": 0.5},
    "fume": {"smoky": 1.0},
    "soot": {"smoky": 0.95},
    "smoky": {"smoky": 1.0},
    "smokeless": {"clean": 1.0},
    "purify": {"clean": 0.7, "co2down": 0.5},
    "clean": {"clean": 0.4, "act": 0.6},
    # ventilation
    "airflow": {"airflow": 1.0},
    "ventilate": {"airflow": 1.0},
    "draft": {"airflow": 0.9, "cold": 0.2},
    "circulate": {"airflow": 0.8, "act": 0.3},
    "seal": {"sealed": 1.0},
    "airtight": {"sealed": 1.0},
    "stuffy": {"sealed": 0.8, "co2up": 0.4},
    "air": {"airflow": 0.6, "thing": 0.4},
    # co2
    "exhale": {"co2up": 1.0},
    "stale": {"co2up": 0.9, "sealed": 0.3},
    "combustion": {"co2up": 0.8, "smoky": 0.4},
    "fresh": {"co2down": 0.8, "clean": 0.4},
    "oxygen": {"co2down": 1.0},
    "outdoor": {"co2down": 0.6, "thing": 0.4},
    "gas": {"co2up": 0.6, "thing": 0.5},
    # generic verbs
    "make": {"act": 1.0},
    "let": {"act": 0.5},
    "keep": {"act": 0.8},
    "provide": {"act": 0.8},
    "take": {"act": 0.8},
    "watch": {"act": 0.9},
    "press": {"act": 0.9},
    "blow": {"act": 0.6, "airflow": 0.5},
    "wash": {"act": 0.8, "wet": 0.3},
    "blend": {"act": 1.0},
    "brew": {"act": 0.7, "heat": 0.3},
    "turn": {"act": 1.0},
    # generic things
    "room": {"thing": 0.5},
    "house": {"thing": 0.6},
    "food": {"thing": 1.0},
    "water": {"thing": 0.8, "wet": 0.3},
    "bread": {"thing": 1.0},
    "toast": {"thing": 0.8, "heat": 0.4},
    "cloth": {"thing": 1.0},
    "hair": {"thing": 1.0},
    "wood": {"thing": 1.0},
    "person": {"thing": 1.0},
    "coffee": {"thing": 1.0},
    "dish": {"thing": 1.0},
    "floor": {"thing": 1.0},
    "movie": {"thing": 1.0},
    "picture": {"thing": 1.0},
    "kitchen": {"thing": 1.0},
    "bathroom": {"thing": 1.0},
    "car": {"thing": 1.0},
}


def jitter(token):
    digest = hashlib.sha256(token.encode()).digest()
    return [JITTER * (digest[i] / 255.0 * 2 - 1) for i in range(N_JITTER)]


def vector(token):
    prof = PROFILES[token]
    unknown = set(prof) - set(AXES)
    if unknown:
        raise KeyError(f"{token}: unknown axes {sorted(unknown)}")
    return [prof.get(a, 0.0) for a in AXES] + jitter(token)


def needed_tokens():
    sys.path.insert(0, str(DATA.parents[1]))
    from homeconflict.nlp_miner import load_lemmas, load_stopwords, preprocess

    stop = load_stopwords(DATA / "stopwords.txt")
    lemmas = load_lemmas(DATA / "lemmas.tsv")
    phrases = []
    for line in (DATA / "descriptions.jsonl").read_text().splitlines():
        phrases += json.loads(line)["phrases"]
    for line in (DATA / "corpora.jsonl").read_text().splitlines():
        obj = json.loads(line)
        phrases += obj["inset"] + obj["deset"]
    return {t for p in phrases for t in preprocess(p, stop, lemmas)}


def render():
    lines = ["# fixture embeddings; regenerate with scripts/make_fixture_embeddings.py"]
    for tok in sorted(PROFILES):
        lines.append(tok + "\t" + " ".join(f"{x:.6f}" for x in vector(tok)))
    return "\n".join(lines) + "\n"


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--check", action="store_true", help="fail if the shipped table is stale")
    args = ap.parse_args()
    missing = needed_tokens() - set(PROFILES)
    if missing:
        sys.exit(f"tokens without a profile: {sorted(missing)}")
    text = render()
    out = DATA / "embeddings.tsv"
    if args.check:
        if out.read_text() != text:
            sys.exit("embeddings.tsv is stale")
        return
    out.write_text(text)
    print(f"wrote {len(PROFILES)} vectors to {out}")


if __name__ == "__main__":
    main()
