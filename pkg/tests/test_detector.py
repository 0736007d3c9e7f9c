import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from homeconflict.detector import (
    Conflict,
    ConflictKind,
    InputConsistencyError,
    conflict_from_json,
    conflict_to_json,
    detect_all,
    detect_ff,
    detect_pairwise,
    detect_transitive,
    dump_conflicts,
    dumps_conflicts,
    find_overlaps,
    load_conflicts,
)
from homeconflict.kg_core import KnowledgeGraph, Relation, Stage, Triple
from homeconflict.rules import IntervalEvent, RuleFiring, parse_rules

ROOMS = ["kitchen", "bathroom", "bedroom", "living_room", "study_room"]


def T(h, r, t):
    return Triple(h, Relation(r), t)


def kg3(*trs):
    return KnowledgeGraph(frozenset(trs), stage=Stage.KG3)


def brute_overlaps(events, slack=0.0):
    out = set()
    for i, a in enumerate(events):
        for b in events[i + 1 :]:
            if a.loc != b.loc:
                continue
            first, second = sorted((a, b), key=lambda e: (e.st, e.et, e.service, e.loc))
            if second.st <= first.et + slack:
                out.add((first, second))
    return out


@st.composite
def event_lists(draw, max_size=60):
    n = draw(st.integers(0, max_size))
    out = []
    for k in range(n):
        st_ = draw(st.integers(0, 1400))
        et = draw(st.integers(st_, min(st_ + 150, 1439)))
        out.append(IntervalEvent(f"s{k}", st_, et, draw(st.sampled_from(ROOMS))))
    return out


@given(event_lists(), st.sampled_from([0, 0, 5]))
def test_overlaps_match_brute_force(events, slack):
    got = find_overlaps(events, slack)
    assert len(got) == len(set(got))
    assert set(got) == brute_overlaps(events, slack)


def test_overlap_boundary_is_closed():
    a = IntervalEvent("a", 0, 10, "r")
    b = IntervalEvent("b", 10, 20, "r")
    c = IntervalEvent("c", 21, 30, "r")
    assert find_overlaps([c, b, a]) == [(a, b)]
    assert (b, c) in find_overlaps([a, b, c], slack=1)
    assert find_overlaps([a, IntervalEvent("b", 5, 6, "other")]) == []


FF_RULES = parse_rules(
    ["R1: temperature > 25C -> close window", "R2: CO2 > 0.5% -> open window", "R3: co2 > 900 -> open window"]
)


@pytest.mark.parametrize(
    "t2, loc, rule, expected",
    [
        (522, "studio", "R2", 1),
        (524.99, "studio", "R2", 1),
        (525, "studio", "R2", 0),
        (522, "bedroom", "R2", 0),
        (522, "studio", "R1", 0),
    ],
)
def test_ff_window(t2, loc, rule, expected):
    fs = [RuleFiring(520, "R1", "studio"), RuleFiring(t2, rule, loc)]
    found = detect_ff(fs, FF_RULES, zeta=5)
    assert len(found) == expected
    if expected:
        (c,) = found
        assert c.rules == ("R1", "R2") and c.service == "window"


def test_ff_unknown_rule_and_bad_zeta():
    with pytest.raises(InputConsistencyError):
        detect_ff([RuleFiring(1, "nope", "x")], FF_RULES)
    with pytest.raises(ValueError):
        detect_ff([], FF_RULES, zeta=0)


def test_opp_and_cum_classification():
    g = kg3(T("ac", "-", "temperature"), T("window", "+", "temperature"), T("heater", "+", "temperature"),
            T("window", "-", "co2"))
    ac, win, heat = (IntervalEvent(s, 0, 60, "r") for s in ("ac", "window", "heater"))
    got = {(c.kind, c.services, c.env) for c in detect_pairwise([(ac, win), (win, heat)], g)}
    assert got == {
        (ConflictKind.OPP, ("ac", "window"), "temperature"),
        (ConflictKind.CUM, ("heater", "window"), "temperature"),
    }


TRA_KG = kg3(T("heater", "+", "temperature"), T("temperature", "T", "ac"))


@pytest.mark.parametrize(
    "rule, expected",
    [
        ("temperature > 25 -> turn on ac", 1),
        ("temperature = 25 -> turn on ac", 1),
        ("temperature < 22 -> turn on ac", 0),
        (None, 1),
    ],
)
def test_transitive_respects_trigger_direction(rule, expected):
    rules = parse_rules([rule]) if rule else None
    heater = IntervalEvent("heater", 0, 60, "r")
    ac = IntervalEvent("ac", 30, 90, "r")
    found = detect_pairwise([(heater, ac)], TRA_KG, rules)
    assert len(found) == expected
    if expected:
        (c,) = found
        assert c.services == ("heater", "ac") and c.key()[1] == ("heater", "ac")


def test_transitive_needs_the_impacting_service_first():
    heater = IntervalEvent("heater", 30, 60, "r")
    ac = IntervalEvent("ac", 0, 90, "r")
    assert detect_pairwise([(ac, heater)], TRA_KG) == set()


@pytest.mark.parametrize("gap, expected", [(0, 1), (2, 1), (5, 1), (5.5, 0), (60, 0)])
def test_transitive_horizon_after_end(gap, expected):
    heater = IntervalEvent("heater", 0, 60, "r")
    ac = IntervalEvent("ac", 60 + gap, 120, "r")
    # touching intervals overlap, so only the full detector reports gap 0
    assert len(detect_transitive([heater, ac], TRA_KG, horizon=5)) == (expected if gap else 0)
    found = detect_all([heater, ac], [], [], TRA_KG, zeta=5)
    assert len(found) == expected


def test_strict_mode_checks_readings():
    rules = parse_rules(["temperature > 25 -> turn on ac"])
    heater = IntervalEvent("heater", 0, 60, "r")
    ac = IntervalEvent("ac", 30, 90, "r")
    hot = {("temperature", "r"): 27}
    cold = {("temperature", "r"): 20}
    assert detect_pairwise([(heater, ac)], TRA_KG, rules, hot, strict=True)
    assert not detect_pairwise([(heater, ac)], TRA_KG, rules, cold, strict=True)
    with pytest.raises(ValueError):
        detect_pairwise([(heater, ac)], TRA_KG, rules, None, strict=True)


def test_detection_requires_kg3():
    with pytest.raises(ValueError, match="KG3"):
        detect_all([], [], [], KnowledgeGraph())


def test_input_consistency():
    ev = [IntervalEvent("ac", 0, 10, "kitchen")]
    with pytest.raises(InputConsistencyError) as info:
        detect_all(ev, [RuleFiring(0, "zz", "kitchen")], [], kg3(), placements={"ac": "bedroom"})
    assert len(info.value.problems) == 2


GRAPH = kg3(
    T("ac", "-", "temperature"), T("window", "+", "temperature"), T("heater", "+", "temperature"),
    T("stove", "+", "temperature"), T("tv", "+", "brightness"), T("blind", "+", "brightness"),
    T("temperature", "T", "ac"), T("temperature", "T", "window"), T("brightness", "T", "blind"),
)
SERVICES = ["ac", "window", "heater", "stove", "tv", "blind", "lamp"]
RULES = parse_rules(["A: temperature > 26 -> turn on ac", "B: temperature > 27 -> close window",
                     "C: brightness < 40 -> pull up blind", "D: temperature < 20 -> open window"])


@st.composite
def homes(draw):
    n = draw(st.integers(0, 25))
    evs = []
    for _ in range(n):
        s = draw(st.integers(0, 1380))
        evs.append(IntervalEvent(draw(st.sampled_from(SERVICES)), s, min(s + draw(st.integers(0, 90)), 1439),
                                 draw(st.sampled_from(ROOMS[:2]))))
    fs = [RuleFiring(draw(st.integers(0, 1439)), draw(st.sampled_from("ABCD")), draw(st.sampled_from(ROOMS[:2])))
          for _ in range(draw(st.integers(0, 6)))]
    return evs, fs


@settings(max_examples=150)
@given(homes(), st.randoms())
def test_detect_all_is_order_invariant(home, rnd):
    evs, fs = home
    a = detect_all(evs, fs, RULES, GRAPH)
    evs2, fs2 = list(evs), list(fs)
    rnd.shuffle(evs2)
    rnd.shuffle(fs2)
    b = detect_all(evs2, fs2, list(reversed(RULES)), GRAPH)
    assert dumps_conflicts(a) == dumps_conflicts(b)


@settings(max_examples=150)
@given(homes())
def test_environment_conflicts_come_from_close_same_room_pairs(home):
    evs, fs = home
    for c in detect_all(evs, fs, RULES, GRAPH):
        if c.kind is ConflictKind.FF:
            assert abs(c.times[1] - c.times[0]) < 5
            continue
        e1, e2 = c.events
        assert e1.loc == e2.loc == c.loc
        assert e1.st <= e2.st
        if c.kind is ConflictKind.TRA:
            assert e2.st <= e1.et + 5
            assert c.a.h == e1.service and c.b.t == e2.service
        else:
            assert e2.st <= e1.et
            same = c.a.r is c.b.r
            assert same == (c.kind is ConflictKind.CUM)


@given(homes())
def test_json_roundtrip(home):
    evs, fs = home
    found = detect_all(evs, fs, RULES, GRAPH)
    for c in found:
        back = conflict_from_json(json.loads(json.dumps(conflict_to_json(c))))
        assert back.key() == c.key()


def test_dump_and_load(tmp_path):
    c = Conflict(ConflictKind.FF, "studio", rules=("R1", "R2"), service="window",
                 functionalities=("close", "open"), times=(520, 522))
    dump_conflicts([c], tmp_path / "c.jsonl", home="home_1")
    ((back, raw),) = load_conflicts(tmp_path / "c.jsonl")
    assert back == c and raw["home"] == "home_1"
    (tmp_path / "bad.jsonl").write_text('{"kind": "Nope"}\n')
    with pytest.raises(ValueError, match=":1:"):
        load_conflicts(tmp_path / "bad.jsonl")
