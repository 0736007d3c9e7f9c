import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from homeconflict.detector import Conflict, ConflictKind, detect_all
from homeconflict.filters import (
    Method,
    MissingContextError,
    MissingReadingError,
    filter_contextual,
    filter_inert_events,
    run_method,
)
from homeconflict.kg_core import KnowledgeGraph, Relation, Stage, Triple
from homeconflict.rules import EnvPreference, HomeContext, IntervalEvent, RuleFiring, parse_rules


def T(h, r, t):
    return Triple(h, Relation(r), t)


G = KnowledgeGraph(
    frozenset([T("ac", "-", "temperature"), T("window", "+", "temperature"), T("heater", "+", "temperature"),
               T("kettle", "+", "humidity"), T("temperature", "T", "ac")]),
    stage=Stage.KG3,
)
CTX = HomeContext(prefs=(EnvPreference("temperature", 22, 0, 1439, "r"),))


def opp(loc="r", st=0):
    return Conflict(ConflictKind.OPP, loc, env="temperature", a=T("ac", "-", "temperature"),
                    b=T("window", "+", "temperature"),
                    events=(IntervalEvent("ac", st, st + 60, loc), IntervalEvent("window", st, st + 30, loc)))


def test_method_wiring():
    assert [m.filters_events for m in Method] == [False, True, False, True]
    assert [m.filters_context for m in Method] == [False, False, True, True]


def test_inert_events_dropped():
    evs = [IntervalEvent("ac", 0, 10, "r"), IntervalEvent("sofa", 0, 10, "r")]
    assert filter_inert_events(evs, G) == evs[:1]


@pytest.mark.parametrize("reading, kept", [(22, False), (22.5, False), (21.6, False), (23, True), (20, True)])
def test_reading_at_preference_drops_environment_conflicts(reading, kept):
    out = filter_contextual([opp()], CTX, {("temperature", "r"): reading})
    assert (len(out) == 1) is kept


def test_no_preference_keeps_and_missing_reading_raises():
    other = HomeContext()
    assert filter_contextual([opp()], other, {("temperature", "r"): 22}) == {opp()}
    with pytest.raises(MissingReadingError):
        filter_contextual([opp()], CTX, {})


def test_preference_active_at_later_start_is_used():
    ctx = HomeContext(prefs=(EnvPreference("temperature", 22, 0, 600, "r"),
                             EnvPreference("temperature", 26, 601, 1439, "r")))
    assert filter_contextual([opp(st=700)], ctx, {("temperature", "r"): 26}) == set()
    assert filter_contextual([opp(st=100)], ctx, {("temperature", "r"): 26}) == {opp(st=100)}


def test_function_and_transitive_conflicts_untouched():
    ff = Conflict(ConflictKind.FF, "r", rules=("A", "B"), service="ac", functionalities=("turn_off", "turn_on"),
                  times=(0, 1))
    assert filter_contextual([ff], CTX, {}) == {ff}


def test_context_methods_need_inputs():
    with pytest.raises(MissingContextError):
        run_method("M3", [], [], [], G)
    with pytest.raises(MissingContextError):
        run_method(Method.M4, [], [], [], G, ctx=CTX)


RULES = parse_rules(["A: temperature > 26 -> turn on ac", "B: temperature < 20 -> turn off ac"])
SERVICES = ["ac", "window", "heater", "kettle", "sofa", "lamp"]


@st.composite
def homes(draw):
    evs = []
    for _ in range(draw(st.integers(0, 25))):
        s = draw(st.integers(0, 1300))
        evs.append(IntervalEvent(draw(st.sampled_from(SERVICES)), s, s + draw(st.integers(0, 120)),
                                 draw(st.sampled_from(["r", "q"]))))
    fs = [RuleFiring(draw(st.integers(0, 1439)), draw(st.sampled_from("AB")), "r")
          for _ in range(draw(st.integers(0, 4)))]
    readings = {(e, l): draw(st.integers(18, 26)) for e in ("temperature", "humidity") for l in ("r", "q")}
    prefs = tuple(EnvPreference(e, draw(st.integers(18, 26)), 0, 1439, l)
                  for e in ("temperature", "humidity") for l in ("r", "q"))
    return evs, fs, readings, HomeContext(prefs)


@settings(max_examples=150)
@given(homes())
def test_filters_only_remove(home):
    evs, fs, readings, ctx = home
    found = {m: set(run_method(m, evs, fs, RULES, G, ctx=ctx, readings=readings)) for m in Method}
    assert found[Method.M1] == set(detect_all(evs, fs, RULES, G))
    assert found[Method.M4] <= found[Method.M2] <= found[Method.M1]
    assert found[Method.M4] <= found[Method.M3] <= found[Method.M1]
