import random
from collections import Counter
from fractions import Fraction

import pytest

from conftest import DBM_EX, NEBM_EX, random_graph, random_people
from evacplan.bbevac import StitchInfo, _choose_radius, bb_evac, first_violation, project_behavior, stitch
from evacplan.behavior import DBM
from evacplan.buildinggraph import BuildingGraph, Edge, exit_graph, expand
from evacplan.ilpmodel import Framework, IlpError, plan_ip
from evacplan.schedule import EvacuationSchedule, expected_evacuated, validate_strong, validate_weak

POINT = DBM(((0, 1),))

# b - a - x on one-tick single-lane edges; a holds two, x is the exit
RELAY = BuildingGraph({"a": 2, "b": 1, "x": 5}, ["x"], [Edge("a-b", "a", "b", 1, 1), Edge("a-x", "a", "x", 1, 1)])


def _instances(count, n=(3, 5), people=(1, 4)):
    """Small random instances whose starting rooms fit their people."""
    seed = 0
    while count:
        rng = random.Random(seed)
        seed += 1
        g = random_graph(rng, rng.randint(*n), extra_edges=1, cap=(1, 3), travel=(1, 2))
        s0 = random_people(rng, g, rng.randint(*people))
        if any(k > g.capacity(v) for v, k in Counter(s0.values()).items()):
            continue
        count -= 1
        yield seed - 1, g, s0


def test_choose_radius():
    g = BuildingGraph(
        {"x": 9, "a": 1, "b": 1, "c": 1, "d": 1},
        ["x"],
        [Edge("x-a", "x", "a", 1, 1), Edge("a-b", "a", "b", 1, 1), Edge("a-c", "a", "c", 1, 1), Edge("c-d", "c", "d", 1, 1)],
    )
    assert _choose_radius(g, "x", {"a"}, Fraction(1)) == 1
    # ring two is {b, c}: one occupied meets a half but not all of it
    assert _choose_radius(g, "x", {"b"}, Fraction(1, 2)) == 2
    assert _choose_radius(g, "x", {"b"}, Fraction(1)) == 3
    # nobody anywhere: the whole reachable graph
    assert _choose_radius(g, "x", set(), Fraction(1, 4)) == 3


def test_project_behavior_keeps_probabilities(example):
    eg = exit_graph(example.graph, "v7", 1)
    for spec in (DBM_EX, NEBM_EX):
        blocks = project_behavior(spec, eg, 4)
        assert sum(b.probability for b in blocks) == 1
        locs = expand(eg.subgraph).locations
        for b in blocks:
            assert {ln.loc for ln in b.links} == set(locs)
            assert len(b.links) == len(locs) * 5


def test_stitch_waits_for_a_free_crossing():
    es = EvacuationSchedule(3, {"p1": ("a", "x", "x", "x"), "p2": ("b",) * 4, "p3": ("a", "a", "x", "x")})
    sub = EvacuationSchedule(3, {"p2": ("b", "a", "a", "a")})
    out, infos = stitch(es, sub, RELAY, "a", 3)
    # with no wait p2 would cross a-x alongside p3 at tick 1
    assert out.paths["p2"] == ("b", "a", "a", "x")
    assert infos == [StitchInfo("p2", 1, 1, "p1")]
    assert out.paths["p1"] == es.paths["p1"] and out.paths["p3"] == es.paths["p3"]
    assert validate_strong(out, RELAY).ok


def test_stitch_relay_modes():
    # nobody started at a, p1 passes through it
    es = EvacuationSchedule(3, {"p1": ("b", "a", "x", "x"), "p2": ("b",) * 4})
    sub = EvacuationSchedule(3, {"p2": ("b", "b", "a", "a")})
    _, infos = stitch(es, sub, RELAY, "a", 3, "start")
    assert infos == [StitchInfo("p2", 2, None, None)]
    out, infos = stitch(es, sub, RELAY, "a", 3, "through")
    assert infos == [StitchInfo("p2", 2, 0, "p1")] and out.paths["p2"] == ("b", "b", "a", "x")
    # nobody usable at all: the shortest route from a is the fallback
    lone = EvacuationSchedule(3, {"p2": ("b",) * 4})
    out, infos = stitch(lone, sub, RELAY, "a", 3, "route")
    assert infos == [StitchInfo("p2", 2, 0, "(route)")] and out.paths["p2"] == ("b", "b", "a", "x")
    with pytest.raises(ValueError):
        stitch(es, sub, RELAY, "a", 3, "teleport")


def test_first_violation():
    ok = EvacuationSchedule(2, {"p1": ("b", "a", "x")})
    assert first_violation(ok, RELAY) is None
    crowd = EvacuationSchedule(2, {"p1": ("a", "x", "x"), "p2": ("a", "x", "x")})
    assert first_violation(crowd, RELAY).condition == "edge capacity"


def test_example_everybody_out(example):
    res = bb_evac(Framework(example.graph, example.people, POINT), 5, gamma=1, t_max=10)
    assert res.strong and not res.stranded
    assert expected_evacuated(res.schedule, POINT, 5, example.graph) == 7


def test_rejects_bad_arguments(example):
    fw = Framework(example.graph, example.people, POINT)
    with pytest.raises(ValueError):
        bb_evac(fw, 4, gamma=0)
    with pytest.raises(IlpError):
        bb_evac(fw, 5, t_max=4)


@pytest.mark.parametrize("relay", ["start", "through", "route"])
def test_random_results_are_consistent(relay):
    for seed, g, s0 in _instances(8):
        spec = DBM_EX if seed % 2 else NEBM_EX
        res = bb_evac(Framework(g, s0, spec), 3, gamma=Fraction(1, 2), t_max=6, backend="exact", relay_mode=relay)
        es = res.schedule
        assert validate_weak(es, g, 6).ok, seed
        assert res.strong == validate_strong(es, g, 6).ok, seed
        out = {p for p, path in es.paths.items() if g.is_vertex(path[-1]) and g.is_exit(path[-1])}
        assert set(res.stranded) == set(s0) - out, seed
        assert es.paths.keys() == s0.keys()
        assert all(es.paths[p][0] == s0[p] for p in s0)


def test_never_beats_the_exact_planner():
    """When the heuristic keeps every capacity, the exact soft optimum bounds it."""
    compared = 0
    for seed, g, s0 in _instances(10, people=(2, 4)):
        fw = Framework(g, s0, POINT if seed % 2 else DBM(((0, "1/2"), (1, "1/2"))))
        res = bb_evac(fw, 2, gamma=Fraction(1, 2), t_max=4, backend="exact")
        if first_violation(res.schedule, g) is not None:
            continue
        best = plan_ip(fw, 2, 4, soft=True, backend="exact")
        got = expected_evacuated(res.schedule, fw.spec, 2, g)
        assert got <= best.objective, seed
        compared += 1
    assert compared >= 5


def test_trace_document(example):
    res = bb_evac(Framework(example.graph, example.people, POINT), 4, gamma=Fraction(1, 4))
    doc = res.to_doc()
    assert [s["exit"] for s in doc["steps"]][:2] == ["v4", "v7"]
    assert doc["strong"] == res.strong
    assert set(doc["time_used"]) >= {"v4", "v7"}
    assert res.step_for("v4") is res.steps[0]
