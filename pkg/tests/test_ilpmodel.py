import random
from collections import Counter
from fractions import Fraction

import pytest

from conftest import DBM_EX, NEBM_EX, random_graph, random_people
from oracle import best_evacuation
from evacplan.behavior import DBM
from evacplan.buildinggraph import BuildingGraph, Edge, expand
from evacplan.ilpmodel import (
    Framework,
    occ_name,
    IlpError,
    assignment_from_occupancy,
    build_ip,
    extract,
    family_counts,
    occupancy_from_assignment,
    plan_ip,
    preflight,
)
from evacplan.milpsolver import solve_mip, verify
from evacplan.schedule import expected_evacuated, occupancy_of, validate_strong, validate_weak

POINT = DBM(((0, 1),))


def test_errors(example):
    fw = Framework(example.graph, example.people, POINT)
    with pytest.raises(IlpError, match="exceeds"):
        build_ip(fw, 5, 4)
    with pytest.raises(IlpError, match="empty"):
        build_ip(Framework(example.graph, example.people, None), 4, 4)
    bad = dict(example.people, p8="v3-v7")
    with pytest.raises(IlpError, match="one-tick edge"):
        build_ip(Framework(example.graph, bad, POINT), 4, 4)


def test_default_horizon_is_twice_the_deadline(example):
    ilp = build_ip(Framework(example.graph, example.people, POINT), 3)
    assert ilp.t_max == 6


def test_example_point_mass_plan(example):
    plan = plan_ip(Framework(example.graph, example.people, POINT), 4, 4, backend="exact")
    assert plan.status == "optimal" and plan.objective == 7
    assert validate_strong(plan.ses, example.graph, 4).ok


def test_exact_and_highs_agree():
    spec = DBM(((0, "1/2"), (1, "1/2")))
    for seed in range(6):
        rng = random.Random(seed)
        g = random_graph(rng, 4, extra_edges=1, cap=(2, 3), travel=(1, 2))
        fw = Framework(g, random_people(rng, g, 3), spec)
        ilp = build_ip(fw, 2, 4, soft=True)
        a = solve_mip(ilp.model, backend="exact")
        b = solve_mip(ilp.model, backend="highs")
        assert a.status == b.status == "optimal", seed
        assert a.objective == b.objective, seed
        pa, pb = extract(ilp, a.assignment), extract(ilp, b.assignment)
        assert pa.objective == pb.objective == a.objective


def test_extract_cross_checks(example):
    fw = Framework(example.graph, example.people, POINT)
    ilp = build_ip(fw, 4, 4)
    sol = solve_mip(ilp.model, backend="exact")
    plan = extract(ilp, sol.assignment, sol.objective)
    assert expected_evacuated(plan.ses, POINT, 4, example.graph) == plan.objective
    with pytest.raises(IlpError, match="differs"):
        extract(ilp, sol.assignment, sol.objective + 1)
    broken = dict(sol.assignment)
    key = next(k for k, v in broken.items() if k.startswith("y1[") and v)
    broken[key] += 1
    with pytest.raises(IlpError):
        extract(ilp, broken)


def test_tiebreak_keeps_the_primary_optimum():
    for seed in range(12):
        rng = random.Random(seed)
        g = random_graph(rng, 4, extra_edges=1, cap=(2, 3), travel=(1, 2))
        s0 = random_people(rng, g, 2)
        fw = Framework(g, s0, DBM_EX if seed % 2 else NEBM_EX)
        plain = build_ip(fw, 3, 6, soft=True)
        tie = build_ip(fw, 3, 6, soft=True, tiebreak=True)
        a = solve_mip(plain.model, backend="exact")
        b = solve_mip(tie.model, backend="exact")
        assert a.status == b.status == "optimal"
        assert tie.primary_value(b.assignment) == a.objective


def test_soft_mode_drops_full_evacuation():
    g = BuildingGraph({"a": 2, "x": 5}, ["x"], [Edge("a-x", "a", "x", 1, 3)])
    s0 = {"p1": "a", "p2": "a"}
    fw = Framework(g, s0, POINT)
    assert solve_mip(build_ip(fw, 2, 2).model, backend="exact").status == "infeasible"
    soft = build_ip(fw, 2, 2, soft=True)
    assert "evacuate-all" not in family_counts(soft.model)
    sol = solve_mip(soft.model, backend="exact")
    assert sol.objective == 0
    plan = extract(soft, sol.assignment)
    assert validate_weak(plan.ses, g, 2).ok
    # with time for one crossing the single-lane edge lets one person through
    sol = solve_mip(build_ip(fw, 3, 3, soft=True).model, backend="exact")
    assert sol.objective == 1


def test_exit_capacity_rows(example):
    fw = Framework(example.graph, example.people, POINT)
    cap = {("v7", t): 2 for t in range(5)}
    ilp = build_ip(fw, 4, 4, soft=True, exit_capacity=cap)
    assert family_counts(ilp.model)["exit-cap"] == 5
    sol = solve_mip(ilp.model, backend="exact")
    plan = extract(ilp, sol.assignment)
    assert all(sum(1 for p in plan.ses.paths.values() if p[t] == "v7") <= 2 for t in range(5))


def test_assignment_round_trip(example):
    from conftest import fixture_schedule

    xg = expand(example.graph)
    occ = occupancy_of(fixture_schedule("example_es.json", example.graph), xg)
    a = assignment_from_occupancy(occ, xg)
    assert occupancy_from_assignment(a, xg, 4) == occ
    a[next(iter(a))] = Fraction(1, 2)
    with pytest.raises(IlpError, match="integral"):
        occupancy_from_assignment(a, xg, 4)


def test_known_schedule_is_feasible_for_its_model(example):
    from conftest import fixture_schedule

    es = fixture_schedule("example_es.json", example.graph)
    fw = Framework(example.graph, example.people, POINT)
    ilp = build_ip(fw, 4, 4)
    xg = ilp.xg
    occ = occupancy_of(es, xg)
    a = assignment_from_occupancy(occ, xg, "x")
    a.update(assignment_from_occupancy(occ, xg, "y1"))
    a["z1"] = Fraction(1)
    assert verify(ilp.model, a) == []
    assert ilp.primary_value(a) == 7


def test_preflight_example(example):
    assert preflight(example.graph, example.people, 4) == (True, 7)
    ok, value = preflight(example.graph, example.people, 1)
    assert not ok and value < 7


def test_preflight_is_necessary():
    """Whenever the max-flow bound says no, the enumeration agrees."""
    refuted = 0
    for seed in range(60):
        rng = random.Random(seed)
        g = random_graph(rng, rng.randint(2, 4), extra_edges=1, cap=(1, 2), travel=(1, 3))
        s0 = random_people(rng, g, rng.randint(1, 3))
        if any(n > g.capacity(v) for v, n in Counter(s0.values()).items()):
            continue
        T = rng.randint(1, 4)
        ok, _ = preflight(g, s0, T)
        if not ok:
            refuted += 1
            assert best_evacuation(g, s0, T, T) is None, seed
    assert refuted > 5


def test_exit_rows_imply_every_pair(example):
    """The adjacent-tick exit rows hold exactly when no later tick has fewer people."""
    ilp = build_ip(Framework(example.graph, example.people, POINT), 4, 4)
    rows = [r for r in ilp.model.constraints if r.family == "exit-monotone" and r.name.startswith("exit-monotone:x:v7:")]
    assert len(rows) == 4
    rng = random.Random(5)
    held = 0
    for _ in range(500):
        counts = [rng.randint(0, 3) for _ in range(5)]
        a = {occ_name("x", "v7", t): n for t, n in enumerate(counts)}
        rows_hold = all(sum(c * a[k] for k, c in r.coeffs.items()) >= r.rhs for r in rows)
        pairwise = all(counts[t1] >= counts[t2] for t1 in range(5) for t2 in range(t1 + 1))
        assert rows_hold == pairwise, counts
        held += pairwise
    assert held > 10
