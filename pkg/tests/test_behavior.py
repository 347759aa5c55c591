import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import DBM_EX, NEBM_EX, fixture_schedule, random_graph, random_people, random_weak
from evacplan.behavior import (
    DBM,
    NEBM,
    BehaviorError,
    as_fraction,
    emit_constraints,
    nearest_exit_wes,
    realize,
    spec_from_doc,
    spec_to_doc,
)
from evacplan.buildinggraph import BuildingGraph, Edge, expand
from evacplan.schedule import count_evacuated, expected_evacuated, occupancy_of, validate_weak


def test_as_fraction():
    assert as_fraction("2/5") == Fraction(2, 5)
    assert as_fraction(0.1) == Fraction(1, 10)
    assert as_fraction("0.7") == Fraction(7, 10)


@pytest.mark.parametrize(
    "delays, msg",
    [
        ((), "empty"),
        (((1, "1/2"), (1, "1/2")), "distinct"),
        (((-1, 1),), "nonnegative"),
        (((0, "1/2"), (1, 0), (2, "1/2")), "positive"),
        (((0, "1/2"), (1, "1/3")), "sum"),
    ],
)
def test_dbm_rejects(delays, msg):
    with pytest.raises(BehaviorError, match=msg):
        DBM(delays)


def test_nebm_range():
    with pytest.raises(BehaviorError):
        NEBM(Fraction(3, 2))
    assert NEBM(1).probabilities == [1]
    assert NEBM(0).probabilities == [1]


def test_spec_docs_round_trip():
    for spec in (DBM_EX, NEBM_EX):
        assert spec_from_doc(spec_to_doc(spec)) == spec
    with pytest.raises(BehaviorError):
        spec_from_doc({"type": "panic"})
    with pytest.raises(BehaviorError):
        spec_from_doc(None)


def test_dbm_expectation_matches_shifted_counts(example):
    g = example.graph
    es = fixture_schedule("example_es.json", g)
    for D in range(5):
        # a delay of tau leaves the head count of tick D - tau (nobody out before 0)
        direct = sum(
            (a * (count_evacuated(es, g, D - tau) if D >= tau else 0) for tau, a in DBM_EX.delays),
            Fraction(0),
        )
        assert expected_evacuated(es, DBM_EX, D, g) == direct


def test_nebm_outcomes_example(example):
    g = example.graph
    es = fixture_schedule("example_es.json", g)
    pairs = realize(NEBM_EX, es, g)
    assert [a for _, a in pairs] == [Fraction(7, 10), Fraction(3, 10)]
    assert pairs[0][0] is es
    wes = pairs[1][0]
    assert validate_weak(wes, g).ok
    assert wes.paths["p1"] == ("v1", "v2", "v3", "v7", "v7")
    assert wes.paths["p4"] == ("v8", "v9", "v10", "v7", "v7")
    # everybody heads for v7, and all arrive by t=3
    assert count_evacuated(wes, g, 3) == 7


def test_nearest_exit_from_edge_snaps_to_closer_end():
    g = BuildingGraph(
        {"a": 1, "b": 1, "x": 9},
        ["x"],
        [Edge("a-b", "a", "b", 1, 3), Edge("b-x", "b", "x", 1, 1)],
    )
    wes = nearest_exit_wes({"p": "a-b"}, g, 4)
    assert wes.paths["p"] == ("a-b", "b", "x", "x", "x")


def test_zero_delay_links_are_identity(example):
    xg = expand(example.graph)
    (blk,) = emit_constraints(DBM(((0, 1),)), xg, 4)
    assert len(blk.links) == len(xg.locations) * 5
    assert all(ln.x_terms == (((ln.loc, ln.t), 1),) and not ln.y_terms for ln in blk.links)


def test_dbm_link_counts(example):
    xg = expand(example.graph)
    blocks = emit_constraints(DBM_EX, xg, 6)
    assert [b.probability for b in blocks] == [Fraction(2, 5), Fraction(3, 5)]
    for b in blocks:
        assert len(b.links) == len(xg.locations) * 7


def test_late_commit_terms_on_long_edges():
    # a three-tick edge: a crossing started late is cut short by the horizon
    g = BuildingGraph({"a": 1, "x": 1}, ["x"], [Edge("a-x", "a", "x", 1, 3)])
    xg = expand(g)
    (blk,) = emit_constraints(DBM(((1, 1),)), xg, 4)
    lk = {(ln.loc, ln.t): ln for ln in blk.links}
    assert lk[("a-x'", 4)].flow_terms == ((("a-x'", "x", 2), 1),)
    assert lk[("a-x'", 3)].flow_terms == ()


def _check(spec, g, s0, es):
    xg = expand(g)
    occ = occupancy_of(es, xg)
    for blk, (w, a) in zip(emit_constraints(spec, xg, es.horizon), realize(spec, es, g, s0)):
        y = blk.evaluate(occ.counts, occ.flows)
        truth = occupancy_of(w, xg)
        assert all(y[(loc, t)] == truth.count(loc, t) for loc in xg.locations for t in range(es.horizon + 1))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 100_000), st.sampled_from([DBM_EX, NEBM_EX, DBM(((1, "1/3"), (3, "2/3")))]))
def test_links_reproduce_outcomes_of_weak_schedules(seed, spec):
    rng = random.Random(seed)
    g = random_graph(rng, rng.randint(2, 6), extra_edges=rng.randint(0, 3), n_exits=rng.randint(1, 2), travel=(1, 4))
    s0 = random_people(rng, g, rng.randint(1, 4))
    es = random_weak(rng, g, s0, rng.randint(2, 9))
    _check(spec, g, s0, es)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 100_000))
def test_nearest_exit_copy_ignores_later_moves(seed):
    """Two schedules sharing their start give the same nearest-exit outcome."""
    rng = random.Random(seed)
    g = random_graph(rng, rng.randint(2, 6), extra_edges=rng.randint(0, 2), n_exits=rng.randint(1, 2), travel=(1, 3))
    s0 = random_people(rng, g, rng.randint(1, 4))
    T = rng.randint(2, 7)
    a, b = random_weak(rng, g, s0, T), random_weak(rng, g, s0, T)
    xg = expand(g)
    (wa, _), (wb, _) = [realize(NEBM_EX, es, g, s0)[1] for es in (a, b)]
    assert wa == wb
    copy2 = emit_constraints(NEBM_EX, xg, T)[1]
    ya = copy2.evaluate(occupancy_of(a, xg).counts, occupancy_of(a, xg).flows)
    yb = copy2.evaluate(occupancy_of(b, xg).counts, occupancy_of(b, xg).flows)
    assert ya == yb
