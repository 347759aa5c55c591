"""Shared fixtures and small random generators for the test suite."""

from __future__ import annotations

import random
from fractions import Fraction

import pytest

from evacplan.behavior import DBM, NEBM
from evacplan.buildinggraph import BuildingGraph, Edge, fixture_path, load_instance
from evacplan.schedule import EvacuationSchedule, load_schedule

# delays 2 and 5 with probabilities 2/5 and 3/5
DBM_EX = DBM(((2, Fraction(2, 5)), (5, Fraction(3, 5))))
NEBM_EX = NEBM(Fraction(7, 10))


@pytest.fixture(scope="session")
def example():
    return load_instance(fixture_path("example.json"))


def fixture_schedule(name: str, g: BuildingGraph) -> EvacuationSchedule:
    return load_schedule(fixture_path(name), g)


def random_graph(
    rng: random.Random,
    n: int,
    extra_edges: int = 1,
    n_exits: int = 1,
    cap: tuple[int, int] = (1, 3),
    exit_cap: int | None = None,
    travel: tuple[int, int] = (1, 3),
) -> BuildingGraph:
    """Connected graph on v1..vn: a random tree plus ``extra_edges`` chords."""
    names = [f"v{i}" for i in range(1, n + 1)]
    pairs = set()
    for i in range(1, n):
        a, b = names[i], names[rng.randrange(i)]
        pairs.add(tuple(sorted((a, b))))
    tries = 0
    while len(pairs) < n - 1 + extra_edges and tries < 50:
        tries += 1
        a, b = rng.sample(names, 2)
        pairs.add(tuple(sorted((a, b))))
    exits = rng.sample(names, min(n_exits, n - 1))
    caps = {v: rng.randint(*cap) for v in names}
    for x in exits:
        caps[x] = exit_cap if exit_cap is not None else max(caps[x], n)
    edges = [Edge(f"{a}-{b}", a, b, rng.randint(*cap), rng.randint(*travel)) for a, b in sorted(pairs)]
    return BuildingGraph(caps, exits, edges)


def random_people(rng: random.Random, g: BuildingGraph, k: int) -> dict[str, str]:
    """``k`` people on non-exit vertices."""
    rooms = [v for v in g.vertices if not g.is_exit(v)]
    return {f"p{i}": rng.choice(rooms) for i in range(1, k + 1)}


def random_walk(rng: random.Random, g: BuildingGraph, start: str, horizon: int, linger: float = 0.2, toward=None) -> tuple:
    """A movement-legal path: waits, traversals, lingering on edges and
    U-turns.  ``toward`` (a dict vertex -> preferred neighbour) biases
    the walk."""
    path = [start]
    while len(path) <= horizon:
        here = path[-1]
        if g.is_exit(here) or rng.random() < 0.25:
            path.append(here)
            continue
        inc = list(g.incident(here))
        if toward and toward.get(here) and rng.random() < 0.7:
            e = g.edge_between(here, toward[here])
        else:
            e = rng.choice(inc)
        far = e.other(here)
        d = e.travel_time
        if rng.random() < 0.15:
            # step on, wait a little, step back
            steps = [e.id] * rng.randint(1, 2) + [here]
        else:
            on = d - 1
            if rng.random() < linger:
                on += rng.randint(1, 2)
            steps = [e.id] * on + [far]
        path.extend(steps)
    return tuple(path[: horizon + 1])


def random_weak(rng: random.Random, g: BuildingGraph, people: dict[str, str], horizon: int, **kw) -> EvacuationSchedule:
    return EvacuationSchedule(horizon, {p: random_walk(rng, g, s, horizon, **kw) for p, s in people.items()})


def corrupt(rng: random.Random, es: EvacuationSchedule, g: BuildingGraph) -> EvacuationSchedule:
    """Break movement legality for one person in one of several ways."""
    paths = dict(es.paths)
    p = rng.choice(es.people)
    path = list(paths[p])
    kind = rng.randrange(3)
    t = rng.randrange(1, es.horizon + 1)
    if kind == 0:
        # teleport to a random vertex
        path[t] = rng.choice(g.vertices)
        for k in range(t + 1, len(path)):
            path[k] = path[t]
    elif kind == 1:
        # shortcut: drop one tick spent on an edge
        idx = [k for k in range(1, len(path)) if not g.is_vertex(path[k])]
        if idx:
            k = rng.choice(idx)
            del path[k]
            path.append(path[-1])
    else:
        # step out of an exit (or anywhere) to a neighbour
        ex = [k for k in range(len(path) - 1) if g.is_vertex(path[k]) and g.is_exit(path[k])]
        k = ex[0] if ex else t - 1
        v = path[k]
        if g.is_vertex(v) and g.neighbors(v):
            path[k + 1] = rng.choice(g.neighbors(v))
            for j in range(k + 2, len(path)):
                path[j] = path[k + 1]
    paths[p] = tuple(path)
    return EvacuationSchedule(es.horizon, paths)


# ---------------------------------------------------------------------------
# acceptance summary

_CRITERION_PREFIX = "test_acceptance.py::test_criterion_"


def pytest_terminal_summary(terminalreporter):
    results = {}
    for outcome in ("passed", "failed", "error", "skipped"):
        for rep in terminalreporter.stats.get(outcome, []):
            nodeid = getattr(rep, "nodeid", "")
            if _CRITERION_PREFIX not in nodeid:
                continue
            if rep.when != "call" and outcome == "passed":
                continue
            num = int(nodeid.split(_CRITERION_PREFIX)[1].split("_")[0])
            status = "PASS" if outcome == "passed" else "FAIL"
            if results.get(num) != "FAIL":
                results[num] = status
    if not results:
        return
    from test_acceptance import CRITERIA

    terminalreporter.section("acceptance criteria")
    for num in sorted(CRITERIA):
        status = results.get(num, "NOT RUN")
        terminalreporter.write_line(f"criterion {num} ({CRITERIA[num]}): {status}")
