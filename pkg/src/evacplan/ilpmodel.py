"""Time-expanded integer program for planning under a behavior model.

Variables live on the expanded graph (vertices plus one holding node per
side of every multi-tick edge):

* ``x[loc,t]``      head count at a location at tick t
* ``x[src>dst,t]``  people taking a move at tick t
* ``y<i>[...]``     the same family for behavior outcome i
* ``z<i>``          probability of outcome i

Row families, all per tick in range:

* ``vertex-flow`` / ``edge-flow``  conservation at vertices / holding nodes
* ``departure``     nobody leaves a location they are not at
* ``exit-monotone`` exits never lose people
* ``vertex-cap`` / ``edge-cap`` / ``crossing-cap``  capacities
* ``evacuate-all``  everyone at an exit by the horizon
* ``init`` / ``link`` / ``z``  initial state, behavior links, probabilities
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

from .behavior import ConstraintBlock, emit_constraints
from .buildinggraph import BuildingGraph, ExpandedGraph, expand, id_key
from .milpsolver import Model, Solution, solve_mip
from .schedule import (
    EvacuationSchedule,
    OccupancySchedule,
    ScheduleError,
    decompose,
    expected_evacuated,
    validate_strong,
    validate_weak,
)

__all__ = [
    "IlpError",
    "Framework",
    "IlpModel",
    "Plan",
    "occ_name",
    "flow_name",
    "arc_ticks",
    "build_lpw",
    "build_lps",
    "build_ip",
    "assignment_from_occupancy",
    "occupancy_from_assignment",
    "extract",
    "plan_ip",
    "preflight",
    "family_counts",
]


class IlpError(ValueError):
    pass


def occ_name(prefix: str, loc: str, t: int) -> str:
    return f"{prefix}[{loc},{t}]"


def flow_name(prefix: str, src: str, dst: str, t: int) -> str:
    return f"{prefix}[{src}>{dst},{t}]"


def arc_ticks(arc, t_max: int) -> range:
    """Ticks at which a move can be taken and still land within the horizon."""
    return range(0, t_max - arc.lag + 1)


@dataclass(frozen=True)
class Framework:
    """Building graph, initial state and behavior spec."""

    graph: BuildingGraph
    s0: Mapping[str, str]
    spec: object


def _declare(model: Model, xg: ExpandedGraph, t_max: int, prefix: str) -> None:
    for loc in xg.locations:
        for t in range(t_max + 1):
            model.add_var(occ_name(prefix, loc, t), 0, None, True)


def _declare_flows(model: Model, xg: ExpandedGraph, t_max: int, prefix: str) -> None:
    for a in xg.arcs:
        for s in arc_ticks(a, t_max):
            model.add_var(flow_name(prefix, a.src, a.dst, s), 0, None, True)


def build_lpw(xg: ExpandedGraph, t_max: int, prefix: str = "x", model: Model | None = None) -> Model:
    """Movement rows for one occupancy copy (variables declared if missing)."""
    m = model if model is not None else Model(f"lpw-{prefix}")
    if not m.has_var(occ_name(prefix, xg.locations[0], 0)):
        _declare(m, xg, t_max, prefix)
        _declare_flows(m, xg, t_max, prefix)
    g = xg.base
    for loc in xg.locations:
        family = "edge-flow" if xg.is_virtual(loc) else "vertex-flow"
        outs = xg.out_arcs(loc)
        ins = xg.in_arcs(loc)
        for s in range(t_max):
            row: Counter = Counter()
            row[occ_name(prefix, loc, s + 1)] += 1
            row[occ_name(prefix, loc, s)] -= 1
            for a in outs:
                if s in arc_ticks(a, t_max):
                    row[flow_name(prefix, a.src, a.dst, s)] += 1
            for a in ins:
                k = s + 1 - a.lag
                if k >= 0:
                    row[flow_name(prefix, a.src, a.dst, k)] -= 1
            m.add_row(f"{family}:{prefix}:{loc}:{s + 1}", row, "=", 0, family)
    for loc in xg.locations:
        outs = xg.out_arcs(loc)
        for s in range(t_max):
            row = {flow_name(prefix, a.src, a.dst, s): 1 for a in outs if s in arc_ticks(a, t_max)}
            if not row:
                continue
            row[occ_name(prefix, loc, s)] = -1
            m.add_row(f"departure:{prefix}:{loc}:{s}", row, "<=", 0, "departure")
    for v in g.exits:
        for t in range(t_max):
            m.add_row(
                f"exit-monotone:{prefix}:{v}:{t + 1}",
                {occ_name(prefix, v, t + 1): 1, occ_name(prefix, v, t): -1},
                ">=",
                0,
                "exit-monotone",
            )
    return m


def build_lps(
    xg: ExpandedGraph,
    t_max: int,
    population: int,
    prefix: str = "x",
    model: Model | None = None,
    soft: bool = False,
) -> Model:
    """Capacity rows and the full-evacuation row for one occupancy copy."""
    m = model if model is not None else Model(f"lps-{prefix}")
    if not m.has_var(occ_name(prefix, xg.locations[0], 0)):
        _declare(m, xg, t_max, prefix)
        _declare_flows(m, xg, t_max, prefix)
    g = xg.base
    for v in g.vertices:
        for t in range(t_max + 1):
            m.add_row(f"vertex-cap:{prefix}:{v}:{t}", {occ_name(prefix, v, t): 1}, "<=", g.capacity(v), "vertex-cap")
    for e in g.edges:
        if e.id in xg.virtual_nodes:
            holds = xg.virtual_nodes[e.id]
            commits = [a for h in holds for a in xg.out_arcs(h) if a.kind == "commit"]
            for t in range(t_max + 1):
                row: Counter = Counter(occ_name(prefix, h, t) for h in holds)
                # people past the point of no return are still on the edge
                for a in commits:
                    for s in arc_ticks(a, t_max):
                        if s + 1 <= t <= s + a.lag - 1:
                            row[flow_name(prefix, a.src, a.dst, s)] += 1
                m.add_row(f"edge-cap:{prefix}:{e.id}:{t}", row, "<=", e.capacity, "edge-cap")
        else:
            moves = [a for a in xg.arcs if a.kind == "move" and a.edge == e.id]
            if not moves:
                continue
            for s in range(t_max):
                row = {flow_name(prefix, a.src, a.dst, s): 1 for a in moves}
                m.add_row(f"crossing-cap:{prefix}:{e.id}:{s}", row, "<=", e.capacity, "crossing-cap")
    if not soft:
        m.add_row(
            f"evacuate-all:{prefix}",
            {occ_name(prefix, v, t_max): 1 for v in g.exits},
            ">=",
            population,
            "evacuate-all",
        )
    return m


def family_counts(model: Model) -> Counter:
    return Counter(r.family for r in model.constraints)


@dataclass
class IlpModel:
    model: Model
    framework: Framework
    xg: ExpandedGraph
    D: int
    t_max: int
    soft: bool
    blocks: list[ConstraintBlock]
    primary: dict = field(default_factory=dict)

    def primary_value(self, assignment: Mapping) -> Fraction:
        return sum((c * Fraction(assignment.get(k, 0)) for k, c in self.primary.items()), Fraction(0))


def _lcm_denominators(values) -> int:
    out = 1
    for a in values:
        out = out * a.denominator // math.gcd(out, a.denominator)
    return out


def build_ip(
    framework: Framework,
    D: int,
    t_max: int | None = None,
    soft: bool = False,
    tiebreak: bool = False,
    blocks: list[ConstraintBlock] | None = None,
    exit_capacity: Mapping | None = None,
) -> IlpModel:
    """Plan copy X, one copy per behavior outcome, links and the objective.

    The objective is the expected number of people at exits at tick ``D``.
    With ``tiebreak`` a small secondary reward for early arrivals is added;
    it never changes which primary value is optimal.  ``blocks`` replaces the
    emitted behavior links (used for projected models); ``exit_capacity``
    gives per-tick exit capacities ``{(v, t): c}`` overriding ``c(v)``.
    """
    g = framework.graph
    if t_max is None:
        t_max = 2 * D
    if D < 0:
        raise IlpError("deadline must be nonnegative")
    if D > t_max:
        raise IlpError(f"deadline {D} exceeds horizon {t_max}")
    if framework.spec is None:
        raise IlpError("behavior spec is empty")
    xg = expand(g)
    if blocks is None:
        blocks = emit_constraints(framework.spec, xg, t_max)
    if not blocks:
        raise IlpError("behavior spec is empty")
    m = Model("evacuation")
    copies = ["x"] + [f"y{b.copy}" for b in blocks]
    for pfx in copies:
        _declare(m, xg, t_max, pfx)
    for pfx in copies:
        _declare_flows(m, xg, t_max, pfx)
    for b in blocks:
        m.add_var(f"z{b.copy}", 0, 1, False)

    population = len(framework.s0)
    build_lpw(xg, t_max, "x", m)
    build_lps(xg, t_max, population, "x", m, soft=soft)
    if exit_capacity:
        for (v, t), c in sorted(exit_capacity.items(), key=lambda kv: (id_key(kv[0][0]), kv[0][1])):
            m.add_row(f"exit-cap:x:{v}:{t}", {occ_name("x", v, t): 1}, "<=", c, "exit-cap")

    # initial state
    start: Counter = Counter()
    edge_start: Counter = Counter()
    for p, loc in framework.s0.items():
        if g.is_vertex(loc):
            start[loc] += 1
        else:
            e = g.edge(loc)
            if e.id not in xg.virtual_nodes:
                raise IlpError(f"person {p} starts on one-tick edge {e.id}; place them on an endpoint")
            edge_start[e.id] += 1
    for v in g.vertices:
        m.add_row(f"init:x:{v}", {occ_name("x", v, 0): 1}, "=", start[v], "init")
    for eid, (h1, h2) in xg.virtual_nodes.items():
        m.add_row(f"init:x:{eid}", {occ_name("x", h1, 0): 1, occ_name("x", h2, 0): 1}, "=", edge_start[eid], "init")

    for b in blocks:
        pfx = f"y{b.copy}"
        build_lpw(xg, t_max, pfx, m)
        for ln in b.links:
            row: Counter = Counter()
            row[occ_name(pfx, ln.loc, ln.t)] += 1
            for (loc, t), c in ln.x_terms:
                row[occ_name("x", loc, t)] -= c
            for (loc, t), c in ln.y_terms:
                row[occ_name(pfx, loc, t)] -= c
            for (src, dst, s), c in ln.flow_terms:
                row[flow_name("x", src, dst, s)] -= c
            m.add_row(f"link:{pfx}:{ln.loc}:{ln.t}", row, "=", 0, "link")
        m.add_row(f"z:{b.copy}", {f"z{b.copy}": 1}, "=", b.probability, "z")

    primary: dict[str, Fraction] = {}
    for b in blocks:
        for v in g.exits:
            key = occ_name(f"y{b.copy}", v, D)
            primary[key] = primary.get(key, Fraction(0)) + b.probability
    objective = dict(primary)
    if tiebreak:
        L = _lcm_denominators(b.probability for b in blocks)
        w = Fraction(1, L * (population * (t_max + 1) + 1))
        for v in g.exits:
            for t in range(t_max + 1):
                key = occ_name("x", v, t)
                objective[key] = objective.get(key, Fraction(0)) + w
    m.objective = objective
    m.maximize = True
    return IlpModel(m, framework, xg, D, t_max, soft, blocks, primary)


# ---------------------------------------------------------------------------
# occupancy <-> assignment


def assignment_from_occupancy(occ: OccupancySchedule, xg: ExpandedGraph, prefix: str = "x") -> dict:
    """Variable values of one copy from a head-count/move-count view."""
    out = {}
    for loc in xg.locations:
        for t in range(occ.horizon + 1):
            out[occ_name(prefix, loc, t)] = Fraction(occ.count(loc, t))
    for a in xg.arcs:
        for s in arc_ticks(a, occ.horizon):
            out[flow_name(prefix, a.src, a.dst, s)] = Fraction(occ.flow(a.src, a.dst, s))
    return out


def occupancy_from_assignment(assignment: Mapping, xg: ExpandedGraph, t_max: int, prefix: str = "x") -> OccupancySchedule:
    counts = {}
    flows = {}
    for loc in xg.locations:
        for t in range(t_max + 1):
            val = Fraction(assignment.get(occ_name(prefix, loc, t), 0))
            if val.denominator != 1:
                raise IlpError(f"{occ_name(prefix, loc, t)} = {val} is not integral")
            if val:
                counts[(loc, t)] = int(val)
    for a in xg.arcs:
        for s in arc_ticks(a, t_max):
            val = Fraction(assignment.get(flow_name(prefix, a.src, a.dst, s), 0))
            if val.denominator != 1:
                raise IlpError(f"{flow_name(prefix, a.src, a.dst, s)} = {val} is not integral")
            if val:
                flows[(a.src, a.dst, s)] = int(val)
    return OccupancySchedule(t_max, counts, flows)


@dataclass
class Plan:
    ses: EvacuationSchedule
    realized: list
    copies: list
    objective: Fraction
    solution: Solution | None = None
    status: str = "optimal"


def extract(ilp: IlpModel, assignment: Mapping, objective: Fraction | None = None) -> Plan:
    """Per-person schedule from a solution, with the objective cross-checked.

    In hard mode the schedule must be strong; in soft mode it must be weak.
    """
    fw = ilp.framework
    g = fw.graph
    occ = occupancy_from_assignment(assignment, ilp.xg, ilp.t_max, "x")
    try:
        ses = decompose(occ, fw.s0, ilp.xg)
    except ScheduleError as exc:
        raise IlpError(f"decomposition failed: {exc}") from exc
    rep = (validate_weak if ilp.soft else validate_strong)(ses, g, ilp.t_max)
    if not rep.ok:
        raise IlpError(f"extracted schedule fails {rep.kind} validation: {rep.first}")
    copies = []
    value = Fraction(0)
    for b in ilp.blocks:
        y = occupancy_from_assignment(assignment, ilp.xg, ilp.t_max, f"y{b.copy}")
        linked = b.evaluate(occ.counts, occ.flows)
        bad = next((k for k, n in linked.items() if y.count(*k) != n), None)
        if bad is not None:
            raise IlpError(f"outcome copy {b.copy} at {bad} is {y.count(*bad)}, the links give {linked[bad]}")
        copies.append((y, b.probability))
        value += b.probability * sum(y.count(v, ilp.D) for v in g.exits)
    primary = ilp.primary_value(assignment)
    if value != primary:
        raise IlpError(f"objective recomputed from counts is {value}, model says {primary}")
    if objective is not None and objective != primary:
        raise IlpError(f"solver objective {objective} differs from the assignment's {primary}")
    realized = fw.spec.realize(ses, g, fw.s0)
    expect = expected_evacuated(ses, realized, ilp.D, g)
    if expect != value:
        raise IlpError(f"expected evacuees of the extracted schedule is {expect}, objective is {value}")
    return Plan(ses, realized, copies, value)


def plan_ip(
    framework: Framework,
    D: int,
    t_max: int | None = None,
    soft: bool = False,
    time_limit: float | None = None,
    backend: str = "auto",
    tiebreak: bool = False,
) -> Plan | None:
    """Build, solve and extract in one step; None when no solution was found."""
    ilp = build_ip(framework, D, t_max, soft=soft, tiebreak=tiebreak)
    sol = solve_mip(ilp.model, time_limit=time_limit, backend=backend)
    if not sol.has_incumbent:
        return Plan(None, [], [], Fraction(0), sol, sol.status) if sol.status != "infeasible" else None
    plan = extract(ilp, sol.assignment)
    plan.solution = sol
    plan.status = sol.status
    return plan


# ---------------------------------------------------------------------------
# feasibility pre-check


def preflight(g: BuildingGraph, s0: Mapping[str, str], t_max: int) -> tuple[bool, int]:
    """Necessary condition for full evacuation by ``t_max``.

    Runs a max-flow on the time-expanded network with vertex, holding-node
    and crossing capacities (edge pipelines relaxed).  Returns (possible,
    max-flow value); ``possible`` False proves the hard program infeasible.
    """
    import networkx as nx

    xg = expand(g)
    net = nx.DiGraph()
    src, sink = "_source", "_sink"

    def node(loc, t, side):
        return (loc, t, side)

    def cap(loc):
        if xg.is_virtual(loc):
            return g.edge(xg.side_of(loc)[0]).capacity
        return g.capacity(loc)

    for loc in xg.locations:
        for t in range(t_max + 1):
            net.add_edge(node(loc, t, "in"), node(loc, t, "out"), capacity=cap(loc))
            if t < t_max:
                net.add_edge(node(loc, t, "out"), node(loc, t + 1, "in"))
    for a in xg.arcs:
        for s in arc_ticks(a, t_max):
            if a.kind == "move":
                gate = ("_cross", a.edge, s)
                net.add_edge(gate + ("in",), gate + ("out",), capacity=g.edge(a.edge).capacity)
                net.add_edge(node(a.src, s, "out"), gate + ("in",))
                net.add_edge(gate + ("out",), node(a.dst, s + a.lag, "in"))
            else:
                net.add_edge(node(a.src, s, "out"), node(a.dst, s + a.lag, "in"))
    supply: Counter = Counter()
    for loc in s0.values():
        if g.is_vertex(loc):
            supply[loc] += 1
        else:
            e = g.edge(loc)
            if e.id in xg.virtual_nodes:
                for h in xg.virtual_nodes[e.id]:
                    net.add_edge(("_edge", e.id), node(h, 0, "in"))
                supply[("_edge", e.id)] += 1
            else:
                supply[e.u] += 1
    for k, n in supply.items():
        target = k if isinstance(k, tuple) else node(k, 0, "in")
        net.add_edge(src, target, capacity=n)
    for v in g.exits:
        net.add_edge(node(v, t_max, "out"), sink)
    population = len(s0)
    if population == 0:
        return True, 0
    value = nx.maximum_flow_value(net, src, sink)
    return value >= population, int(value)
