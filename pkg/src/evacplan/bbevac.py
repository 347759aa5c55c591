"""Decomposition heuristic: peel exit graphs around (temporary) exits.

Starting from the real exits, the heuristic repeatedly takes the temporary
exit with the least time used, grows a hop-radius neighbourhood around it
until enough of its frontier is occupied, solves the planning program on
that neighbourhood with the exit as the only way out, and splices the
result into the global schedule.  People reaching a temporary exit then
replay the route of someone who started there, after the smallest wait that
keeps every capacity respected.  The frontier becomes the next ring of
temporary exits.
"""

from __future__ import annotations

import heapq
import math
import time
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction

from .behavior import ConstraintBlock, emit_constraints, nearest_exit_wes
from .buildinggraph import BuildingGraph, ExitGraph, expand, exit_graph, hop_distances, id_key
from .ilpmodel import Framework, IlpError, build_ip, extract
from .milpsolver import solve_mip
from .schedule import EvacuationSchedule, _add_loads, capacity_loads, stationary, validate_strong, validate_weak

__all__ = [
    "Step",
    "EvacResult",
    "bb_evac",
    "project_behavior",
    "stitch",
    "first_violation",
]


def project_behavior(spec, eg: ExitGraph, t_max: int) -> list[ConstraintBlock]:
    """Behavior links restricted to an exit graph.

    The links are emitted directly on the exit graph (with its single exit),
    which keeps exactly the equalities over the subgraph's own variables.
    Outcome probabilities are unchanged, so they still sum to one.
    """
    return emit_constraints(spec, expand(eg.subgraph), t_max)


# ---------------------------------------------------------------------------
# stitching


class _Loads:
    """Capacity bookkeeping for a schedule under construction."""

    def __init__(self, es: EvacuationSchedule, g: BuildingGraph):
        self.g = g
        self.vload, self.eload, self.cross = capacity_loads(es, g)

    def remove(self, path) -> None:
        _add_loads(path, self.g, self.vload, self.eload, self.cross, -1)

    def add(self, path) -> None:
        _add_loads(path, self.g, self.vload, self.eload, self.cross, 1)

    def fits(self, path, start: int = 0) -> bool:
        """Would adding ``path`` keep every capacity from tick ``start`` on?"""
        g = self.g
        for t in range(start, len(path)):
            loc = path[t]
            if g.is_vertex(loc):
                if self.vload[(loc, t)] + 1 > g.capacity(loc):
                    return False
                if t + 1 < len(path):
                    nxt = path[t + 1]
                    if nxt != loc and g.is_vertex(nxt):
                        e = g.edge_between(loc, nxt)
                        if e is not None and self.cross[(e.id, t)] + 1 > e.capacity:
                            return False
            else:
                e = g.edge(loc)
                if self.eload[(e.id, t)] + 1 > e.capacity:
                    return False
        return True


def _continuation(head: list, at: int, relay: tuple, wait: int, horizon: int) -> tuple:
    """``head`` up to tick ``at``, then ``wait`` ticks in place, then ``relay``."""
    out = list(head[: at + 1])
    while len(out) < at + 1 + wait and len(out) <= horizon:
        out.append(out[at])
    k = 0
    while len(out) <= horizon:
        out.append(relay[min(k + 1, len(relay) - 1)])
        k += 1
    return tuple(out[: horizon + 1])


def first_violation(es: EvacuationSchedule, g: BuildingGraph):
    """First capacity violation of ``es`` (None when all capacities hold)."""
    rep = validate_strong(es, g)
    for v in rep.violations:
        if v.condition in ("vertex capacity", "edge capacity"):
            return v
    return None


@dataclass
class StitchInfo:
    person: str
    arrival: int
    delay: int | None
    relay: str | None


def stitch(
    es: EvacuationSchedule,
    sub: EvacuationSchedule,
    g: BuildingGraph,
    v: str,
    D: int,
    relay_mode: str = "route",
) -> tuple[EvacuationSchedule, list[StitchInfo]]:
    """Update ``es`` with a sub-schedule ``sub`` that ends at temporary exit ``v``.

    People not in ``sub`` keep their trajectories.  A person in ``sub``
    follows it until reaching ``v``; at a real exit they simply stay.  At a
    temporary exit they wait the minimal number of ticks that keeps every
    capacity respected, then replay the onward route of a relay person.

    Relay persons are those who started at ``v`` and sit at a real exit at
    ``D``, assigned round-robin in id order (``relay_mode="start"``).  With
    ``"through"`` anybody whose route passes ``v`` and ends at an exit by
    ``D`` is accepted when nobody started at ``v``; their route is replayed
    from their last visit to ``v``.  With ``"route"`` (the default) the
    shortest route from ``v`` to its nearest exit is the last resort.
    """
    if relay_mode not in ("start", "through", "route"):
        raise ValueError(f"unknown relay mode {relay_mode}")
    horizon = es.horizon
    paths = dict(es.paths)
    loads = _Loads(es, g)
    movers = sorted(sub.people, key=id_key)
    for p in movers:
        loads.remove(paths[p])
    infos: list[StitchInfo] = []
    arrivals: dict[str, int | None] = {}
    heads: dict[str, list] = {}
    for p in movers:
        path = list(sub.paths[p]) + [sub.paths[p][-1]] * (horizon - sub.horizon)
        path = path[: horizon + 1]
        heads[p] = path
        arr = None
        for t in range(len(path)):
            if all(x == v for x in path[t:]):
                arr = t
                break
        arrivals[p] = arr

    relays: list[tuple[str, tuple]] = []
    if not g.is_exit(v):
        def reaches(q):
            return g.is_vertex(es.paths[q][D]) and g.is_exit(es.paths[q][D])

        starters = [q for q in es.people if q not in sub.paths and es.paths[q][0] == v and reaches(q)]
        for q in sorted(starters, key=id_key):
            relays.append((q, es.paths[q]))
        if not relays and relay_mode in ("through", "route"):
            for q in sorted(es.people, key=id_key):
                if q in sub.paths or not reaches(q):
                    continue
                path = es.paths[q]
                visits = [t for t, x in enumerate(path) if x == v]
                if visits:
                    relays.append((q, tuple(path[visits[-1]:])))
        if not relays and relay_mode == "route":
            route = nearest_exit_wes({"_": v}, g, horizon).paths["_"]
            if g.is_exit(route[-1]):
                relays.append(("(route)", route))

    turn = 0
    order = sorted(movers, key=lambda p: (arrivals[p] if arrivals[p] is not None else horizon + 1, id_key(p)))
    for p in order:
        arr = arrivals[p]
        head = heads[p]
        if arr is None or g.is_exit(v):
            paths[p] = tuple(head)
            loads.add(paths[p])
            infos.append(StitchInfo(p, arr, 0 if arr is not None else None, None))
            continue
        if not relays:
            paths[p] = tuple(head)
            loads.add(paths[p])
            infos.append(StitchInfo(p, arr, None, None))
            continue
        q, relay = relays[turn % len(relays)]
        turn += 1
        chosen = None
        for wait in range(0, horizon - arr + 1):
            cand = _continuation(head, arr, relay, wait, horizon)
            if loads.fits(cand, arr):
                chosen = (wait, cand)
                break
        if chosen is None:
            paths[p] = tuple(head)
            loads.add(paths[p])
            infos.append(StitchInfo(p, arr, None, None))
            continue
        wait, cand = chosen
        paths[p] = cand
        loads.add(cand)
        infos.append(StitchInfo(p, arr, wait, q))
    return EvacuationSchedule(horizon, paths), infos


# ---------------------------------------------------------------------------
# main loop


@dataclass
class Step:
    exit: str
    time_used_before: int
    kappa: int | None
    entry: tuple
    people: tuple
    status: str
    objective: Fraction | None
    epsilon: int
    time_used_after: int
    next_exits: tuple
    stitches: list = field(default_factory=list)
    soft_retry: bool = False
    isolated: bool = False
    elapsed: float = 0.0

    def to_doc(self) -> dict:
        return {
            "exit": self.exit,
            "time_used_before": self.time_used_before,
            "kappa": self.kappa,
            "entry_vertices": list(self.entry),
            "people": list(self.people),
            "status": self.status,
            "objective": None if self.objective is None else str(self.objective),
            "epsilon": self.epsilon,
            "time_used_after": self.time_used_after,
            "next_exits": list(self.next_exits),
            "soft_retry": self.soft_retry,
            "isolated": self.isolated,
            "stitches": [
                {"person": s.person, "arrival": s.arrival, "delay": s.delay, "relay": s.relay} for s in self.stitches
            ],
        }


@dataclass
class EvacResult:
    schedule: EvacuationSchedule
    steps: list[Step]
    time_used: dict
    strong: bool
    stranded: tuple
    elapsed: float

    def step_for(self, v: str) -> Step | None:
        return next((s for s in self.steps if s.exit == v and not s.isolated), None)

    def to_doc(self) -> dict:
        return {
            "steps": [s.to_doc() for s in self.steps],
            "time_used": dict(sorted(self.time_used.items(), key=lambda kv: id_key(kv[0]))),
            "strong": self.strong,
            "stranded": list(self.stranded),
            "elapsed": self.elapsed,
            "schedule": self.schedule.to_doc(),
        }


def _choose_radius(g: BuildingGraph, v: str, occupied: set, gamma: Fraction) -> int:
    dist = hop_distances(g, v, blocked=[x for x in g.exits if x != v])
    ecc = max(dist.values())
    for k in range(1, ecc + 1):
        ring = [u for u, d in dist.items() if d == k]
        need = math.ceil(gamma * len(ring))
        if sum(1 for u in ring if u in occupied) >= need:
            return k
    return ecc


def bb_evac(
    framework: Framework,
    D: int,
    gamma=Fraction(1, 4),
    t_max: int | None = None,
    subproblem_time_limit: float | None = None,
    backend: str = "auto",
    relay_mode: str = "route",
    soft: bool = False,
    time_budget: float | None = None,
) -> EvacResult:
    """Run the peeling heuristic; returns the schedule and a per-step report.

    ``subproblem_time_limit`` defaults to ``time_budget`` split evenly over
    the exits.  Subproblems that cannot evacuate everyone are re-solved
    without the full-evacuation row.
    """
    start_clock = time.monotonic()
    gamma = Fraction(gamma) if not isinstance(gamma, float) else Fraction(repr(gamma))
    if not 0 < gamma <= 1:
        raise ValueError("gamma must lie in (0, 1]")
    g = framework.graph
    s0 = dict(framework.s0)
    if t_max is None:
        t_max = 2 * D
    if D > t_max:
        raise IlpError(f"deadline {D} exceeds horizon {t_max}")
    if subproblem_time_limit is None and time_budget is not None and g.exits:
        subproblem_time_limit = time_budget / len(g.exits)
    es = stationary(s0, t_max)
    pending = {p for p, loc in s0.items() if not (g.is_vertex(loc) and g.is_exit(loc))}
    work_vertices = set(g.vertices)
    designated = set(g.exits)
    time_used: dict[str, int] = {v: 0 for v in g.exits}
    queue = [(0, id_key(v), v) for v in g.exits]
    heapq.heapify(queue)
    next_exits: list[str] = []
    steps: list[Step] = []
    stranded: set[str] = set()

    def working_graph() -> BuildingGraph:
        temp = [v for v in work_vertices if v in designated]
        return g.subgraph(work_vertices, temp)

    while True:
        while queue:
            used, _, v = heapq.heappop(queue)
            gw = working_graph()
            if v not in work_vertices:
                continue
            if not gw.neighbors(v):
                steps.append(Step(v, used, None, (), (), "isolated", None, 0, used, tuple(next_exits), isolated=True))
                continue
            clock = time.monotonic()
            occupied = {s0[p] for p in pending if g.is_vertex(s0[p])}
            kappa = _choose_radius(gw, v, occupied, gamma)
            eg = exit_graph(gw, v, kappa)
            inside = set(eg.subgraph.vertices)
            members = {}
            for p in sorted(pending, key=id_key):
                loc = s0[p]
                if g.is_vertex(loc):
                    if loc in inside and loc != v:
                        members[p] = loc
                else:
                    e = g.edge(loc)
                    if e.u in inside and e.v in inside:
                        members[p] = loc
            sub_D = D - used
            sub_t = t_max - used
            step = Step(v, used, kappa, eg.entry_vertices, tuple(members), "empty", None, 0, used, ())
            if members and sub_D >= 0:
                sub_fw = Framework(eg.subgraph, members, framework.spec)
                others = Counter()
                for q in es.people:
                    if q in members:
                        continue
                    for t in range(sub_t + 1):
                        if es.paths[q][t] == v:
                            others[t] += 1
                residual = {(v, t): max(g.capacity(v) - others[t], 0) for t in range(sub_t + 1)}
                blocks = project_behavior(framework.spec, eg, sub_t)
                plan = None
                for mode in ((True,) if soft else (False, True)):
                    ilp = build_ip(sub_fw, sub_D, sub_t, soft=mode, tiebreak=True, blocks=blocks, exit_capacity=residual)
                    sol = solve_mip(ilp.model, time_limit=subproblem_time_limit, backend=backend)
                    if sol.has_incumbent:
                        plan = extract(ilp, sol.assignment)
                        step.status = sol.status
                        step.objective = ilp.primary_value(sol.assignment)
                        step.soft_retry = mode and not soft
                        break
                    step.status = sol.status
                if plan is not None:
                    es, infos = stitch(es, plan.ses, g, v, D, relay_mode)
                    step.stitches = infos
                    # people left parked at v do not count towards the time used
                    step.epsilon = max(
                        (s.arrival + s.delay for s in infos if s.arrival is not None and s.delay is not None),
                        default=0,
                    )
                    for s in infos:
                        if s.arrival is None or (s.delay is None and not g.is_exit(v)):
                            stranded.add(s.person)
                        else:
                            stranded.discard(s.person)
                    pending -= set(members)
            new_used = used + step.epsilon
            time_used[v] = new_used
            step.time_used_after = new_used
            work_vertices.difference_update(inside)
            if D - new_used > 0:
                for u in eg.entry_vertices:
                    if u == v or u in next_exits:
                        continue
                    next_exits.append(u)
                    time_used[u] = new_used
            step.next_exits = tuple(sorted(next_exits, key=id_key))
            step.elapsed = time.monotonic() - clock
            steps.append(step)
        # refill: the next ring becomes the set of temporary exits
        work_vertices.update(next_exits)
        designated.update(next_exits)
        queue = [(time_used[u], id_key(u), u) for u in next_exits]
        heapq.heapify(queue)
        fresh = bool(next_exits)
        next_exits = []
        # each pass designates new vertices, so this ends within |V| passes
        if not fresh or all(u in designated for u in work_vertices):
            break
    stranded |= {p for p in pending if not (g.is_vertex(es.paths[p][-1]) and g.is_exit(es.paths[p][-1]))}
    stranded = {p for p in stranded if not (g.is_vertex(es.paths[p][-1]) and g.is_exit(es.paths[p][-1]))}
    weak = validate_weak(es, g, t_max)
    if not weak.ok:
        raise IlpError(f"heuristic produced an invalid schedule: {weak.first}")
    strong = validate_strong(es, g, t_max).ok
    return EvacResult(es, steps, time_used, strong, tuple(sorted(stranded, key=id_key)), time.monotonic() - start_clock)
