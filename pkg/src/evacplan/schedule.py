"""Per-person evacuation schedules, validation, metrics and occupancy views."""

from __future__ import annotations

import json
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Mapping, Sequence

from .buildinggraph import BuildingGraph, ExpandedGraph, GraphError, id_key, loc_key

__all__ = [
    "State",
    "ScheduleError",
    "EvacuationSchedule",
    "Violation",
    "ValidationReport",
    "OccupancySchedule",
    "load_schedule",
    "validate_weak",
    "validate_strong",
    "count_evacuated",
    "expected_evacuated",
    "occupancy_of",
    "decompose",
    "delay",
    "stationary",
    "capacity_loads",
]

State = dict  # PersonId -> VertexId | EdgeId


class ScheduleError(ValueError):
    """Malformed schedules, or occupancies that no schedule can realise."""


@dataclass(frozen=True)
class EvacuationSchedule:
    """Locations of every person at ticks ``0..horizon``.

    A location is a vertex id or an edge id.  The object does not know
    whether it is weak or strong; use the validators.
    """

    horizon: int
    paths: Mapping[str, tuple[str, ...]]

    def __post_init__(self):
        fixed = {}
        for p, path in self.paths.items():
            path = tuple(path)
            if len(path) != self.horizon + 1:
                raise ScheduleError(
                    f"person {p}: {len(path)} locations for horizon {self.horizon}"
                )
            fixed[p] = path
        object.__setattr__(self, "paths", fixed)

    @property
    def people(self) -> list[str]:
        return sorted(self.paths, key=id_key)

    def at(self, person: str, t: int) -> str:
        return self.paths[person][t]

    def state(self, t: int) -> State:
        return {p: path[t] for p, path in self.paths.items()}

    def canonical(self, g: BuildingGraph) -> "EvacuationSchedule":
        """Rewrite edge locations to the graph's edge ids."""
        out = {}
        for p, path in self.paths.items():
            out[p] = tuple(loc if g.is_vertex(loc) else g.edge(loc).id for loc in path)
        return EvacuationSchedule(self.horizon, out)

    def to_doc(self) -> dict:
        return {"horizon": self.horizon, "schedule": {p: list(self.paths[p]) for p in self.people}}

    @classmethod
    def from_doc(cls, doc: Mapping, g: BuildingGraph | None = None) -> "EvacuationSchedule":
        rows = doc.get("schedule", doc.get("people"))
        if rows is None:
            raise ScheduleError("schedule document has no 'schedule' field")
        if isinstance(rows, list):
            rows = {r["id"]: r["path"] for r in rows}
        horizon = doc.get("horizon")
        if horizon is None:
            horizon = len(next(iter(rows.values()))) - 1 if rows else 0
        es = cls(int(horizon), {str(p): tuple(str(x) for x in path) for p, path in rows.items()})
        return es.canonical(g) if g is not None else es

    def __str__(self) -> str:
        lines = []
        for p in self.people:
            lines.append(f"{p:>5}: " + " ".join(f"{loc:>8}" for loc in self.paths[p]))
        return "\n".join(lines)


def load_schedule(source, g: BuildingGraph | None = None) -> EvacuationSchedule:
    if isinstance(source, Mapping):
        return EvacuationSchedule.from_doc(source, g)
    return EvacuationSchedule.from_doc(json.loads(Path(source).read_text()), g)


def stationary(s0: Mapping[str, str], horizon: int) -> EvacuationSchedule:
    """The schedule in which nobody moves."""
    return EvacuationSchedule(horizon, {p: (loc,) * (horizon + 1) for p, loc in s0.items()})


def delay(es: EvacuationSchedule, shift: int) -> EvacuationSchedule:
    """Hold everyone at their start for ``shift`` ticks, then replay ``es``."""
    if shift < 0:
        raise ScheduleError("delay must be nonnegative")
    out = {}
    for p, path in es.paths.items():
        out[p] = tuple(path[0] if t < shift else path[t - shift] for t in range(es.horizon + 1))
    return EvacuationSchedule(es.horizon, out)


# ---------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class Violation:
    person: str | None
    tick: int
    condition: str
    detail: str

    def __str__(self) -> str:
        who = f"{self.person} " if self.person else ""
        return f"{who}t={self.tick}: {self.condition}: {self.detail}"


@dataclass
class ValidationReport:
    kind: str
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def first(self) -> Violation | None:
        return self.violations[0] if self.violations else None

    def __bool__(self) -> bool:
        return self.ok

    def summary(self) -> str:
        if self.ok:
            return f"{self.kind}: pass"
        return f"{self.kind}: fail ({self.first})"


def _check_locations(es: EvacuationSchedule, g: BuildingGraph, out: list[Violation]) -> bool:
    good = True
    for p in es.people:
        for t, loc in enumerate(es.paths[p]):
            if g.is_vertex(loc):
                continue
            try:
                g.edge(loc)
            except GraphError:
                out.append(Violation(p, t, "location", f"unknown location {loc}"))
                good = False
    return good


def validate_weak(es: EvacuationSchedule, g: BuildingGraph, t_max: int | None = None) -> ValidationReport:
    """Check movement legality.

    Conditions: (1) from a vertex a person stays, steps onto an incident
    edge or reaches an adjacent vertex; (2) from an edge a person stays or
    steps to one of its endpoints; (3) going from one endpoint of an edge to
    the other takes at least the edge's travel time; (4) exits are
    absorbing.  Capacities and completion are not checked.
    """
    rep = ValidationReport("weak")
    if t_max is not None and es.horizon != t_max:
        rep.violations.append(
            Violation(None, 0, "horizon", f"schedule horizon {es.horizon} differs from t_max {t_max}")
        )
        return rep
    if not _check_locations(es, g, rep.violations):
        return rep
    found: list[Violation] = []
    for p in es.people:
        path = es.paths[p]
        last_vertex: tuple[str, int] | None = None  # (vertex, last tick there)
        for t, loc in enumerate(path):
            is_v = g.is_vertex(loc)
            if t > 0:
                prev = path[t - 1]
                if g.is_vertex(prev) and g.is_exit(prev) and loc != prev:
                    found.append(Violation(p, t, "4", f"left exit {prev} for {loc}"))
                    break
                if g.is_vertex(prev):
                    if is_v:
                        if loc != prev and g.edge_between(prev, loc) is None:
                            found.append(Violation(p, t, "1", f"{prev} and {loc} are not adjacent"))
                            break
                    elif prev not in g.edge(loc).ends:
                        found.append(Violation(p, t, "1", f"edge {loc} is not incident to {prev}"))
                        break
                else:
                    e = g.edge(prev)
                    if is_v and loc not in e.ends:
                        found.append(Violation(p, t, "2", f"{loc} is not an endpoint of {e.id}"))
                        break
                    if not is_v and g.edge(loc).id != e.id:
                        found.append(Violation(p, t, "2", f"moved from edge {e.id} to edge {loc}"))
                        break
            if is_v:
                if last_vertex is not None and last_vertex[0] != loc and t > 0:
                    a, t0 = last_vertex
                    e = g.edge_between(a, loc)
                    if e is not None and t - t0 < e.travel_time:
                        found.append(
                            Violation(
                                p,
                                t,
                                "3",
                                f"reached {loc} from {a} in {t - t0} ticks (travel time {e.travel_time})",
                            )
                        )
                        break
                last_vertex = (loc, t)
    found.sort(key=lambda v: (v.tick, id_key(v.person or "")))
    rep.violations.extend(found)
    return rep


def capacity_loads(es: EvacuationSchedule, g: BuildingGraph):
    """Per-tick head counts on vertices and edges, and one-tick-edge crossings.

    Returns three Counters keyed by ``(id, t)``: vertex loads, edge loads
    (persons located on the edge at tick t) and crossings of one-tick edges
    between t and t+1.
    """
    vload: Counter = Counter()
    eload: Counter = Counter()
    cross: Counter = Counter()
    for p, path in es.paths.items():
        _add_loads(path, g, vload, eload, cross, 1)
    return vload, eload, cross


def _add_loads(path, g, vload, eload, cross, sign, start=0):
    for t in range(start, len(path)):
        loc = path[t]
        if g.is_vertex(loc):
            vload[(loc, t)] += sign
            if t + 1 < len(path):
                nxt = path[t + 1]
                if nxt != loc and g.is_vertex(nxt):
                    e = g.edge_between(loc, nxt)
                    if e is not None:
                        cross[(e.id, t)] += sign
        else:
            eload[(g.edge(loc).id, t)] += sign


def validate_strong(es: EvacuationSchedule, g: BuildingGraph, t_max: int | None = None) -> ValidationReport:
    """Weak validation plus capacities and full evacuation by the horizon."""
    weak = validate_weak(es, g, t_max)
    rep = ValidationReport("strong", list(weak.violations))
    if not weak.ok:
        return rep
    vload, eload, cross = capacity_loads(es, g)
    found: list[tuple[int, int, Violation]] = []
    for (v, t), n in vload.items():
        if n > g.capacity(v):
            found.append((t, 0, Violation(None, t, "vertex capacity", f"{n} persons on {v} (capacity {g.capacity(v)})")))
    for (eid, t), n in eload.items():
        c = g.edge(eid).capacity
        if n > c:
            found.append((t, 1, Violation(None, t, "edge capacity", f"{n} persons on edge {eid} (capacity {c})")))
    for (eid, t), n in cross.items():
        c = g.edge(eid).capacity
        if n > c:
            found.append(
                (
                    t,
                    1,
                    Violation(
                        None,
                        t,
                        "edge capacity",
                        f"{n} persons on edge {eid} (capacity {c}) between t={t} and t={t + 1}",
                    ),
                )
            )
    for p in es.people:
        last = es.paths[p][-1]
        if not (g.is_vertex(last) and g.is_exit(last)):
            found.append(
                (es.horizon, 2, Violation(p, es.horizon, "evacuation", f"{p} ends at {last}, not an exit"))
            )
    found.sort(key=lambda x: (x[0], x[1], x[2].detail))
    rep.violations.extend(v for _, _, v in found)
    return rep


# ---------------------------------------------------------------------------
# metrics


def count_evacuated(es: EvacuationSchedule, g: BuildingGraph, D: int) -> int:
    """Number of people located at an exit at tick ``D``."""
    if not 0 <= D <= es.horizon:
        raise ScheduleError(f"tick {D} outside horizon 0..{es.horizon}")
    return sum(1 for path in es.paths.values() if g.is_vertex(path[D]) and g.is_exit(path[D]))


def expected_evacuated(ses: EvacuationSchedule, model, D: int, g: BuildingGraph, s0: Mapping | None = None) -> Fraction:
    """Expected number of people at exits at ``D``.

    ``model`` is either a sequence of ``(schedule, probability)`` pairs or a
    behavior spec with a ``realize`` method.  Probabilities are exact
    rationals and must sum to one.
    """
    if hasattr(model, "realize"):
        pairs = model.realize(ses, g, s0 if s0 is not None else ses.state(0))
    else:
        pairs = [(w, Fraction(a)) for w, a in model]
    total = sum((Fraction(a) for _, a in pairs), Fraction(0))
    if total != 1:
        raise ScheduleError(f"probabilities sum to {total}, not 1")
    return sum((Fraction(a) * count_evacuated(w, g, D) for w, a in pairs), Fraction(0))


# ---------------------------------------------------------------------------
# occupancy view


@dataclass
class OccupancySchedule:
    """Head counts per location and tick, plus the move counts between ticks.

    ``counts[(loc, t)]`` covers vertices and virtual holding nodes.
    ``flows[(src, dst, t)]`` counts people taking arc ``src -> dst`` at tick
    ``t`` (a commit taken at t lands on its endpoint d−1 ticks later; people
    in between are on the edge but in no holding node).
    """

    horizon: int
    counts: dict = field(default_factory=dict)
    flows: dict = field(default_factory=dict)

    def count(self, loc: str, t: int) -> int:
        return self.counts.get((loc, t), 0)

    def flow(self, src: str, dst: str, t: int) -> int:
        return self.flows.get((src, dst, t), 0)

    def __eq__(self, other) -> bool:
        if not isinstance(other, OccupancySchedule):
            return NotImplemented
        strip = lambda d: {k: v for k, v in d.items() if v}
        return (
            self.horizon == other.horizon
            and strip(self.counts) == strip(other.counts)
            and strip(self.flows) == strip(other.flows)
        )


def _segments(path: Sequence[str], g: BuildingGraph):
    """Split a path into maximal runs at one location: (loc, first, last)."""
    runs = []
    start = 0
    for t in range(1, len(path) + 1):
        if t == len(path) or path[t] != path[start]:
            runs.append((path[start], start, t - 1))
            start = t
    return runs


def _track(path: Sequence[str], g: BuildingGraph, xg: ExpandedGraph):
    """Attribution of one person: (location per tick or None, flows, legal).

    People waiting on a one-tick edge are counted at the vertex they stepped
    off (or the vertex they step onto, if they start on the edge).  On a
    longer edge they sit in the holding node of the side they entered from;
    a crossing commits ``d−1`` ticks before arrival.  Moves that are not
    arcs of the expanded graph are left out, which breaks conservation.
    """
    T = len(path) - 1
    where: list[str | None] = [None] * (T + 1)
    flows: list[tuple[str, str, int]] = []
    legal = True
    runs = _segments(path, g)
    for k, (loc, a, b) in enumerate(runs):
        prev = runs[k - 1][0] if k > 0 else None
        nxt = runs[k + 1][0] if k + 1 < len(runs) else None
        if g.is_vertex(loc):
            for t in range(a, b + 1):
                where[t] = loc
            if nxt is not None and g.is_vertex(nxt):
                e = g.edge_between(loc, nxt)
                if e is not None and e.travel_time == 1 and not g.is_exit(loc):
                    flows.append((loc, nxt, b))
                else:
                    legal = False
            continue
        e = g.edge(loc)
        entry = prev if prev is not None else (nxt if nxt is not None else e.u)
        prev_ok = prev is None or (g.is_vertex(prev) and prev in e.ends)
        next_ok = nxt is None or (g.is_vertex(nxt) and nxt in e.ends)
        if not (prev_ok and next_ok):
            legal = False
            entry = entry if entry in e.ends else e.u
        if prev is not None and g.is_exit(prev):
            legal = False
        if e.travel_time == 1:
            for t in range(a, b + 1):
                where[t] = entry
            if nxt is not None and next_ok and nxt != entry:
                if prev is not None and g.is_exit(prev):
                    pass
                elif g.is_exit(entry):
                    legal = False
                else:
                    flows.append((entry, nxt, b))
            continue
        hold = xg.holding(e.id, entry)
        if prev is not None and prev_ok and not g.is_exit(prev):
            flows.append((prev, hold, a - 1))
        if nxt is None or not next_ok:
            for t in range(a, b + 1):
                where[t] = hold
        elif nxt == entry:
            for t in range(a, b + 1):
                where[t] = hold
            flows.append((hold, nxt, b))
        else:
            commit = b + 1 - (e.travel_time - 1)
            if commit < a:
                legal = False
                for t in range(a, b + 1):
                    where[t] = hold
            else:
                for t in range(a, commit + 1):
                    where[t] = hold
                flows.append((hold, nxt, commit))
    return where, flows, legal


def occupancy_of(es: EvacuationSchedule, xg: ExpandedGraph, strict: bool = True) -> OccupancySchedule:
    """Head counts and move counts of a schedule in the expanded graph.

    With ``strict`` the schedule must be movement-legal; otherwise illegal
    moves are simply not recorded as flows.
    """
    g = xg.base
    occ = OccupancySchedule(es.horizon)
    counts: Counter = Counter()
    flows: Counter = Counter()
    for p in es.people:
        where, fl, legal = _track(es.paths[p], g, xg)
        if strict and not legal:
            raise ScheduleError(f"person {p}: schedule is not movement-legal")
        for t, loc in enumerate(where):
            if loc is not None:
                counts[(loc, t)] += 1
        for f in fl:
            flows[f] += 1
    occ.counts = dict(counts)
    occ.flows = dict(flows)
    return occ


def decompose(occ: OccupancySchedule, s0: Mapping[str, str], xg: ExpandedGraph) -> EvacuationSchedule:
    """Rebuild per-person paths from head counts and move counts.

    Persons are handled in id order; at each location the lowest id takes
    the smallest move (by destination) among the available ones, staying
    put included.  Raises :class:`ScheduleError` when the counts are not
    conserved or moves exceed the people present.
    """
    g = xg.base
    T = occ.horizon
    people = sorted(s0, key=id_key)
    where: dict[str, str] = {}
    # place people at t = 0
    by_loc: dict[str, list[str]] = defaultdict(list)
    on_edge: dict[str, list[str]] = defaultdict(list)
    for p in people:
        loc = s0[p]
        if g.is_vertex(loc):
            by_loc[loc].append(p)
        else:
            on_edge[g.edge(loc).id].append(p)
    for eid, group in on_edge.items():
        slots = []
        for hold in xg.virtual_nodes.get(eid, ()):
            slots.extend([hold] * occ.count(hold, 0))
        if eid not in xg.virtual_nodes:
            raise ScheduleError(f"people start on one-tick edge {eid}, which has no holding node")
        if len(slots) != len(group):
            raise ScheduleError(f"edge {eid}: {len(group)} people at t=0 but holding counts say {len(slots)}")
        for p, hold in zip(group, slots):
            by_loc[hold].append(p)
    for loc, group in by_loc.items():
        if occ.count(loc, 0) != len(group):
            raise ScheduleError(f"{loc} at t=0: {len(group)} people but count {occ.count(loc, 0)}")
    for loc, group in by_loc.items():
        for p in group:
            where[p] = loc
    extra = {k for k, v in occ.counts.items() if v and k[1] == 0 and k[0] not in by_loc}
    if extra:
        raise ScheduleError(f"counts at t=0 not matched by the initial state: {sorted(extra)}")

    def label(loc: str) -> str:
        return xg.location_edge(loc) or loc

    paths: dict[str, list[str]] = {p: [label(where[p])] for p in people}
    transit: dict[str, tuple[str, int, str]] = {}  # person -> (dst, arrival tick, edge)
    for t in range(T):
        nxt: dict[str, str] = {}
        groups: dict[str, list[str]] = defaultdict(list)
        for p in people:
            if p in transit:
                continue
            groups[where[p]].append(p)
        for loc, group in groups.items():
            moves = []
            used = 0
            for arc in xg.out_arcs(loc):
                f = occ.flow(arc.src, arc.dst, t)
                if f < 0:
                    raise ScheduleError(f"negative flow on {arc.src}->{arc.dst} at t={t}")
                used += f
                moves.extend([arc] * f)
            if used > len(group):
                raise ScheduleError(f"{loc} at t={t}: {used} departures but only {len(group)} present")
            moves.extend([None] * (len(group) - used))
            moves.sort(key=lambda a: loc_key(xg, loc) if a is None else loc_key(xg, a.dst))
            for p, arc in zip(group, moves):
                if arc is None:
                    nxt[p] = loc
                elif arc.lag == 1:
                    nxt[p] = arc.dst
                else:
                    transit[p] = (arc.dst, t + arc.lag, arc.edge)
        stray = {(s, d, tt) for (s, d, tt), f in occ.flows.items() if f and tt == t and s not in groups}
        if stray:
            raise ScheduleError(f"flows out of empty locations at t={t}: {sorted(stray)}")
        for p in people:
            if p in transit:
                dst, arrive, eid = transit[p]
                if arrive == t + 1:
                    where[p] = dst
                    del transit[p]
                    paths[p].append(dst)
                else:
                    paths[p].append(eid)
            else:
                where[p] = nxt[p]
                paths[p].append(label(nxt[p]))
        have = Counter(where[p] for p in people if p not in transit)
        for loc in xg.locations:
            if have.get(loc, 0) != occ.count(loc, t + 1):
                raise ScheduleError(
                    f"{loc} at t={t + 1}: moves give {have.get(loc, 0)} people but count is {occ.count(loc, t + 1)}"
                )
    if transit:
        raise ScheduleError("people still in transit at the horizon")
    return EvacuationSchedule(T, {p: tuple(v) for p, v in paths.items()})
