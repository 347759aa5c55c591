"""Building graphs, edge expansion, exit graphs and nearest-exit routing.

A building is an undirected graph whose vertices are rooms or corridor
junctions and whose edges are passages.  Vertices and edges carry a person
capacity; edges carry an integer travel time in ticks.  Some vertices are
exits.
"""

from __future__ import annotations

import heapq
import json
import math
import random
import re
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

__all__ = [
    "GraphError",
    "Edge",
    "BuildingGraph",
    "Instance",
    "Arc",
    "ExpandedGraph",
    "ExitGraph",
    "NearestExitTable",
    "id_key",
    "load_graph",
    "load_instance",
    "instance_to_doc",
    "expand",
    "exit_graph",
    "hop_distances",
    "nearest_exit_table",
    "generate_instance",
    "generate_document",
    "fixture_path",
]


class GraphError(ValueError):
    """Raised for malformed or inconsistent building descriptions."""


_DIGITS = re.compile(r"(\d+)")


def id_key(ident: str) -> tuple:
    """Natural sort key: ``v3`` sorts before ``v10``."""
    parts = []
    for tok in _DIGITS.split(ident):
        if not tok:
            continue
        parts.append((0, int(tok), tok) if tok.isdigit() else (1, 0, tok))
    return tuple(parts)


@dataclass(frozen=True)
class Edge:
    id: str
    u: str
    v: str
    capacity: int
    travel_time: int

    @property
    def ends(self) -> tuple[str, str]:
        return (self.u, self.v)

    def other(self, x: str) -> str:
        if x == self.u:
            return self.v
        if x == self.v:
            return self.u
        raise GraphError(f"{x} is not an endpoint of edge {self.id}")


class BuildingGraph:
    """Capacitated undirected graph with exits.

    Vertices are identified by strings, edges by ``"u-v"`` in the orientation
    in which they were declared.  The object is immutable after construction.
    """

    def __init__(
        self,
        vertex_capacity: Mapping[str, int],
        exits: Iterable[str],
        edges: Iterable[Edge],
    ):
        if not vertex_capacity:
            raise GraphError("no vertices")
        self._vcap = dict(vertex_capacity)
        for v, c in self._vcap.items():
            if not isinstance(v, str) or not v:
                raise GraphError(f"vertex id must be a non-empty string, got {v!r}")
            if int(c) != c or c < 0:
                raise GraphError(f"vertex {v}: capacity must be a nonnegative integer")
        self._exits = frozenset(exits)
        for x in self._exits:
            if x not in self._vcap:
                raise GraphError(f"exit {x} is not a vertex")
        self._edges: dict[str, Edge] = {}
        self._pair: dict[frozenset, Edge] = {}
        self._adj: dict[str, list[Edge]] = {v: [] for v in self._vcap}
        for e in edges:
            if e.u not in self._vcap:
                raise GraphError(f"edge {e.id}: unknown vertex {e.u}")
            if e.v not in self._vcap:
                raise GraphError(f"edge {e.id}: unknown vertex {e.v}")
            if e.u == e.v:
                raise GraphError(f"edge {e.id}: self-loop")
            if int(e.travel_time) != e.travel_time or e.travel_time < 1:
                raise GraphError(f"edge {e.id}: travel time must be ≥ 1")
            if int(e.capacity) != e.capacity or e.capacity < 0:
                raise GraphError(f"edge {e.id}: capacity must be a nonnegative integer")
            key = frozenset(e.ends)
            if key in self._pair:
                raise GraphError(f"edge {e.id}: duplicate edge between {e.u} and {e.v}")
            if e.id in self._edges:
                raise GraphError(f"edge {e.id}: duplicate id")
            self._edges[e.id] = e
            self._pair[key] = e
            self._adj[e.u].append(e)
            self._adj[e.v].append(e)
        self.vertices: tuple[str, ...] = tuple(sorted(self._vcap, key=id_key))
        self.exits: tuple[str, ...] = tuple(sorted(self._exits, key=id_key))
        self.edges: tuple[Edge, ...] = tuple(sorted(self._edges.values(), key=lambda e: id_key(e.id)))
        for v in self._adj:
            self._adj[v].sort(key=lambda e: id_key(e.other(v)))

    # -- queries -----------------------------------------------------------
    def is_vertex(self, x: str) -> bool:
        return x in self._vcap

    def is_exit(self, v: str) -> bool:
        return v in self._exits

    def edge(self, ident: str) -> Edge:
        """Look up an edge by id, accepting either orientation ``u-v``/``v-u``."""
        if ident in self._edges:
            return self._edges[ident]
        for sep in ("-", ","):
            if sep in ident:
                # ids may themselves contain the separator; try every split
                toks = ident.split(sep)
                for k in range(1, len(toks)):
                    a, b = sep.join(toks[:k]), sep.join(toks[k:])
                    e = self._pair.get(frozenset((a.strip("() "), b.strip("() "))))
                    if e is not None:
                        return e
        raise GraphError(f"unknown edge {ident}")

    def edge_between(self, a: str, b: str) -> Edge | None:
        return self._pair.get(frozenset((a, b)))

    def incident(self, v: str) -> tuple[Edge, ...]:
        return tuple(self._adj[v])

    def neighbors(self, v: str) -> list[str]:
        return [e.other(v) for e in self._adj[v]]

    def capacity(self, item: str) -> int:
        if item in self._vcap:
            return self._vcap[item]
        return self.edge(item).capacity

    def travel_time(self, edge_id: str) -> int:
        return self.edge(edge_id).travel_time

    def locate(self, loc: str) -> tuple[str, str | Edge]:
        """Classify a schedule location as ``('vertex', v)`` or ``('edge', e)``."""
        if loc in self._vcap:
            return ("vertex", loc)
        return ("edge", self.edge(loc))

    def subgraph(self, keep: Iterable[str], exits: Iterable[str]) -> "BuildingGraph":
        keep = set(keep)
        return BuildingGraph(
            {v: self._vcap[v] for v in keep},
            exits,
            [e for e in self.edges if e.u in keep and e.v in keep],
        )

    def with_capacity(self, v: str, cap: int) -> "BuildingGraph":
        caps = dict(self._vcap)
        caps[v] = cap
        return BuildingGraph(caps, self._exits, self.edges)

    def __eq__(self, other) -> bool:
        if not isinstance(other, BuildingGraph):
            return NotImplemented
        return (
            self._vcap == other._vcap
            and self._exits == other._exits
            and set(self.edges) == set(other.edges)
        )

    def __repr__(self) -> str:
        return f"BuildingGraph({len(self.vertices)} vertices, {len(self.edges)} edges, exits={list(self.exits)})"

    def to_doc(self) -> dict:
        return {
            "vertices": [
                {"id": v, "capacity": self._vcap[v], "exit": v in self._exits} for v in self.vertices
            ],
            "edges": [
                {"u": e.u, "v": e.v, "capacity": e.capacity, "travel_time": e.travel_time}
                for e in self.edges
            ],
        }


@dataclass
class Instance:
    """A building graph plus population, horizon, deadline and behavior doc."""

    graph: BuildingGraph
    people: dict[str, str]
    t_max: int
    deadline: int
    behavior: dict | None = None
    name: str = ""

    @property
    def population(self) -> int:
        return len(self.people)


def _load_doc(source) -> dict:
    if isinstance(source, Mapping):
        return dict(source)
    p = Path(source)
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise GraphError(f"{p}: not valid JSON ({exc})") from exc


def load_graph(source) -> BuildingGraph:
    """Build a validated graph from an instance document, a path, or a dict."""
    doc = _load_doc(source)
    verts = doc.get("vertices")
    if not verts:
        raise GraphError("no vertices")
    caps: dict[str, int] = {}
    exits = []
    for item in verts:
        if "id" not in item:
            raise GraphError(f"vertex without id: {item}")
        vid = str(item["id"])
        if vid in caps:
            raise GraphError(f"duplicate vertex {vid}")
        cap = item.get("capacity")
        if cap is None:
            raise GraphError(f"vertex {vid}: missing capacity")
        caps[vid] = cap
        if item.get("exit", False):
            exits.append(vid)
    edges = []
    for item in doc.get("edges", []):
        try:
            u, v = str(item["u"]), str(item["v"])
        except KeyError as exc:
            raise GraphError(f"edge without endpoints: {item}") from exc
        eid = str(item.get("id", f"{u}-{v}"))
        tt = item.get("travel_time", 1)
        if tt is None or tt < 1:
            raise GraphError(f"edge {eid}: travel time must be ≥ 1")
        edges.append(Edge(eid, u, v, item.get("capacity", 0), tt))
    return BuildingGraph(caps, exits, edges)


def load_instance(source) -> Instance:
    doc = _load_doc(source)
    g = load_graph(doc)
    people: dict[str, str] = {}
    for item in doc.get("people", []):
        pid, at = str(item["id"]), str(item["at"])
        if pid in people:
            raise GraphError(f"duplicate person {pid}")
        kind, obj = g.locate(at)
        people[pid] = at if kind == "vertex" else obj.id
    if g.exits and people:
        for x in g.exits:
            if g.capacity(x) < len(people):
                raise GraphError(
                    f"exit {x}: capacity {g.capacity(x)} is below the population {len(people)}"
                )
    deadline = int(doc.get("deadline", 0))
    t_max = int(doc.get("t_max", 2 * deadline))
    if deadline < 0 or t_max < 0:
        raise GraphError("deadline and t_max must be nonnegative")
    name = doc.get("name", "")
    if not name and not isinstance(source, Mapping):
        name = Path(source).stem
    return Instance(g, people, t_max, deadline, doc.get("behavior"), name)


def instance_to_doc(inst: Instance) -> dict:
    doc = inst.graph.to_doc()
    doc["people"] = [{"id": p, "at": inst.people[p]} for p in sorted(inst.people, key=id_key)]
    doc["t_max"] = inst.t_max
    doc["deadline"] = inst.deadline
    if inst.behavior is not None:
        doc["behavior"] = inst.behavior
    if inst.name:
        doc["name"] = inst.name
    return doc


def fixture_path(name: str = "example.json") -> Path:
    """Path of a data file shipped with the package."""
    return Path(__file__).with_name("data") / name


# ---------------------------------------------------------------------------
# time expansion


@dataclass(frozen=True)
class Arc:
    """A one-step move in the expanded graph.

    ``lag`` is the number of ticks between leaving ``src`` and being counted
    at ``dst``.  Kinds: ``move`` (vertex to vertex over a one-tick edge),
    ``enter`` (vertex onto an edge), ``return`` (edge back to the vertex it
    was entered from) and ``commit`` (edge to the far endpoint).
    """

    src: str
    dst: str
    lag: int
    kind: str
    edge: str


@dataclass
class ExpandedGraph:
    """Edge expansion used by the time-expanded models.

    Every edge with travel time d ≥ 2 gets two virtual holding nodes: ``e'``
    for people who stepped onto it from ``e.u`` and ``e''`` for those who
    stepped onto it from ``e.v``.  A person may wait on the edge in its
    holding node and either step back or commit to the crossing; a commit
    lands on the far endpoint d−1 ticks later, so a straight traversal takes
    exactly d ticks.  One-tick edges are crossed directly.
    """

    base: BuildingGraph
    virtual_nodes: dict[str, tuple[str, str]]
    internal_time: dict[str, int]
    locations: tuple[str, ...]
    arcs: tuple[Arc, ...]
    _side: dict[str, tuple[str, str]] = field(default_factory=dict, repr=False)
    _out: dict[str, tuple[Arc, ...]] = field(default_factory=dict, repr=False)
    _in: dict[str, tuple[Arc, ...]] = field(default_factory=dict, repr=False)

    def holding(self, edge_id: str, side: str) -> str:
        """Holding node of ``edge_id`` for people who entered from ``side``."""
        e = self.base.edge(edge_id)
        tail, head = self.virtual_nodes[e.id]
        if side == e.u:
            return tail
        if side == e.v:
            return head
        raise GraphError(f"{side} is not an endpoint of {e.id}")

    def side_of(self, node: str) -> tuple[str, str]:
        """(edge id, entry vertex) of a holding node."""
        return self._side[node]

    def is_virtual(self, loc: str) -> bool:
        return loc in self._side

    def out_arcs(self, loc: str) -> tuple[Arc, ...]:
        return self._out.get(loc, ())

    def in_arcs(self, loc: str) -> tuple[Arc, ...]:
        return self._in.get(loc, ())

    def location_edge(self, loc: str) -> str | None:
        return self._side[loc][0] if loc in self._side else None

    def contract(self) -> BuildingGraph:
        """Drop the virtual nodes and return the original building graph."""
        return BuildingGraph(
            {v: self.base.capacity(v) for v in self.base.vertices},
            self.base.exits,
            self.base.edges,
        )


def loc_key(xg: ExpandedGraph, loc: str) -> tuple:
    if loc in xg._side:
        eid, side = xg._side[loc]
        e = xg.base.edge(eid)
        return (1, id_key(eid), 0 if side == e.u else 1)
    return (0, id_key(loc), 0)


def expand(g: BuildingGraph) -> ExpandedGraph:
    virtual: dict[str, tuple[str, str]] = {}
    internal: dict[str, int] = {}
    side: dict[str, tuple[str, str]] = {}
    for e in g.edges:
        if e.travel_time > 1:
            tail, head = f"{e.id}'", f"{e.id}''"
            virtual[e.id] = (tail, head)
            internal[e.id] = e.travel_time - 2
            side[tail] = (e.id, e.u)
            side[head] = (e.id, e.v)
    locations = list(g.vertices)
    for e in g.edges:
        if e.id in virtual:
            locations.extend(virtual[e.id])
    arcs: list[Arc] = []
    for v in g.vertices:
        if g.is_exit(v):
            continue
        for e in g.incident(v):
            w = e.other(v)
            if e.travel_time == 1:
                arcs.append(Arc(v, w, 1, "move", e.id))
            else:
                hold = virtual[e.id][0] if v == e.u else virtual[e.id][1]
                arcs.append(Arc(v, hold, 1, "enter", e.id))
    for e in g.edges:
        if e.id not in virtual:
            continue
        for hold, entry in ((virtual[e.id][0], e.u), (virtual[e.id][1], e.v)):
            arcs.append(Arc(hold, entry, 1, "return", e.id))
            arcs.append(Arc(hold, e.other(entry), e.travel_time - 1, "commit", e.id))
    xg = ExpandedGraph(g, virtual, internal, tuple(locations), (), side)
    arcs.sort(key=lambda a: (loc_key(xg, a.src), loc_key(xg, a.dst)))
    xg.arcs = tuple(arcs)
    out: dict[str, list[Arc]] = {}
    inn: dict[str, list[Arc]] = {}
    for a in arcs:
        out.setdefault(a.src, []).append(a)
        inn.setdefault(a.dst, []).append(a)
    xg._out = {k: tuple(v) for k, v in out.items()}
    xg._in = {k: tuple(v) for k, v in inn.items()}
    return xg


# ---------------------------------------------------------------------------
# exit graphs


@dataclass(frozen=True)
class ExitGraph:
    parent: BuildingGraph
    exit: str
    radius: int
    subgraph: BuildingGraph
    entry_vertices: tuple[str, ...]
    distance: dict


def hop_distances(g: BuildingGraph, source: str, blocked: Iterable[str] = ()) -> dict[str, int]:
    """Breadth-first hop counts from ``source`` avoiding ``blocked`` vertices."""
    blocked = set(blocked) - {source}
    dist = {source: 0}
    queue = deque([source])
    while queue:
        a = queue.popleft()
        for b in g.neighbors(a):
            if b in blocked or b in dist:
                continue
            dist[b] = dist[a] + 1
            queue.append(b)
    return dist


def exit_graph(g: BuildingGraph, v: str, radius: int) -> ExitGraph:
    """Radius-``radius`` neighbourhood of exit ``v`` (radius counted in hops).

    Paths may not pass through other exits of ``g``; the subgraph is induced
    and has ``v`` as its only exit.  Entry vertices are those exactly
    ``radius`` hops away.
    """
    if not g.is_vertex(v):
        raise GraphError(f"{v} is not a vertex")
    if radius < 0:
        raise GraphError("radius must be nonnegative")
    dist = hop_distances(g, v, blocked=[x for x in g.exits if x != v])
    keep = {u for u, d in dist.items() if d <= radius}
    sub = g.subgraph(keep, [v])
    if radius == 0:
        entry = (v,)
    else:
        entry = tuple(sorted((u for u in keep if dist[u] == radius), key=id_key))
    return ExitGraph(g, v, radius, sub, entry, {u: dist[u] for u in keep})


# ---------------------------------------------------------------------------
# nearest exits


@dataclass(frozen=True)
class NearestExitTable:
    """Nearest exit, route and prefix travel times for every vertex."""

    exit: dict[str, str | None]
    path: dict[str, tuple[str, ...]]
    arrival: dict[str, tuple[int, ...]]

    def T(self, v: str, w: str) -> float:
        """Travel time of the prefix of Π(v) that ends at ``w`` (∞ if absent)."""
        try:
            k = self.path[v].index(w)
        except ValueError:
            return math.inf
        return self.arrival[v][k]

    @property
    def unreachable(self) -> tuple[str, ...]:
        return tuple(v for v, x in self.exit.items() if x is None)


def _dijkstra(g: BuildingGraph, source: str) -> dict[str, int]:
    dist = {source: 0}
    heap = [(0, id_key(source), source)]
    while heap:
        d, _, a = heapq.heappop(heap)
        if d > dist[a]:
            continue
        for e in g.incident(a):
            b = e.other(a)
            nd = d + e.travel_time
            if nd < dist.get(b, math.inf):
                dist[b] = nd
                heapq.heappush(heap, (nd, id_key(b), b))
    return dist


def nearest_exit_table(g: BuildingGraph) -> NearestExitTable:
    """Shortest routes to the nearest exit by travel time.

    Ties between exits go to the smaller exit id.  Among equally short routes
    to that exit the widest one (largest bottleneck over edge capacities and
    intermediate room capacities) is preferred, then the smaller next-vertex
    id.
    """
    per_exit = {x: _dijkstra(g, x) for x in g.exits}
    widths: dict[str, dict[str, float]] = {}
    for x, dist in per_exit.items():
        width = {x: math.inf}
        for a in sorted(dist, key=lambda u: dist[u]):
            if a == x:
                continue
            best = -1.0
            for e in g.incident(a):
                b = e.other(a)
                if b in dist and dist[b] + e.travel_time == dist[a]:
                    room = math.inf if b == x else g.capacity(b)
                    best = max(best, min(e.capacity, room, width[b]))
            width[a] = best
        widths[x] = width
    ex: dict[str, str | None] = {}
    path: dict[str, tuple[str, ...]] = {}
    arrival: dict[str, tuple[int, ...]] = {}
    for v in g.vertices:
        cands = [(per_exit[x][v], id_key(x), x) for x in g.exits if v in per_exit[x]]
        if not cands:
            ex[v], path[v], arrival[v] = None, (v,), (0,)
            continue
        _, _, x = min(cands)
        dist, width = per_exit[x], widths[x]
        route, times = [v], [0]
        a = v
        while a != x:
            options = []
            for e in g.incident(a):
                b = e.other(a)
                if b in dist and dist[b] + e.travel_time == dist[a]:
                    room = math.inf if b == x else g.capacity(b)
                    options.append((-min(e.capacity, room, width[b]), id_key(b), b, e.travel_time))
            _, _, b, tt = min(options)
            route.append(b)
            times.append(times[-1] + tt)
            a = b
        ex[v], path[v], arrival[v] = x, tuple(route), tuple(times)
    return NearestExitTable(ex, path, arrival)


# ---------------------------------------------------------------------------
# synthetic instances


_DEFAULTS = {
    "n_vertices": 30,
    "edge_factor": 1.35,
    "n_exits": 2,
    "population": 30,
    "deadline": None,
    "t_max": None,
    "seed": 0,
    "edge_capacity": (2, 10),
    "vertex_capacity": (5, 50),
    "travel_time": (1, 5),
    "max_retries": 100,
}


def _diameter_ticks(g: BuildingGraph) -> int:
    best = 0
    for v in g.vertices:
        d = _dijkstra(g, v)
        best = max(best, max(d.values()))
    return best


def generate_instance(params: Mapping | None = None, **kw) -> tuple[BuildingGraph, dict[str, str]]:
    """Random connected building with people placed on non-exit vertices.

    Parameters (all optional): ``n_vertices``, ``edge_factor`` (edges =
    ⌈n·factor⌉), ``n_exits``, ``population``, ``seed``, and the ranges
    ``edge_capacity``, ``vertex_capacity``, ``travel_time``.  Exits get a
    capacity of at least the population.
    """
    p = dict(_DEFAULTS)
    p.update(params or {})
    p.update(kw)
    n = int(p["n_vertices"])
    factor = float(p["edge_factor"])
    n_exits = int(p["n_exits"])
    population = int(p["population"])
    if n < 1:
        raise GraphError("n_vertices must be ≥ 1")
    if not 1.0 <= factor <= 3.0:
        raise GraphError("edge_factor must lie in [1.0, 3.0]")
    if population < 1:
        raise GraphError("population must be ≥ 1")
    if not 1 <= n_exits < n:
        raise GraphError("need at least one exit and one non-exit vertex")
    m = math.ceil(n * factor)
    if m > n * (n - 1) // 2:
        raise GraphError(f"{m} edges do not fit on {n} vertices")
    rng = random.Random(p["seed"])
    lo_e, hi_e = p["edge_capacity"]
    lo_v, hi_v = p["vertex_capacity"]
    lo_t, hi_t = p["travel_time"]
    names = [f"v{i}" for i in range(1, n + 1)]
    for _ in range(int(p["max_retries"])):
        caps = {v: rng.randint(lo_v, hi_v) for v in names}
        exits = sorted(rng.sample(names, n_exits), key=id_key)
        free = sum(c for v, c in caps.items() if v not in exits)
        if population > free:
            raise GraphError(
                f"population {population} exceeds total non-exit capacity {free}"
            )
        for x in exits:
            caps[x] = max(caps[x], population)
        pairs: set[tuple[str, str]] = set()
        order = names[:]
        rng.shuffle(order)
        for i in range(1, n):
            a, b = order[i], order[rng.randrange(i)]
            pairs.add((a, b) if id_key(a) < id_key(b) else (b, a))
        while len(pairs) < m:
            a, b = rng.sample(names, 2)
            pairs.add((a, b) if id_key(a) < id_key(b) else (b, a))
        edges = [
            Edge(f"{a}-{b}", a, b, rng.randint(lo_e, hi_e), rng.randint(lo_t, hi_t))
            for a, b in sorted(pairs, key=lambda ab: (id_key(ab[0]), id_key(ab[1])))
        ]
        g = BuildingGraph(caps, exits, edges)
        if len(hop_distances(g, names[0])) == n:
            break
    else:
        raise GraphError("could not generate a connected graph")
    room = {v: caps[v] for v in g.vertices if not g.is_exit(v)}
    open_rooms = [v for v in room if room[v] > 0]
    people: dict[str, str] = {}
    for i in range(1, population + 1):
        k = rng.randrange(len(open_rooms))
        v = open_rooms[k]
        people[f"p{i}"] = v
        room[v] -= 1
        if room[v] == 0:
            open_rooms[k] = open_rooms[-1]
            open_rooms.pop()
    return g, people


def generate_document(params: Mapping | None = None, **kw) -> dict:
    """Like :func:`generate_instance` but returns a full instance document.

    When no deadline is given it defaults to the travel-time diameter of the
    graph; ``t_max`` defaults to twice the deadline.
    """
    p = dict(_DEFAULTS)
    p.update(params or {})
    p.update(kw)
    g, people = generate_instance(p)
    deadline = p["deadline"]
    if deadline is None:
        deadline = _diameter_ticks(g)
    t_max = p["t_max"] if p["t_max"] is not None else 2 * deadline
    doc = instance_to_doc(Instance(g, people, int(t_max), int(deadline)))
    doc["name"] = f"gen-n{p['n_vertices']}-p{p['population']}-s{p['seed']}"
    doc["generator"] = {
        k: (list(v) if isinstance(v, tuple) else v) for k, v in p.items() if k != "max_retries"
    }
    if p.get("behavior") is not None:
        doc["behavior"] = p["behavior"]
    return doc
