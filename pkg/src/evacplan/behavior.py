"""Behavior models: how evacuees deviate from a prescribed schedule.

Two models are provided.  Under the delayed model the population follows
the plan after waiting τᵢ ticks with probability αᵢ.  Under the nearest-exit
model it follows the plan with probability α and otherwise everybody walks
the shortest route to their nearest exit.

Each model can be *realized* (plan -> weighted list of schedules) or
*emitted* as affine constraint blocks that tie the plan's occupancy
variables X to one occupancy copy Yᵢ per outcome.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

from .buildinggraph import BuildingGraph, ExpandedGraph, id_key, nearest_exit_table
from .schedule import EvacuationSchedule, _track, delay

__all__ = [
    "BehaviorError",
    "DBM",
    "NEBM",
    "Link",
    "ConstraintBlock",
    "spec_from_doc",
    "spec_to_doc",
    "realize",
    "nearest_exit_wes",
    "emit_constraints",
    "as_fraction",
]


class BehaviorError(ValueError):
    pass


def as_fraction(x) -> Fraction:
    """Exact rational from an int, a Fraction, or a decimal/ratio string."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        return Fraction(repr(x))
    return Fraction(str(x))


@dataclass(frozen=True)
class DBM:
    """Delayed behavior: delay ``tau`` with probability ``alpha`` per entry."""

    delays: tuple[tuple[int, Fraction], ...]

    def __post_init__(self):
        fixed = tuple((int(t), as_fraction(a)) for t, a in self.delays)
        object.__setattr__(self, "delays", fixed)
        if not fixed:
            raise BehaviorError("behavior spec is empty")
        taus = [t for t, _ in fixed]
        if len(set(taus)) != len(taus):
            raise BehaviorError("delays must be distinct")
        if any(t < 0 for t in taus):
            raise BehaviorError("delays must be nonnegative")
        if any(a <= 0 for _, a in fixed):
            raise BehaviorError("probabilities must be positive")
        if sum(a for _, a in fixed) != 1:
            raise BehaviorError(f"probabilities sum to {sum(a for _, a in fixed)}, not 1")

    @property
    def probabilities(self) -> list[Fraction]:
        return [a for _, a in self.delays]

    def realize(self, ses, g, s0=None):
        return realize(self, ses, g, s0)


@dataclass(frozen=True)
class NEBM:
    """Nearest-exit behavior: follow the plan with probability ``alpha``."""

    alpha: Fraction

    def __post_init__(self):
        a = as_fraction(self.alpha)
        object.__setattr__(self, "alpha", a)
        if not 0 <= a <= 1:
            raise BehaviorError("alpha must lie in [0, 1]")

    @property
    def probabilities(self) -> list[Fraction]:
        return [p for p in (self.alpha, 1 - self.alpha) if p > 0]

    def realize(self, ses, g, s0=None):
        return realize(self, ses, g, s0)


def spec_from_doc(doc: Mapping | None):
    if doc is None:
        raise BehaviorError("behavior spec is empty")
    kind = str(doc.get("type", "")).lower()
    if kind == "dbm":
        return DBM(tuple((d["tau"], as_fraction(d["alpha"])) for d in doc.get("delays", [])))
    if kind == "nebm":
        return NEBM(as_fraction(doc["alpha"]))
    raise BehaviorError(f"unknown behavior type {doc.get('type')!r}")


def _frac_str(a: Fraction) -> str:
    return str(a.numerator) if a.denominator == 1 else f"{a.numerator}/{a.denominator}"


def spec_to_doc(spec) -> dict:
    if isinstance(spec, DBM):
        return {"type": "dbm", "delays": [{"tau": t, "alpha": _frac_str(a)} for t, a in spec.delays]}
    return {"type": "nebm", "alpha": _frac_str(spec.alpha)}


# ---------------------------------------------------------------------------
# realization


def _snap(loc: str, g: BuildingGraph, table) -> str:
    """Endpoint a person on an edge walks to first (closer to an exit)."""
    e = g.edge(loc)
    best = min(e.ends, key=lambda v: (table.T(v, table.exit[v]) if table.exit[v] else float("inf"), id_key(v)))
    return best


def nearest_exit_wes(s0: Mapping[str, str], g: BuildingGraph, horizon: int, table=None) -> EvacuationSchedule:
    """Everyone walks the shortest route to their nearest exit, ignoring capacity.

    A person on an edge at tick 0 first steps to the endpoint that is closer
    to an exit (one tick), then follows that endpoint's route.
    """
    table = table or nearest_exit_table(g)
    paths = {}
    for p, loc in s0.items():
        seq = [loc]
        start = loc
        if not g.is_vertex(loc):
            start = _snap(loc, g, table)
            seq.append(start)
        route = table.path[start]
        for a, b in zip(route, route[1:]):
            e = g.edge_between(a, b)
            seq.extend([e.id] * (e.travel_time - 1))
            seq.append(b)
        seq = seq[: horizon + 1]
        seq.extend([seq[-1]] * (horizon + 1 - len(seq)))
        paths[p] = tuple(seq)
    return EvacuationSchedule(horizon, paths)


def realize(spec, ses: EvacuationSchedule, g: BuildingGraph, s0: Mapping[str, str] | None = None):
    """Weighted weak schedules that evacuees may follow when told ``ses``."""
    if isinstance(spec, DBM):
        return [(delay(ses, tau), alpha) for tau, alpha in spec.delays]
    if isinstance(spec, NEBM):
        s0 = s0 if s0 is not None else ses.state(0)
        out = []
        if spec.alpha > 0:
            out.append((ses, spec.alpha))
        if spec.alpha < 1:
            out.append((nearest_exit_wes(s0, g, ses.horizon), 1 - spec.alpha))
        return out
    raise BehaviorError(f"unsupported behavior spec {spec!r}")


# ---------------------------------------------------------------------------
# constraint blocks


@dataclass(frozen=True)
class Link:
    """``y[loc, t] = Σ x_terms + Σ y_terms + Σ flow_terms`` within one copy.

    Keys of ``x_terms`` and ``y_terms`` are ``(location, tick)``; keys of
    ``flow_terms`` are plan moves ``(src, dst, tick)``.
    """

    loc: str
    t: int
    x_terms: tuple[tuple[tuple[str, int], int], ...]
    y_terms: tuple[tuple[tuple[str, int], int], ...] = ()
    flow_terms: tuple[tuple[tuple[str, str, int], int], ...] = ()


@dataclass
class ConstraintBlock:
    copy: int
    probability: Fraction
    links: list[Link] = field(default_factory=list)
    label: str = ""

    def evaluate(self, x_counts: Mapping, x_flows: Mapping | None = None) -> dict:
        """Solve the links for Y given X head counts ``{(loc, t): n}``
        and move counts ``{(src, dst, t): n}``."""
        x_flows = x_flows or {}
        y: dict = {}
        for ln in sorted(self.links, key=lambda l: l.t):
            val = sum(c * x_counts.get(k, 0) for k, c in ln.x_terms)
            val += sum(c * y[k] for k, c in ln.y_terms)
            val += sum(c * x_flows.get(k, 0) for k, c in ln.flow_terms)
            y[(ln.loc, ln.t)] = val
        return y


def emit_constraints(spec, xg: ExpandedGraph, t_max: int) -> list[ConstraintBlock]:
    """Affine links between the plan copy X and each outcome copy Yᵢ."""
    g = xg.base
    blocks: list[ConstraintBlock] = []
    if isinstance(spec, DBM):
        for i, (tau, alpha) in enumerate(spec.delays, start=1):
            blk = ConstraintBlock(i, alpha, label=f"delay {tau}")
            for loc in xg.locations:
                commits = [a for a in xg.out_arcs(loc) if a.kind == "commit"]
                for t in range(t_max + 1):
                    src = max(t - tau, 0)
                    # a crossing the horizon cuts short is seen on the edge,
                    # i.e. still in the holding node it left
                    late = []
                    if tau and t - tau >= 1:
                        for a in commits:
                            for s in range(max(0, t - tau - a.lag + 1), t - tau):
                                if s + a.lag <= t_max and s + a.lag + tau > t_max:
                                    late.append(((a.src, a.dst, s), 1))
                    blk.links.append(Link(loc, t, (((loc, src), 1),), (), tuple(late)))
            blocks.append(blk)
        return blocks
    if not isinstance(spec, NEBM):
        raise BehaviorError(f"unsupported behavior spec {spec!r}")
    i = 0
    if spec.alpha > 0:
        i += 1
        blk = ConstraintBlock(i, spec.alpha, label="follow plan")
        for loc in xg.locations:
            for t in range(t_max + 1):
                blk.links.append(Link(loc, t, (((loc, t), 1),)))
        blocks.append(blk)
    if spec.alpha < 1:
        i += 1
        blk = ConstraintBlock(i, 1 - spec.alpha, label="nearest exit")
        table = nearest_exit_table(g)
        # where does one person starting at each location get counted?
        tracks = {}
        for start in xg.locations:
            s0_loc = start if g.is_vertex(start) else xg.location_edge(start)
            one = nearest_exit_wes({"_": s0_loc}, g, t_max, table)
            where, _, _ = _track(one.paths["_"], g, xg)
            tracks[start] = where
        for loc in xg.locations:
            is_exit = g.is_vertex(loc) and g.is_exit(loc)
            for t in range(t_max + 1):
                if is_exit and t > 0:
                    new = tuple(
                        ((b, 0), 1)
                        for b in xg.locations
                        if tracks[b][t] == loc and tracks[b][t - 1] != loc
                    )
                    blk.links.append(Link(loc, t, new, (((loc, t - 1), 1),)))
                else:
                    terms = tuple(((b, 0), 1) for b in xg.locations if tracks[b][t] == loc)
                    blk.links.append(Link(loc, t, terms))
        blocks.append(blk)
    return blocks
