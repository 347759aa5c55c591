"""Mixed-integer linear programming in exact rational arithmetic.

The LP engine is a two-phase primal simplex on a sparse tableau of exact
rationals (GMP when available).  Pricing is Dantzig's rule; after a run of degenerate
pivots it falls back to Bland's rule, which rules out cycling.  Every
optimal LP is certified: dual values are read off the final basis and
checked against the original rows.

Branch-and-bound uses best-bound node selection with a depth-first dive on
the floor branch, branching on the most fractional variable.

A HiGHS backend (through SciPy) is available for models too large for the
exact engine.  Its answers are rounded and re-verified exactly, so callers
always receive rational assignments that satisfy every row.
"""

from __future__ import annotations

import heapq
import math
import os
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping

__all__ = [
    "Var",
    "Row",
    "Model",
    "Solution",
    "SolverError",
    "solve_lp",
    "solve_mip",
    "verify",
    "export_mps",
    "parse_mps",
    "import_solution",
    "format_solution",
    "DEFAULT_NODE_LIMIT",
    "default_time_limit",
]

DEFAULT_NODE_LIMIT = 10**7
ZERO = Fraction(0)
ONE = Fraction(1)
AUTO_EXACT_MAX_VARS = 600

try:  # GMP rationals are much faster than Fraction inside the tableau
    from gmpy2 import mpq as _Q
except ImportError:  # pragma: no cover
    _Q = Fraction
_ZQ = _Q(0)
_ONEQ = _Q(1)


def _frac(q) -> Fraction:
    return Fraction(int(q.numerator), int(q.denominator))


def default_time_limit() -> float | None:
    """Time limit from ``EVACPLAN_TIME_LIMIT`` (seconds), if set."""
    raw = os.environ.get("EVACPLAN_TIME_LIMIT")
    return float(raw) if raw else None


class SolverError(RuntimeError):
    """Internal inconsistency (failed certificate, malformed input files)."""


@dataclass
class Var:
    name: str
    lb: Fraction | None = ZERO
    ub: Fraction | None = None
    integer: bool = False


@dataclass
class Row:
    name: str
    coeffs: dict
    sense: str  # "<=", ">=", "="
    rhs: Fraction
    family: str = ""


@dataclass
class Model:
    """Linear model: ``maximize`` (or minimize) objective subject to rows."""

    name: str = "model"
    variables: list = field(default_factory=list)
    constraints: list = field(default_factory=list)
    objective: dict = field(default_factory=dict)
    maximize: bool = True
    objective_constant: Fraction = ZERO

    def __post_init__(self):
        self._index = {v.name: i for i, v in enumerate(self.variables)}

    def add_var(self, name: str, lb=ZERO, ub=None, integer: bool = False) -> str:
        if name in self._index:
            raise SolverError(f"duplicate variable {name}")
        self._index[name] = len(self.variables)
        self.variables.append(Var(name, _q(lb), _q(ub), integer))
        return name

    def add_row(self, name: str, coeffs: Mapping, sense: str, rhs, family: str = "") -> Row:
        if sense not in ("<=", ">=", "="):
            raise SolverError(f"bad sense {sense}")
        clean = {}
        for k, c in coeffs.items():
            if k not in self._index:
                raise SolverError(f"row {name}: undeclared variable {k}")
            c = _q(c)
            if c:
                clean[k] = clean.get(k, ZERO) + c
        row = Row(name, {k: c for k, c in clean.items() if c}, sense, _q(rhs), family)
        self.constraints.append(row)
        return row

    def var(self, name: str) -> Var:
        return self.variables[self._index[name]]

    def index(self, name: str) -> int:
        return self._index[name]

    def has_var(self, name: str) -> bool:
        return name in self._index

    def reindex(self) -> None:
        self._index = {v.name: i for i, v in enumerate(self.variables)}

    def evaluate(self, assignment: Mapping) -> Fraction:
        val = self.objective_constant
        for k, c in self.objective.items():
            val += c * _q(assignment.get(k, 0))
        return val

    @property
    def integer_names(self) -> list[str]:
        return [v.name for v in self.variables if v.integer]


def _q(x) -> Fraction | None:
    if x is None:
        return None
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        if math.isinf(x):
            return None
        return Fraction(repr(x))
    return Fraction(x)


@dataclass
class Solution:
    status: str  # optimal | infeasible | unbounded | time_limit_reached | node_limit_reached
    objective: Fraction | None = None
    assignment: dict = field(default_factory=dict)
    bound: Fraction | float | None = None
    nodes: int = 0
    iterations: int = 0
    elapsed: float = 0.0
    backend: str = "exact"
    message: str = ""

    @property
    def has_incumbent(self) -> bool:
        return self.objective is not None


# ---------------------------------------------------------------------------
# independent verifier


def verify(model: Model, assignment: Mapping) -> list[str]:
    """Every violated bound, integrality mark or row, by direct substitution."""
    bad = []
    known = {v.name for v in model.variables}
    for k in assignment:
        if k not in known:
            bad.append(f"unknown variable {k}")
    for v in model.variables:
        x = _q(assignment.get(v.name, 0))
        if v.lb is not None and x < v.lb:
            bad.append(f"{v.name} = {x} below lower bound {v.lb}")
        if v.ub is not None and x > v.ub:
            bad.append(f"{v.name} = {x} above upper bound {v.ub}")
        if v.integer and x.denominator != 1:
            bad.append(f"{v.name} = {x} is not integral")
    for r in model.constraints:
        lhs = sum((c * _q(assignment.get(k, 0)) for k, c in r.coeffs.items()), ZERO)
        ok = lhs <= r.rhs if r.sense == "<=" else lhs >= r.rhs if r.sense == ">=" else lhs == r.rhs
        if not ok:
            bad.append(f"{r.name}: {lhs} {r.sense} {r.rhs} fails")
    return bad


# ---------------------------------------------------------------------------
# exact simplex


class _Timeout(Exception):
    pass


@dataclass
class _LPResult:
    status: str
    objective: Fraction | None = None
    values: dict | None = None
    iterations: int = 0
    dual_bound: Fraction | None = None


class _Standard:
    """``max c·x  s.t.  A x (<=,>=,=) b,  x ≥ 0`` after shifting bounds."""

    def __init__(self, model: Model, bounds: Mapping | None = None):
        bounds = bounds or {}
        self.model = model
        self.cols: list[tuple[str, int]] = []  # (var name, +1/-1) per structural column
        self.shift: dict[str, Fraction] = {}
        self.colmap: dict[str, list[tuple[int, int]]] = {}
        self.fixed: dict[str, Fraction] = {}
        rows: list[tuple[dict, str, Fraction, str]] = []
        sign = 1 if model.maximize else -1
        self.infeasible_bounds = False
        for v in model.variables:
            lb, ub = bounds.get(v.name, (v.lb, v.ub))
            if lb is not None and ub is not None and lb > ub:
                self.infeasible_bounds = True
                return
            if lb is not None and ub is not None and lb == ub:
                self.fixed[v.name] = lb
                continue
            if lb is not None:
                j = len(self.cols)
                self.cols.append((v.name, 1))
                self.shift[v.name] = lb
                self.colmap[v.name] = [(j, 1)]
                if ub is not None:
                    rows.append(({j: ONE}, "<=", ub - lb, f"ub:{v.name}"))
            elif ub is not None:
                j = len(self.cols)
                self.cols.append((v.name, -1))
                self.shift[v.name] = ub
                self.colmap[v.name] = [(j, -1)]
            else:
                j = len(self.cols)
                self.cols.append((v.name, 1))
                self.cols.append((v.name, -1))
                self.shift[v.name] = ZERO
                self.colmap[v.name] = [(j, 1), (j + 1, -1)]
        self.const = model.objective_constant
        c: dict[int, Fraction] = {}
        for k, a in model.objective.items():
            if k in self.fixed:
                self.const += a * self.fixed[k]
                continue
            self.const += a * self.shift[k]
            for j, s in self.colmap[k]:
                c[j] = c.get(j, ZERO) + sign * a * s
        self.c = {j: a for j, a in c.items() if a}
        self.sign = sign
        self.trivially_infeasible = False
        for r in model.constraints:
            coeffs: dict[int, Fraction] = {}
            rhs = r.rhs
            for k, a in r.coeffs.items():
                if k in self.fixed:
                    rhs -= a * self.fixed[k]
                    continue
                rhs -= a * self.shift[k]
                for j, s in self.colmap[k]:
                    coeffs[j] = coeffs.get(j, ZERO) + a * s
            coeffs = {j: a for j, a in coeffs.items() if a}
            if not coeffs:
                ok = 0 <= rhs if r.sense == "<=" else 0 >= rhs if r.sense == ">=" else rhs == 0
                if not ok:
                    self.trivially_infeasible = True
                continue
            rows.append((coeffs, r.sense, rhs, r.name))
        self.rows = rows

    def values(self, x: Mapping[int, Fraction]) -> dict[str, Fraction]:
        out = dict(self.fixed)
        for name, parts in self.colmap.items():
            val = self.shift[name]
            for j, s in parts:
                val += s * x.get(j, ZERO)
            out[name] = val
        return out


def _pivot(rows, rhs, d, r, q):
    prow = rows[r]
    piv = prow[q]
    if piv != 1:
        inv = 1 / piv
        for k in prow:
            prow[k] *= inv
        rhs[r] *= inv
    pr = rhs[r]
    items = list(prow.items())
    for i, row in enumerate(rows):
        if i == r:
            continue
        a = row.get(q)
        if a is None:
            continue
        for k, v in items:
            nv = row.get(k, _ZQ) - a * v
            if nv:
                row[k] = nv
            else:
                row.pop(k, None)
        rhs[i] -= a * pr
    a = d.get(q)
    if a:
        for k, v in items:
            nv = d.get(k, _ZQ) - a * v
            if nv:
                d[k] = nv
            else:
                d.pop(k, None)


class _Tableau:
    """Dictionary-of-rows simplex tableau with the data for a dual certificate."""

    def __init__(self):
        self.rows: list[dict] = []
        self.rhs: list = []
        self.basis: list[int] = []
        self.d: dict = {}
        self.artificial: set[int] = set()
        self.orig: list[tuple[dict, object]] = []
        self.unit: list[int] = []
        self.ncol = 0
        self.n = 0
        self.c: dict = {}

    def copy(self) -> "_Tableau":
        t = _Tableau.__new__(_Tableau)
        t.rows = [dict(r) for r in self.rows]
        t.rhs = list(self.rhs)
        t.basis = list(self.basis)
        t.d = dict(self.d)
        t.artificial = self.artificial
        t.orig = list(self.orig)
        t.unit = list(self.unit)
        t.ncol, t.n, t.c = self.ncol, self.n, self.c
        return t

    def pivot(self, r: int, q: int) -> None:
        _pivot(self.rows, self.rhs, self.d, r, q)
        self.basis[r] = q


def _primal(tab: _Tableau, allowed, deadline, stats) -> str:
    """Primal simplex until optimal; returns 'optimal' or 'unbounded'."""
    rows, rhs, basis, d = tab.rows, tab.rhs, tab.basis, tab.d
    degenerate = 0
    bland = False
    while True:
        stats[0] += 1
        if deadline is not None and stats[0] % 50 == 0 and time.monotonic() > deadline:
            raise _Timeout
        q = None
        if bland:
            cands = [k for k, v in d.items() if v > 0 and allowed(k)]
            q = min(cands) if cands else None
        else:
            best = _ZQ
            for j, v in d.items():
                if v > 0 and allowed(j) and (v > best or (v == best and j < q)):
                    best, q = v, j
        if q is None:
            return "optimal"
        r = None
        ratio = None
        for i, row in enumerate(rows):
            a = row.get(q)
            if a is not None and a > 0:
                t = rhs[i] / a
                if ratio is None or t < ratio or (t == ratio and basis[i] < basis[r]):
                    ratio, r = t, i
        if r is None:
            return "unbounded"
        if ratio == 0:
            degenerate += 1
            if degenerate > 30:
                bland = True
        else:
            degenerate = 0
            bland = False
        tab.pivot(r, q)


def _dual(tab: _Tableau, deadline, stats, cap: int) -> str:
    """Dual simplex from a dual-feasible basis; 'optimal', 'infeasible' or 'stalled'."""
    rows, rhs, basis, d = tab.rows, tab.rhs, tab.basis, tab.d
    art = tab.artificial
    for _ in range(cap):
        stats[0] += 1
        if deadline is not None and stats[0] % 50 == 0 and time.monotonic() > deadline:
            raise _Timeout
        r = None
        for i, b in enumerate(rhs):
            if b < 0 and (r is None or b < rhs[r] or (b == rhs[r] and basis[i] < basis[r])):
                r = i
        if r is None:
            return "optimal"
        q = None
        best = None
        for k, a in rows[r].items():
            if a < 0 and k not in art:
                ratio = d.get(k, _ZQ) / a
                if best is None or ratio < best or (ratio == best and k < q):
                    best, q = ratio, k
        if q is None:
            return "infeasible"
        tab.pivot(r, q)
    return "stalled"


def _cold(std: _Standard, deadline, stats) -> tuple[str, _Tableau | None]:
    if std.infeasible_bounds or std.trivially_infeasible:
        return "infeasible", None
    tab = _Tableau()
    n = tab.n = len(std.cols)
    col = n
    for coeffs, sense, b, _name in std.rows:
        coeffs = {j: _Q(a) for j, a in coeffs.items()}
        b = _Q(b)
        if b < 0:
            coeffs = {j: -a for j, a in coeffs.items()}
            b = -b
            sense = {"<=": ">=", ">=": "<=", "=": "="}[sense]
        if sense == ">=" and b == 0:
            coeffs = {j: -a for j, a in coeffs.items()}
            sense = "<="
        if sense == ">=":
            coeffs[col] = -_ONEQ
            col += 1
        coeffs[col] = _ONEQ
        if sense != "<=":
            tab.artificial.add(col)
        tab.unit.append(col)
        tab.basis.append(col)
        col += 1
        tab.orig.append((dict(coeffs), b))
        tab.rows.append(coeffs)
        tab.rhs.append(b)
    tab.ncol = col
    tab.c = {j: _Q(a) for j, a in std.c.items()}
    art = tab.artificial
    if art:
        d = tab.d = {j: -_ONEQ for j in art}
        for i, bcol in enumerate(tab.basis):
            if bcol in art:
                for k, v in tab.rows[i].items():
                    nv = d.get(k, _ZQ) + v
                    if nv:
                        d[k] = nv
                    else:
                        d.pop(k, None)
        _primal(tab, lambda j: True, deadline, stats)
        infeas = sum((tab.rhs[i] for i, b in enumerate(tab.basis) if b in art), _ZQ)
        if infeas > 0:
            return "infeasible", None
        # drive artificials out of the basis where a structural column allows
        for i in range(len(tab.rows)):
            if tab.basis[i] in art:
                q = next((k for k in sorted(tab.rows[i]) if k not in art), None)
                if q is not None:
                    _pivot(tab.rows, tab.rhs, {}, i, q)
                    tab.basis[i] = q
    d = tab.d = dict(tab.c)
    for i, bcol in enumerate(tab.basis):
        cb = tab.c.get(bcol)
        if cb:
            for k, v in tab.rows[i].items():
                nv = d.get(k, _ZQ) - cb * v
                if nv:
                    d[k] = nv
                else:
                    d.pop(k, None)
    status = _primal(tab, lambda j: j not in art, deadline, stats)
    return status, tab


def _certify(tab: _Tableau) -> _LPResult:
    """Primal values, objective and an exactly checked dual bound."""
    n = tab.n
    x = {b: tab.rhs[i] for i, b in enumerate(tab.basis) if b < n}
    obj = sum((tab.c.get(j, _ZQ) * v for j, v in x.items()), _ZQ)
    # y_i = -(reduced cost of the row's unit column); need A^T y >= c
    y = [-tab.d.get(u, _ZQ) for u in tab.unit]
    colsum: dict = {}
    for yi, (coeffs, _b) in zip(y, tab.orig):
        if not yi:
            continue
        for j, a in coeffs.items():
            colsum[j] = colsum.get(j, _ZQ) + yi * a
    for j in set(colsum) | set(tab.c):
        if j in tab.artificial:
            continue
        if colsum.get(j, _ZQ) < tab.c.get(j, _ZQ):
            raise SolverError("dual certificate failed: reduced cost sign")
    dual = sum((yi * b for yi, (_c, b) in zip(y, tab.orig)), _ZQ)
    if obj > dual:
        raise SolverError("weak duality violated")
    if obj != dual:
        raise SolverError("primal and dual objectives differ at optimality")
    return _LPResult("optimal", _frac(obj), {j: _frac(v) for j, v in x.items()}, 0, _frac(dual))


def _add_bound(tab: _Tableau, j: int, upper: bool, value) -> None:
    """Append ``col_j <= value`` (or ``>=``) as a row with a fresh basic slack."""
    s = tab.ncol
    tab.ncol += 1
    value = _Q(value)
    raw = {j: _ONEQ, s: _ONEQ} if upper else {j: -_ONEQ, s: _ONEQ}
    b = value if upper else -value
    tab.orig.append((dict(raw), b))
    tab.unit.append(s)
    row = dict(raw)
    rhs = b
    for i, bcol in enumerate(tab.basis):
        a = row.get(bcol)
        if a is not None and bcol != s:
            for k, v in tab.rows[i].items():
                nv = row.get(k, _ZQ) - a * v
                if nv:
                    row[k] = nv
                else:
                    row.pop(k, None)
            rhs -= a * tab.rhs[i]
    tab.rows.append(row)
    tab.rhs.append(rhs)
    tab.basis.append(s)


def _lp(std: _Standard, deadline: float | None) -> _LPResult:
    stats = [0]
    status, tab = _cold(std, deadline, stats)
    if status != "optimal":
        return _LPResult(status, iterations=stats[0])
    res = _certify(tab)
    res.iterations = stats[0]
    return res


def solve_lp(model: Model, bounds: Mapping | None = None, time_limit: float | None = None) -> Solution:
    """Exact optimum of the LP relaxation (integrality marks ignored)."""
    start = time.monotonic()
    deadline = None if time_limit is None else start + time_limit
    std = _Standard(model, bounds)
    try:
        res = _lp(std, deadline)
    except _Timeout:
        return Solution("time_limit_reached", elapsed=time.monotonic() - start)
    sol = Solution(res.status, iterations=res.iterations, elapsed=time.monotonic() - start)
    if res.status == "optimal":
        sol.assignment = std.values(res.values)
        sol.objective = std.sign * res.objective + std.const
        sol.bound = std.sign * res.dual_bound + std.const
    return sol


# ---------------------------------------------------------------------------
# branch and bound


def _granularity(model: Model) -> Fraction | None:
    """Step between attainable objective values when every term is integral."""
    lcm = 1
    for k, c in model.objective.items():
        if not model.var(k).integer:
            return None
        lcm = lcm * c.denominator // math.gcd(lcm, c.denominator)
    return Fraction(1, lcm)


def solve_mip(
    model: Model,
    time_limit: float | None = None,
    node_limit: int = DEFAULT_NODE_LIMIT,
    backend: str = "exact",
) -> Solution:
    """Optimal integral solution, or the incumbent when a limit is hit.

    ``backend`` is ``exact`` (the in-process rational branch-and-bound),
    ``highs`` (SciPy's HiGHS, answers re-verified exactly) or ``auto``
    (exact for small models, HiGHS otherwise).
    """
    if time_limit is None:
        time_limit = default_time_limit()
    if backend == "auto":
        backend = "exact" if len(model.variables) <= AUTO_EXACT_MAX_VARS else "highs"
    if backend == "highs":
        return _solve_highs(model, time_limit)
    if backend != "exact":
        raise SolverError(f"unknown backend {backend}")
    start = time.monotonic()
    deadline = None if time_limit is None else start + time_limit
    if time_limit is not None and time_limit <= 0:
        return Solution("time_limit_reached", elapsed=0.0)
    names = [v.name for v in model.variables]
    ints = [i for i, v in enumerate(model.variables) if v.integer]
    sign = 1 if model.maximize else -1
    base = {v.name: (v.lb, v.ub) for v in model.variables}
    step = _granularity(model)
    incumbent: Solution | None = None
    best_val = None  # in maximisation units
    heap: list = []
    seq = 0
    nodes = 0
    stats = [0]
    status = "optimal"

    def promising(val) -> bool:
        if best_val is None:
            return True
        return val >= best_val + step if step is not None else val > best_val

    # a node: (bounds, parent standard form, parent tableau, branch) where
    # branch = (variable, upper?, value) is applied on top of the parent
    current = ({}, None, None, None)
    while True:
        if current is None:
            while heap:
                key, _, node = heapq.heappop(heap)
                if promising(-key):
                    current = node
                    break
            if current is None:
                break
        if deadline is not None and time.monotonic() > deadline:
            status = "time_limit_reached"
            break
        if nodes >= node_limit:
            status = "node_limit_reached"
            break
        nodes += 1
        bounds, std, parent, branch = current
        current = None
        try:
            lp_status, tab = "stalled", None
            if parent is not None:
                name, upper, value = branch
                parts = std.colmap.get(name)
                if parts and len(parts) == 1 and parts[0][1] == 1:
                    tab = parent.copy()
                    _add_bound(tab, parts[0][0], upper, value - std.shift[name])
                    cap = 50 * (len(tab.rows) + tab.ncol)
                    lp_status = _dual(tab, deadline, stats, cap)
            if lp_status == "stalled":
                full = dict(base)
                full.update(bounds)
                std = _Standard(model, full)
                lp_status, tab = _cold(std, deadline, stats)
        except _Timeout:
            status = "time_limit_reached"
            break
        if lp_status == "unbounded":
            if nodes == 1:
                return Solution("unbounded", nodes=nodes, iterations=stats[0], elapsed=time.monotonic() - start)
            continue
        if lp_status != "optimal":
            continue
        res = _certify(tab)
        val = res.objective + sign * std.const
        if not promising(val):
            continue
        values = std.values(res.values)
        frac = None
        for i in ints:
            x = values[names[i]]
            if x.denominator != 1:
                dist = min(x - math.floor(x), math.ceil(x) - x)
                if frac is None or dist > frac[0]:
                    frac = (dist, i, x)
        if frac is None:
            best_val = val
            incumbent = Solution("optimal", sign * val, values, None, nodes, stats[0], 0.0, "exact")
            continue
        _, i, x = frac
        name = names[i]
        lo, hi = dict(base, **bounds)[name]
        down = dict(bounds)
        down[name] = (lo, Fraction(math.floor(x)))
        up = dict(bounds)
        up[name] = (Fraction(math.ceil(x)), hi)
        seq += 1
        heapq.heappush(heap, (-val, seq, (up, std, tab, (name, False, Fraction(math.ceil(x))))))
        current = (down, std, tab, (name, True, Fraction(math.floor(x))))
    elapsed = time.monotonic() - start
    if status == "optimal":
        if incumbent is None:
            return Solution("infeasible", nodes=nodes, iterations=stats[0], elapsed=elapsed)
        incumbent.nodes, incumbent.iterations, incumbent.elapsed = nodes, stats[0], elapsed
        incumbent.bound = incumbent.objective
        _check_incumbent(model, incumbent)
        return incumbent
    open_keys = [-k for k, _, _ in heap]
    bound = max(open_keys, default=best_val)
    out = Solution(status, nodes=nodes, iterations=stats[0], elapsed=elapsed)
    if bound is not None:
        out.bound = sign * bound
    if incumbent is not None:
        out.objective = incumbent.objective
        out.assignment = incumbent.assignment
        _check_incumbent(model, out)
    return out


def _check_incumbent(model: Model, sol: Solution) -> None:
    bad = verify(model, sol.assignment)
    if bad:
        raise SolverError("solution fails verification: " + "; ".join(bad[:5]))
    if model.evaluate(sol.assignment) != sol.objective:
        raise SolverError("objective does not match the assignment")


def _round_highs(model: Model, xs) -> dict:
    """Floating-point point from HiGHS as exact values (integers rounded)."""
    assignment = {}
    for v, x in zip(model.variables, xs):
        if v.lb is not None and v.ub is not None and v.lb == v.ub:
            assignment[v.name] = v.lb
        elif v.integer:
            assignment[v.name] = Fraction(int(round(x)))
        else:
            assignment[v.name] = Fraction(float(x)).limit_denominator(10**6)
    return assignment


def _solve_highs(model: Model, time_limit: float | None) -> Solution:
    import numpy as np
    from scipy.optimize import Bounds, LinearConstraint, milp
    from scipy.sparse import coo_matrix

    start = time.monotonic()
    if time_limit is not None and time_limit <= 0:
        return Solution("time_limit_reached", backend="highs")
    n = len(model.variables)
    idx = {v.name: i for i, v in enumerate(model.variables)}
    sign = -1.0 if model.maximize else 1.0
    c = np.zeros(n)
    for k, a in model.objective.items():
        c[idx[k]] = sign * float(a)
    lb = np.array([-np.inf if v.lb is None else float(v.lb) for v in model.variables])
    ub = np.array([np.inf if v.ub is None else float(v.ub) for v in model.variables])
    integrality = np.array([1 if v.integer else 0 for v in model.variables])
    ri, ci, vals, rlo, rhi = [], [], [], [], []
    for r_i, r in enumerate(model.constraints):
        for k, a in r.coeffs.items():
            ri.append(r_i)
            ci.append(idx[k])
            vals.append(float(a))
        b = float(r.rhs)
        rlo.append(b if r.sense in (">=", "=") else -np.inf)
        rhi.append(b if r.sense in ("<=", "=") else np.inf)
    cons = []
    if model.constraints:
        A = coo_matrix((vals, (ri, ci)), shape=(len(model.constraints), n)).tocsr()
        cons = [LinearConstraint(A, np.array(rlo), np.array(rhi))]
    opts = {"mip_rel_gap": 0.0, "disp": False}
    if time_limit is not None:
        opts["time_limit"] = float(time_limit)
    res = milp(c, constraints=cons, integrality=integrality, bounds=Bounds(lb, ub), options=opts)
    if res.x is not None and res.status in (0, 1) and verify(model, _round_highs(model, res.x)):
        # presolve occasionally reports a point that violates a row; solve
        # again without it before giving up
        opts["presolve"] = False
        if time_limit is not None:
            opts["time_limit"] = max(float(time_limit) - (time.monotonic() - start), 0.0)
        res = milp(c, constraints=cons, integrality=integrality, bounds=Bounds(lb, ub), options=opts)
    elapsed = time.monotonic() - start
    status_map = {0: "optimal", 1: "time_limit_reached", 2: "infeasible", 3: "unbounded"}
    status = status_map.get(res.status, "error")
    sol = Solution(status, elapsed=elapsed, backend="highs", message=str(res.message))
    bound = getattr(res, "mip_dual_bound", None)
    if bound is not None and np.isfinite(bound):
        sol.bound = sign * bound + float(model.objective_constant)
    if res.x is not None and status in ("optimal", "time_limit_reached"):
        assignment = _round_highs(model, res.x)
        bad = verify(model, assignment)
        if bad:
            raise SolverError("HiGHS solution fails exact verification: " + "; ".join(bad[:5]))
        sol.assignment = assignment
        sol.objective = model.evaluate(assignment)
    elif status == "time_limit_reached":
        sol.objective = None
    if status == "error":
        raise SolverError(f"HiGHS failed: {res.message}")
    return sol


# ---------------------------------------------------------------------------
# MPS files


def _num(x: Fraction) -> str:
    x = Fraction(x)
    if x.denominator == 1:
        return str(x.numerator)
    d = x.denominator
    twos = fives = 0
    while d % 2 == 0:
        d //= 2
        twos += 1
    while d % 5 == 0:
        d //= 5
        fives += 1
    if d == 1:
        digits = max(twos, fives)
        scaled = x * 10**digits
        s = str(abs(scaled.numerator)).rjust(digits + 1, "0")
        out = s[:-digits] + "." + s[-digits:]
        return ("-" if x < 0 else "") + out
    return repr(float(x))


def _exact(x: Fraction) -> list[str]:
    """Comment carrying the exact value when the decimal field is rounded."""
    x = Fraction(x)
    d = x.denominator
    for p in (2, 5):
        while d % p == 0:
            d //= p
    return [] if d == 1 else [f"*~ {x.numerator}/{x.denominator}"]


def _line(f1: str, f2: str = "", f3: str = "", f4: str = "", f5: str = "", f6: str = "") -> str:
    # fixed-format columns 2-3, 5-12, 15-22, 25-36, 40-47, 50-61; longer
    # names push later fields right and keep a separating blank
    s = " " + f1.ljust(2) + " " + f2
    if f3 or f4:
        s = s.ljust(14) + " " + f3
        s = s.ljust(24) + " " + f4.rjust(12)
    if f5 or f6:
        s = s.ljust(39) + " " + f5
        s = s.ljust(49) + " " + f6.rjust(12)
    return s.rstrip()


def export_mps(model: Model) -> str:
    """Model as MPS text (fixed-format layout, whitespace-separated fields)."""
    out = [f"NAME          {model.name}"]
    if model.maximize:
        out += ["OBJSENSE", "    MAX"]
    out.append("ROWS")
    out.append(" N  obj")
    code = {"<=": "L", ">=": "G", "=": "E"}
    for r in model.constraints:
        out.append(f" {code[r.sense]}  {r.name}")
    out.append("COLUMNS")
    entries: dict[str, list[tuple[str, Fraction]]] = {v.name: [] for v in model.variables}
    for k, a in model.objective.items():
        if a:
            entries[k].append(("obj", a))
    for r in model.constraints:
        for k, a in r.coeffs.items():
            entries[k].append((r.name, a))
    in_int = False
    marker = 0
    for v in model.variables:
        if v.integer != in_int:
            tag = "'INTORG'" if v.integer else "'INTEND'"
            out.append(_line("", f"MARKER{marker}", "'MARKER'", "", tag))
            marker += 1
            in_int = v.integer
        if not entries[v.name]:
            out.append(_line("", v.name, "obj", "0"))
        for rname, a in entries[v.name]:
            out.append(_line("", v.name, rname, _num(a)))
            out += _exact(a)
    if in_int:
        out.append(_line("", f"MARKER{marker}", "'MARKER'", "", "'INTEND'"))
    out.append("RHS")
    if model.objective_constant:
        out.append(_line("", "RHS", "obj", _num(-model.objective_constant)))
        out += _exact(-model.objective_constant)
    for r in model.constraints:
        if r.rhs:
            out.append(_line("", "RHS", r.name, _num(r.rhs)))
            out += _exact(r.rhs)
    bounds = []
    for v in model.variables:
        lb, ub = v.lb, v.ub
        if lb is not None and ub is not None and lb == ub:
            bounds.append(_line("FX", "BND", v.name, _num(lb)))
            bounds += _exact(lb)
            continue
        if lb is None:
            bounds.append(_line("MI", "BND", v.name))
        elif lb != 0:
            bounds.append(_line("LO", "BND", v.name, _num(lb)))
            bounds += _exact(lb)
        if ub is not None:
            bounds.append(_line("UP", "BND", v.name, _num(ub)))
            bounds += _exact(ub)
        elif v.integer and lb is not None:
            bounds.append(_line("PL", "BND", v.name))
    if bounds:
        out.append("BOUNDS")
        out += bounds
    out.append("ENDATA")
    return "\n".join(out) + "\n"


class _Both:
    """Writes to two dicts at once (fixed bounds)."""

    def __init__(self, a: dict, b: dict):
        self.a, self.b = a, b

    def __setitem__(self, key, value):
        self.a[key] = self.b[key] = value


def parse_mps(text: str) -> Model:
    """Read MPS text produced by :func:`export_mps` (or compatible files)."""
    m = Model(maximize=False)  # MPS minimises unless told otherwise
    section = None
    senses = {"L": "<=", "G": ">=", "E": "="}
    row_sense: dict[str, str] = {}
    row_order: list[str] = []
    row_coeffs: dict[str, dict] = {}
    rhs: dict[str, Fraction] = {}
    obj_name = None
    in_int = False
    var_order: list[str] = []
    var_int: dict[str, bool] = {}
    objective: dict[str, Fraction] = {}
    lbs: dict[str, Fraction | None] = {}
    ubs: dict[str, Fraction | None] = {}
    last = None  # (dict, key) of the most recent numeric field
    for lineno, raw in enumerate(text.splitlines(), 1):
        if raw.startswith("*~"):
            if last is None:
                raise SolverError(f"line {lineno}: exact value without a field")
            try:
                last[0][last[1]] = Fraction(raw[2:].strip())
            except ValueError as exc:
                raise SolverError(f"line {lineno}: cannot parse {raw!r}") from exc
            continue
        if not raw.strip() or raw.startswith("*"):
            continue
        if not raw[0].isspace():
            head = raw.split()
            section = head[0]
            if section == "NAME":
                m.name = head[1] if len(head) > 1 else ""
            if section == "OBJSENSE" and len(head) > 1:
                m.maximize = head[1].upper() in ("MAX", "MAXIMIZE")
            continue
        tok = raw.split()
        try:
            if section == "OBJSENSE":
                m.maximize = tok[0].upper() in ("MAX", "MAXIMIZE")
            elif section == "ROWS":
                if tok[0] == "N":
                    obj_name = obj_name or tok[1]
                else:
                    row_sense[tok[1]] = senses[tok[0]]
                    row_order.append(tok[1])
                    row_coeffs[tok[1]] = {}
            elif section == "COLUMNS":
                if len(tok) >= 3 and tok[1] == "'MARKER'":
                    in_int = tok[2] == "'INTORG'"
                    continue
                name = tok[0]
                if name not in var_int:
                    var_order.append(name)
                    var_int[name] = in_int
                for rname, val in zip(tok[1::2], tok[2::2]):
                    a = Fraction(val)
                    if rname == obj_name:
                        objective[name] = a
                        last = (objective, name)
                    elif rname in row_coeffs:
                        row_coeffs[rname][name] = a
                        last = (row_coeffs[rname], name)
                    else:
                        raise SolverError(f"line {lineno}: unknown row {rname}")
            elif section == "RHS":
                for rname, val in zip(tok[1::2], tok[2::2]):
                    if rname == obj_name:
                        rhs[None] = Fraction(val)
                        last = (rhs, None)
                    else:
                        rhs[rname] = Fraction(val)
                        last = (rhs, rname)
            elif section == "BOUNDS":
                kind, name = tok[0], tok[2]
                val = Fraction(tok[3]) if len(tok) > 3 else None
                if kind == "UP":
                    ubs[name] = val
                    last = (ubs, name)
                elif kind == "LO":
                    lbs[name] = val
                    last = (lbs, name)
                elif kind == "FX":
                    lbs[name] = ubs[name] = val
                    last = (_Both(lbs, ubs), name)
                elif kind == "FR":
                    lbs[name] = None
                    ubs[name] = None
                elif kind == "MI":
                    lbs[name] = None
                elif kind == "PL":
                    ubs[name] = None
                elif kind == "BV":
                    lbs[name], ubs[name] = ZERO, ONE
                    var_int[name] = True
                elif kind in ("LI", "UI"):
                    (lbs if kind == "LI" else ubs)[name] = val
                    var_int[name] = True
                else:
                    raise SolverError(f"line {lineno}: unsupported bound type {kind}")
            elif section in ("ENDATA", "RANGES"):
                if section == "RANGES":
                    raise SolverError("RANGES section is not supported")
        except (IndexError, ValueError, KeyError) as exc:
            raise SolverError(f"line {lineno}: cannot parse {raw!r} ({exc})") from exc
    if None in rhs:
        m.objective_constant = -rhs.pop(None)
    for name in var_order:
        m.add_var(name, lbs.get(name, ZERO), ubs.get(name), var_int[name])
    m.objective = {k: a for k, a in objective.items() if a}
    for rname in row_order:
        m.add_row(rname, row_coeffs[rname], row_sense[rname], rhs.get(rname, ZERO))
    return m


def format_solution(assignment: Mapping, names: Iterable[str] | None = None) -> str:
    """One ``name value`` line per variable."""
    names = list(names) if names is not None else list(assignment)
    out = []
    for k in names:
        x = _q(assignment.get(k, 0))
        out.append(f"{k} {_num(x) if not _exact(x) else f'{x.numerator}/{x.denominator}'}\n")
    return "".join(out)


def import_solution(text: str, model: Model | None = None) -> dict:
    """Parse ``name value`` lines; names are checked against ``model`` if given."""
    out: dict[str, Fraction] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tok = line.split()
        if len(tok) != 2:
            raise SolverError(f"line {lineno}: expected 'name value', got {raw!r}")
        try:
            val = Fraction(tok[1])
        except ValueError as exc:
            raise SolverError(f"line {lineno}: bad value {tok[1]!r}") from exc
        if model is not None and not model.has_var(tok[0]):
            raise SolverError(f"line {lineno}: unknown variable {tok[0]}")
        out[tok[0]] = val
    return out
