"""Command-line interface and benchmark runner.

Every flag can also be set through an environment variable named
``EVACPLAN_<FLAG>`` (upper case, dashes as underscores), e.g.
``EVACPLAN_TIME_LIMIT=30``.  Command-line values win.

Exit codes:

    0  success
    1  the schedule failed validation
    2  usage error (unknown subcommand, bad flag)
    3  file missing or unreadable
    4  malformed input (instance, schedule, behavior or solution file)
    5  no plan found (infeasible or no incumbent within the limit)
    6  benchmark finished with missing records
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields
from fractions import Fraction
from pathlib import Path
from statistics import mean
from typing import Sequence

from .bbevac import bb_evac
from .behavior import DBM, NEBM, BehaviorError, realize, spec_from_doc, spec_to_doc
from .buildinggraph import GraphError, Instance, fixture_path, generate_document, load_instance
from .ilpmodel import Framework, IlpError, build_ip, extract, preflight
from .milpsolver import SolverError, export_mps, format_solution, import_solution, solve_mip
from .schedule import (
    ScheduleError,
    count_evacuated,
    expected_evacuated,
    load_schedule,
    validate_strong,
    validate_weak,
)

__all__ = ["main", "build_parser", "ExperimentRecord", "BenchConfig", "run_instance", "run_bench", "CSV_COLUMNS"]

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_USAGE = 2
EXIT_FILE = 3
EXIT_INPUT = 4
EXIT_NO_PLAN = 5
EXIT_BENCH = 6

DEFAULT_BEHAVIOR = {"type": "dbm", "delays": [{"tau": 2, "alpha": "2/5"}, {"tau": 5, "alpha": "3/5"}]}


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


# ---------------------------------------------------------------------------
# helpers


def _env(flag: str, default=None):
    return os.environ.get("EVACPLAN_" + flag.upper().replace("-", "_"), default)


def _resolve(path: str) -> Path:
    """A path on disk, or the name of a bundled fixture."""
    p = Path(path)
    if p.exists():
        return p
    try:
        bundled = fixture_path(p.name)
    except Exception:
        bundled = None
    if bundled is not None and bundled.exists():
        return bundled
    raise CliError(f"no such file: {path}", EXIT_FILE)


def _read_json(path: str):
    p = _resolve(path)
    try:
        return json.loads(p.read_text())
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}", EXIT_FILE) from exc
    except json.JSONDecodeError as exc:
        raise CliError(f"{path} is not valid JSON: {exc}", EXIT_INPUT) from exc


def _instance(path: str) -> Instance:
    doc = _read_json(path)
    try:
        return load_instance(doc)
    except (GraphError, KeyError, TypeError, ValueError) as exc:
        raise CliError(f"{path}: {exc}", EXIT_INPUT) from exc


def parse_behavior(text: str | None, fallback=None):
    """Behavior from JSON text, a JSON file, or the compact forms
    ``dbm:2=2/5,5=3/5`` and ``nebm:7/10``."""
    if text is None:
        return spec_from_doc(fallback if fallback is not None else DEFAULT_BEHAVIOR)
    text = text.strip()
    if text.startswith("{"):
        return spec_from_doc(json.loads(text))
    low = text.lower()
    if low.startswith("dbm:"):
        pairs = []
        for part in text[4:].split(","):
            tau, alpha = part.split("=")
            pairs.append((int(tau), Fraction(alpha)))
        return DBM(tuple(pairs))
    if low.startswith("nebm:"):
        return NEBM(Fraction(text[5:]))
    return spec_from_doc(_read_json(text))


def _behavior(args, inst: Instance | None):
    try:
        return parse_behavior(args.behavior, inst.behavior if inst is not None else None)
    except (BehaviorError, ValueError, KeyError) as exc:
        raise CliError(f"bad behavior spec: {exc}", EXIT_INPUT) from exc


def _horizon(args, inst: Instance) -> tuple[int, int]:
    """Deadline and horizon: flags first, then 2·D, then the instance."""
    D = args.D if args.D is not None else inst.deadline
    if args.t_max is not None:
        t_max = args.t_max
    elif args.D is not None:
        t_max = 2 * D
    else:
        t_max = inst.t_max
    if D > t_max:
        raise CliError(f"deadline {D} exceeds horizon {t_max}", EXIT_USAGE)
    return D, t_max


def _emit(args, doc: dict, summary: list[str]) -> None:
    if getattr(args, "out", None):
        Path(args.out).write_text(json.dumps(doc, indent=1) + "\n")
    if getattr(args, "json", False):
        print(json.dumps(doc, indent=1))
    else:
        for line in summary:
            print(line)


def _frac(x) -> str:
    x = Fraction(x)
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


# ---------------------------------------------------------------------------
# subcommands


def cmd_validate(args) -> int:
    inst = _instance(args.instance)
    g = inst.graph
    try:
        es = load_schedule(_read_json(args.schedule), g)
    except (ScheduleError, GraphError, KeyError, TypeError) as exc:
        raise CliError(f"{args.schedule}: {exc}", EXIT_INPUT) from exc
    t_max = args.t_max
    weak = validate_weak(es, g, t_max)
    strong = validate_strong(es, g, t_max)
    D = args.D if args.D is not None else min(inst.deadline, es.horizon)
    doc = {
        "weak": {"ok": weak.ok, "violations": [str(v) for v in weak.violations]},
        "strong": {"ok": strong.ok, "violations": [str(v) for v in strong.violations]},
        "deadline": D,
        "evacuated": count_evacuated(es, g, D),
    }
    lines = [weak.summary(), strong.summary(), f"evacuated by t={D}: {doc['evacuated']}"]
    _emit(args, doc, lines)
    ok = weak.ok if args.weak else strong.ok
    return EXIT_OK if ok else EXIT_INVALID


def _plan_doc(es, g, D, spec, s0, extra: dict) -> tuple[dict, list[str]]:
    expect = expected_evacuated(es, spec, D, g, s0)
    n = count_evacuated(es, g, D)
    doc = dict(extra)
    doc.update(
        {
            "deadline": D,
            "evacuated": n,
            "expected_evacuated": _frac(expect),
            "behavior": spec_to_doc(spec),
            "schedule": es.to_doc(),
        }
    )
    lines = [f"{k}: {v}" for k, v in extra.items() if not isinstance(v, (dict, list))]
    lines += [f"evacuated by t={D}: {n}", f"expected evacuated: {_frac(expect)}", str(es)]
    return doc, lines


def cmd_plan_ip(args) -> int:
    inst = _instance(args.instance)
    spec = _behavior(args, inst)
    D, t_max = _horizon(args, inst)
    fw = Framework(inst.graph, inst.people, spec)
    soft = args.soft
    if not soft and args.auto_soft:
        ok, _ = preflight(inst.graph, inst.people, t_max)
        soft = not ok
    try:
        ilp = build_ip(fw, D, t_max, soft=soft)
    except IlpError as exc:
        raise CliError(str(exc), EXIT_INPUT) from exc
    if args.solution:
        try:
            text = _resolve(args.solution).read_text()
            assignment = import_solution(text, ilp.model)
            plan = extract(ilp, assignment)
        except SolverError as exc:
            raise CliError(f"{args.solution}: {exc}", EXIT_INPUT) from exc
        except IlpError as exc:
            raise CliError(f"{args.solution}: {exc}", EXIT_NO_PLAN) from exc
        status, elapsed = "imported", 0.0
    else:
        sol = solve_mip(ilp.model, time_limit=args.time_limit, backend=args.backend)
        if not sol.has_incumbent:
            print(f"no plan: {sol.status}", file=sys.stderr)
            return EXIT_NO_PLAN
        plan = extract(ilp, sol.assignment)
        status, elapsed = sol.status, sol.elapsed
        if args.solution_out:
            Path(args.solution_out).write_text(format_solution(sol.assignment, [v.name for v in ilp.model.variables]))
    doc, lines = _plan_doc(
        plan.ses,
        inst.graph,
        D,
        spec,
        inst.people,
        {"method": "bbip", "status": status, "mode": "soft" if soft else "hard", "t_max": t_max, "objective": _frac(plan.objective), "seconds": round(elapsed, 3)},
    )
    _emit(args, doc, lines)
    return EXIT_OK


def cmd_plan_evac(args) -> int:
    inst = _instance(args.instance)
    spec = _behavior(args, inst)
    D, t_max = _horizon(args, inst)
    fw = Framework(inst.graph, inst.people, spec)
    try:
        gamma = Fraction(str(args.gamma))
    except ValueError as exc:
        raise CliError(f"bad gamma {args.gamma}", EXIT_USAGE) from exc
    try:
        res = bb_evac(
            fw,
            D,
            gamma,
            t_max,
            subproblem_time_limit=args.subproblem_time_limit,
            backend=args.backend,
            relay_mode=args.relay,
            soft=args.soft,
            time_budget=args.time_limit,
        )
    except (IlpError, ValueError) as exc:
        raise CliError(str(exc), EXIT_INPUT) from exc
    extra = {
        "method": "bbevac",
        "gamma": _frac(gamma),
        "t_max": t_max,
        "strong": res.strong,
        "stranded": list(res.stranded),
        "seconds": round(res.elapsed, 3),
        "steps": [s.to_doc() for s in res.steps],
    }
    doc, lines = _plan_doc(res.schedule, inst.graph, D, spec, inst.people, extra)
    lines.insert(0, f"steps: {sum(1 for s in res.steps if not s.isolated)} subgraphs")
    _emit(args, doc, lines)
    return EXIT_OK


def cmd_realize(args) -> int:
    inst = _instance(args.instance)
    spec = _behavior(args, inst)
    g = inst.graph
    try:
        es = load_schedule(_read_json(args.schedule), g)
    except (ScheduleError, GraphError, KeyError, TypeError) as exc:
        raise CliError(f"{args.schedule}: {exc}", EXIT_INPUT) from exc
    D = args.D if args.D is not None else min(inst.deadline, es.horizon)
    pairs = realize(spec, es, g, es.state(0))
    outcomes = []
    lines = []
    for i, (w, a) in enumerate(pairs, 1):
        n = count_evacuated(w, g, D)
        outcomes.append({"probability": _frac(a), "evacuated": n, "schedule": w.to_doc()})
        lines.append(f"outcome {i}: probability {_frac(a)}, evacuated by t={D}: {n}")
        lines.append(str(w))
    expect = expected_evacuated(es, pairs, D, g)
    lines.append(f"expected evacuated: {_frac(expect)}")
    doc = {"behavior": spec_to_doc(spec), "deadline": D, "outcomes": outcomes, "expected_evacuated": _frac(expect)}
    _emit(args, doc, lines)
    return EXIT_OK


def cmd_gen(args) -> int:
    params = {
        "n_vertices": args.nodes,
        "population": args.population,
        "seed": args.seed,
        "edge_factor": args.edge_factor,
        "n_exits": args.exits,
        "deadline": args.D,
        "t_max": args.t_max,
    }
    if args.behavior:
        params["behavior"] = spec_to_doc(parse_behavior(args.behavior))
    try:
        doc = generate_document(params)
    except GraphError as exc:
        raise CliError(str(exc), EXIT_INPUT) from exc
    text = json.dumps(doc, indent=1) + "\n"
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote {args.out}: {len(doc['vertices'])} vertices, {len(doc['edges'])} edges, {len(doc['people'])} people, deadline {doc['deadline']}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_export_lp(args) -> int:
    inst = _instance(args.instance)
    spec = _behavior(args, inst)
    D, t_max = _horizon(args, inst)
    try:
        ilp = build_ip(Framework(inst.graph, inst.people, spec), D, t_max, soft=args.soft)
    except IlpError as exc:
        raise CliError(str(exc), EXIT_INPUT) from exc
    text = export_mps(ilp.model)
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote {args.out}: {len(ilp.model.variables)} columns, {len(ilp.model.constraints)} rows")
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# benchmark


CSV_COLUMNS = [
    "instance",
    "seed",
    "nodes",
    "edges",
    "population",
    "behavior",
    "D",
    "t_max",
    "mode",
    "method",
    "status",
    "wall_time",
    "cutoff_hit",
    "evacuated",
    "expected",
    "quality",
    "strong",
    "error",
]


@dataclass
class ExperimentRecord:
    instance: str
    seed: int
    nodes: int
    edges: int
    population: int
    behavior: str
    D: int
    t_max: int
    mode: str
    method: str
    status: str
    wall_time: float
    cutoff_hit: bool
    evacuated: int | None
    expected: str | None
    quality: str | None
    strong: bool | None
    error: str = ""

    def row(self) -> dict:
        return {f.name: ("" if getattr(self, f.name) is None else getattr(self, f.name)) for f in fields(self)}


@dataclass
class BenchConfig:
    nodes: Sequence[int] = (20, 30, 40, 50, 60)
    population: Sequence[int] = (20, 60, 100)
    instances_per_cell: int = 1
    seed: int = 0
    cutoff: float = 60.0
    gamma: Fraction = Fraction(1, 4)
    behavior: str = "dbm:2=2/5,5=3/5"
    edge_factor: float = 1.35
    exits: int = 2
    deadline_scale: float = 1.0
    subproblem_time_limit: float | None = None
    backend: str = "auto"
    workers: int = 1

    def matrix(self) -> list[dict]:
        cells = []
        k = 0
        for n in self.nodes:
            for pop in self.population:
                for r in range(self.instances_per_cell):
                    cells.append(
                        {
                            "n_vertices": n,
                            "population": pop,
                            "seed": self.seed + k,
                            "edge_factor": self.edge_factor,
                            "n_exits": self.exits,
                        }
                    )
                    k += 1
        return cells


def run_instance(params: dict, cfg: BenchConfig) -> list[ExperimentRecord]:
    """Both methods on one generated instance; failures become records."""
    spec = parse_behavior(cfg.behavior)
    behavior = spec_to_doc(spec)
    bname = json.dumps(behavior, separators=(",", ":"))
    base = dict(
        instance=f"n{params['n_vertices']}-p{params['population']}-s{params['seed']}",
        seed=params["seed"],
        nodes=params["n_vertices"],
        edges=0,
        population=params["population"],
        behavior=bname,
        D=0,
        t_max=0,
        mode="hard",
    )
    try:
        doc = generate_document(params)
        inst = load_instance(doc)
    except Exception as exc:  # recorded, never fatal
        return [
            ExperimentRecord(**base, method=m, status="error", wall_time=0.0, cutoff_hit=False, evacuated=None, expected=None, quality=None, strong=None, error=str(exc))
            for m in ("bbip", "bbevac")
        ]
    g = inst.graph
    D = max(1, round(inst.deadline * cfg.deadline_scale))
    t_max = 2 * D
    ok, _ = preflight(g, inst.people, t_max)
    mode = "hard" if ok else "soft"
    base.update(edges=len(g.edges), D=D, t_max=t_max, mode=mode)
    fw = Framework(g, inst.people, spec)
    out = []
    # exact planner
    start = time.monotonic()
    rec = dict(base, method="bbip")
    best = None
    proven = False
    try:
        ilp = build_ip(fw, D, t_max, soft=not ok)
        remaining = max(cfg.cutoff - (time.monotonic() - start), 0.0)
        sol = solve_mip(ilp.model, time_limit=remaining, backend=cfg.backend)
        if sol.status == "infeasible" and ok:
            # the flow bound passed but nobody-left-behind is still impossible
            ilp = build_ip(fw, D, t_max, soft=True)
            rec["mode"] = "soft"
            remaining = max(cfg.cutoff - (time.monotonic() - start), 0.0)
            sol = solve_mip(ilp.model, time_limit=remaining, backend=cfg.backend)
        wall = time.monotonic() - start
        hit = sol.status == "time_limit_reached" or wall >= cfg.cutoff
        if sol.has_incumbent:
            plan = extract(ilp, sol.assignment)
            best = plan.objective
            proven = sol.status == "optimal" and not hit
            rec.update(evacuated=count_evacuated(plan.ses, g, D), expected=_frac(best), strong=validate_strong(plan.ses, g, t_max).ok)
        else:
            rec.update(evacuated=None, expected=None, strong=None)
        rec.update(status=sol.status if not hit else "time_limit_reached", wall_time=cfg.cutoff if hit else wall, cutoff_hit=hit, quality=None)
    except Exception as exc:
        rec.update(status="error", wall_time=time.monotonic() - start, cutoff_hit=False, evacuated=None, expected=None, quality=None, strong=None, error=str(exc))
    out.append(ExperimentRecord(**rec))
    # heuristic
    start = time.monotonic()
    rec = dict(base, method="bbevac")
    try:
        sub_limit = cfg.subproblem_time_limit
        res = bb_evac(fw, D, cfg.gamma, t_max, subproblem_time_limit=sub_limit, backend=cfg.backend, soft=not ok, time_budget=cfg.cutoff)
        wall = time.monotonic() - start
        value = expected_evacuated(res.schedule, spec, D, g, inst.people)
        quality = None
        if proven and best:
            quality = _frac(value / best)
        elif proven and best == 0:
            quality = "1" if value == 0 else None
        rec.update(
            status="done",
            wall_time=wall,
            cutoff_hit=wall >= cfg.cutoff,
            evacuated=count_evacuated(res.schedule, g, D),
            expected=_frac(value),
            quality=quality,
            strong=res.strong,
        )
    except Exception as exc:
        rec.update(status="error", wall_time=time.monotonic() - start, cutoff_hit=False, evacuated=None, expected=None, quality=None, strong=None, error=str(exc))
    out.append(ExperimentRecord(**rec))
    return out


def _run_cell(job):
    params, cfg = job
    return run_instance(params, cfg)


def run_bench(cfg: BenchConfig) -> tuple[list[ExperimentRecord], int]:
    """All cells of the matrix; returns the records and how many were expected."""
    jobs = [(p, cfg) for p in cfg.matrix()]
    records: list[ExperimentRecord] = []
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            for recs in pool.map(_run_cell, jobs):
                records.extend(recs)
    else:
        for job in jobs:
            records.extend(_run_cell(job))
    return records, 2 * len(jobs)


def records_to_csv(records: Sequence[ExperimentRecord]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in records:
        w.writerow(r.row())
    return buf.getvalue()


def summarize(records: Sequence[ExperimentRecord], axis: str = "nodes") -> list[dict]:
    """Per-axis averages of wall time and quality for each method."""
    out = []
    keys = sorted({getattr(r, axis) for r in records})
    for k in keys:
        row = {axis: k}
        for m in ("bbip", "bbevac"):
            sel = [r for r in records if getattr(r, axis) == k and r.method == m and r.status != "error"]
            row[f"{m}_time"] = round(mean(r.wall_time for r in sel), 3) if sel else None
            vals = [float(Fraction(r.expected)) for r in sel if r.expected]
            row[f"{m}_expected"] = round(mean(vals), 3) if vals else None
        qs = [float(Fraction(r.quality)) for r in records if getattr(r, axis) == k and r.method == "bbevac" and r.quality]
        row["quality"] = round(mean(qs), 3) if qs else None
        out.append(row)
    return out


def _int_list(text: str) -> list[int]:
    """``20:60:10`` (inclusive range), ``20,40`` or ``30``."""
    text = str(text)
    if ":" in text:
        parts = [int(x) for x in text.split(":")]
        lo, hi = parts[0], parts[1]
        step = parts[2] if len(parts) > 2 else 10
        return list(range(lo, hi + 1, step))
    if not text.strip():
        return []
    return [int(x) for x in text.split(",")]


def cmd_bench(args) -> int:
    if args.large_scale:
        cfg = BenchConfig(
            nodes=list(range(110, 201, 10)),
            population=list(range(500, 3501, 500)),
            cutoff=120 * 60.0,
        )
    else:
        cfg = BenchConfig()
    if args.nodes is not None:
        cfg.nodes = _int_list(args.nodes)
    if args.population is not None:
        cfg.population = _int_list(args.population)
    if args.cutoff is not None:
        cfg.cutoff = float(args.cutoff)
    cfg.instances_per_cell = args.instances
    cfg.seed = args.seed
    cfg.gamma = Fraction(str(args.gamma))
    if args.behavior:
        cfg.behavior = args.behavior
    cfg.edge_factor = args.edge_factor
    cfg.deadline_scale = args.deadline_scale
    cfg.subproblem_time_limit = args.subproblem_time_limit
    cfg.backend = args.backend
    cfg.workers = args.workers
    records, expected = run_bench(cfg)
    text = records_to_csv(records)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    summary = summarize(records)
    if args.summary:
        buf = io.StringIO()
        if summary:
            w = csv.DictWriter(buf, fieldnames=list(summary[0]), lineterminator="\n")
            w.writeheader()
            w.writerows(summary)
        Path(args.summary).write_text(buf.getvalue())
    for row in summary:
        print("  ".join(f"{k}={v}" for k, v in row.items()), file=sys.stderr)
    return EXIT_OK if len(records) == expected else EXIT_BENCH


# ---------------------------------------------------------------------------
# parser


def _opt(parser, flag: str, type=str, default=None, **kw):
    raw = _env(flag.lstrip("-"))
    try:
        value = default if raw is None else type(raw)
    except ValueError as exc:
        name = "EVACPLAN_" + flag.lstrip("-").upper().replace("-", "_")
        raise CliError(f"{name}={raw!r}: {exc}", EXIT_USAGE) from exc
    parser.add_argument(flag, type=type, default=value, **kw)


def _flag(parser, flag: str, help: str):
    raw = _env(flag.lstrip("-"))
    default = raw is not None and raw.lower() in ("1", "true", "yes", "on")
    parser.add_argument(flag, action="store_true", default=default, help=help)


def _common(p, horizon: bool = True, behavior: bool = True, out: bool = True):
    if horizon:
        _opt(p, "--D", int, dest="D", help="deadline in ticks (default: the instance's)")
        _opt(p, "--t-max", int, dest="t_max", help="horizon in ticks (default: 2·D when --D is given)")
    if behavior:
        _opt(p, "--behavior", str, help="JSON, a JSON file, 'dbm:2=2/5,5=3/5' or 'nebm:7/10'")
    if out:
        _opt(p, "--out", str, help="write the machine-readable result here")
        _flag(p, "--json", "print the machine-readable result instead of the summary")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="evacplan", description="Evacuation planning under behavior models.")
    sub = ap.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    p = sub.add_parser("validate", help="check a schedule against an instance")
    p.add_argument("instance")
    p.add_argument("schedule")
    _opt(p, "--D", int, dest="D", help="tick at which to count evacuees")
    _opt(p, "--t-max", int, dest="t_max", help="horizon the schedule must cover")
    _flag(p, "--weak", "exit 0 when weak validation passes")
    _common(p, horizon=False, behavior=False)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("plan-ip", help="exact plan maximizing expected evacuees")
    p.add_argument("instance")
    _common(p)
    _flag(p, "--soft", "drop the full-evacuation requirement")
    _flag(p, "--auto-soft", "drop it only when a max-flow check proves it unattainable")
    _opt(p, "--time-limit", float, help="solver time limit in seconds")
    _opt(p, "--backend", str, "auto", choices=["auto", "exact", "highs"])
    _opt(p, "--solution", str, help="extract from an external 'name value' solution file instead of solving")
    _opt(p, "--solution-out", str, help="write the solver's assignment as 'name value' lines")
    p.set_defaults(func=cmd_plan_ip)

    p = sub.add_parser("plan-evac", help="heuristic plan by exit-graph peeling")
    p.add_argument("instance")
    _common(p)
    _opt(p, "--gamma", str, "1/4", help="share of occupied entry vertices needed to stop growing (0, 1]")
    _opt(p, "--subproblem-time-limit", float, help="seconds per subproblem solve")
    _opt(p, "--time-limit", float, help="total budget, split evenly over the exits")
    _opt(p, "--backend", str, "auto", choices=["auto", "exact", "highs"])
    _opt(p, "--relay", str, "route", choices=["start", "through", "route"], help="who people at a temporary exit follow")
    _flag(p, "--soft", "never require full evacuation in subproblems")
    p.set_defaults(func=cmd_plan_evac)

    p = sub.add_parser("realize", help="outcomes of a schedule under a behavior model")
    p.add_argument("instance")
    p.add_argument("schedule")
    _opt(p, "--D", int, dest="D", help="tick at which to count evacuees")
    _common(p, horizon=False)
    p.set_defaults(func=cmd_realize)

    p = sub.add_parser("gen", help="generate a random instance")
    _opt(p, "--nodes", int, 30)
    _opt(p, "--population", int, 30)
    _opt(p, "--seed", int, 0)
    _opt(p, "--edge-factor", float, 1.35)
    _opt(p, "--exits", int, 2)
    _opt(p, "--D", int, dest="D", help="deadline (default: travel-time diameter)")
    _opt(p, "--t-max", int, dest="t_max", help="horizon (default: 2·deadline)")
    _opt(p, "--behavior", str)
    _opt(p, "--out", str)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("export-lp", help="write the planning program as MPS")
    p.add_argument("instance")
    _common(p)
    _flag(p, "--soft", "drop the full-evacuation requirement")
    p.set_defaults(func=cmd_export_lp)

    p = sub.add_parser("bench", help="run both planners over a generated matrix, emit CSV")
    _opt(p, "--nodes", str, help="e.g. 20:60:10 or 30,40")
    _opt(p, "--population", str, help="e.g. 20:100:40 or 30,60")
    _opt(p, "--instances", int, 1, help="instances per matrix cell")
    _opt(p, "--seed", int, 0)
    _opt(p, "--cutoff", float, help="seconds per method per instance (counted as the run time when hit)")
    _opt(p, "--gamma", str, "1/4")
    _opt(p, "--behavior", str)
    _opt(p, "--edge-factor", float, 1.35)
    _opt(p, "--deadline-scale", float, 1.0, help="deadline as a multiple of the travel-time diameter")
    _opt(p, "--subproblem-time-limit", float)
    _opt(p, "--backend", str, "auto", choices=["auto", "exact", "highs"])
    _opt(p, "--workers", int, 1)
    _opt(p, "--out", str, help="CSV path (default: stdout)")
    _opt(p, "--summary", str, help="per-size averages as CSV")
    _flag(p, "--large-scale", "110-200 nodes, 500-3500 people, 120 min cutoff")
    p.set_defaults(func=cmd_bench)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    try:
        parser = build_parser()
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_USAGE
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (BehaviorError, GraphError, ScheduleError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FILE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
