#!/usr/bin/env python3
"""
Command line driver: run experiments, generate and convert instances,
build Borda reports and verify result manifests.

    python xdhh.py run --domain flowshop --instance results/fs20x5-p99-s1.fsp --algorithm ils --seed 1 2 3
    python xdhh.py run --plan plan.json --jobs 4
    python xdhh.py generate flowshop --jobs 20 --machines 5 --seed 1
    python xdhh.py convert taillard tai20_5.txt ta001.fsp
    python xdhh.py report results/
    python xdhh.py verify results/
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Type, Union

from rich.console import Console
from rich.table import Table

import binpacking
import flowshop
import maxsat
import personnel
from algorithms import ALGORITHMS, make_algorithm
from analysis import build_report, load_results, write_report
from core import ProblemDomain, run
from errors import EmptyCell, PlanError, XdhhError
from models import DEFAULT_DEPTH, DEFAULT_INTENSITY, RunBudget

logger = logging.getLogger("xdhh")

DEFAULT_BUDGET_EVALUATIONS = 100_000
MANIFEST = "manifest.json"
OUT_ENV = "XDHH_OUT"


def default_out() -> str:
    return os.environ.get(OUT_ENV, "results")


@dataclass(frozen=True)
class DomainEntry:
    factory: Type[ProblemDomain]
    read: Callable[[Path], Any]
    write: Callable[[Any, Path], None]
    generate: Callable[..., Any]
    suffix: str


DOMAINS: Dict[str, DomainEntry] = {
    "maxsat": DomainEntry(maxsat.MaxSat, maxsat.read_dimacs, maxsat.write_dimacs, maxsat.generate_random_ksat, ".cnf"),
    "binpacking": DomainEntry(
        binpacking.BinPacking, binpacking.read_packing, binpacking.write_packing, binpacking.generate_uniform, ".bpp"
    ),
    "flowshop": DomainEntry(
        flowshop.FlowShop, flowshop.read_flowshop, flowshop.write_flowshop, flowshop.generate_uniform, ".fsp"
    ),
    "personnel": DomainEntry(
        personnel.PersonnelScheduling, personnel.read_roster, personnel.write_roster, personnel.generate_roster, ".json"
    ),
}

InstanceSource = Union[str, Dict[str, Any]]  # file path or generator keyword arguments


# ---------- plans ----------
@dataclass(frozen=True)
class RunTask:
    domain: str
    instance: InstanceSource
    algorithm: str
    seed: int
    budget: RunBudget
    intensity: float = DEFAULT_INTENSITY
    depth: float = DEFAULT_DEPTH


@dataclass
class PlanCell:
    domain: str
    instance: InstanceSource
    algorithms: List[str]
    seeds: List[int]
    budget: RunBudget
    intensity: float = DEFAULT_INTENSITY
    depth: float = DEFAULT_DEPTH


@dataclass
class ExperimentPlan:
    cells: List[PlanCell]
    out: Path = field(default_factory=lambda: Path(default_out()))

    @classmethod
    def from_dict(cls, data: dict, base: Path = Path(".")) -> "ExperimentPlan":
        default_budget = data.get("budget", {"mode": "evaluations", "limit": DEFAULT_BUDGET_EVALUATIONS})
        cells = []
        try:
            for raw in data["cells"]:
                instance = raw["instance"]
                if isinstance(instance, str):
                    instance = str((base / instance).resolve())
                cells.append(
                    PlanCell(
                        domain=raw["domain"],
                        instance=instance,
                        algorithms=list(raw.get("algorithms") or [raw["algorithm"]]),
                        seeds=[int(s) for s in raw["seeds"]],
                        budget=RunBudget.from_dict(raw.get("budget", default_budget)),
                        intensity=float(raw.get("intensity", DEFAULT_INTENSITY)),
                        depth=float(raw.get("depth", DEFAULT_DEPTH)),
                    )
                )
        except (KeyError, TypeError, ValueError) as exc:
            raise PlanError(f"malformed plan: {exc!r}")
        return cls(cells, Path(data.get("out", default_out())))

    @classmethod
    def load(cls, path: Union[str, Path]) -> "ExperimentPlan":
        path = Path(path)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise PlanError(f"cannot read plan {path}: {exc}")
        return cls.from_dict(data, base=path.parent)

    def validate(self) -> None:
        problems = []
        for k, cell in enumerate(self.cells):
            where = f"cell {k} ({cell.domain})"
            if cell.domain not in DOMAINS:
                problems.append(f"{where}: unknown domain, choose from {sorted(DOMAINS)}")
            for name in cell.algorithms:
                if name not in ALGORITHMS:
                    problems.append(f"{where}: unknown algorithm {name!r}")
            if isinstance(cell.instance, str) and not Path(cell.instance).is_file():
                problems.append(f"{where}: instance file {cell.instance} does not exist")
            elif isinstance(cell.instance, dict) and cell.domain in DOMAINS:
                try:
                    load_instance(cell.domain, cell.instance)
                except (TypeError, ValueError) as exc:
                    problems.append(f"{where}: bad generator arguments {cell.instance}: {exc}")
            if len(set(cell.seeds)) != len(cell.seeds) or not cell.seeds:
                problems.append(f"{where}: seeds must be distinct and non-empty, got {cell.seeds}")
            if cell.budget.limit <= 0:
                problems.append(f"{where}: budget must be positive")
            if not (0 <= cell.intensity <= 1 and 0 <= cell.depth <= 1):
                problems.append(f"{where}: intensity and depth must lie in [0, 1]")
        if problems:
            raise PlanError("invalid plan:\n  " + "\n  ".join(problems))

    def tasks(self) -> List[RunTask]:
        return [
            RunTask(cell.domain, cell.instance, algorithm, seed, cell.budget, cell.intensity, cell.depth)
            for cell in self.cells
            for algorithm in cell.algorithms
            for seed in cell.seeds
        ]


# ---------- running ----------
def load_instance(domain: str, source: InstanceSource):
    entry = DOMAINS[domain]
    if isinstance(source, dict):
        return entry.generate(**source)
    return entry.read(Path(source))


def execute(task: RunTask) -> Tuple[str, str]:
    """Run one task; returns (result file name, JSON text). Runs in worker processes."""
    entry = DOMAINS[task.domain]
    instance = load_instance(task.domain, task.instance)
    domain = entry.factory(task.seed)
    domain.set_intensity_of_mutation(task.intensity)
    domain.set_depth_of_search(task.depth)
    domain.load_instance(instance, getattr(instance, "name", "") or Path(str(task.instance)).stem)
    result = run(make_algorithm(task.algorithm, task.seed), domain, task.budget, task.seed)
    name = f"{result.domain}__{result.instance}__{result.algorithm}__s{result.seed}.json"
    return name, result.to_json()


def write_atomic(path: Path, text: str) -> None:
    handle, temp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    with os.fdopen(handle, "w", encoding="utf-8") as f:
        f.write(text)
    os.replace(temp, path)


def sha256_of(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def run_plan(plan: ExperimentPlan, jobs: int = 1) -> int:
    plan.validate()
    tasks = plan.tasks()
    plan.out.mkdir(parents=True, exist_ok=True)
    logger.info("running %d tasks into %s with %d worker(s)", len(tasks), plan.out, jobs)

    written: Dict[str, str] = {}
    failures = []

    def collect(task: RunTask, outcome) -> None:
        try:
            name, text = outcome()
        except (XdhhError, OSError, ValueError) as exc:
            logger.error("%s/%s seed %d failed: %s", task.domain, task.algorithm, task.seed, exc)
            failures.append(
                {"domain": task.domain, "instance": str(task.instance), "algorithm": task.algorithm,
                 "seed": task.seed, "error": str(exc)}
            )
            return
        path = plan.out / name
        write_atomic(path, text)
        written[name] = sha256_of(path)

    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [(task, pool.submit(execute, task)) for task in tasks]
            for task, future in futures:
                collect(task, future.result)
    else:
        for task in tasks:
            collect(task, lambda t=task: execute(t))

    manifest = {"files": dict(sorted(written.items())), "failures": failures}
    write_atomic(plan.out / MANIFEST, json.dumps(manifest, indent=2) + "\n")
    if failures:
        logger.error("%d of %d runs failed; see %s", len(failures), len(tasks), plan.out / MANIFEST)
        return 1
    return 0


def verify(directory: Path) -> List[str]:
    """Names of manifest entries that are missing or whose hash changed."""
    try:
        manifest = json.loads((directory / MANIFEST).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise PlanError(f"cannot read {directory / MANIFEST}: {exc}")
    bad = []
    for name, digest in manifest["files"].items():
        path = directory / name
        if not path.is_file() or sha256_of(path) != digest:
            bad.append(name)
    return bad


# ---------- commands ----------
def cmd_run(args) -> int:
    if args.plan:
        plan = ExperimentPlan.load(args.plan)
        if args.out:
            plan.out = Path(args.out)
    else:
        missing = [flag for flag in ("domain", "instance", "algorithm") if not getattr(args, flag)]
        if missing:
            raise PlanError(f"run needs --plan or all of --{', --'.join(missing)}")
        if args.budget_ms:
            budget = RunBudget.wall_clock(args.budget_ms)
        else:
            budget = RunBudget.evaluations(args.budget_evals or DEFAULT_BUDGET_EVALUATIONS)
        cell = PlanCell(
            args.domain, str(Path(args.instance).resolve()), [args.algorithm], args.seed,
            budget, args.intensity, args.depth,
        )
        plan = ExperimentPlan([cell], Path(args.out or default_out()))
    return run_plan(plan, jobs=args.jobs)


GENERATOR_ARGS = {
    "maxsat": lambda a: dict(num_vars=a.vars, clause_ratio=a.ratio, seed=a.seed),
    "binpacking": lambda a: dict(num_pieces=a.pieces, capacity=a.capacity, seed=a.seed),
    "flowshop": lambda a: dict(num_jobs=a.jobs, num_machines=a.machines, pmax=a.pmax, seed=a.seed),
    "personnel": lambda a: dict(employees=a.employees, days=a.days, shift_types=a.shift_types, seed=a.seed),
}


def cmd_generate(args) -> int:
    entry = DOMAINS[args.domain]
    kwargs = GENERATOR_ARGS[args.domain](args)
    if args.domain == "binpacking" and args.dist == "triplet":
        instance = binpacking.generate_triplet(args.pieces, args.capacity, args.seed)
    else:
        instance = entry.generate(**kwargs)
    out = Path(args.out or default_out())
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{instance.name}{entry.suffix}"
    entry.write(instance, path)
    print(path)
    return 0


def cmd_convert(args) -> int:
    source = Path(args.source)
    instance = flowshop.parse_taillard(source.read_text(encoding="utf-8"), name=source.stem)
    flowshop.write_flowshop(instance, Path(args.target))
    logger.info("converted %s: %d jobs x %d machines", source, instance.num_jobs, instance.num_machines)
    return 0


def render_report(report, console: Console) -> None:
    algorithms = list(report.ranks.columns)
    for domain, ranks in report.ranks.groupby(level="domain", sort=False):
        table = Table(title=f"Borda ranks: {domain}")
        table.add_column("instance")
        for name in algorithms:
            table.add_column(name, justify="right")
        for (_, instance), row in ranks.iterrows():
            medians = report.medians.loc[(domain, instance)]
            table.add_row(instance, *(f"{row[a]} ({medians[a]:g})" for a in algorithms))
        table.add_row("total", *(str(report.borda.subtotals.at[domain, a]) for a in algorithms), style="bold")
        console.print(table)

    overall = Table(title="Borda count, all domains")
    overall.add_column("domain")
    for name in algorithms:
        overall.add_column(name, justify="right")
    for domain, row in report.borda.subtotals.iterrows():
        overall.add_row(domain, *(str(row[a]) for a in algorithms))
    overall.add_row("total", *(str(report.borda.totals[a]) for a in algorithms), style="bold")
    console.print(overall)


def cmd_report(args) -> int:
    directory = Path(args.directory)
    results = load_results(directory)
    if not results:
        raise EmptyCell(f"no result files in {directory}")
    report = build_report(results)
    for path in write_report(report, Path(args.out) if args.out else directory):
        logger.info("wrote %s", path)
    render_report(report, Console())
    return 0


def cmd_verify(args) -> int:
    bad = verify(Path(args.directory))
    for name in bad:
        print(f"MISMATCH {name}")
    if not bad:
        print("manifest OK")
    return 1 if bad else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Cross-domain hyper-heuristic experiments")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    commands = parser.add_subparsers(dest="command", required=True)

    p = commands.add_parser("run", help="execute runs and write one JSON result per run")
    p.add_argument("--plan", help="JSON experiment plan")
    p.add_argument("--domain", choices=sorted(DOMAINS))
    p.add_argument("--instance", help="instance file")
    p.add_argument("--algorithm", choices=sorted(ALGORITHMS))
    p.add_argument("--seed", type=int, nargs="+", default=[0])
    budget = p.add_mutually_exclusive_group()
    budget.add_argument("--budget-evals", type=int, help=f"evaluation budget (default {DEFAULT_BUDGET_EVALUATIONS})")
    budget.add_argument("--budget-ms", type=int, help="wall-clock budget in milliseconds")
    p.add_argument("--intensity", type=float, default=DEFAULT_INTENSITY)
    p.add_argument("--depth", type=float, default=DEFAULT_DEPTH)
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    p.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./results)")
    p.set_defaults(handler=cmd_run)

    g = commands.add_parser("generate", help="write a random instance")
    kinds = g.add_subparsers(dest="domain", required=True)
    sat = kinds.add_parser("maxsat")
    sat.add_argument("--vars", type=int, default=50)
    sat.add_argument("--ratio", type=float, default=4.26)
    bpp = kinds.add_parser("binpacking")
    bpp.add_argument("--pieces", type=int, default=40)
    bpp.add_argument("--capacity", type=int, default=150)
    bpp.add_argument("--dist", choices=["uniform", "triplet"], default="uniform")
    fsp = kinds.add_parser("flowshop")
    fsp.add_argument("--jobs", type=int, default=20)
    fsp.add_argument("--machines", type=int, default=5)
    fsp.add_argument("--pmax", type=int, default=99)
    ros = kinds.add_parser("personnel")
    ros.add_argument("--employees", type=int, default=12)
    ros.add_argument("--days", type=int, default=28)
    ros.add_argument("--shift-types", type=int, default=3)
    for sub in (sat, bpp, fsp, ros):
        sub.add_argument("--seed", type=int, default=0)
        sub.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./results)")
    g.set_defaults(handler=cmd_generate)

    c = commands.add_parser("convert", help="convert foreign instance formats")
    formats = c.add_subparsers(dest="format", required=True)
    tai = formats.add_parser("taillard", help="Taillard flow shop file to the native format")
    tai.add_argument("source")
    tai.add_argument("target")
    c.set_defaults(handler=cmd_convert)

    r = commands.add_parser("report", help="Borda report over a results directory")
    r.add_argument("directory")
    r.add_argument("--out", help="where to write borda.csv / summary.json (default: the results directory)")
    r.set_defaults(handler=cmd_report)

    v = commands.add_parser("verify", help="re-hash the files listed in a manifest")
    v.add_argument("directory")
    v.set_defaults(handler=cmd_verify)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.handler(args)
    except XdhhError as exc:
        logger.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
