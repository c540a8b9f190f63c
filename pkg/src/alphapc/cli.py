"""Command-line front end.

    alphapc solve    INSTANCE --alpha A [-p P] [--setting S] [--output csv|json|text]
    alphapc bounds   INSTANCE --alpha A [-p P]
    alphapc heur     INSTANCE --alpha A [-p P]
    alphapc validate INSTANCE SOLUTION.json [--alpha A] [-p P]
    alphapc bench    MANIFEST_OR_DIR [--workers W]

Exit codes: 0 success (a time-limited solve counts as success), 1 bad input,
2 internal error.  Use ``-`` as the instance path to read standard input.

Bench manifests are INI-style key/value files, one section per instance::

    [att48]
    file = tsplib/att48.tsp      ; relative to the manifest
    format = tsplib
    p = 10, 20, 30, 40
    alpha = 2, 3
    settings = 2HVSL

``p`` is omitted for pmed files (the header supplies it).  A ``[DEFAULT]``
section may hold shared keys.  When bench is given a directory instead, every
``*.tsp`` / ``*.txt`` file in it is run on the ``--p-grid`` x
``--alpha-grid`` x ``--settings`` grid.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .bnc import APC1_SETTINGS, APC2_SETTINGS, CSV_HEADER, BncConfig, default_time_limit, solve
from .bounds import all_bounds
from .heuristics import greedy_start
from .instance import (Instance, InstanceError, Solution, parse_pmed, parse_tsplib,
                       validate_solution)

EXIT_OK, EXIT_INPUT, EXIT_INTERNAL = 0, 1, 2
FORMATS = ("tsplib", "pmed")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


@dataclass
class RunSpec:
    command: str
    instances: list = field(default_factory=list)
    format: str | None = None
    p: int | None = None
    alpha: int | None = None
    setting: str = "2HVSL"
    seed: int = 0
    time_limit: float | None = None
    output: str = "csv"
    out_path: str | None = None
    solution: str | None = None
    workers: int = 1
    p_grid: list = field(default_factory=list)
    alpha_grid: list = field(default_factory=list)
    settings: list = field(default_factory=list)

    def check(self):
        if self.command not in ("solve", "bounds", "heur", "validate", "bench"):
            raise UsageError(f"unknown command {self.command!r}")
        if self.format is not None and self.format not in FORMATS:
            raise UsageError(f"unknown format {self.format!r}")
        if self.command in ("solve", "bounds", "heur") and self.alpha is None:
            raise UsageError("--alpha is required")
        if self.alpha is not None and self.p is not None and self.alpha > self.p:
            raise UsageError(f"alpha={self.alpha} exceeds p={self.p}")
        for s in [self.setting] + list(self.settings):
            if s not in APC1_SETTINGS + APC2_SETTINGS:
                raise UsageError(f"unknown setting {s!r}")


# ---------------------------------------------------------------- loading
def sniff_format(text: str) -> str:
    head = text.lstrip().split(None, 1)[0].upper() if text.strip() else ""
    return "tsplib" if head.rstrip(":") in ("NAME", "DIMENSION", "TYPE", "COMMENT",
                                            "EDGE_WEIGHT_TYPE", "NODE_COORD_SECTION") else "pmed"


def read_text(path: str) -> str:
    return sys.stdin.read() if path == "-" else Path(path).read_text(encoding="utf-8")


def _name(path: str) -> str:
    return "stdin" if path == "-" else Path(path).stem


def load_instance(path: str, fmt: str | None, p: int | None, alpha: int) -> Instance:
    text = read_text(path)
    return parse_instance(text, fmt or sniff_format(text), p, alpha, _name(path))


def parse_instance(text: str, fmt: str, p: int | None, alpha: int, name: str) -> Instance:
    if fmt == "tsplib":
        if p is None:
            raise UsageError("-p is required for tsplib instances")
        return parse_tsplib(text, p, alpha, name=name)
    if fmt == "pmed":
        if p is not None:
            raise UsageError("-p is not accepted for pmed instances (read from the header)")
        return parse_pmed(text, alpha, name=name)
    raise UsageError(f"unknown format {fmt!r}")


def solution_dict(inst: Instance, sol: Solution) -> dict:
    return {"instance": inst.name, "p": inst.p, "alpha": inst.alpha,
            "open": [j + 1 for j in sol.open], "objective": sol.objective}


def load_solution(path: str) -> dict:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise UsageError(f"{path}: not JSON ({e})") from e
    if not isinstance(data, dict) or "open" not in data or "objective" not in data:
        raise UsageError(f"{path}: expected an object with 'open' and 'objective'")
    return data


# ---------------------------------------------------------------- output
def _emit(spec: RunSpec, text: str):
    if spec.out_path:
        Path(spec.out_path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    w.writerows(rows)
    return buf.getvalue()


PMED_NUM_INIT_APC2 = 10


def make_config(setting: str, fmt: str, time_limit: float | None, seed: int) -> BncConfig:
    """Solver parameters; pmed instances seed fewer threshold rows."""
    tl = default_time_limit() if time_limit is None else time_limit
    cfg = BncConfig(setting=setting, time_limit=tl, seed=seed)
    if fmt == "pmed":
        cfg.num_init_apc2 = PMED_NUM_INIT_APC2
    return cfg


# ---------------------------------------------------------------- commands
def cmd_solve(spec: RunSpec) -> int:
    text = read_text(spec.instances[0])
    fmt = spec.format or sniff_format(text)
    inst = parse_instance(text, fmt, spec.p, spec.alpha, _name(spec.instances[0]))
    rep = solve(inst, make_config(spec.setting, fmt, spec.time_limit, spec.seed))
    if spec.output == "csv":
        _emit(spec, _csv([rep.csv_row(inst)]))
    elif spec.output == "json":
        d = solution_dict(inst, rep.incumbent) if rep.incumbent else {
            "instance": inst.name, "p": inst.p, "alpha": inst.alpha, "open": None,
            "objective": None}
        d["report"] = rep.to_dict()
        _emit(spec, json.dumps(d, indent=2) + "\n")
    else:
        lines = [f"instance  {inst.name} (n={inst.n}, p={inst.p}, alpha={inst.alpha})",
                 f"setting   {rep.setting}", f"status    {rep.status}",
                 f"UB        {rep.UB:.6f}", f"LB        {rep.LB:.6f}",
                 f"nodes     {rep.nodes}", f"seconds   {rep.seconds:.2f}"]
        if rep.incumbent:
            lines.append("open      " + " ".join(str(j + 1) for j in rep.incumbent.open))
        _emit(spec, "\n".join(lines) + "\n")
    return EXIT_OK


def cmd_bounds(spec: RunSpec) -> int:
    inst = load_instance(spec.instances[0], spec.format, spec.p, spec.alpha)
    reps = all_bounds(inst)
    d = {"instance": inst.name, "n": inst.n, "p": inst.p, "alpha": inst.alpha}
    d.update({k: r.value for k, r in reps.items()})
    d["iterations"] = {k: r.iterations for k, r in reps.items()}
    if spec.output == "text":
        _emit(spec, "".join(f"{k:14s}{r.value}\n" for k, r in reps.items()))
    else:
        _emit(spec, json.dumps(d, indent=2) + "\n")
    return EXIT_OK


def cmd_heur(spec: RunSpec) -> int:
    inst = load_instance(spec.instances[0], spec.format, spec.p, spec.alpha)
    sol = greedy_start(inst, spec.seed, BncConfig().start_heur)
    if spec.output == "text":
        _emit(spec, f"{sol.objective}\n" + " ".join(str(j + 1) for j in sol.open) + "\n")
    else:
        _emit(spec, json.dumps(solution_dict(inst, sol), indent=2) + "\n")
    return EXIT_OK


def cmd_validate(spec: RunSpec) -> int:
    data = load_solution(spec.solution)
    alpha = spec.alpha if spec.alpha is not None else data.get("alpha")
    if alpha is None:
        raise UsageError("alpha is neither given nor stored in the solution")
    text = read_text(spec.instances[0])
    fmt = spec.format or sniff_format(text)
    p = spec.p
    if fmt == "tsplib" and p is None:
        p = data.get("p")
    inst = load_instance(spec.instances[0], fmt, p, int(alpha))
    try:
        sol = Solution(tuple(int(j) - 1 for j in data["open"]), float(data["objective"]))
    except (TypeError, ValueError) as e:
        raise UsageError(f"malformed solution: {e}") from e
    problems = validate_solution(inst, sol)
    for msg in problems:
        print(msg)
    if not problems:
        print(f"ok: objective {sol.objective}")
    return EXIT_INPUT if problems else EXIT_OK


# ---------------------------------------------------------------- bench
@dataclass(frozen=True)
class BenchJob:
    path: str
    format: str
    p: int | None
    alpha: int
    setting: str


def _ints(s: str) -> list:
    try:
        return [int(t) for t in s.replace(",", " ").split()]
    except ValueError as e:
        raise UsageError(f"expected integers, got {s!r}") from e


def read_manifest(path: str) -> list:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        if not cp.read(path, encoding="utf-8"):
            raise UsageError(f"cannot read manifest {path}")
    except configparser.Error as e:
        raise UsageError(f"manifest {path}: {e}") from e
    base = Path(path).parent
    jobs = []
    for sec in cp.sections():
        s = cp[sec]
        if "file" not in s or "alpha" not in s:
            raise UsageError(f"manifest section [{sec}] needs 'file' and 'alpha'")
        f = str(base / s["file"])
        fmt = s.get("format") or sniff_format(read_text(f))
        if fmt not in FORMATS:
            raise UsageError(f"manifest section [{sec}]: unknown format {fmt!r}")
        ps = _ints(s["p"]) if fmt == "tsplib" else [None]
        settings = s.get("settings", "2HVSL").replace(",", " ").split()
        for p in ps:
            for a in _ints(s["alpha"]):
                for st in settings:
                    jobs.append(BenchJob(f, fmt, p, a, st))
    return jobs


def directory_jobs(spec: RunSpec, d: Path) -> list:
    files = sorted(f for f in d.iterdir() if f.suffix in (".tsp", ".txt") and f.is_file())
    jobs = []
    for f in files:
        fmt = spec.format or sniff_format(f.read_text(encoding="utf-8"))
        ps = (spec.p_grid or ([spec.p] if spec.p else [])) if fmt == "tsplib" else [None]
        if fmt == "tsplib" and not ps:
            raise UsageError(f"{f.name}: tsplib instance needs --p")
        for p in ps:
            for a in spec.alpha_grid or [spec.alpha or 2]:
                for st in spec.settings or [spec.setting]:
                    jobs.append(BenchJob(str(f), fmt, p, a, st))
    return jobs


def run_job(job: BenchJob, time_limit: float, seed: int) -> list:
    inst = load_instance(job.path, job.format, job.p, job.alpha)
    rep = solve(inst, make_config(job.setting, job.format, time_limit, seed))
    return rep.csv_row(inst) + [job.setting]


def cmd_bench(spec: RunSpec) -> int:
    target = Path(spec.instances[0])
    jobs = directory_jobs(spec, target) if target.is_dir() else read_manifest(str(target))
    for j in jobs:
        if j.p is not None and j.alpha > j.p:
            raise UsageError(f"{j.path}: alpha={j.alpha} exceeds p={j.p}")
    tl = default_time_limit() if spec.time_limit is None else spec.time_limit
    if spec.workers > 1:
        with ProcessPoolExecutor(spec.workers) as ex:
            rows = list(ex.map(run_job, jobs, [tl] * len(jobs), [spec.seed] * len(jobs)))
    else:
        rows = [run_job(j, tl, spec.seed) for j in jobs]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER + ["setting"])
    w.writerows(rows)
    _emit(spec, buf.getvalue())
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "bounds": cmd_bounds, "heur": cmd_heur,
            "validate": cmd_validate, "bench": cmd_bench}


def run(spec: RunSpec) -> int:
    spec.check()
    return COMMANDS[spec.command](spec)


# ---------------------------------------------------------------- argv
def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="alphapc", description="Exact solver for the alpha-neighbor p-center problem.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, need_alpha=True):
        sp.add_argument("--format", choices=FORMATS, help="instance format (default: sniffed)")
        sp.add_argument("-p", type=int, help="number of facilities (tsplib only)")
        sp.add_argument("--alpha", type=int, required=need_alpha, help="neighbor count")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", dest="out_path", help="write the report to this file")

    sp = sub.add_parser("solve", help="solve an instance by branch-and-cut")
    sp.add_argument("instance")
    common(sp)
    sp.add_argument("--setting", default="2HVSL", choices=APC1_SETTINGS + APC2_SETTINGS)
    sp.add_argument("--time-limit", type=float, help="seconds (default: $ALPHAPC_TIME_LIMIT or 1800)")
    sp.add_argument("--output", choices=("csv", "json", "text"), default="csv")

    sp = sub.add_parser("bounds", help="compute the lower bounds")
    sp.add_argument("instance")
    common(sp)
    sp.add_argument("--output", choices=("json", "text"), default="json")

    sp = sub.add_parser("heur", help="run the greedy start heuristic")
    sp.add_argument("instance")
    common(sp)
    sp.add_argument("--output", choices=("json", "text"), default="json")

    sp = sub.add_parser("validate", help="check a solution file against an instance")
    sp.add_argument("instance")
    sp.add_argument("solution")
    common(sp, need_alpha=False)

    sp = sub.add_parser("bench", help="run a manifest or a directory of instances")
    sp.add_argument("instance", metavar="manifest_or_dir")
    common(sp, need_alpha=False)
    sp.add_argument("--p-grid", type=_ints, default=[], help="p values for a directory run")
    sp.add_argument("--alpha-grid", type=_ints, default=[], help="alpha values for a directory run")
    sp.add_argument("--settings", type=lambda s: s.replace(",", " ").split(), default=[])
    sp.add_argument("--setting", default="2HVSL", choices=APC1_SETTINGS + APC2_SETTINGS)
    sp.add_argument("--time-limit", type=float)
    sp.add_argument("--workers", type=int, default=1)
    return ap


def spec_from_args(ns: argparse.Namespace) -> RunSpec:
    return RunSpec(command=ns.command, instances=[ns.instance], format=ns.format, p=ns.p,
                   alpha=ns.alpha, setting=getattr(ns, "setting", "2HVSL"), seed=ns.seed,
                   time_limit=getattr(ns, "time_limit", None),
                   output=getattr(ns, "output", "csv"), out_path=ns.out_path,
                   solution=getattr(ns, "solution", None), workers=getattr(ns, "workers", 1),
                   p_grid=getattr(ns, "p_grid", []), alpha_grid=getattr(ns, "alpha_grid", []),
                   settings=getattr(ns, "settings", []))


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    try:
        return run(spec_from_args(ns))
    except (UsageError, InstanceError, OSError, UnicodeDecodeError) as e:
        print(f"alphapc: error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as e:  # noqa: BLE001
        print(f"alphapc: internal error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
