"""Command-line entry point: catalog | crit | estimate | flow | check | suite."""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .checks import DEFAULT_TOL, cross_check, prox_grad_run
from .critical import enumerate_critical_set
from .errors import CapabilityError, ConfigError, InsufficientData, RegmodError, UsageError
from .estimators import check_prox_regularity, estimate_all, sample_cloud
from .flow import integrate_flow, verify_flow_properties
from .model import (
    FunctionInstance,
    get_instance,
    load_catalog,
    prox_regularity_constant,
    sampling_coordinates,
)
from .report import canonical_json, kl_fit_csv, samples_csv, solver_csv, trajectory_csv

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3
DEFAULT_RADII = (0.2, 0.1, 0.05)
DEFAULT_N = 512
PROX_PAIRS = 1000
RUN_KEYS = {"id", "instance", "base", "radii", "n", "seed", "rho", "flow", "solver", "prox_pairs"}
SUITE_KEYS = {"name", "description", "seed", "output", "emit", "defaults", "runs"}


# ---------------------------------------------------------------- parsing helpers

def parse_vector(text: str) -> np.ndarray:
    text = text.strip()
    try:
        vals = json.loads(text) if text.startswith("[") else [float(t) for t in text.split(",") if t.strip()]
        return np.asarray(vals, dtype=float).ravel()
    except (ValueError, TypeError) as exc:
        raise UsageError(f"cannot read a vector from {text!r}") from exc


def resolve_base(instance: FunctionInstance, selector) -> np.ndarray:
    """A vector, or ``"crit:k"``: the point of critical piece ``k`` closest to the all-ones vector."""
    if isinstance(selector, str) and selector.startswith("crit:"):
        cs = enumerate_critical_set(instance)
        try:
            k = int(selector[5:])
            piece = cs.pieces[k]
        except (ValueError, IndexError) as exc:
            raise UsageError(f"{selector!r}: critical set has {len(cs.pieces)} pieces") from exc
        return piece.project(np.ones(instance.p))
    if isinstance(selector, str):
        return parse_vector(selector)
    return np.asarray(selector, dtype=float)


def parse_radii(text) -> tuple:
    if isinstance(text, str):
        text = parse_vector(text)
    return tuple(float(r) for r in text)


# ---------------------------------------------------------------- suite model

@dataclass(frozen=True)
class RunSpec:
    id: str
    instance: str
    base: object
    radii: tuple
    n: int
    seed: int
    rho: float | None = None
    flow: dict | None = None
    solver: dict | None = None
    prox_pairs: int = PROX_PAIRS


@dataclass(frozen=True)
class SuiteConfig:
    name: str
    runs: tuple
    output: str | None = None
    emit: dict = field(default_factory=lambda: {"json": True, "csv": True, "plotdata": True})
    tol: float = DEFAULT_TOL


def _seed(value, path) -> int:
    if value is None:
        raise ConfigError(path, "seed required")
    if isinstance(value, bool) or not isinstance(value, int) or not 0 <= value < 2 ** 64:
        raise ConfigError(path, "seed must be an integer in [0, 2^64)")
    return value


def parse_suite(cfg: dict, seed: int | None = None, tol: float | None = None) -> SuiteConfig:
    if not isinstance(cfg, dict):
        raise ConfigError("", "suite config must be a JSON object")
    extra = set(cfg) - SUITE_KEYS
    if extra:
        raise ConfigError(sorted(extra)[0], "unknown key")
    runs_cfg = cfg.get("runs")
    if not isinstance(runs_cfg, list) or not runs_cfg:
        raise ConfigError("runs", "need a nonempty list of runs")
    defaults = cfg.get("defaults", {})
    default_seed = seed if seed is not None else cfg.get("seed")
    runs, ids = [], set()
    for i, rc in enumerate(runs_cfg):
        path = f"runs[{i}]"
        if not isinstance(rc, dict):
            raise ConfigError(path, "run must be an object")
        extra = set(rc) - RUN_KEYS
        if extra:
            raise ConfigError(f"{path}.{sorted(extra)[0]}", "unknown key")
        if "instance" not in rc:
            raise ConfigError(f"{path}.instance", "missing")
        rid = rc.get("id", rc["instance"])
        if rid in ids:
            raise ConfigError(f"{path}.id", f"duplicate run id {rid!r}")
        ids.add(rid)
        n = rc.get("n", defaults.get("n", DEFAULT_N))
        if not isinstance(n, int) or n < 32:
            raise ConfigError(f"{path}.n", "must be an integer >= 32")
        runs.append(RunSpec(
            id=str(rid),
            instance=rc["instance"],
            base=rc.get("base", "crit:0"),
            radii=parse_radii(rc.get("radii", defaults.get("radii", DEFAULT_RADII))),
            n=n,
            seed=_seed(rc.get("seed", default_seed), f"{path}.seed"),
            rho=rc.get("rho"),
            flow=rc.get("flow"),
            solver=rc.get("solver"),
            prox_pairs=int(rc.get("prox_pairs", defaults.get("prox_pairs", PROX_PAIRS))),
        ))
    emit = {"json": True, "csv": True, "plotdata": True}
    emit.update(cfg.get("emit", {}))
    return SuiteConfig(
        name=cfg.get("name", "suite"),
        runs=tuple(runs),
        output=cfg.get("output"),
        emit=emit,
        tol=tol if tol is not None else float(defaults.get("tol", DEFAULT_TOL)),
    )


def load_suite(ref: str, seed: int | None = None, tol: float | None = None) -> SuiteConfig:
    path = Path(ref)
    if path.is_file():
        text = path.read_text()
    else:
        bundled = resources.files("regmod").joinpath("data", "suites", f"{ref}.json")
        if not bundled.is_file():
            raise ConfigError("suite", f"no suite file or bundled suite named {ref!r}")
        text = bundled.read_text()
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("suite", f"invalid JSON: {exc}") from exc
    return parse_suite(cfg, seed=seed, tol=tol)


# ---------------------------------------------------------------- one run

def _estimate_json(est) -> dict:
    return {
        "details": est.details,
        "divergence": est.divergence,
        "growth_factors": list(est.growth_factors),
        "per_radius": list(est.per_radius),
        "radii": list(est.radii),
        "samples_total": est.samples_total,
        "samples_used": est.samples_used,
        "status": "ok",
        "value": est.value,
    }


def _default_perturbation(instance: FunctionInstance, base: np.ndarray, size: float) -> np.ndarray:
    coords = sampling_coordinates(instance, base)
    x0 = base.copy()
    x0[coords] += size * np.where(np.arange(coords.size) % 2 == 0, 1.0, -1.0)
    return x0


def execute_run(run: RunSpec, tol: float = DEFAULT_TOL) -> dict:
    """Everything the suite computes for one (instance, base) pair.

    Returns the report dict, the CSV texts, and one line per failed check.
    """
    instance = get_instance(run.instance)
    base = resolve_base(instance, run.base)
    cs = enumerate_critical_set(instance)
    cloud = sample_cloud(instance, base, run.radii, run.n, run.seed, cs=cs)
    bundle = estimate_all(cloud)
    estimates = {}
    for key, est in (("kl", bundle.kl), ("subregularity", bundle.subregularity),
                     ("quadratic_growth", bundle.growth), ("luo_tseng", bundle.luo_tseng)):
        src = "growth" if key == "quadratic_growth" else key
        estimates[key] = _estimate_json(est) if est is not None else {
            "status": "unavailable", "reason": bundle.unavailable[src]}

    failures = []
    rho = run.rho if run.rho is not None else prox_regularity_constant(instance)
    if rho is None:
        estimates["prox_regularity"] = {"status": "unavailable", "reason": "no uniform prox-regularity constant"}
    else:
        pr = check_prox_regularity(instance, base, rho, run.radii[0], run.prox_pairs, run.seed)
        estimates["prox_regularity"] = {
            "delta": pr.delta, "pairs": pr.pairs, "passed": pr.passed, "rho": pr.rho,
            "status": "ok", "violation": pr.violation, "worst_slack": pr.worst_slack,
        }
        if not pr.passed:
            failures.append("prox-regularity certificate")

    report = cross_check(instance, base, bundle, rho=run.rho, tol=tol)
    failures += [f"check {c.id} ({c.name})" for c in report.checks if c.status == "fail"]

    files = {}
    if instance.convex:
        fc = run.flow or {}
        x0 = np.asarray(fc["x0"], float) if "x0" in fc else base + 1.0
        traj = integrate_flow(instance, x0, float(fc.get("tau", 0.25)), float(fc.get("T", 40.0)))
        fr = verify_flow_properties(traj, cs)
        flow = {"status": "ok", "x0": x0.tolist(), "tau": traj.tau, "T": traj.horizon, "monitors": fr.to_json()}
        if not fr.passed:
            failures.append("flow monitors")
        files["flow.csv"] = trajectory_csv(traj)
    else:
        flow = {"status": "skipped", "reason": "instance is not convex"}

    sc = run.solver or {}
    x0 = np.asarray(sc["x0"], float) if "x0" in sc else _default_perturbation(instance, base, 0.3)
    record = prox_grad_run(instance, x0, float(sc.get("tau", 1.0 / instance.L)), int(sc.get("K", 200)), cs=cs)
    solver = record.to_json() | {"x0": x0.tolist()}

    doc = {
        "base": base.tolist(),
        "checks": [c.to_json() for c in report.checks],
        "critical_set": {"pieces": len(cs.pieces), "max_dim": max((pc.dim for pc in cs.pieces), default=0)},
        "estimates": estimates,
        "failures": failures,
        "flow": flow,
        "instance": instance.name,
        "instance_config": instance.to_config(),
        "n": run.n,
        "premises": report.premises,
        "radii": list(run.radii),
        "run": run.id,
        "sample_count": len(cloud),
        "seed": run.seed,
        "solver": solver,
        "tol": tol,
        "version": __version__,
    }
    files["samples.csv"] = samples_csv(cloud)
    files["kl-fit.csv"] = kl_fit_csv(cloud)
    files["solver.csv"] = solver_csv(record)
    return {"id": run.id, "report": doc, "files": files, "failures": failures}


def _safe_run(args) -> dict:
    run, tol = args
    try:
        return execute_run(run, tol)
    except (CapabilityError, InsufficientData, UsageError, ConfigError) as exc:
        return {"id": run.id, "error": f"{run.id}: {type(exc).__name__}: {exc}"}


def _targets(cfg: SuiteConfig, out: Path) -> dict:
    names = {}
    for run in cfg.runs:
        paths = []
        if cfg.emit.get("json", True):
            paths.append(out / f"{run.id}.report.json")
        if cfg.emit.get("csv", True):
            paths.append(out / f"{run.id}.samples.csv")
            paths.append(out / f"{run.id}.flow.csv")
        if cfg.emit.get("plotdata", True):
            paths.append(out / f"{run.id}.kl-fit.csv")
            paths.append(out / f"{run.id}.solver.csv")
        names[run.id] = paths
    return names


def run_suite(cfg: SuiteConfig, out: str | Path | None = None, jobs: int = 1, force: bool = False,
              stderr=None) -> int:
    """Run every entry of the suite and write its artifacts; returns the exit status."""
    stderr = stderr or sys.stderr
    out = Path(out or cfg.output or f"{cfg.name}-out")
    targets = _targets(cfg, out)
    if not force:
        clash = [str(p) for ps in targets.values() for p in ps if p.exists()]
        if clash:
            print(f"error: refusing to overwrite {clash[0]} (use --force)", file=stderr)
            return EXIT_CONFIG
    out.mkdir(parents=True, exist_ok=True)
    work = [(run, cfg.tol) for run in cfg.runs]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_safe_run, work))
    else:
        results = [_safe_run(w) for w in work]

    status = EXIT_OK
    for res in results:
        if "error" in res:
            print(f"error: {res['error']}", file=stderr)
            status = EXIT_RUNTIME
            continue
        for path in targets[res["id"]]:
            kind = path.name[len(res["id"]) + 1:]
            if kind == "report.json":
                path.write_text(canonical_json(res["report"]))
            elif kind in res["files"]:
                path.write_text(res["files"][kind])
        for f in res["failures"]:
            print(f"fail: {res['id']}: {f}", file=stderr)
            if status == EXIT_OK:
                status = EXIT_FAIL
    return status


# ---------------------------------------------------------------- subcommands

def _write(text: str, out: str | None, force: bool) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    path = Path(out)
    if path.exists() and not force:
        raise UsageError(f"refusing to overwrite {path} (use --force)")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _need_seed(args) -> int:
    if args.seed is None:
        raise ConfigError("seed", "seed required")
    return args.seed


def cmd_catalog(args) -> int:
    rows = [
        {"description": inst.description, "family": inst.family, "name": name, "p": inst.p,
         "convex": inst.convex, "L": inst.L}
        for name, inst in sorted(load_catalog().items())
    ]
    if args.out:
        _write(canonical_json(rows), args.out, args.force)
    else:
        for r in rows:
            print(f"{r['name']:<20} {r['family']:<28} p={r['p']:<3} {r['description']}")
    return EXIT_OK


def cmd_crit(args) -> int:
    instance = get_instance(args.instance)
    cs = enumerate_critical_set(instance)
    doc = cs.to_json()
    if args.point:
        x = parse_vector(args.point)
        doc["query"] = {"point": x.tolist(), "distance": cs.distance(x)}
    _write(canonical_json(doc), args.out, args.force)
    return EXIT_OK


def cmd_estimate(args) -> int:
    seed = _need_seed(args)
    instance = get_instance(args.instance)
    base = resolve_base(instance, args.base)
    cloud = sample_cloud(instance, base, parse_radii(args.radii), args.n, seed)
    bundle = estimate_all(cloud)
    doc = {"base": base.tolist(), "instance": instance.name, "n": args.n, "radii": list(cloud.radii), "seed": seed}
    for key, est in (("kl", bundle.kl), ("subregularity", bundle.subregularity),
                     ("quadratic_growth", bundle.growth), ("luo_tseng", bundle.luo_tseng)):
        src = "growth" if key == "quadratic_growth" else key
        doc[key] = _estimate_json(est) if est is not None else {"status": "unavailable",
                                                                 "reason": bundle.unavailable[src]}
    if args.dump:
        _write(samples_csv(cloud), args.dump, args.force)
    _write(canonical_json(doc), args.out, args.force)
    return EXIT_OK


def cmd_flow(args) -> int:
    instance = get_instance(args.instance)
    traj = integrate_flow(instance, parse_vector(args.x0), args.tau, args.T)
    fr = verify_flow_properties(traj, enumerate_critical_set(instance), tol=args.tol or 1e-10)
    _write(trajectory_csv(traj), args.out, args.force)
    print(canonical_json(fr.to_json()), end="", file=sys.stderr if args.out is None else sys.stdout)
    return EXIT_OK if fr.passed else EXIT_FAIL


def cmd_check(args) -> int:
    seed = _need_seed(args)
    instance = get_instance(args.instance)
    base = resolve_base(instance, args.base)
    cloud = sample_cloud(instance, base, parse_radii(args.radii), args.n, seed)
    report = cross_check(instance, base, estimate_all(cloud), rho=args.rho,
                         tol=args.tol if args.tol is not None else DEFAULT_TOL)
    _write(canonical_json(report.to_json()), args.out, args.force)
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_suite(args) -> int:
    cfg = load_suite(args.config, seed=args.seed, tol=args.tol)
    return run_suite(cfg, out=args.out, jobs=args.jobs, force=args.force)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="random seed (required wherever sampling happens)")
    common.add_argument("--jobs", type=int, default=1, help="worker processes for suites")
    common.add_argument("--out", default=None, help="output file, or directory for suites")
    common.add_argument("--force", action="store_true", help="overwrite existing outputs")
    common.add_argument("--tol", type=float, default=None, help="relative tolerance of the implication checks")

    parser = argparse.ArgumentParser(prog="regmod", description="Regularity moduli of nonsmooth test functions.")
    parser.add_argument("--version", action="version", version=f"regmod {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("catalog", parents=[common], help="list the bundled instances")
    p.set_defaults(func=cmd_catalog)

    p = sub.add_parser("crit", parents=[common], help="enumerate the critical set")
    p.add_argument("instance")
    p.add_argument("--point", help="also report the distance from this point")
    p.set_defaults(func=cmd_crit)

    for name, func, helptext in (("estimate", cmd_estimate, "estimate the regularity moduli"),
                                 ("check", cmd_check, "cross-check the implications")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("instance")
        p.add_argument("--base", default="crit:0", help='base point: "1,1,0" or "crit:k"')
        p.add_argument("--radii", default=",".join(map(str, DEFAULT_RADII)))
        p.add_argument("--n", type=int, default=DEFAULT_N, help="samples per radius")
        if name == "estimate":
            p.add_argument("--dump", help="write the sample cloud as CSV")
        else:
            p.add_argument("--rho", type=float, default=None, help="prox-regularity constant")
        p.set_defaults(func=func)

    p = sub.add_parser("flow", parents=[common], help="integrate the subgradient flow")
    p.add_argument("instance")
    p.add_argument("--x0", required=True)
    p.add_argument("--tau", type=float, default=0.25)
    p.add_argument("--T", type=float, default=40.0)
    p.set_defaults(func=cmd_flow)

    p = sub.add_parser("suite", parents=[common], help="run a suite file or a bundled suite")
    p.add_argument("config", nargs="?", default="paper-examples")
    p.set_defaults(func=cmd_suite)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RegmodError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
