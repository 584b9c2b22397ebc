"""Batch front end: ``geolangevin run|check|list-models``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .analysis import (collect_samples, conserved_monitor, coordinates_and_squares, stationary_law,
                       stationary_test, weak_consistency)
from .analysis.stationary import FREE
from .config import MANIFEST_VERSION, RunConfig, load
from .errors import (ChartBoundary, ConfigError, InsufficientSamples,
                     NoConvergence, NumericalBlowup, OffManifold, ParticleCollision, RankDeficient,
                     SingularMetric)
from .integrators import Trajectory, simulate
from .models import CATALOG, ModelKind, ModelSpec, get_model

log = logging.getLogger("geolangevin")

EXIT_OK, EXIT_ANALYSIS, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3
NUMERICAL_ERRORS = (NumericalBlowup, NoConvergence, ParticleCollision, RankDeficient, SingularMetric,
                    OffManifold, ChartBoundary)


# writers

def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def trajectory_table(tr: Trajectory, unwrapped: bool) -> tuple[list[str], np.ndarray]:
    """Header names and rows (t, wrapped states[, unwrapped periodic columns])."""
    names = ["t", *tr.schema.names]
    cols = [tr.times[:, None], tr.wrapped_states()]
    if unwrapped:
        per = np.flatnonzero(tr.schema.periodic)
        names += [f"{tr.schema.names[i]}_unwrapped" for i in per]
        cols.append(tr.states[:, per])
    return names, np.concatenate(cols, axis=1)


def write_csv(path: Path, names: Sequence[str], rows: np.ndarray) -> None:
    with open(path, "w", newline="\n", encoding="ascii") as fh:
        fh.write(",".join(names) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_jsonl(path: Path, names: Sequence[str], rows: np.ndarray) -> None:
    with open(path, "w", newline="\n", encoding="ascii") as fh:
        for row in rows:
            fh.write(json.dumps(dict(zip(names, (float(v) for v in row)))) + "\n")


def write_plot_data(directory: Path, stem: str, spec: ModelSpec, tr: Trajectory) -> list[Path]:
    """Ambient positions as CSV plus a gnuplot script that draws them."""
    xi = get_model(spec.kind).embed(spec, tr.states)["xi"]
    xi = xi.reshape(len(tr.times), -1)
    dim = spec.swarm.d if spec.swarm is not None else xi.shape[1]
    npart = xi.shape[1] // dim
    if npart > 1:
        names = ["t"] + [f"x{k + 1}_{j + 1}" for k in range(npart) for j in range(dim)]
    else:
        names = ["t"] + [f"x{j + 1}" for j in range(dim)]
    data = directory / f"{stem}_path.csv"
    write_csv(data, names, np.concatenate([tr.times[:, None], xi], axis=1))
    script = directory / f"{stem}_path.gp"
    cmd = "splot" if dim == 3 else "plot"
    parts = []
    for k in range(npart):
        c = [2 + k * dim + j for j in range(min(dim, 3))]
        if dim == 1:
            c = [1, 2 + k]
        parts.append(f"'{data.name}' using {':'.join(map(str, c))} with lines title '{stem} {k + 1}'")
    lines = ["set datafile separator ','", "set key off" if npart == 1 else "set key outside"]
    if dim == 3:
        lines.append("set view equal xyz")
    else:
        lines.append("set size ratio -1")
    lines.append(f"{cmd} " + ", \\\n     ".join(parts))
    script.write_text("# gnuplot script: gnuplot -p " + script.name + "\n" + "\n".join(lines) + "\n")
    return [data, script]


# analysis

def _weak(run, cfg: RunConfig, block: dict) -> dict:
    model = get_model(run.spec.kind)
    names = model.schema(run.spec).names
    if "state" in block:
        state = np.asarray(block["state"], dtype=float)
    elif "initial" in cfg.document["sim"]:
        state = np.asarray(cfg.document["sim"]["initial"], dtype=float)
    else:
        state = model.default_state(run.spec)
    reports = weak_consistency(run.spec, coordinates_and_squares(names), state,
                               block.get("h", cfg.sim.dt), block.get("n", 100_000),
                               block.get("seed", cfg.sim.seed), cfg.sim.scheme,
                               control_variate=block.get("control_variate", True))
    return {"passed": all(r.passed for r in reports), "functions": [r.to_dict() for r in reports]}


def _stationary(run, trajs, block: dict) -> dict:
    law = stationary_law(run.spec)
    bins = block.get("bins") or {n: 50 for n, s in zip(law.names, law.supports) if s != FREE}
    samples = collect_samples(trajs, block.get("burn_in", 0.2))
    try:
        rep = stationary_test(samples, run.spec, bins, block.get("tv_threshold", 0.02),
                              block.get("var_rtol", 0.05), block.get("min_samples", 1000))
    except InsufficientSamples as exc:
        return {"passed": False, "error": str(exc)}
    return rep.to_dict()


def _monitor(run, trajs, block: dict) -> dict:
    per = [conserved_monitor(run.spec, tr, block.get("max_residual", 1e-8), block.get("invariant_tol"))
           for tr in trajs]
    inv: dict[str, float] = {}
    for p in per:
        for k, v in p["invariants"].items():
            inv[k] = max(inv.get(k, 0.0), v)
    return {"passed": all(p["passed"] for p in per),
            "max_residual": max(p["max_residual"] for p in per),
            "invariants": inv}


def _summary(trajs: list[Trajectory]) -> dict:
    diags = [t.diagnostics for t in trajs]
    return {
        "trajectories": len(trajs),
        "residual_names": list(diags[0].residual_names),
        "max_residual": max(d.max_residual for d in diags),
        "max_residual_before_repair": max(d.max_residual_before_repair for d in diags),
        "repairs": int(sum(d.repairs for d in diags)),
        "truncated": int(sum(d.truncated for d in diags)),
        "events": [{"trajectory": t.index, **e} for t in trajs for e in t.diagnostics.events],
        "finite_difference_derivatives": any(d.finite_difference_derivatives for d in diags),
    }


# commands

def manifest(cfg: RunConfig) -> dict:
    return {"manifest_version": MANIFEST_VERSION, "package": "geolangevin", "version": __version__,
            "seed": cfg.sim.seed, "config": cfg.document}


def run(path: str | Path, unwrapped: bool = False) -> int:
    try:
        cfg = load(path)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    out = cfg.output_dir
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        log.error("cannot create output directory %s: %s", out, exc)
        return EXIT_CONFIG
    (out / "manifest.json").write_text(json.dumps(manifest(cfg), indent=2, sort_keys=True) + "\n")
    unwrapped = unwrapped or cfg.output["unwrapped"]
    initial = cfg.document["sim"].get("initial")
    report: dict = {"version": __version__, "runs": []}
    passed = True
    for rn in cfg.runs:
        entry: dict = {"label": rn.label, "kind": rn.spec.kind.value}
        try:
            trajs = simulate(rn.spec, cfg.sim, None if initial is None else np.asarray(initial, float))
        except (ConfigError, OffManifold, ChartBoundary) as exc:
            # simulate raises the latter two only for an inadmissible initial state
            log.error("config error: %s", exc)
            return EXIT_CONFIG
        except NUMERICAL_ERRORS as exc:
            log.error("numerical failure in run %r: %s: %s", rn.label, type(exc).__name__, exc)
            entry["error"] = f"{type(exc).__name__}: {exc}"
            report["runs"].append(entry)
            _write_report(out, report, False)
            return EXIT_NUMERICAL
        prefix = f"traj_{rn.label}_" if rn.label else "traj_"
        for tr in trajs:
            stem = f"{prefix}{tr.index:04d}"
            names, rows = trajectory_table(tr, unwrapped)
            if "csv" in cfg.output["formats"]:
                write_csv(out / f"{stem}.csv", names, rows)
            if "jsonl" in cfg.output["formats"]:
                write_jsonl(out / f"{stem}.jsonl", names, rows)
            if cfg.output["emit_plot_data"]:
                write_plot_data(out, stem, rn.spec, tr)
        entry["diagnostics"] = _summary(trajs)
        analysis: dict = {}
        try:
            if "weak_check" in cfg.analysis:
                analysis["weak_check"] = _weak(rn, cfg, cfg.analysis["weak_check"])
            if "stationary_test" in cfg.analysis:
                analysis["stationary_test"] = _stationary(rn, trajs, cfg.analysis["stationary_test"])
            if "conserved_monitor" in cfg.analysis:
                analysis["conserved_monitor"] = _monitor(rn, trajs, cfg.analysis["conserved_monitor"])
        except NUMERICAL_ERRORS as exc:
            log.error("numerical failure during analysis: %s", exc)
            entry["analysis"] = analysis
            entry["error"] = f"{type(exc).__name__}: {exc}"
            report["runs"].append(entry)
            _write_report(out, report, False)
            return EXIT_NUMERICAL
        entry["analysis"] = analysis
        passed = passed and all(a.get("passed", False) for a in analysis.values())
        report["runs"].append(entry)
    _write_report(out, report, passed)
    if not passed:
        log.error("analysis failed; see %s", out / "report.json")
        return EXIT_ANALYSIS
    return EXIT_OK


def _write_report(out: Path, report: dict, passed: bool) -> None:
    report["passed"] = passed
    (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True, default=float) + "\n")


def check(path: str | Path) -> int:
    try:
        cfg = load(path)
    except ConfigError as exc:
        print(f"invalid: {exc}")
        return EXIT_CONFIG
    for rn in cfg.runs:
        schema = get_model(rn.spec.kind).schema(rn.spec)
        label = f" [{rn.label}]" if rn.label else ""
        print(f"ok{label}: {rn.spec.kind.value}, state {','.join(schema.names)}")
    return EXIT_OK


def list_models(out=None) -> int:
    out = out or sys.stdout
    for kind in ModelKind:
        info = CATALOG[kind]
        where = "ambient" if info.ambient else "local"
        print(f"{kind.value}  [{where}]  {info.summary}", file=out)
        print(f"    equation:   {info.equation}", file=out)
        print(f"    parameters: {', '.join(info.parameters)}", file=out)
        spec = _example_spec(kind)
        if spec is not None:
            print(f"    state:      {', '.join(get_model(kind).schema(spec).names)}", file=out)
    return EXIT_OK


def _example_spec(kind: ModelKind) -> ModelSpec | None:
    from .models.spec import SwarmSpec
    if kind == ModelKind.SWARM:
        return ModelSpec(kind, swarm=SwarmSpec(K=2))
    return ModelSpec(kind)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="geolangevin",
                                description="Simulate and verify Langevin-type SDEs on submanifolds.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="simulate a config (or re-run a manifest)")
    r.add_argument("config")
    r.add_argument("--unwrapped", action="store_true",
                   help="add unwrapped copies of the periodic angle columns")
    c = sub.add_parser("check", help="validate a config without running it")
    c.add_argument("config")
    sub.add_parser("list-models", help="print the model catalog")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if args.command == "run":
        return run(args.config, args.unwrapped)
    if args.command == "check":
        return check(args.config)
    return list_models()


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
