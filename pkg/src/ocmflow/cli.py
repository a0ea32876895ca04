"""Command line entry point: ``ocmflow {run,check,export-mesh,validate}``.

Exit codes: 0 converged/ok, 1 failed check or validation, 2 invalid
configuration, 3 convexity lost, 4 budget exhausted.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .config import ConfigError, RunSpec, parse_config
from .diagnostics import Monitor, f_condition_check
from .flow import run
from .io import SeriesWriter, digest, read_field, write_field, write_manifest, write_mesh
from .orlicz import OrliczModel, check_hypotheses

EXIT_OK, EXIT_FAILED, EXIT_CONFIG, EXIT_CONVEXITY, EXIT_BUDGET = 0, 1, 2, 3, 4
_EXIT_FOR_REASON = {"converged": EXIT_OK, "convexity_lost": EXIT_CONVEXITY, "budget_exhausted": EXIT_BUDGET}

log = logging.getLogger("ocmflow")


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat()


def _field_meta(spec: RunSpec) -> dict:
    return {"k": spec.flow.k, "model": spec.flow.model.describe()}


def _hypothesis_mode(spec: RunSpec) -> str:
    return "thm2" if np.all(spec.flow.f.values == spec.flow.f.values.flat[0]) else "thm1"


class _FieldDumper:
    def __init__(self, spec: RunSpec):
        self.spec, self.paths, self.last = spec, [], None

    def __call__(self, record, state) -> None:
        self.last = state
        every = self.spec.output_every
        if state.step == 0 or (every and state.step % every == 0):
            self.dump(state)

    def dump(self, state) -> None:
        path = self.spec.output_dir / f"h_{state.step}.field"
        if path not in self.paths:
            write_field(path, state.h, {**_field_meta(self.spec), "t": repr(state.t), "step": state.step})
            self.paths.append(path)


def run_command(config: str, output_dir: Optional[str] = None) -> int:
    started = _now()
    try:
        spec = parse_config(config)
    except ConfigError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if output_dir:
        spec.output_dir = Path(output_dir)
    cfg = spec.flow
    spec.output_dir.mkdir(parents=True, exist_ok=True)

    # the hypotheses are sufficient conditions only: warn, keep going
    report = check_hypotheses(cfg.model, cfg.k, _hypothesis_mode(spec))
    warnings = [] if report.passed else report.lines()
    if _hypothesis_mode(spec) == "thm1" and cfg.grid.dim == 2:
        fc = f_condition_check(cfg.f, cfg.k, cfg.model.a)
        if not fc.passed:
            warnings.append(f"f condition fails: min eigenvalue {fc.min_eigenvalue:.6g} at angles {fc.angles}")
    for line in warnings:
        log.warning(line)

    series = SeriesWriter(spec.output_dir / "series.csv")
    dumper = _FieldDumper(spec)
    monitor = Monitor()
    try:
        result = run(cfg, spec.h0, [series, dumper, monitor])
    finally:
        series.close()
    dumper.dump(result.state)
    final_path = spec.output_dir / "h_final.field"
    write_field(final_path, result.state.h, {**_field_meta(spec), "t": repr(result.state.t),
                                             "step": result.state.step})

    final = monitor.records[-1] if monitor.records else None
    consistency = None
    if result.reason == "converged" and final is not None:
        consistency = final.residual_sup <= spec.residual_bound
        if not consistency:
            log.warning("converged but residual_sup %.3e exceeds residual_bound %.3e",
                        final.residual_sup, spec.residual_bound)
    files = [series.path, *dumper.paths, final_path]
    manifest = {
        "config": spec.echo,
        "config_path": str(Path(config).resolve()),
        "output_dir": str(spec.output_dir),
        "started": started,
        "finished": _now(),
        "termination": {"reason": result.reason, "message": result.message,
                        "steps": result.state.step, "t": result.state.t},
        "final_diagnostics": None if final is None else
        {**dict(zip(("t", "dt", "J", "V", "eta"), final.row()[:5])),
         **{n: getattr(final, n) for n in ("residual_sup", "residual_l2", "holder_gap", "min_radius",
                                           "c_ls", "stationarity")}},
        "fixed_point_consistent": consistency,
        "monitor": {"violations": monitor.violations, "J_drift": monitor.J_drift if final else None,
                    "bounds": monitor.bounds() if final else None},
        "warnings": warnings,
        "files": {p.name: {"sha256": digest(p), "bytes": p.stat().st_size} for p in files},
    }
    write_manifest(spec.output_dir / "manifest", manifest)
    print(f"{result.reason}: t={result.state.t:.6g} steps={result.state.step}"
          + (f" residual_sup={final.residual_sup:.3e}" if final else "")
          + (f" ({result.message})" if result.message else ""))
    return _EXIT_FOR_REASON[result.reason]


def check_command(config: Optional[str], p: Optional[float], a: Optional[float], k: int,
                  mode: Optional[str]) -> int:
    f_report = None
    if config is not None:
        try:
            spec = parse_config(config)
        except ConfigError as exc:
            print(f"invalid configuration: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        model, k = spec.flow.model, spec.flow.k
        mode = mode or _hypothesis_mode(spec)
        if mode == "thm1" and spec.grid.dim == 2:
            f_report = f_condition_check(spec.flow.f, k, model.a)
    else:
        if p is None:
            print("check needs a config file or --p", file=sys.stderr)
            return EXIT_CONFIG
        model, mode = OrliczModel.power(p, a), mode or "thm1"
    report = check_hypotheses(model, k, mode)
    print("\n".join(report.lines()))
    ok = report.passed
    if f_report is not None:
        ok = ok and f_report.passed
        print(f"  [{'PASS' if f_report.passed else 'FAIL'}] f_condition: min eigenvalue "
              f"{f_report.min_eigenvalue:.6g} at node {tuple(int(i) for i in f_report.node)} angles {f_report.angles}")
    return EXIT_OK if ok else EXIT_FAILED


def export_mesh_command(field_path: str, out: Optional[str]) -> int:
    try:
        field, _ = read_field(field_path)
    except (OSError, ValueError) as exc:
        print(f"cannot read field dump: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(out) if out else Path(field_path).with_suffix(".obj")
    write_mesh(out, field)
    print(f"wrote {out}")
    return EXIT_OK


def validate_command() -> int:
    from .validate import run_suite

    reports = run_suite()
    for r in reports:
        print(r.line())
    return EXIT_OK if all(r.passed for r in reports) else EXIT_FAILED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ocmflow", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="integrate a configured flow to stationarity")
    p_run.add_argument("config")
    p_run.add_argument("--output-dir", help="overrides output.dir and the environment variable")

    p_check = sub.add_parser("check", help="sampled hypothesis checks only")
    p_check.add_argument("config", nargs="?")
    p_check.add_argument("--p", type=float, help="power-family exponent (without a config)")
    p_check.add_argument("--a", type=float)
    p_check.add_argument("--k", type=int, default=1)
    p_check.add_argument("--mode", choices=("thm1", "thm2"))

    p_mesh = sub.add_parser("export-mesh", help="field dump to Wavefront OBJ")
    p_mesh.add_argument("field")
    p_mesh.add_argument("-o", "--output")

    sub.add_parser("validate", help="compare the pipeline against the reference oracles")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if args.command == "run":
        return run_command(args.config, args.output_dir)
    if args.command == "check":
        return check_command(args.config, args.p, args.a, args.k, args.mode)
    if args.command == "export-mesh":
        return export_mesh_command(args.field, args.output)
    return validate_command()


if __name__ == "__main__":
    sys.exit(main())
