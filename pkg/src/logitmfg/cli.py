"""Command line entry point: parse a config, run a solver or study, write CSVs."""
from __future__ import annotations

import argparse
import dataclasses
import sys
import time
import warnings
from pathlib import Path
from typing import List, Optional


from . import csvio
from .config import RunConfig, parse_config, validate
from .errors import CflViolation, LogitMFGError, NotConverged, ParseError
from .experiments import convergence_study, delta_sweep, scenario_sweep
from .gld import solve_gld_stationary
from .mfg import cfl_limits, extract_turnpike_slice, solve_mfg

EXIT_OK, EXIT_SOLVER, EXIT_CONFIG = 0, 1, 2
COMMANDS = ("gld", "mfg", "convergence", "delta-sweep", "scenario-sweep")


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected true or false, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="logitmfg", description=__doc__)
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", type=Path, help="run configuration file")
    p.add_argument("--out", help="output directory (default from config)")
    p.add_argument("--stride", type=int, help="time steps between stored snapshots (0 = one per unit time)")
    p.add_argument("--strict-cfl", type=_bool, metavar="BOOL",
                   help="abort instead of warning when the step size has no stability guarantee")
    p.add_argument("--quiet", action="store_true", help="suppress non-error output")
    return p


class _Reporter:
    def __init__(self, quiet: bool):
        self.quiet = quiet
        self.lines: List[str] = []

    def add(self, key: str, value):
        self.lines.append(f"{key:<14}{value}")

    def progress(self, msg: str):
        if not self.quiet:
            print(f"  .. {msg}", flush=True)

    def flush(self, title: str):
        if not self.quiet:
            print(title)
            for line in self.lines:
                print("  " + line)
            sys.stdout.flush()


def _cfl_lines(rep: _Reporter, cfg: RunConfig, caught):
    lim = cfl_limits(cfg.model(), cfg.tsallis(), cfg.delta)
    rep.add("dt", f"{cfg.grid().dt:.6g}")
    if cfg.solver == "mfg":
        rep.add("dt_hjb", f"{lim.dt_hjb:.6g}")
    rep.add("dt_fp", "no guarantee" if lim.dt_fp is None else f"{lim.dt_fp:.6g}")
    rep.add("assumption2", "holds" if lim.assumption2_ok else "violated")
    for w in caught:
        rep.add("warning", str(w.message))


def _run_gld(cfg: RunConfig, out: Path, rep: _Reporter):
    grid = cfg.grid()
    stride = cfg.stride or csvio.auto_stride(grid)
    res = solve_gld_stationary(cfg.gld_config(grid, stride=stride), cfg.initial_masses(grid, "gld"))
    rep.add("steps", res.steps)
    rep.add("residual", f"{res.residual:.3e}")
    csvio.emit_stationary(out, grid, res.density)
    csvio.emit_density(out, grid, res.trajectory_array(), stride, times=res.times)


def _run_mfg(cfg: RunConfig, out: Path, rep: _Reporter):
    grid = cfg.grid()
    res = solve_mfg(cfg.mfg_config(grid), cfg.initial_masses(grid, "mfg"),
                    progress=lambda r, e: rep.progress(f"iteration {r}: residual {e:.3e}"))
    rep.add("iterations", res.log.iterations)
    rep.add("residual", f"{res.log.residuals[-1]:.3e}")
    fit = res.log.log10_fit()
    if fit:
        rep.add("log10 slope", f"{fit[0]:.4f}")
    stride = cfg.stride or csvio.auto_stride(grid)
    csvio.emit_stationary(out, grid, extract_turnpike_slice(res.density) / grid.dx)
    csvio.emit_density(out, grid, res.density.values, stride)
    csvio.emit_value(out, grid, res.value.values, stride)


def _run_convergence(cfg: RunConfig, out: Path, rep: _Reporter):
    r = convergence_study(cfg, progress=rep.progress)
    csvio.emit_report(out, "convergence", r.header, r.rows())
    for m in r.coarse_ms:
        rep.add(f"m={m}", "  ".join(f"{q}:{r.errors[(m, q)][0]:.3e}" for q in r.quantities))


def _run_delta_sweep(cfg: RunConfig, out: Path, rep: _Reporter):
    r = delta_sweep(cfg, progress=rep.progress)
    csvio.emit_report(out, "delta_sweep", r.header, r.rows())
    fit_rows = [] if r.slope is None else [(r.slope, r.intercept)]
    csvio.write_csv(out / "fit.csv", ("slope", "intercept"), fit_rows)
    for row in r.rows():
        rep.add(f"delta={row[0]:g}", "  ".join(f"{v:.4g}" for v in row[1:]))
    rep.add("slope", "absent" if r.slope is None else f"{r.slope:.4f}")


def _run_scenario_sweep(cfg: RunConfig, out: Path, rep: _Reporter):
    r = scenario_sweep(cfg, progress=rep.progress)
    grid = cfg.grid()
    header = ["x"]
    cols = []
    for label, dens in r.densities.items():
        for i, p in enumerate(dens):
            header.append(f"{label}:p_{i + 1}")
            cols.append(p)
    csvio.emit_report(out, "scenario", header, ([x] + [c[l] for c in cols]
                                                for l, x in enumerate(grid.centers)))
    if r.swap_ratios is not None:
        csvio.emit_report(out, "mass_swap", ("type", "median_ratio", "max_rel_deviation"),
                          ((i + 1, m, s) for i, (m, s) in enumerate(zip(r.swap_ratios, r.swap_spread))))
        rep.add("swap ratio", "  ".join(f"{v:.4g}" for v in r.swap_ratios))
    rep.add("scenarios", ", ".join(r.labels()))


RUNNERS = {
    "gld": _run_gld,
    "mfg": _run_mfg,
    "convergence": _run_convergence,
    "delta-sweep": _run_delta_sweep,
    "scenario-sweep": _run_scenario_sweep,
}


def _load(args) -> RunConfig:
    cfg = parse_config(args.config) if args.config else RunConfig()
    changes = {}
    if args.command in ("gld", "mfg"):
        changes["solver"] = args.command
    if args.out is not None:
        changes["out_dir"] = args.out
    if args.stride is not None:
        changes["stride"] = args.stride
    if args.strict_cfl is not None:
        changes["strict_cfl"] = args.strict_cfl
    return validate(dataclasses.replace(cfg, **changes)) if changes else cfg


def run_command(argv: Optional[List[str]] = None) -> int:
    """Run one subcommand; returns the process exit status."""
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    rep = _Reporter(args.quiet)
    try:
        cfg = _load(args)
    except ParseError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = csvio.resolve_out_dir(cfg.out_dir)
    start = time.perf_counter()
    status = EXIT_OK
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            RUNNERS[args.command](cfg, out, rep)
        except NotConverged as exc:
            status = EXIT_SOLVER
            rep.add("status", "not converged")
            rep.add("residual", f"{exc.residual:.3e}")
            print(f"solver error: {exc}", file=sys.stderr)
        except CflViolation as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        except LogitMFGError as exc:
            print(f"solver error: {type(exc).__name__}: {exc}", file=sys.stderr)
            return EXIT_SOLVER
    _cfl_lines(rep, cfg, caught)
    rep.add("wall time", f"{time.perf_counter() - start:.2f} s")
    rep.add("output", str(out))
    rep.flush(f"logitmfg {args.command} ({cfg.scenario})")
    return status


def main():
    sys.exit(run_command())


if __name__ == "__main__":
    main()
