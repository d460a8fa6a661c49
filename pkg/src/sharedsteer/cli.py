"""Command-line front end: ``sharedsteer synth | simulate | verify | export-sdpa``.

Exit codes: 0 ok, 1 usage or I/O error, 2 infeasible synthesis, 3 constraint
violation in a simulation, 4 verification failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import invariants
from .config import ENV_VAR, ConfigError, load_config, load_scenario
from .gainsfile import GainsFileError, dumps_gains, loads_gains
from .sdpa import export_sdpa
from .sim import PRESETS, ConfigurationError, SimulationError, check_constraints, lyapunov_trace, preset, run
from .synthesis import (
    AssemblyError, CertificateRejected, SynthesisInfeasible, assemble_problem, bisect_tau1,
    synthesize, verify_certificate,
)

EXIT_OK, EXIT_IO, EXIT_INFEASIBLE, EXIT_CONSTRAINT, EXIT_VERIFY = 0, 1, 2, 3, 4

log = logging.getLogger("sharedsteer")


class UsageError(Exception):
    pass


def _config(args):
    paths = [args.config] if args.config else []
    return load_config(paths, args.set or [])


def _write(path, text):
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _read_gains(path):
    if not path or not os.path.isfile(path):
        raise FileNotFoundError(f"gains file not found: {path}")
    return loads_gains(Path(path).read_text(encoding="utf-8"))


def _margin_summary(margins: dict) -> list:
    fams = {}
    for name, val in margins.items():
        fam = name.split("[")[0]
        fams[fam] = min(fams.get(fam, np.inf), val)
    return [f"  min margin {fam:<16} {val: .3e}" for fam, val in fams.items()]


# -- subcommands ---------------------------------------------------------------

def cmd_synth(args) -> int:
    cfg = _config(args)
    ts = cfg.ts_model()
    spec = cfg.design_spec()
    if args.tau1 is not None:
        spec = dataclasses.replace(spec, tau_1=args.tau1)
    try:
        if args.tau1 is not None or spec.objective != "maximize_tau1":
            res = synthesize(ts, spec, cfg.solver)
            tau = spec.tau_1
        else:
            tau, res = bisect_tau1(ts, spec, cfg.solver)
    except SynthesisInfeasible as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        lo, hi = spec.tau1_bracket
        print(f"searched tau_1 bracket [{lo:g}, {hi:g}] with f_w_max = {cfg.design.f_w_max:g} N, "
              f"u_max = {cfg.design.u_max:g} N.m", file=sys.stderr)
        return EXIT_INFEASIBLE
    except CertificateRejected as exc:
        print(f"certificate rejected: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    spec = dataclasses.replace(spec, tau_1=tau)
    rep = verify_certificate(ts, spec, res)
    lines = [
        f"T-S model fingerprint {ts.fingerprint()}",
        f"tau_1 = {res.tau_1:.6g}  tau_2 = {res.tau_2:.6g}  gamma = {res.gamma:.6g}",
        f"solver: {res.solver.get('status')} after {res.solver.get('iterations')} Newton steps",
    ]
    for t, ok in res.solver.get("tau1_trace", []):
        lines.append(f"  tau_1 = {t:.5g}: {'feasible' if ok else 'infeasible'}")
    lines += _margin_summary(rep.margins)
    lines += rep.lines()
    report = "\n".join(lines) + "\n"
    print(report, end="")
    _write(args.out, dumps_gains(res, spec))
    if args.report:
        _write(args.report, report)
    if not rep.ok:
        print("the returned certificate failed independent verification", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


def _plot(trace, path):
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError as exc:  # optional dependency
        raise UsageError("plotting needs matplotlib (pip install 'artifact[plot]')") from exc
    fig, axes = plt.subplots(4, 1, sharex=True, figsize=(7, 8))
    for ax, (col, label) in zip(axes, [("y_l", "y_l [m]"), ("T_c", "T_c [N.m]"),
                                       ("T_d", "T_d [N.m]"), ("mu", "mu")]):
        ax.plot(trace.t, trace[col], lw=0.8)
        ax.set_ylabel(label)
        ax.grid(True, lw=0.3)
    axes[-1].set_xlabel("t [s]")
    fig.tight_layout()
    matplotlib.rcParams["svg.hashsalt"] = "sharedsteer"
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def _simulate_one(sc, res, ts, cfg, spec, out_dir: Path, plot: bool):
    trace = run(sc, res, ts, cfg.vehicle, cfg.driver, cfg.weighting, cfg.activity)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "trace.csv"
    csv_path.write_text(trace.to_csv(), encoding="utf-8")
    if plot:
        _plot(trace, out_dir / "trace.svg")
    cons = check_constraints(trace, spec.h_rows)
    dec = lyapunov_trace(trace, res.X, res.tau_1)
    print(f"[{sc.name}] {len(trace)} samples -> {csv_path}")
    for line in cons.lines():
        print("  " + line)
    print(f"  max |u_raw| = {np.abs(trace['u_raw']).max():.3f}, max |T_c| = {np.abs(trace['T_c']).max():.3f}")
    print(f"  decay windows {dec.checked}, violations {dec.violations}, max V {dec.max_V:.4f}")
    if trace.meta.get("clamped"):
        print(f"  scheduling inputs clamped {trace.meta['clamped']} times")
    return cons.ok


def cmd_simulate(args) -> int:
    cfg = _config(args)
    ts = cfg.ts_model()
    res, gspec = _read_gains(args.gains)
    if res.fingerprint != ts.fingerprint():
        print(f"gains file was built for T-S model {res.fingerprint}, configuration gives "
              f"{ts.fingerprint()}", file=sys.stderr)
        return EXIT_IO
    spec = cfg.design_spec()
    if args.all_presets:
        scenarios = [preset(n) for n in PRESETS]
    elif args.preset:
        scenarios = [preset(args.preset)]
    elif args.scenario:
        scenarios = [load_scenario(args.scenario)]
    else:
        raise UsageError("give --preset, --scenario or --all-presets")
    if args.dt is not None:
        scenarios = [dataclasses.replace(s, dt=args.dt) for s in scenarios]
    ok = True
    for sc in scenarios:
        ok &= _simulate_one(sc, res, ts, cfg, spec, Path(args.out) / sc.name, args.plot)
    return EXIT_OK if ok else EXIT_CONSTRAINT


def cmd_verify(args) -> int:
    cfg = _config(args)
    ts = cfg.ts_model()
    res, gspec = _read_gains(args.gains)
    spec = dataclasses.replace(cfg.design_spec(), tau_1=res.tau_1)
    if gspec.h_rows != spec.h_rows or gspec.u_max != spec.u_max:
        print("note: design data stored in the gains file differ from the configuration; "
              "checking against the gains file", file=sys.stderr)
        spec = gspec
    spec = dataclasses.replace(spec, R=gspec.R, rho=gspec.rho)
    results = invariants.run_all(ts, spec, res, cfg.vehicle, cfg.driver, samples=args.samples)
    for name, passed, detail in results:
        print(f"{'PASS' if passed else 'FAIL'} {name}" + (f" ({detail})" if detail else ""))
    return EXIT_OK if all(p for _, p, _ in results) else EXIT_VERIFY


def cmd_export_sdpa(args) -> int:
    cfg = _config(args)
    spec = cfg.design_spec()
    if args.tau1 is not None:
        spec = dataclasses.replace(spec, tau_1=args.tau1)
    text = export_sdpa(assemble_problem(cfg.ts_model(), spec))
    _write(args.out, text)
    print(f"wrote {args.out} ({text.count(chr(10))} lines)")
    return EXIT_OK


# -- entry point ---------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sharedsteer", description="Shared steering control: gain synthesis, simulation and checks.")
    ap.add_argument("--config", help=f"INI configuration file (default: ${ENV_VAR} if set)")
    ap.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                    help="override a configuration value; may be repeated")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="synthesize PDC gains and write a gains file")
    p.add_argument("--out", default="gains.json")
    p.add_argument("--report", help="also write the synthesis report here")
    p.add_argument("--tau1", type=float, help="solve at this decay rate instead of bisecting")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("simulate", help="run a closed-loop scenario and write a CSV trace")
    p.add_argument("--gains", required=True)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--preset", choices=PRESETS)
    g.add_argument("--scenario", help="scenario INI file")
    g.add_argument("--all-presets", action="store_true")
    p.add_argument("--out", default="out", help="output directory (one subdirectory per scenario)")
    p.add_argument("--dt", type=float, help="override the scenario time step")
    p.add_argument("--plot", action="store_true", help="also write an SVG line plot")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="check a gains file and run the invariant suites")
    p.add_argument("--gains", required=True)
    p.add_argument("--samples", type=int, default=1000)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("export-sdpa", help="write the synthesis problem in SDPA sparse format")
    p.add_argument("--out", default="problem.dat-s")
    p.add_argument("--tau1", type=float)
    p.set_defaults(func=cmd_export_sdpa)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_IO
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (FileNotFoundError, PermissionError, IsADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ConfigError, GainsFileError, ConfigurationError, AssemblyError, UsageError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except SimulationError as exc:
        print(f"simulation aborted: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
