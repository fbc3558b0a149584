"""Command-line front end: run, check, tighten and sweep the built-in scenarios.

Exit codes: 0 success, 2 usage or configuration error, 3 condition audit
failure, 4 runtime infeasibility / safety violation / simulation abort,
5 inconsistent data.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .model import ConfigurationError
from .scenarios import PRESETS, UnknownScenario, load_overrides, load_scenario
from .sim import (
    AuditFailure,
    SimConfig,
    SimulationError,
    audit,
    generate_dataset,
    run_closed_loop,
    write_summary,
    write_trace_csv,
)
from .tightening import (
    DataInconsistent,
    read_dataset_csv,
    rebuild_scenario,
    refine_all,
    write_bounds_report,
    write_dataset_csv,
)

log = logging.getLogger("acbf")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_AUDIT = 3
EXIT_RUNTIME = 4
EXIT_DATA = 5

SAFETY_TOL = 1e-6
SWEEP_FLAGS = ("dt", "t_end", "seed")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _positive_float(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not (v > 0 and math.isfinite(v)):
        raise argparse.ArgumentTypeError(f"must be positive and finite: {text!r}")
    return v


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1: {text!r}")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="acbf", description="Adaptive CBF safe control: scenario runner and audits")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="verb", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--scenario", required=True, help=f"preset id ({', '.join(PRESETS)})")
        p.add_argument("--config", type=Path, help="YAML/JSON file with numeric overrides")

    def sim_flags(p):
        p.add_argument("--dt", type=_positive_float, help="integration step (s)")
        p.add_argument("--t-end", type=_positive_float, help="horizon (s)")
        p.add_argument("--log-stride", type=_positive_int, help="log every k-th step")
        p.add_argument("--integrator", choices=("rk4", "euler"))
        p.add_argument("--data-driven", action="store_true", help="tighten bounds from a dataset first")
        p.add_argument("--seed", type=int, default=0, help="seed for generated datasets (default 0)")
        p.add_argument("--dataset", type=Path, help="dataset CSV used instead of a generated one")

    p = sub.add_parser("run", help="simulate a scenario and write trace + summary")
    common(p)
    sim_flags(p)
    p.add_argument("--out", type=Path, help="trace CSV path (default <scenario>.csv)")

    p = sub.add_parser("check", help="audit the initial-condition margin and K_BF on the scenario grid")
    common(p)
    p.add_argument("--data-driven", action="store_true", help="audit the tightened controller")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dataset", type=Path)

    p = sub.add_parser("tighten", help="tighten parameter bounds from a dataset")
    common(p)
    p.add_argument("--dataset", type=Path, help="dataset CSV (default: generated from --seed)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, help="bounds report path (default <scenario>.bounds.json)")

    p = sub.add_parser("sweep", help="run a scenario over a grid of one flag and tabulate")
    common(p)
    sim_flags(p)
    p.add_argument("--flag", choices=SWEEP_FLAGS, default="dt")
    p.add_argument("--values", required=True, help="comma-separated values of --flag")
    p.add_argument("--jobs", type=_positive_int, default=1, help="parallel workers (default 1)")
    p.add_argument("--out", type=Path, help="table CSV path (default <scenario>.sweep.csv)")
    return parser


def _derived(out: Path, suffix: str) -> Path:
    return out.with_name(out.stem + suffix)


def _scenario(args):
    overrides = load_overrides(args.config) if args.config else None
    return load_scenario(args.scenario, overrides)


def _sim_config(scenario, args) -> SimConfig:
    base = scenario.sim
    return SimConfig(dt=args.dt or base.dt, t_end=args.t_end or base.t_end,
                     integrator=args.integrator or base.integrator,
                     log_stride=args.log_stride or base.log_stride)


def _dataset(scenario, args):
    if args.dataset is None:
        return None
    return read_dataset_csv(args.dataset, scenario.system.dim, scenario.system.n)


def _fmt(v) -> str:
    return np.array2string(np.atleast_1d(np.asarray(v, dtype=float)), precision=6, separator=", ")


# ----------------------------------------------------------------------------
# verbs
# ----------------------------------------------------------------------------

def cmd_run(args) -> int:
    scenario = _scenario(args)
    config = _sim_config(scenario, args)
    out = args.out or Path(f"{scenario.name}.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    dataset = _dataset(scenario, args)
    try:
        result = run_closed_loop(scenario, config, data_driven=args.data_driven, seed=args.seed, dataset=dataset)
    except SimulationError as exc:
        if exc.trace is not None:
            write_trace_csv(exc.trace, out)
        dump = {"error": str(exc), "t": exc.t, "x": None if exc.x is None else exc.x.tolist()}
        with open(_derived(out, ".abort.json"), "w") as fh:
            json.dump(dump, fh, indent=2)
            fh.write("\n")
        print(f"{scenario.name}: simulation aborted: {exc}", file=sys.stderr)
        return EXIT_RUNTIME

    write_trace_csv(result.trace, out)
    write_summary(result.summary, _derived(out, ".summary.json"))
    if result.tightened is not None:
        write_bounds_report(result.tightened, _derived(out, ".bounds.json"))
        write_dataset_csv(result.dataset, _derived(out, ".dataset.csv"))
    s = result.summary
    print(f"{s.scenario}: min h = {s.min_h:.6g}, min h_bar = {s.min_h_bar:.6g}, "
          f"certificate slack = {s.min_certificate_slack:.6g}, rmse = {s.rmse_inside}, "
          f"max |u| = {s.max_abs_u:.6g}")
    print(f"trace written to {out}")
    if s.infeasible_count or s.min_h < -SAFETY_TOL:
        print(f"{s.scenario}: safety violated (min h = {s.min_h:.6g})", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_check(args) -> int:
    scenario = _scenario(args)
    if args.data_driven:
        dataset = _dataset(scenario, args)
        if dataset is None:
            dataset = generate_dataset(scenario, args.seed)
        scenario = rebuild_scenario(scenario, refine_all(dataset, scenario.system, scenario.prior),
                                    scenario.data_driven_gains)
    model = scenario.controller_model()
    cond, kbf = audit(scenario)
    print(f"scenario: {scenario.name} ({'diagonal' if scenario.system.diagonal else 'full'} input matrix)")
    print(f"mu_bar = {_fmt(model.mu_bar)}, nu_bar = {_fmt(model.nu_bar)}")
    label = "b" if scenario.system.diagonal else "b*"
    print(f"{label} = {_fmt(model.gains.b)}")
    print(f"initial-condition margin (iv): {cond.margin:.6f} {'PASS' if cond.passed else 'FAIL'}")
    print(f"K_BF grid audit: {kbf.checked} checked, {kbf.skipped_outside} outside the safe set, "
          f"{len(kbf.violations)} empty {'PASS' if kbf.passed else 'FAIL'}")
    for x, psi0, psi1 in kbf.violations[:10]:
        print(f"  empty at x = {_fmt(x)}: Psi0 = {psi0:.6g}, Psi1 = {_fmt(psi1)}")
    return EXIT_OK if cond.passed and kbf.passed else EXIT_AUDIT


def cmd_tighten(args) -> int:
    scenario = _scenario(args)
    dataset = _dataset(scenario, args)
    if dataset is None:
        dataset = generate_dataset(scenario, args.seed)
    if len(dataset) == 0:
        warnings.warn("empty dataset: the report equals the prior bounds", RuntimeWarning, stacklevel=1)
    channels = refine_all(dataset, scenario.system, scenario.prior)
    out = args.out or Path(f"{scenario.name}.bounds.json")
    out.parent.mkdir(parents=True, exist_ok=True)
    write_bounds_report(channels, out)
    for cb in channels:
        for label, prior_row, row in (("theta", cb.P0, cb.P), ("lambda", cb.Q0, cb.Q)):
            for k, (a, b) in enumerate(zip(prior_row, row)):
                ratio = b.width / a.width if a.width > 0 else 0.0
                print(f"channel {cb.channel} {label}[{k}]: [{a.lo:.6g}, {a.hi:.6g}] -> [{b.lo:.6g}, {b.hi:.6g}]"
                      f"  width ratio {ratio:.4f}")
    print(f"bounds report written to {out}")
    return EXIT_OK


def _sweep_one(task):
    scenario_id, config_path, base_args, flag, value = task
    overrides = load_overrides(config_path) if config_path else None
    scenario = load_scenario(scenario_id, overrides)
    cfg = dict(base_args)
    cfg[flag] = value
    config = SimConfig(dt=cfg["dt"] or scenario.sim.dt, t_end=cfg["t_end"] or scenario.sim.t_end,
                       integrator=cfg["integrator"] or scenario.sim.integrator,
                       log_stride=cfg["log_stride"] or scenario.sim.log_stride)
    row = {flag: value, "status": "ok", "t_stop": config.steps * config.dt, "min_h": math.nan,
           "min_h_bar": math.nan, "min_certificate_slack": math.nan, "max_abs_u": math.nan}
    try:
        res = run_closed_loop(scenario, config, data_driven=cfg["data_driven"], seed=int(cfg["seed"]))
    except SimulationError as exc:
        row["status"] = "aborted"
        row["t_stop"] = exc.t
        if exc.trace is not None:
            row["min_h"] = float(np.min(exc.trace.h))
        return row
    s = res.summary
    row.update(min_h=s.min_h, min_h_bar=s.min_h_bar, min_certificate_slack=s.min_certificate_slack,
               max_abs_u=s.max_abs_u)
    for label, v in s.rmse_inside.items():
        row[f"rmse_{label}"] = v
    if s.min_h < -SAFETY_TOL:
        row["status"] = "unsafe"
    return row


def cmd_sweep(args) -> int:
    load_scenario(args.scenario, load_overrides(args.config) if args.config else None)  # validate early
    conv = int if args.flag == "seed" else _positive_float
    try:
        values = [conv(v) for v in args.values.split(",") if v.strip()]
    except (ValueError, argparse.ArgumentTypeError) as exc:
        raise ConfigurationError(f"bad --values: {exc}") from None
    if not values:
        raise ConfigurationError("--values is empty")
    base = {"dt": args.dt, "t_end": args.t_end, "integrator": args.integrator, "log_stride": args.log_stride,
            "data_driven": args.data_driven, "seed": args.seed}
    tasks = [(args.scenario, args.config, base, args.flag, v) for v in values]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_sweep_one, tasks))  # map keeps input order
    else:
        rows = [_sweep_one(t) for t in tasks]
    columns = []
    for r in rows:
        columns += [c for c in r if c not in columns]
    out = args.out or Path(f"{args.scenario}.sweep.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([repr(r[c]) if isinstance(r.get(c), float) else r.get(c, "") for c in columns])
    widths = [max(len(c), 12) for c in columns]
    print("  ".join(c.rjust(wd) for c, wd in zip(columns, widths)))
    for r in rows:
        cells = [f"{r[c]:.6g}" if isinstance(r.get(c), float) else str(r.get(c, "")) for c in columns]
        print("  ".join(c.rjust(wd) for c, wd in zip(cells, widths)))
    print(f"table written to {out}")
    return EXIT_OK if all(r["status"] == "ok" for r in rows) else EXIT_RUNTIME


COMMANDS = {"run": cmd_run, "check": cmd_check, "tighten": cmd_tighten, "sweep": cmd_sweep}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.verb](args)
    except UnknownScenario as exc:
        print(f"acbf: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigurationError as exc:
        print(f"acbf: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except AuditFailure as exc:
        print(f"acbf: audit failed: {exc}", file=sys.stderr)
        return EXIT_AUDIT
    except DataInconsistent as exc:
        print(f"acbf: inconsistent data: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"acbf: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
