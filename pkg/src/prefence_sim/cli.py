"""Command line front-end: ``prefence-sim <subcommand> ...``.

Exit codes: 0 ok, 2 config error, 3 invariant violation, 4 I/O error.
Relative output paths land under $PREFENCE_SIM_OUTPUT_DIR when it is set.
"""
import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor

from . import reporting
from .attacks.catalog import CATALOG, flows_from_json, validate_catalog
from .attacks.scenarios import SCENARIOS, run_scenario
from .config import OUTPUT_KEYS, MachineConfig, load_config
from .errors import ConfigError, InvariantViolation, SimError
from .perf import MODES, WORKLOADS, perf_model, run_perf_model

EXIT_OK, EXIT_CONFIG, EXIT_INVARIANT, EXIT_IO = 0, 2, 3, 4


def _summary(report):
    return {
        "scenario": report.scenario,
        "defended": report.defended,
        "trials": report.trials,
        "seed": report.seed,
        "guess_accuracy": report.guess_accuracy,
        "chance_level": report.chance_level,
        "at_chance": report.at_chance(),
        "scheduler": report.scheduler,
    }


def _emit(report, outputs):
    """Write every requested artefact; print the report when none was asked for."""
    writers = {
        "report": lambda p: reporting.write_json(p, report.to_dict()),
        "summary": lambda p: reporting.write_json(p, _summary(report)),
        "trace": lambda p: reporting.write_events(report.events, p),
        "histogram": lambda p: reporting.emit_histogram_data(report, p),
        "probes": lambda p: reporting.write_probes(report, p),
        "requests": lambda p: reporting.write_requests(report.access_log, p),
    }
    for key in OUTPUT_KEYS:
        path = outputs.get(key)
        if path:
            writers[key](path)
    if not outputs.get("report"):
        sys.stdout.write(reporting.dumps(report.to_dict()))


def _machine_from(path):
    return load_config(path).machine if path else None


def cmd_simulate(args):
    cfg = load_config(args.config)
    outputs = dict(cfg.outputs)
    report = run_scenario(cfg.name, cfg.defended, cfg.trials, cfg.seed, cfg.machine,
                          record_accesses=bool(outputs.get("requests")))
    _emit(report, outputs)
    return EXIT_OK


def cmd_attack(args):
    machine = _machine_from(args.config)
    outputs = {k: getattr(args, k) for k in OUTPUT_KEYS}
    report = run_scenario(args.scenario, args.defended, args.trials, args.seed, machine,
                          record_accesses=bool(outputs.get("requests")))
    _emit(report, outputs)
    return EXIT_OK


def _sweep_cell(cell):
    scenario, defended, seed, trials, machine = cell
    report = run_scenario(scenario, defended, trials, seed, machine)
    return {"scenario": scenario, "defended": defended, "seed": seed,
            "report": report.to_dict()}


def _int_list(text):
    try:
        return [int(x, 0) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"expected a comma separated list of integers, got {text!r}") from None


def cmd_sweep(args):
    scenarios = [s.strip() for s in args.scenarios.split(",") if s.strip()]
    for s in scenarios:
        if s not in SCENARIOS:
            raise ConfigError(f"unknown scenario {s!r}; known: {', '.join(sorted(SCENARIOS))}")
    seeds = _int_list(args.seeds)
    if not seeds:
        raise ConfigError("sweep needs at least one seed")
    machine = _machine_from(args.config)
    cells = [(s, d, seed, args.trials, machine)
             for s in scenarios for d in (False, True) for seed in seeds]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_sweep_cell, cells))
    else:
        results = [_sweep_cell(c) for c in cells]
    results.sort(key=lambda r: (r["scenario"], r["defended"], r["seed"]))
    doc = {"cells": results}
    if args.out:
        reporting.write_json(args.out, doc)
    else:
        sys.stdout.write(reporting.dumps(doc))
    return EXIT_OK


def cmd_perf(args):
    workloads = WORKLOADS if args.workload == "all" else (args.workload,)
    machine = _machine_from(args.config) or MachineConfig()
    doc = {}
    for w in workloads:
        if args.mode == "all":
            r = perf_model(w, machine, seed=args.seed)
            doc[w] = {
                "cycles_enabled": r.cycles_enabled,
                "cycles_disabled": r.cycles_disabled,
                "cycles_flag_scoped": r.cycles_flag_scoped,
                "critical_fraction": r.critical_fraction,
                "scoped_overhead": r.scoped_overhead,
            }
        else:
            run = run_perf_model(w, args.mode, machine, seed=args.seed)
            doc[w] = {k: v for k, v in vars(run).items() if k != "workload"}
    if args.out:
        reporting.write_json(args.out, doc)
    else:
        sys.stdout.write(reporting.dumps(doc))
    return EXIT_OK


def cmd_validate_catalog(args):
    catalog = CATALOG
    if args.catalog:
        try:
            with open(args.catalog, encoding="utf-8") as fh:
                catalog = flows_from_json(json.load(fh))
        except FileNotFoundError:
            raise ConfigError(f"catalog not found: {args.catalog}") from None
        except (ValueError, KeyError, TypeError) as exc:
            raise ConfigError(f"malformed catalog {args.catalog}: {exc}") from None
    report = validate_catalog(catalog)
    print(report.summary_line())
    if args.verbose:
        print("families: " + ", ".join(f"{k}={v}" for k, v in report.family_counts.items()))
        print("scopes: " + ", ".join(f"{k}={v}" for k, v in report.scope_counts.items()))
    for name, problem in report.violations:
        print(f"  {name}: {problem}", file=sys.stderr)
    return EXIT_OK if report.ok else EXIT_INVARIANT


REPORT_COLUMNS = ("scenario", "defended", "trials", "seed", "guess_accuracy", "at_chance")


def cmd_report(args):
    rows = []
    for path in args.inputs:
        with open(path, encoding="utf-8") as fh:
            try:
                doc = json.load(fh)
                rows.append(tuple(doc[c] for c in REPORT_COLUMNS))
            except (ValueError, KeyError) as exc:
                raise ConfigError(f"{path} is not a leakage report: {exc}") from None
    rows.sort(key=lambda r: (r[0], r[1], r[3]))
    rows = [r[:4] + (f"{r[4]:.6f}",) + r[5:] for r in rows]
    if args.out:
        reporting.write_csv(args.out, REPORT_COLUMNS, rows)
    else:
        sys.stdout.write(reporting.csv_text(REPORT_COLUMNS, rows))
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="prefence-sim",
                                description="Prefetcher side-channel and defense simulator")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run the scenario described by a config file")
    s.add_argument("--config", required=True)
    s.set_defaults(func=cmd_simulate)

    a = sub.add_parser("attack", help="run one attack scenario")
    a.add_argument("--scenario", required=True)
    a.add_argument("--defended", action="store_true")
    a.add_argument("--trials", type=int, default=1000)
    a.add_argument("--seed", type=lambda t: int(t, 0), required=True)
    a.add_argument("--config", help="config file supplying machine parameters")
    for key in OUTPUT_KEYS:
        a.add_argument(f"--{key}", metavar="PATH")
    a.set_defaults(func=cmd_attack)

    w = sub.add_parser("sweep", help="run scenarios x {undefended, defended} x seeds")
    w.add_argument("--scenarios", default=",".join(sorted(SCENARIOS)))
    w.add_argument("--seeds", required=True, help="comma separated seeds")
    w.add_argument("--trials", type=int, default=1000)
    w.add_argument("--jobs", type=int, default=1)
    w.add_argument("--config")
    w.add_argument("--out", metavar="PATH")
    w.set_defaults(func=cmd_sweep)

    f = sub.add_parser("perf", help="cycle model for the flag scoping modes")
    f.add_argument("--workload", choices=WORKLOADS + ("all",), default="all")
    f.add_argument("--mode", choices=MODES + ("all",), default="all")
    f.add_argument("--seed", type=lambda t: int(t, 0), default=0)
    f.add_argument("--config")
    f.add_argument("--out", metavar="PATH")
    f.set_defaults(func=cmd_perf)

    v = sub.add_parser("validate-catalog", help="check the encoded attack flows")
    v.add_argument("--catalog", help="JSON file of flows (default: built-in catalog)")
    v.add_argument("-v", "--verbose", action="store_true")
    v.set_defaults(func=cmd_validate_catalog)

    r = sub.add_parser("report", help="tabulate leakage report JSON files as CSV")
    r.add_argument("inputs", nargs="+")
    r.add_argument("--out", metavar="PATH")
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if getattr(args, "trials", 1) < 1:
            raise ConfigError("trials must be >= 1")
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except OSError as exc:
        print(f"I/O error: cannot write or read {exc.filename or ''}: {exc.strerror or exc}",
              file=sys.stderr)
        return EXIT_IO
    except SimError as exc:
        print(f"simulation error: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
