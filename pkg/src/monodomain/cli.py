"""Command line entry point: ``monodomain <command> --config FILE``.

Exit codes: 0 success, 2 invalid configuration or arguments, 3 numerical
instability, 4 file input/output failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import ConfigError, load_config
from .ionic.single_cell import DivergenceError
from .oracles import OracleError
from .splitting import SCHEMES, InstabilityError

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_INSTABILITY = 3
EXIT_IO = 4

log = logging.getLogger("monodomain")


def _common(p: argparse.ArgumentParser, config_required: bool = True) -> None:
    p.add_argument("--config", required=config_required,
                   help="YAML run configuration, or the name of a shipped recipe")
    p.add_argument("--workers", type=int, default=None, help="solver threads (default: all cores)")
    p.add_argument("--seed-override", type=int, default=None, help="replace the fibrosis seed")
    p.add_argument("--output-dir", default=None,
                   help="artifact directory (default: config output.dir, else $MONODOMAIN_OUTPUT_DIR/<name>)")
    p.add_argument("--strict-substeps", action="store_true", default=None,
                   help="use ceil for the diffusion sub-step count so dt_ad <= dt_s")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="monodomain", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="progress lines on stderr")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("run", help="run one simulation and write traces, maps, snapshots and a report")
    _common(p)
    p.add_argument("--scheme", choices=SCHEMES, default=None)
    p.add_argument("--dt", type=float, default=None)

    p = sub.add_parser("compare", help="run several schemes on one problem and compare them")
    _common(p)
    p.add_argument("--schemes", nargs="+", choices=SCHEMES, default=None)

    p = sub.add_parser("dts", help="tabulate the Gershgorin diffusion step for the configured spacings")
    _common(p)
    p.add_argument("--spectral", action="store_true", default=None,
                   help="add the power-iteration stability limit column")

    p = sub.add_parser("threshold", help="bisect the diastolic threshold amplitude")
    _common(p)

    p = sub.add_parser("cell", help="single-cell tools: dt0 estimate, pacing, trace export")
    p.add_argument("--model", required=True)
    p.add_argument("--dt0", action="store_true", help="estimate dt0 by bisection")
    p.add_argument("--pace", type=int, default=0, metavar="BEATS", help="pace to steady state")
    p.add_argument("--cycle-length", type=float, default=1000.0)
    p.add_argument("--calibrate", action="store_true",
                   help="estimate dt0, pace and store the result as the model's shipped data")
    p.add_argument("--rush-larsen", action="store_true",
                   help="pace with exponential gate updates (calibration only)")
    p.add_argument("--trace", default=None, metavar="CSV", help="export one beat to CSV")
    p.add_argument("--duration", type=float, default=500.0)
    p.add_argument("--states", nargs="*", default=[])

    p = sub.add_parser("oracle")  # hidden from the help listing below
    p.add_argument("target", choices=["spectral", "reference", "linear-convergence"])
    p.add_argument("--config", default=None)
    p.add_argument("--integrator", choices=["exact", "euler"], default="exact")
    p.add_argument("--T", type=float, default=10.0)
    sub._choices_actions = [a for a in sub._choices_actions if a.dest != "oracle"]
    return parser


def _emit(payload) -> None:
    print(json.dumps(payload, indent=2, default=str))


def cmd_run(args) -> int:
    from .experiments import output_dir, run_experiment

    cfg = load_config(args.config)
    if args.scheme or args.dt:
        scheme = cfg.scheme.model_copy(update={k: v for k, v in (("scheme", args.scheme), ("dt", args.dt)) if v})
        cfg = cfg.model_copy(update={"scheme": scheme})
    out = output_dir(cfg, args.output_dir)
    rep = run_experiment(cfg, out, args.seed_override, args.workers, args.strict_substeps)
    _emit({"output_dir": str(out), "markers": rep["markers"], "timing": rep["timing"],
           "dt_effective_ms": rep["dt_effective_ms"], "dt_s_ms": rep["dt_s_ms"], "l": rep["l"],
           "k_max": rep["k_max"]})
    return EXIT_OK


def cmd_compare(args) -> int:
    from .experiments import compare_experiment, output_dir

    cfg = load_config(args.config)
    out = output_dir(cfg, args.output_dir)
    comp = compare_experiment(cfg, out, args.schemes, args.seed_override, args.workers, args.strict_substeps)
    rows = {k: {"markers": v["markers"], "max_abs_dV_mV": v["max_abs_dV_mV"], "nrmse_lat": v["nrmse_lat"],
                "nrmse_apd90": v["nrmse_apd90"], "total_s": v["timing"]["total_s"],
                "wall_time_ratio_vs_reference": v["wall_time_ratio_vs_reference"]}
            for k, v in comp.report["schemes"].items()}
    _emit({"output_dir": str(out), "reference": comp.report["reference"], "schemes": rows})
    return EXIT_OK


def cmd_dts(args) -> int:
    from .experiments import dts_table, format_table, output_dir, write_json

    cfg = load_config(args.config)
    rows = dts_table(cfg, args.seed_override, args.spectral)
    print(format_table(rows))
    if args.output_dir:
        write_json(output_dir(cfg, args.output_dir) / "dts.json", {"rows": rows})
    return EXIT_OK


def cmd_threshold(args) -> int:
    from .experiments import Problem, output_dir, write_json

    cfg = load_config(args.config)
    problem = Problem.build(cfg, args.seed_override)
    thr = problem.find_threshold()
    payload = {"threshold_mV_per_ms": thr, "twice_threshold_mV_per_ms": 2.0 * thr}
    _emit(payload)
    if args.output_dir:
        write_json(output_dir(cfg, args.output_dir) / "threshold.json", payload)
    return EXIT_OK


def cmd_cell(args) -> int:
    from .ionic import DEFAULT_STIMULUS, calibrate, load_model
    from .ionic.single_cell import estimate_dt0, export_trace_csv, pace_to_steady_state

    if args.calibrate:
        _emit(calibrate(args.model, n_beats=args.pace or 1000, cycle_length=args.cycle_length,
                        progress=lambda m: print(m, file=sys.stderr), rush_larsen=args.rush_larsen))
        return EXIT_OK
    model = load_model(args.model)
    stim = DEFAULT_STIMULUS.get(args.model)
    out: dict = {"model": model.name, "dt0_shipped_ms": model.dt0}
    if args.dt0:
        out["dt0_estimate_ms"] = estimate_dt0(model, stim)
    if args.pace:
        res = pace_to_steady_state(model, args.cycle_length, args.pace, stim.amplitude, stim.duration)
        out.update({"beats": res.beats, "state_change": res.state_change, "apd90_last_ms": res.apd90[-1],
                    "apd90_change_ms": res.apd_change, "v_end_mV": res.v})
    if args.trace:
        export_trace_csv(model, args.trace, args.duration, stim=stim, states=tuple(args.states))
        out["trace"] = args.trace
    _emit(out)
    return EXIT_OK


def cmd_oracle(args) -> int:
    from .oracles import LinearTestProblem, spectral_bound, splitting_order

    if args.target == "linear-convergence":
        study = splitting_order(T=args.T, integrator=args.integrator)
        _emit({"integrator": study.integrator, "dts": study.dts.tolist(), "errors": study.errors.tolist(),
               "pairwise_orders": study.pairwise_orders.tolist(), "order": study.order})
        return EXIT_OK
    if args.target == "spectral":
        if args.config:
            from .experiments import Problem

            op = Problem.build(load_config(args.config)).op
        else:
            op = LinearTestProblem().operator
        sb = spectral_bound(op)
        _emit({"lambda_max_per_ms": sb.lam_max, "critical_step_ms": sb.critical_step,
               "dt_s_ms": op.dt_s, "dt_s_over_safety_ms": op.dt_s / 0.9, "iterations": sb.iterations})
        return EXIT_OK
    problem = LinearTestProblem()
    import numpy as np

    errs = {}
    for refine in (10.0, 20.0):
        errs[refine] = float(np.max(np.abs(problem.reference(args.T, refine) - problem.analytic(args.T))))
    _emit({"T_ms": args.T, "linf_error_vs_analytic": errs})
    return EXIT_OK


COMMANDS = {"run": cmd_run, "compare": cmd_compare, "dts": cmd_dts, "threshold": cmd_threshold,
            "cell": cmd_cell, "oracle": cmd_oracle}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_VALIDATION
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (InstabilityError, DivergenceError, OracleError) as exc:
        print(f"numerical instability: {exc}", file=sys.stderr)
        return EXIT_INSTABILITY
    except (OSError, FileNotFoundError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, KeyError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
