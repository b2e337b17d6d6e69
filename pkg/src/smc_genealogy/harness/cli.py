"""Command-line driver.

Subcommands ``heights``, ``fdd``, ``scaling`` and ``plot``. Results go to
``--out-dir``; a one-line JSON report goes to stdout. On failure a JSON line
``{"error": ..., "type": ...}`` goes to stderr and the exit code is nonzero
(2 for bad configuration or input, 3 for a violated invariant, 1 otherwise).
"""

import argparse
import json
import os
import sys

from ..errors import ConfigurationError, InputError, InvariantViolation, SMCGenealogyError
from ..resampling import PERMUTE_MODES, SCHEMES
from .config import MODELS, load_config
from .experiments import read_summary_csv, run_fdd_experiment, run_height_experiment, run_scaling_experiment
from .plots import emit_plots


def _int_list(text):
    try:
        return [int(x) for x in text.split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _float_list(text):
    try:
        return [float(x) for x in text.split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _schemes(text):
    out = [x for x in text.split(",") if x]
    for s in out:
        if s not in SCHEMES:
            raise argparse.ArgumentTypeError(f"unknown resampling scheme {s!r}")
    return out


class _Parser(argparse.ArgumentParser):
    """Report usage errors as a JSON line, like every other failure."""

    def error(self, message):
        print(json.dumps({"error": message, "type": "UsageError"}), file=sys.stderr)
        sys.exit(2)


def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--config", help="TOML experiment file")
    common.add_argument("--particles", type=_int_list, help="particle counts, e.g. 64,128,256")
    common.add_argument("--n", type=_int_list,
                        help="leaf-set sizes for heights; the single n for fdd and scaling")
    common.add_argument("--replicates", type=int)
    common.add_argument("--resampling", type=_schemes, help="comma-separated schemes")
    common.add_argument("--permute-ancestors", dest="permute", choices=PERMUTE_MODES)
    common.add_argument("--model", choices=MODELS)
    common.add_argument("--horizon", type=int, help="fixed T for every N (default: horizon_factor * N)")
    common.add_argument("--times", type=_float_list, help="rescaled times for fdd, e.g. 0.5,1.0")
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--out-dir", dest="out_dir")
    common.add_argument("--threads", type=int)
    common.add_argument("--traces", dest="write_traces", action="store_true", default=None,
                        help="also write traces.csv (heights only)")

    parser = _Parser(prog="smc-genealogy",
                                     description="Genealogies of resampling particle systems.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("heights", parents=[common], help="tree heights for every scheme, N and n")
    sub.add_parser("fdd", parents=[common], help="distance to the coalescent at fixed rescaled times")
    sub.add_parser("scaling", parents=[common], help="log-log fits of height moments against N")
    plot = sub.add_parser("plot", help="SVG plots from an existing summary.csv")
    plot.add_argument("--summary", help="summary CSV (default: OUT_DIR/summary.csv)")
    plot.add_argument("--out-dir", dest="out_dir", default="out")
    return parser


def _config_from(args):
    overrides = {
        "particles": args.particles,
        "replicates": args.replicates,
        "schemes": args.resampling,
        "permute": args.permute,
        "model": args.model,
        "horizon": args.horizon,
        "times": args.times,
        "seed": args.seed,
        "out_dir": args.out_dir,
        "threads": args.threads,
        "write_traces": args.write_traces,
    }
    if args.n is not None:
        if args.command == "heights":
            overrides["leaf_sizes"] = args.n
        elif len(args.n) != 1:
            raise ConfigurationError(f"{args.command} takes a single --n")
        else:
            overrides["fdd_n" if args.command == "fdd" else "scaling_n"] = args.n[0]
    return load_config(args.config, **overrides)


def _run(args):
    if args.command == "plot":
        summary_path = args.summary or os.path.join(args.out_dir, "summary.csv")
        files = emit_plots(read_summary_csv(summary_path), args.out_dir)
        return {"command": "plot", "files": files}
    config = _config_from(args)
    if args.command == "heights":
        summary = run_height_experiment(config)
        return {"command": "heights", "rows": len(summary.rows), "invariant_checks": summary.invariant_checks,
                "excluded": sum(summary.excluded.values()), "files": summary.files}
    if args.command == "fdd":
        report = run_fdd_experiment(config)
        return {"command": "fdd", "n": report.n, "times": list(report.times),
                "tv": {f"{r.scheme}:{r.N}": {"sampled": r.tv_sampled, "conditional": r.tv_conditional}
                       for r in report.rows},
                "invariant_checks": report.invariant_checks, "files": report.files}
    report = run_scaling_experiment(config)
    return {"command": "scaling", "n": report.n,
            "mean_slope": {s: f.slope for s, f in report.mean_fits.items()},
            "var_slope": {s: f.slope for s, f in report.var_fits.items()},
            "doubling": report.doubling, "files": report.files}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        result = _run(args)
    except InvariantViolation as exc:
        code, err = 3, exc
    except (ConfigurationError, InputError) as exc:
        code, err = 2, exc
    except (SMCGenealogyError, OSError) as exc:
        code, err = 1, exc
    else:
        print(json.dumps(result, sort_keys=True, default=str))
        return 0
    print(json.dumps({"error": str(err), "type": type(err).__name__}), file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
