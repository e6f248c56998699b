"""Command line front end: fit, scores, select and simulate over CSV files."""

import argparse
import json
import os
import re
import sys
import time

import numpy as np

from . import __version__
from .errors import TorusPpcaError
from .model_selection import select_all
from .persist import (
    ModelDocument,
    file_digest,
    load_model,
    read_angle_csv,
    save_model,
    write_csv,
    write_text,
)
from .simulation import SimScenario, monte_carlo
from .tppca import TppcaConfig, tppca_fit, tppca_scores
from .wrapped_normal import cem_unwrap

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2
EXIT_NOT_CONVERGED = 3


class CliError(Exception):
    """Fatal command error with a message for stderr."""


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="torusppca",
        description="Dimension reduction for angles on the torus.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="fit a torus PPCA model to an angle CSV")
    fit.add_argument("input", help="CSV of angles, one row per observation")
    fit.add_argument("--dim", type=int, required=True, help="latent dimension d")
    fit.add_argument("--unit", choices=("rad", "deg"), default="rad")
    fit.add_argument("--lattice", type=int, default=2, help="winding lattice radius")
    fit.add_argument("--tol", type=float, default=1e-7)
    fit.add_argument("--max-iter", type=int, default=500)
    fit.add_argument("--seed", type=int, default=0,
                     help="recorded in the model provenance")
    fit.add_argument("-o", "--output", required=True, help="model JSON path")

    scores = sub.add_parser("scores", help="latent scores of a CSV under a model")
    scores.add_argument("model", help="model JSON written by fit")
    scores.add_argument("input", help="CSV of angles")
    scores.add_argument("--unit", choices=("rad", "deg"), default="rad")
    scores.add_argument("-o", "--output", required=True, help="scores CSV path")

    select = sub.add_parser("select", help="choose the latent dimension")
    select.add_argument("input", help="CSV of angles")
    select.add_argument("--method", choices=("lrt1", "lrt2", "kg", "cv", "all"),
                        default="all")
    select.add_argument("--alpha", type=float, default=0.05)
    select.add_argument("--threshold", type=float, default=0.9)
    select.add_argument("--unit", choices=("rad", "deg"), default="rad")
    select.add_argument("--lattice", type=int, default=2)
    select.add_argument("-o", "--output", help="write the JSON report here")

    sim = sub.add_parser("simulate", help="run a Monte Carlo study")
    sim.add_argument("config", help="flat key = value scenario file")
    sim.add_argument("-o", "--outdir", required=True)

    return parser


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    handler = {
        "fit": _cmd_fit,
        "scores": _cmd_scores,
        "select": _cmd_select,
        "simulate": _cmd_simulate,
    }[args.command]
    try:
        return handler(args)
    except (CliError, TorusPpcaError, ValueError, OSError) as exc:
        print(f"torusppca: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


def _cmd_fit(args):
    names, Y = read_angle_csv(args.input, unit=args.unit)
    dim = Y.shape[1]
    if args.dim >= dim:
        raise CliError(f"--dim must be below the number of columns ({dim})")
    if args.dim < 1:
        raise CliError("--dim must be at least 1")
    config = TppcaConfig(d=args.dim, lattice_radius=args.lattice,
                         outer_tol=args.tol, outer_max_iter=args.max_iter,
                         seed=args.seed)
    fit = tppca_fit(Y, config)
    provenance = {
        "seed": args.seed,
        "input_digest": file_digest(args.input),
        "tool_version": __version__,
        "columns": names,
        "unit": args.unit,
    }
    document = ModelDocument.from_fit(fit, args.lattice, provenance)
    save_model(args.output, document)
    print(f"D: {dim}")
    print(f"d: {args.dim}")
    print(f"sigma2: {fit.model.sigma2!r}")
    print(f"log_likelihood: {fit.log_likelihood!r}")
    print(f"iterations: {fit.n_iter}")
    print(f"converged: {str(fit.converged).lower()}")
    print(f"model: {args.output}")
    return EXIT_OK if fit.converged else EXIT_NOT_CONVERGED


def _cmd_scores(args):
    document = load_model(args.model)
    model = document.to_model()
    names, Y = read_angle_csv(args.input, unit=args.unit)
    if Y.shape[1] != document.D:
        raise CliError(
            f"model was fit on D={document.D} angles, input has {Y.shape[1]} columns"
        )
    scores, _ = tppca_scores(Y, model, radius=document.lattice_radius)
    header = [f"PC{i + 1}" for i in range(document.d)]
    write_csv(args.output, header, scores.tolist())
    print(f"scores: {args.output} ({scores.shape[0]} x {scores.shape[1]})")
    return EXIT_OK


def _cmd_select(args):
    names, Y = read_angle_csv(args.input, unit=args.unit)
    x_hat, _ = cem_unwrap(Y, radius=args.lattice)
    report = select_all(x_hat, alpha=args.alpha, threshold=args.threshold)
    doc = report.to_dict()
    if args.method != "all":
        keep = {"n", "D", args.method}
        doc = {k: v for k, v in doc.items() if k in keep}
        doc["chosen"] = {args.method: report.chosen()[args.method]}

    print(f"{'method':<8}{'chosen d':>9}")
    for method, chosen in sorted(doc["chosen"].items()):
        print(f"{method:<8}{chosen:>9}")
    if report.lrt2 is not None and args.method in ("all", "lrt2"):
        print("\nlrt2 path (d, statistic, df, p):")
        for r in report.lrt2.results:
            print(f"  {r.d}  {r.statistic:.4f}  {r.df}  {r.p_value:.4g}")

    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if args.output:
        write_text(args.output, text)
        print(f"\nreport: {args.output}")
    return EXIT_OK


_PI_PATTERN = re.compile(
    r"^\s*(?P<num>\d+(?:\.\d+)?)?\s*pi\s*(?:/\s*(?P<den>\d+(?:\.\d+)?))?\s*$"
)


def parse_scalar(text):
    """Parse a config scalar: plain float or a pi expression like 3pi/2."""
    text = text.strip()
    match = _PI_PATTERN.match(text)
    if match:
        value = np.pi
        if match.group("num"):
            value *= float(match.group("num"))
        if match.group("den"):
            value /= float(match.group("den"))
        return value
    return float(text)


_CONFIG_KEYS = {
    "n": "int_list",
    "d": "int_list",
    "sigma": "float_list",
    "D": "int",
    "replications": "int",
    "seed": "int",
    "select": "bool",
    "w_gen": "str",
    "mu_gen": "str",
    "alpha": "float",
    "threshold": "float",
    "lattice": "int",
}


def parse_sim_config(text):
    """Parse the flat `key = value` scenario document for `simulate`."""
    values = {
        "D": 5, "replications": 100, "seed": 0, "select": False,
        "w_gen": "orthogonal", "mu_gen": "uniform",
        "alpha": 0.05, "threshold": 0.9, "lattice": 2,
    }
    required = {"n", "d", "sigma"}
    unknown = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CliError(f"config line {lineno}: expected key = value")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        kind = _CONFIG_KEYS.get(key)
        if kind is None:
            unknown.append(key)
            continue
        if kind == "int":
            values[key] = int(value)
        elif kind == "float":
            values[key] = parse_scalar(value)
        elif kind == "bool":
            values[key] = value.lower() in ("1", "true", "yes", "on")
        elif kind == "int_list":
            values[key] = [int(v) for v in value.split(",") if v.strip()]
        elif kind == "float_list":
            values[key] = [parse_scalar(v) for v in value.split(",") if v.strip()]
        else:
            values[key] = value
    if unknown:
        raise CliError(f"unknown config keys: {', '.join(sorted(set(unknown)))}")
    missing = [k for k in sorted(required) if k not in values]
    if missing:
        raise CliError(f"config is missing required keys: {', '.join(missing)}")
    return values


def _cmd_simulate(args):
    with open(args.config) as handle:
        config = parse_sim_config(handle.read())
    scenarios = [
        SimScenario(n=n, D=config["D"], d_true=d, sigma=float(s),
                    replications=config["replications"], seed=config["seed"],
                    w_gen=config["w_gen"], mu_gen=config["mu_gen"])
        for d in config["d"]
        for s in config["sigma"]
        for n in config["n"]
    ]
    started = time.time()
    table = monte_carlo(scenarios, tppca_radius=config["lattice"],
                        select=config["select"], alpha=config["alpha"],
                        threshold=config["threshold"])
    elapsed = time.time() - started

    os.makedirs(args.outdir, exist_ok=True)
    metrics_path = os.path.join(args.outdir, "metrics.csv")
    write_csv(metrics_path,
              ["method", "n", "D", "d_true", "sigma", "metric", "value",
               "replications", "failures"],
              table.metric_rows())
    outputs = {"metrics": "metrics.csv"}
    if config["select"]:
        selection_path = os.path.join(args.outdir, "selection.csv")
        write_csv(selection_path,
                  ["selector", "n", "D", "d_true", "sigma", "d_hat", "count",
                   "frequency"],
                  table.selection_rows())
        outputs["selection"] = "selection.csv"

    manifest = {
        "config": {k: config[k] for k in sorted(config)},
        "seed": config["seed"],
        "tool_version": __version__,
        "numpy_version": np.__version__,
        "wall_time_seconds": elapsed,
        "outputs": outputs,
    }
    write_text(os.path.join(args.outdir, "manifest.json"),
               json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    print(f"wrote {', '.join(sorted(outputs.values()))} to {args.outdir} "
          f"in {elapsed:.1f}s")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
