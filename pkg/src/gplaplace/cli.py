"""Command line interface: ``gplaplace <command> [options]``.

Commands
--------
evaluate  all criteria for one kernel on one dataset
oracle    reference log evidence (quadrature and/or nested sampling)
search    greedy kernel search driven by one or more criteria
generate  sample a dataset from a GP prior
ellipse   Laplace confidence ellipses and nested-sample coverage (u = 2)

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 search finished but some candidates failed.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .data import (
    GENERATORS, GeneratorSpec, linear_benchmark_dataset, load_csv, normalize,
    sample_from_gp_prior, write_csv,
)
from .errors import ConfigError, NumericalError
from .kernels import parse_kernel, render
from .laplace import (
    CRITERIA, clamp_eigenvalues, confidence_ellipse, criteria_suite, variant_r,
)
from .model import GPModel, PriorSpec, build_prior
from .oracle import integrate_grid, nested_sampling, nested_sampling_evidence, quadrature_evidence
from .search import cks_search, recognition_check

log = logging.getLogger("gplaplace")

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_PARTIAL = 4

# 1-D conjugate test problem: N(0, 1) prior, Gaussian likelihood in theta
CONJUGATE = {"prior_mean": 0.0, "prior_std": 1.0, "obs": 1.5, "obs_std": 0.5}


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.bool_):
        return bool(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _clean(obj):
    """Replace non-finite floats by None so the output is strict JSON."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (float, np.floating)) and not math.isfinite(obj):
        return None
    return obj


def _envelope(args, payload):
    config = {k: v for k, v in vars(args).items() if k != "func"}
    return {"tool": "gplaplace", "version": __version__, "seed": args.seed,
            "config": config, "result": payload}


def _emit(args, payload, rows=None):
    """Write JSON (default) or a CSV table of ``rows`` to --out or stdout."""
    doc = _clean(json.loads(json.dumps(_envelope(args, payload), default=_json_default)))
    if args.format == "csv" and rows is not None:
        buf = io.StringIO()
        fields = list(rows[0]) + ["version", "seed", "config"]
        w = csv.DictWriter(buf, fieldnames=fields)
        w.writeheader()
        for row in rows:
            w.writerow({**row, "version": __version__, "seed": args.seed,
                        "config": json.dumps(doc["config"])})
        text = buf.getvalue()
    else:
        text = json.dumps(doc, indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _sidecar(args, suffix):
    if not args.out:
        return None
    out = Path(args.out)
    return out.with_name(f"{out.stem}_{suffix}")


def _load_data(args):
    """Resolve --data into a Dataset; returns (data, dataset id, generator)."""
    source = args.data
    generator = None
    if source == "linear-benchmark":
        data = linear_benchmark_dataset()
        normalize_default = False
    elif source.startswith("gp:"):
        try:
            _, generator, n = source.split(":")
            spec = GeneratorSpec(generator, int(n), seed=args.seed)
        except ValueError as exc:
            raise ConfigError(f"--data gp:<GENERATOR>:<n> expected, got {source!r} ({exc})")
        data = sample_from_gp_prior(spec)
        normalize_default = True
    else:
        if not Path(source).exists():
            raise ConfigError(f"data file {source!r} not found")
        data = load_csv(source)
        normalize_default = True
    do_norm = normalize_default if args.normalize is None else args.normalize
    if do_norm:
        data, _ = normalize(data)
    return data, source, generator


def _parse_kernel_arg(args):
    if not args.kernel:
        raise ConfigError("--kernel is required")
    return parse_kernel(args.kernel)


# ----------------------------------------------------------------------------

_ROW_FIELDS = (
    ("MLL", "mll"), ("MAP", "map"), ("AIC", "aic"), ("BIC", "bic"),
    ("logZ_AIC", "logz_aic"), ("logZ_BIC", "logz_bic"),
    ("logZ_Lap", "logz_lap"), ("logZ_LapS", "logz_laps"),
    ("logZ_LapAIC", "logz_lapaic"), ("logZ_LapBIC", "logz_lapbic"),
)


def cmd_evaluate(args):
    data, source, _ = _load_data(args)
    expr = _parse_kernel_arg(args)
    result = criteria_suite(GPModel(expr), build_prior(expr), data, args.seed, args.restarts)
    row = {"dataset": source, "kernel": result.kernel, "n": result.n, "u": result.u}
    row.update({name: getattr(result, attr) for name, attr in _ROW_FIELDS})
    row.update({f"clamped_{k}": v for k, v in result.clamp_counts.items()})
    _emit(args, result.to_dict(), [row])
    return 0


def _conjugate_oracle(args):
    c = CONJUGATE
    prior = PriorSpec([c["prior_mean"]], [c["prior_std"]])

    def log_like(theta):
        z = (np.asarray(theta)[..., 0] - c["obs"]) / c["obs_std"]
        return -0.5 * z * z - math.log(c["obs_std"]) - 0.5 * math.log(2 * math.pi)

    var = c["prior_std"] ** 2 + c["obs_std"] ** 2
    closed = -0.5 * (c["obs"] - c["prior_mean"]) ** 2 / var - 0.5 * math.log(2 * math.pi * var)
    return prior, log_like, closed


def cmd_oracle(args):
    out = {}
    if args.data == "conjugate-hook":
        prior, log_like, closed = _conjugate_oracle(args)
        out["closed_form"] = closed
        if args.method in ("quadrature", "both"):
            out["quadrature"] = integrate_grid(log_like, prior, args.points_per_dim).to_dict()
        if args.method in ("nested", "both"):
            est = nested_sampling(lambda t: float(log_like(t)), prior, args.live_points,
                                  args.dlogz, args.seed)
            out["nested"] = est.to_dict()
        _emit(args, out, [{"method": k, "log_z": v["log_z"], "error": v["error"]}
                          for k, v in out.items() if isinstance(v, dict)])
        return 0

    data, source, _ = _load_data(args)
    expr = _parse_kernel_arg(args)
    model, prior = GPModel(expr), build_prior(expr)
    out["kernel"] = render(expr)
    if args.method in ("quadrature", "both"):
        out["quadrature"] = quadrature_evidence(model, prior, data, args.points_per_dim).to_dict()
    if args.method in ("nested", "both"):
        est = nested_sampling_evidence(model, prior, data, args.live_points, args.dlogz, args.seed)
        out["nested"] = est.to_dict()
        path = _sidecar(args, "samples.csv")
        if path is not None:
            est.write_samples_csv(path, [f"{s.base}.{s.role}" for s in model.layout])
            out["nested"]["samples_csv"] = str(path)
    rows = [{"dataset": source, "kernel": out["kernel"], "method": k,
             "log_z": out[k]["log_z"], "error": out[k]["error"]}
            for k in ("quadrature", "nested") if k in out]
    _emit(args, out, rows)
    return EXIT_PARTIAL if out.get("nested", {}).get("partial") else 0


def cmd_search(args):
    data, source, generator = _load_data(args)
    criteria = [c.strip() for c in args.criterion.split(",")] if args.criterion else ["LapS"]
    for c in criteria:
        if c not in CRITERIA:
            raise ConfigError(f"unknown criterion {c!r}; choose from {CRITERIA}")
    generating = args.generating or generator
    bases = [b.strip().upper() for b in args.bases.split(",")]
    cache = {}
    traces, rows = [], []
    partial = False
    for criterion in criteria:
        trace = cks_search(data, criterion, args.depth, bases, args.seed, args.restarts,
                           cache=cache if args.jobs <= 1 else None, jobs=args.jobs)
        partial |= trace.partial
        traces.append(trace.to_dict())
        found = trace.best.kernel if trace.best else None
        row = {"dataset": source, "criterion": criterion, "found": found,
               "score": trace.best.score if trace.best else None,
               "recognized": (recognition_check(found, generating)
                              if generating and found else None),
               "log_z": None}
        if args.score_evidence and found:
            expr = parse_kernel(found)
            model = GPModel(expr)
            if model.u <= 3:
                ppd = args.points_per_dim if model.u <= 2 else min(args.points_per_dim, 101)
                row["log_z"] = quadrature_evidence(model, build_prior(expr), data, ppd).log_z
        rows.append(row)
    summary = _sidecar(args, "summary.csv")
    if summary is not None:
        with open(summary, "w", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            w.writerows(rows)
    _emit(args, {"traces": traces, "summary": rows}, rows)
    return EXIT_PARTIAL if partial else 0


def cmd_generate(args):
    if args.generator not in GENERATORS:
        raise ConfigError(f"unknown generator {args.generator!r}; choose from {GENERATORS}")
    spec = GeneratorSpec(args.generator, args.n, seed=args.seed)
    data = sample_from_gp_prior(spec)
    if args.normalize:
        data, _ = normalize(data)
    buf = io.StringIO()
    write_csv(data, buf)
    if args.out:
        Path(args.out).write_text(buf.getvalue(), encoding="utf-8")
        prov = Path(args.out).with_suffix(".json")
        doc = _envelope(args, {"generator": spec.to_dict(), "normalized": bool(args.normalize)})
        prov.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    else:
        sys.stdout.write(buf.getvalue())
    return 0


def cmd_ellipse(args):
    data, source, _ = _load_data(args)
    expr = _parse_kernel_arg(args)
    model, prior = GPModel(expr), build_prior(expr)
    if model.u != 2:
        raise ConfigError(f"ellipses need a 2-hyperparameter model, {render(expr)} has {model.u}")
    result = criteria_suite(model, prior, data, args.seed, args.restarts)
    if result.spectrum is None:
        raise NumericalError(f"no Hessian available: {result.errors}")
    theta = result.fit_map.theta_hat
    est = None
    if args.method in ("nested", "both"):
        est = nested_sampling_evidence(model, prior, data, args.live_points, args.dlogz, args.seed)
    ellipses = {}
    rows = []
    for variant in ("Lap", "LapS", "LapAIC", "LapBIC"):
        if variant == "Lap":
            if np.any(result.spectrum.eigenvalues <= 0):
                ellipses[variant] = None
                continue
            spec = result.spectrum
        else:
            spec = clamp_eigenvalues(result.spectrum, variant_r(variant, data.n))
        ell = confidence_ellipse(theta, spec, args.level)
        entry = ell.to_dict()
        if est is not None:
            entry["fraction_inside"] = ell.coverage(est.samples)
            entry["weighted_fraction_inside"] = ell.coverage(est.samples, est.weights)
        ellipses[variant] = entry
        rows.append({"variant": variant, **{k: json.dumps(v) if isinstance(v, list) else v
                                             for k, v in entry.items()}})
    payload = {"kernel": render(expr), "dataset": source, "ellipses": ellipses,
               "prior": {"mean": prior.mean, "std": prior.std}}
    if est is not None:
        payload["nested"] = est.to_dict()
        path = _sidecar(args, "samples.csv")
        if path is not None:
            est.write_samples_csv(path, [f"{s.base}.{s.role}" for s in model.layout])
            payload["nested"]["samples_csv"] = str(path)
    _emit(args, payload, rows)
    return 0


# ----------------------------------------------------------------------------

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--data", default="linear-benchmark",
                        help="CSV path, 'linear-benchmark' or 'gp:<GENERATOR>:<n>'")
    common.add_argument("--kernel", help="kernel expression, e.g. 'SE+LIN*MAT32'")
    common.add_argument("--criterion", help="criterion or comma-separated list")
    common.add_argument("--depth", type=int, default=3)
    common.add_argument("--restarts", type=int, default=5)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--method", choices=("quadrature", "nested", "both"), default="both")
    common.add_argument("--live-points", type=int, default=500)
    common.add_argument("--dlogz", type=float, default=0.01)
    common.add_argument("--points-per-dim", type=int, default=401)
    common.add_argument("--normalize", action=argparse.BooleanOptionalAction, default=None,
                        help="standardise targets (default: on, except for linear-benchmark)")
    common.add_argument("--score-evidence", action="store_true")
    common.add_argument("--jobs", type=int, default=1)
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--out", help="output file (default: standard output)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="gplaplace", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"gplaplace {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("evaluate", parents=[common], help="all criteria for one kernel")
    p.set_defaults(func=cmd_evaluate)
    p = sub.add_parser("oracle", parents=[common], help="reference log evidence")
    p.set_defaults(func=cmd_oracle)
    p = sub.add_parser("search", parents=[common], help="greedy kernel search")
    p.add_argument("--bases", default="SE,LIN,MAT32")
    p.add_argument("--generating", help="data-generating kernel for the recognition column")
    p.set_defaults(func=cmd_search)
    p = sub.add_parser("generate", parents=[common], help="sample a dataset from a GP prior")
    p.add_argument("--generator", default="SE", help=f"one of {', '.join(GENERATORS)}")
    p.add_argument("--n", type=int, default=20)
    p.set_defaults(func=cmd_generate)
    p = sub.add_parser("ellipse", parents=[common], help="Laplace confidence ellipses")
    p.add_argument("--level", type=float, default=2.0, help="ellipse radius in sigmas")
    p.set_defaults(func=cmd_ellipse)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"gplaplace: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"gplaplace: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
