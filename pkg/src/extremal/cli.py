"""Command-line front end.

Every subcommand reads JSON inputs, writes JSON (CSV for region sweeps and
path traces) to stdout or ``--out``, and exits with 0 on success, 1 when a
numerical check reports a violation and 2 on input or engineering errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import fields, replace
from typing import Any

import numpy as np

from . import matrix as mx
from .capacity import BcInstance, DscInstance, bc_region_sweep, dsc_separation_rates, dsc_weighted_bound
from .config import EstimatorConfig
from .enhancement import all_checks, enhance
from .entropy import candidate_entropy_with_noise, entropy_of, knn_entropy
from .errors import ExtremalError, InputError
from .fisher import cramer_rao_check, debruijn_check, fii_check, fisher_matrix, stam_optimal_a
from .instance import ExtremalInstance
from .mixture import GaussianMixture, candidate_from_json
from .report import FAIL, CheckReport
from .solver import KktSolution, SolverConfig, solve, with_residuals
from .verify import (
    DEFAULT_GRID,
    CounterexampleSpec,
    counterexample_construct,
    path_check,
    path_endpoint,
    standard_battery,
    theorem1_harness,
    trace_path,
)

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2
_LN2 = math.log(2.0)

_SOLVER_KEYS = {f.name for f in fields(SolverConfig)} - {"seed", "parallelism"}
_ESTIMATOR_KEYS = {f.name for f in fields(EstimatorConfig)} - {"seed", "parallelism", "method"}


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}\n{self.format_usage()}")


# --------------------------------------------------------------------------
# run configuration


def _seed(value: str | None) -> int:
    raw = value if value is not None else os.environ.get("EXTREMAL_SEED", "0")
    try:
        seed = int(raw, 0)
    except ValueError as exc:
        raise InputError(f"seed must be an integer, got {raw!r}") from exc
    if not 0 <= seed < 1 << 64:
        raise InputError("seed must fit in 64 unsigned bits")
    return seed


def _parallelism(value: str) -> int | str:
    if value == "auto":
        return "auto"
    try:
        p = int(value)
    except ValueError as exc:
        raise InputError(f"--parallelism must be an integer or 'auto', got {value!r}") from exc
    if p < 1:
        raise InputError("--parallelism must be at least 1")
    return p


def _split_tolerances(argv: list[str]) -> tuple[list[str], dict[str, float]]:
    rest, tols = [], {}
    for a in argv:
        if a.startswith("--tol."):
            key, sep, val = a[len("--tol."):].partition("=")
            if not sep or not key:
                raise InputError(f"tolerance override must look like --tol.KEY=VALUE, got {a!r}")
            try:
                tols[key] = float(val)
            except ValueError as exc:
                raise InputError(f"tolerance {key} is not a number: {val!r}") from exc
        else:
            rest.append(a)
    return rest, tols


def _configs(args, tols: dict[str, float]) -> tuple[EstimatorConfig, SolverConfig]:
    seed = _seed(args.seed)
    par = _parallelism(args.parallelism)
    est = EstimatorConfig(seed=seed, parallelism=par)
    sol = SolverConfig(seed=seed, parallelism=par)
    method = getattr(args, "method", None)
    if method in ("quad", "mc", "auto"):
        est = est.with_(method=method)
    samples = getattr(args, "samples", None)
    if samples is not None:
        if samples < 100:
            raise InputError("--samples must be at least 100")
        est = est.with_(mc_samples=samples)
    for key, val in tols.items():
        if key in _SOLVER_KEYS:
            cur = getattr(sol, key)
            sol = replace(sol, **{key: type(cur)(val)})
        elif key in _ESTIMATOR_KEYS:
            cur = getattr(est, key)
            est = est.with_(**{key: type(cur)(val)})
        else:
            known = ", ".join(sorted(_SOLVER_KEYS | _ESTIMATOR_KEYS))
            raise InputError(f"unknown tolerance {key!r}; known keys: {known}")
    return est, sol


# --------------------------------------------------------------------------
# input and output


def _load_json(path: str | None, what: str) -> Any:
    if path is None:
        raise InputError(f"missing --{what}")
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise InputError(f"{what} file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc


def _parse(fn, obj, path: str):
    if not isinstance(obj, dict):
        raise InputError(f"{path}: expected a JSON object at top level")
    try:
        return fn(obj)
    except (KeyError, TypeError) as exc:
        raise InputError(f"{path}: bad field {exc}") from exc
    except ExtremalError as exc:
        raise type(exc)(f"{path}: {exc}") from exc
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from exc


def _matrix_arg(text: str | None, what: str) -> np.ndarray | None:
    if text is None:
        return None
    if os.path.exists(text):
        obj = _load_json(text, what)
    else:
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InputError(f"--{what}: not a number, JSON matrix or file: {text!r}") from exc
    return mx.from_json(obj)


def _to_bits(obj, bits: bool):
    """Rename ``*_nats`` keys to ``*_bits`` and rescale their values."""
    if not bits:
        return obj
    if isinstance(obj, dict):
        out = {}
        for k, v in obj.items():
            if isinstance(k, str) and k.endswith("_nats"):
                out[k[:-5] + "_bits"] = _scale(v)
            else:
                out[k] = _to_bits(v, bits)
        return out
    if isinstance(obj, list):
        return [_to_bits(v, bits) for v in obj]
    return obj


def _scale(v):
    if isinstance(v, list):
        return [_scale(x) for x in v]
    if isinstance(v, dict):
        return {k: _scale(x) for k, x in v.items()}
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return v / _LN2
    return v


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    return obj


def _emit_text(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _emit_json(obj, args) -> None:
    text = json.dumps(_jsonable(_to_bits(obj, args.bits)), indent=2, sort_keys=False) + "\n"
    _emit_text(text, args.out)


def _report_json(rep: CheckReport, args) -> dict:
    return rep.to_json(args.bits)


def _status(rep: CheckReport) -> int:
    return EXIT_FAIL if rep.failed or rep.status == FAIL else EXIT_OK


def _units(args) -> str:
    return "bits" if args.bits else "nats"


# --------------------------------------------------------------------------
# subcommands


def _instance(args) -> ExtremalInstance:
    return _parse(ExtremalInstance.from_json, _load_json(args.instance, "instance"), args.instance)


def _distribution(path: str | None, what: str = "dist"):
    return _parse(candidate_from_json, _load_json(path, what), path)


def _mixture(path: str | None, what: str = "dist") -> GaussianMixture:
    x = _distribution(path, what)
    if not isinstance(x, GaussianMixture):
        raise InputError(f"--{what} must be a Gaussian mixture")
    return x


def cmd_solve(args, est, scfg) -> int:
    inst = _instance(args)
    sol = solve(inst, scfg)
    _emit_json({"instance": inst.to_json(), "solution": sol.to_json("nats")}, args)
    return EXIT_OK if sol.certified else EXIT_FAIL


def cmd_enhance(args, est, scfg) -> int:
    inst = _instance(args)
    if args.solution:
        obj = _load_json(args.solution, "solution")
        if isinstance(obj, dict) and "solution" in obj:
            obj = obj["solution"]
        sol = with_residuals(_parse(KktSolution.from_json, obj, args.solution), inst, scfg)
    else:
        sol = solve(inst, scfg)
    e = enhance(inst, sol, scfg)
    rep = all_checks(e)
    _emit_json({"enhanced": e.to_json(), "report": _report_json(rep, args)}, args)
    return _status(rep)


def cmd_verify(args, est, scfg) -> int:
    inst = _instance(args)
    if args.dist:
        candidates = [_distribution(p) for p in args.dist]
    elif args.battery == "std":
        candidates = standard_battery(inst, est.seed)
    else:
        raise InputError(f"unknown battery {args.battery!r} (available: std)")
    rep = theorem1_harness(inst, candidates, est, scfg)
    _emit_json(_report_json(rep, args), args)
    return _status(rep)


def _grid(text: str | None):
    if text is None:
        return DEFAULT_GRID
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError as exc:
        raise InputError(f"--grid must be comma-separated numbers: {text!r}") from exc


def cmd_path(args, est, scfg) -> int:
    inst = _instance(args)
    x0 = _mixture(args.dist)
    points = trace_path(x0, inst, _grid(args.grid), est, scfg)
    rep = path_check(points, path_endpoint(inst, scfg))
    units = _units(args)
    if args.out and args.out.endswith(".csv"):
        rows = [p.to_json(units) for p in points]
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})
        _emit_text(buf.getvalue(), args.out)
    else:
        _emit_json({"points": [p.to_json(units) for p in points], "report": _report_json(rep, args)}, args)
    return _status(rep)


def cmd_counterexample(args, est, scfg) -> int:
    spec = _parse(CounterexampleSpec.from_json, _load_json(args.spec, "spec"), args.spec)
    rep = counterexample_construct(spec, est)
    _emit_json(_report_json(rep, args), args)
    return _status(rep)


def cmd_bc_region(args, est, scfg) -> int:
    inst = _parse(BcInstance.from_json, _load_json(args.instance, "instance"), args.instance)
    points = bc_region_sweep(inst, args.points, scfg, est.parallelism)
    units = _units(args)
    scale = 1.0 if units == "nats" else 1.0 / _LN2
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["theta", "mu1", "mu2", f"r1_{units}", f"r2_{units}", f"bound_{units}"])
    for p in points:
        w.writerow([repr(float(v)) for v in (p.details["theta"], p.weights[0], p.weights[1],
                                             p.r1 * scale, p.r2 * scale, p.bound * scale)])
    _emit_text(buf.getvalue(), args.out)
    return EXIT_OK


def cmd_dsc(args, est, scfg) -> int:
    inst = _parse(DscInstance.from_json, _load_json(args.instance, "instance"), args.instance)
    b = dsc_weighted_bound(inst, args.mu1, args.mu2, scfg)
    rates = dsc_separation_rates(inst, b.k, (args.mu1, args.mu2))
    units = _units(args)
    _emit_json({"bound": b.to_json(units), "separation": rates.to_json(units)}, args)
    return EXIT_OK


def cmd_fii(args, est, scfg) -> int:
    u = _mixture(args.u, "u")
    v = _mixture(args.v, "v")
    if args.a is None or args.a == "stam":
        a = stam_optimal_a(fisher_matrix(u, est).j, fisher_matrix(v, est).j)
    else:
        a = _matrix_arg(args.a, "a") if args.a.strip().startswith(("{", "[")) or os.path.exists(args.a) \
            else float(args.a)
    rep = fii_check(u, v, a, est)
    _emit_json(_report_json(rep, args), args)
    return _status(rep)


def cmd_crb(args, est, scfg) -> int:
    rep = cramer_rao_check(_mixture(args.dist), est)
    _emit_json(_report_json(rep, args), args)
    return _status(rep)


def cmd_debruijn(args, est, scfg) -> int:
    x = _mixture(args.dist)
    kz = _matrix_arg(args.kz, "kz")
    if kz is None:
        kz = np.eye(x.dim)
    rep = debruijn_check(x, kz, args.t, est)
    _emit_json(_report_json(rep, args), args)
    return _status(rep)


def cmd_entropy(args, est, scfg) -> int:
    x = _distribution(args.dist)
    kz = _matrix_arg(args.kz, "kz")
    if args.method == "knn":
        if not isinstance(x, GaussianMixture):
            raise InputError("the kNN estimator samples from a Gaussian mixture")
        m = x if kz is None else x.add_gaussian(kz)
        rng = np.random.default_rng(np.random.SeedSequence([est.seed, 1]))
        n = args.samples or 20000
        e = knn_entropy(m.sample(n, rng), seed=est.seed)
    elif kz is None:
        e = entropy_of(x, est)
    else:
        e = candidate_entropy_with_noise(x, kz, est)
    _emit_json({"entropy": e.to_json(_units(args))}, args)
    return EXIT_OK


# --------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="write output to this file instead of stdout")
    common.add_argument("--seed", help="64-bit seed (default: $EXTREMAL_SEED or 0)")
    common.add_argument("--bits", action="store_true", help="report entropies and rates in bits")
    common.add_argument("--parallelism", default="1", help="worker threads, or 'auto'")

    p = _Parser(prog="extremal", description=__doc__.splitlines()[0],
                epilog="Tolerances: --tol.KEY=VALUE overrides any solver or estimator setting.")
    sub = p.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)

    def add(name, fn, help_):
        sp = sub.add_parser(name, parents=[common], help=help_)
        sp.set_defaults(fn=fn)
        return sp

    sp = add("solve", cmd_solve, "optimal Gaussian covariance with KKT certificate")
    sp.add_argument("--instance", required=True)
    sp = add("enhance", cmd_enhance, "enhanced noise covariances and their identities")
    sp.add_argument("--instance", required=True)
    sp.add_argument("--solution")
    sp = add("verify-extremal", cmd_verify, "candidate distributions against the Gaussian optimum")
    sp.add_argument("--instance", required=True)
    sp.add_argument("--battery", default="std")
    sp.add_argument("--dist", action="append", help="candidate JSON (repeatable; replaces the battery)")
    sp = add("path-check", cmd_path, "monotone covariance-preserving path from a mixture")
    sp.add_argument("--instance", required=True)
    sp.add_argument("--dist", required=True)
    sp.add_argument("--grid", help="comma-separated lambda values")
    sp = add("counterexample", cmd_counterexample, "non-Gaussian witness for mu in (0, 1)")
    sp.add_argument("--spec", required=True)
    sp = add("bc-region", cmd_bc_region, "broadcast capacity region boundary (CSV)")
    sp.add_argument("--instance", required=True)
    sp.add_argument("--points", type=int, default=33)
    sp = add("dsc-bound", cmd_dsc, "distributed source coding weighted-rate bound")
    sp.add_argument("--instance", required=True)
    sp.add_argument("--mu1", type=float, default=1.0)
    sp.add_argument("--mu2", type=float, default=1.0)
    sp = add("fii-check", cmd_fii, "matrix Fisher information inequality")
    sp.add_argument("--u", required=True)
    sp.add_argument("--v", required=True)
    sp.add_argument("--a", help="scalar, JSON matrix, file, or 'stam' (default)")
    sp.add_argument("--method", choices=("auto", "quad", "mc"), default="auto")
    sp.add_argument("--samples", type=int)
    sp = add("crb-check", cmd_crb, "Cramer-Rao inequality J >= Cov^-1")
    sp.add_argument("--dist", required=True)
    sp.add_argument("--method", choices=("auto", "quad", "mc"), default="auto")
    sp.add_argument("--samples", type=int)
    sp = add("debruijn-check", cmd_debruijn, "de Bruijn identity at noise level t")
    sp.add_argument("--dist", required=True)
    sp.add_argument("--kz")
    sp.add_argument("--t", type=float, default=1.0)
    sp.add_argument("--method", choices=("auto", "quad", "mc"), default="auto")
    sp.add_argument("--samples", type=int)
    sp = add("entropy-est", cmd_entropy, "differential entropy of a candidate (optionally plus noise)")
    sp.add_argument("--dist", required=True)
    sp.add_argument("--kz")
    sp.add_argument("--method", choices=("auto", "quad", "mc", "knn"), default="auto")
    sp.add_argument("--samples", type=int)
    return p


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv, tols = _split_tolerances(argv)
        args = parser.parse_args(argv)
        if not getattr(args, "fn", None):
            raise _UsageError(parser.format_help())
        est, scfg = _configs(args, tols)
        return args.fn(args, est, scfg)
    except _UsageError as exc:
        sys.stderr.write(f"{exc}\n")
        return EXIT_INPUT
    except (ExtremalError, ValueError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
