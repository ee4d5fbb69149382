"""Command-line entry point.

Exit codes: 0 success, 1 invalid input or configuration, 2 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .cr import CrParams, calibrate_cr
from .cycling import refocus_intervals
from .experiments import (CCZ_MATRIX, TOFFOLI_MATRIX, ConfigError, ErrorAnalysisConfig, StabilityConfig,
                          run_error_analysis, run_stability_experiment)
from .pulse import BranchAmbiguityError
from .tomography import ExpectationTable, ProjectionError, qpt_reconstruct
from .verification import run_verification

IDEALS = {"ccz": CCZ_MATRIX, "toffoli": TOFFOLI_MATRIX}


class UsageError(ValueError):
    pass


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from None


def _emit(data, args, stream=None):
    stream = stream or sys.stdout
    if getattr(args, "format", None) == "csv" and isinstance(data, list):
        keys = list(data[0]) if data else []
        stream.write(",".join(keys) + "\n")
        for row in data:
            stream.write(",".join(str(row[k]) for k in keys) + "\n")
    else:
        stream.write(json.dumps(data, indent=1, default=_jsonable) + "\n")


def _jsonable(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _load_config(cls, args):
    data = {}
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config: {e}") from None
    cfg = cls.from_dict(data)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.shots is not None:
        overrides["shots"] = args.shots
    return cfg.replace(**overrides) if overrides else cfg


def cmd_verify(args) -> int:
    results = run_verification(args.seed or 0)
    rows = [r.to_dict() for r in results]
    if args.format == "json":
        _emit(rows, args)
    else:
        for r in results:
            print(f"{'PASS' if r.passed else 'FAIL'}  {r.name}: {r.value:.3e} (tol {r.tolerance:.0e})")
    return 0 if all(r.passed for r in results) else 2


def cmd_refocus(args) -> int:
    alpha = _floats(args.alpha)
    if len(alpha) != 3:
        raise UsageError("--alpha takes three comma-separated values")
    plan = refocus_intervals(alpha, args.min_spacing, sign=args.sign, grid=args.grid)
    _emit(plan.to_dict(), args)
    return 0


def _random_physical(seed: int) -> CrParams:
    rng = np.random.default_rng(seed)
    return CrParams(tuple(rng.uniform(-0.5, 0.5, 3)), tuple(rng.uniform(0.3, 1.2, 3)),
                    tuple(rng.uniform(-0.2, 0.2, 3)), tuple(rng.uniform(-0.2, 0.2, 3)))


def cmd_calibrate_cr(args) -> int:
    if args.config:
        try:
            physical = CrParams.from_dict(json.loads(Path(args.config).read_text()))
        except (OSError, json.JSONDecodeError, KeyError, TypeError) as e:
            raise ConfigError(f"cannot read CR parameters: {e}") from None
    else:
        physical = _random_physical(args.seed or 0)
    cal = calibrate_cr(physical, k=args.level)
    out = {"physical": physical.to_dict(), **cal.to_dict()}
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        path = Path(args.out) / "cr_corrections.json"
        path.write_text(json.dumps(out, indent=1))
    _emit(out, args)
    return 0 if cal.converged else 2


def cmd_qpt(args) -> int:
    try:
        table = ExpectationTable.from_json(Path(args.input).read_text())
    except (OSError, json.JSONDecodeError, KeyError) as e:
        raise ConfigError(f"cannot read expectation table: {e}") from None
    res = qpt_reconstruct(table, strict=True)
    D = 2 ** table.plan.n_qubits
    ideal = IDEALS.get(args.ideal, np.eye(D)) if D == 8 else np.eye(D)
    out = {"fidelity": res.fidelity(ideal), "sigma": res.linear_sigma(ideal), "ideal": args.ideal,
           "iterations": res.iterations, "residual": res.residual,
           "tp_error": res.superoperator.tp_error(), "min_choi_eigenvalue": res.superoperator.min_choi_eigenvalue()}
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        np.save(Path(args.out) / "superoperator.npy", res.superoperator.matrix)
    _emit(out, args)
    return 0


def cmd_stability(args) -> int:
    cfg = _load_config(StabilityConfig, args)
    res = run_stability_experiment(cfg, out_dir=args.out, fmt=args.format or "csv", plot=args.plot)
    _emit({"summary": res.summary, "files": [str(f) for f in res.files]}, argparse.Namespace(format="json"))
    return 0


def cmd_error_analysis(args) -> int:
    cfg = _load_config(ErrorAnalysisConfig, args)
    res = run_error_analysis(cfg, out_dir=args.out, fmt=args.format or "csv", plot=args.plot)
    _emit({"summary": res.summary, "files": [str(f) for f in res.files]}, argparse.Namespace(format="json"))
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON configuration file")
    common.add_argument("--seed", type=int)
    common.add_argument("--shots", type=int)
    common.add_argument("--out", help="output directory")
    common.add_argument("--format", choices=("json", "csv"), help="defaults to csv for experiments, json otherwise")
    common.add_argument("--plot", action=argparse.BooleanOptionalAction, default=True)
    common.add_argument("--error-json", action="store_true", help="report failures as JSON on stderr")

    p = argparse.ArgumentParser(prog="basiscycle", description="Basis-cycling simulator and verification toolkit")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("verify", parents=[common], help="run the algebraic identity checks").set_defaults(fn=cmd_verify)

    r = sub.add_parser("refocus", parents=[common], help="refocusing intervals for given alpha")
    r.add_argument("--alpha", required=True, help="a0,a1,a2")
    r.add_argument("--min-spacing", type=float, default=2.0)
    r.add_argument("--sign", type=int, choices=(1, -1), default=1)
    r.add_argument("--grid", type=float, default=1.0)
    r.set_defaults(fn=cmd_refocus)

    c = sub.add_parser("calibrate-cr", parents=[common], help="simulated CR calibration")
    c.add_argument("--level", type=int, choices=(0, 2), default=2)
    c.set_defaults(fn=cmd_calibrate_cr)

    q = sub.add_parser("qpt", parents=[common], help="reconstruct a process from an expectation table")
    q.add_argument("--input", required=True)
    q.add_argument("--ideal", choices=("ccz", "toffoli", "identity"), default="ccz")
    q.set_defaults(fn=cmd_qpt)

    sub.add_parser("stability", parents=[common], help="fidelity time series").set_defaults(fn=cmd_stability)
    sub.add_parser("error-analysis", parents=[common], help="truth table, phases, identity ladder").set_defaults(
        fn=cmd_error_analysis)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ProjectionError, BranchAmbiguityError, np.linalg.LinAlgError, ArithmeticError, RuntimeError) as e:
        return _fail(args, 2, e)
    except ValueError as e:
        return _fail(args, 1, e)


def _fail(args, code: int, err: Exception) -> int:
    if args.error_json:
        sys.stderr.write(json.dumps({"error": type(err).__name__, "message": str(err), "exit_code": code}) + "\n")
    else:
        sys.stderr.write(f"error: {err}\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
