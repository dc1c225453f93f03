"""Command-line experiment runner.

Subcommands: parse, normal-order, wcp, metric, evolve, rotsym.
Exit codes: 0 success, 1 validation/model failure, 2 usage error.
Outputs are deterministic for identical inputs and are written atomically
(temp file + rename).  EQLAB_TRUNCATION sets the default truncation.
"""

from __future__ import annotations

import argparse
import io
import json
import os
import sys
import tempfile
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import dsl
from .correspondence import (
    fubini_study_metric,
    model_fiducial,
    model_space,
    wcp_numeric,
)
from .dynamics import TimeGrid, compare_trajectories, reduced_evolve, schrodinger_evolve
from .errors import EqlabError
from .fock import build_operator
from .frames import normal_order
from .operators import render
from .rotsym import RotsymParams, verify_match
from .scalars import ScalarPoly


class UsageError(Exception):
    pass


def _parse_rational(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise UsageError(f"not a rational number: {text!r} ({exc})") from exc


def _parse_param_overrides(entries) -> dict:
    out = {}
    for entry in entries or ():
        if "=" not in entry:
            raise UsageError(f"--param needs NAME=VALUE, got {entry!r}")
        name, _, value = entry.partition("=")
        out[name.strip()] = _parse_rational(value.strip())
    return out


def _default_truncation(args) -> int | None:
    if getattr(args, "truncation", None) is not None:
        return args.truncation
    env = os.environ.get("EQLAB_TRUNCATION")
    if env:
        try:
            return int(env)
        except ValueError as exc:
            raise UsageError(f"EQLAB_TRUNCATION must be an int, got {env!r}") from exc
    return None


def _load_model(path: str, overrides, truncation) -> dsl.CheckedModel:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise EqlabError(f"cannot read {path}: {exc}") from exc
    result = dsl.parse_model(text)
    for d in result.diagnostics:
        print(d.render(path), file=sys.stderr)
    if not result.ok:
        raise EqlabError(f"{path}: parse failed")
    return dsl.validate(
        result.spec,
        name=Path(path).stem,
        param_overrides=overrides,
        truncation_override=truncation,
    )


def _write_atomic(path: str, text: str):
    target = Path(path)
    fd, tmp = tempfile.mkstemp(dir=str(target.parent) or ".",
                               prefix=target.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, str(target))
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def _emit(args, text: str):
    if getattr(args, "output", None):
        _write_atomic(args.output, text)
    else:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")


def _grid_values(spec: str) -> list:
    """Parse 'lo:hi:count' (or a single number) into a list of floats."""
    if ":" not in spec:
        return [float(spec)]
    parts = spec.split(":")
    if len(parts) != 3:
        raise UsageError(f"grid spec must be lo:hi:count, got {spec!r}")
    lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
    if count < 1:
        raise UsageError("grid count must be >= 1")
    if count == 1:
        return [lo]
    return [lo + (hi - lo) * k / (count - 1) for k in range(count)]


# -- subcommands --


def cmd_parse(args) -> int:
    model = _load_model(args.model, _parse_param_overrides(args.param),
                        _default_truncation(args))
    n = model.spec.total_modes
    word = "mode" if n == 1 else "modes"
    print(f"ok: {n} {word}, hermitian")
    return 0


def cmd_normal_order(args) -> int:
    model = _load_model(args.model, _parse_param_overrides(args.param),
                        _default_truncation(args))
    frame = model.frames.get(args.frame)
    if frame is None:
        raise EqlabError(f"unknown frame {args.frame!r}")
    ast, diagnostics = dsl.parse_expression(args.expression, model.spec)
    for d in diagnostics:
        print(d.render("<expression>"), file=sys.stderr)
    if ast is None:
        raise EqlabError("expression parse failed")
    expr = dsl.evaluate_expression(ast, model)
    ordered = normal_order(expr, frame)
    _emit(args, render(ordered, set_order=model.set_order) + "\n")
    return 0


def cmd_wcp(args) -> int:
    model = _load_model(args.model, _parse_param_overrides(args.param),
                        _default_truncation(args))
    n = len(model.shifted_modes)
    pgrid = _grid_values(args.grid_p)
    qgrid = _grid_values(args.grid_q)
    points = [([pv] * n, [qv] * n) for pv in pgrid for qv in qgrid]
    report = wcp_numeric(model, points, leakage_bound=args.leakage_bound)
    if args.format == "csv":
        buf = io.StringIO()
        report.write_csv(buf)
        _emit(args, buf.getvalue())
    else:
        _emit(args, report.to_json() + "\n")
    return 0


def cmd_metric(args) -> int:
    model = _load_model(args.model, _parse_param_overrides(args.param),
                        _default_truncation(args))
    space = model_space(model)
    fid = model_fiducial(model, space)
    n = len(model.shifted_modes)
    tensor = fubini_study_metric(
        space, fid.state, [args.p] * n, [args.q] * n,
        step=args.step, shifted_sets=set(model.shifted_sets),
    )
    if args.format == "csv":
        lines = [",".join(repr(float(x)) for x in row) for row in tensor.matrix]
        _emit(args, "\n".join(lines) + "\n")
    else:
        _emit(args, json.dumps(tensor.to_json_dict(), sort_keys=True, indent=2) + "\n")
    return 0


def cmd_evolve(args) -> int:
    model = _load_model(args.model, _parse_param_overrides(args.param),
                        _default_truncation(args))
    from .correspondence import hbar_split

    space = model_space(model)
    fid = model_fiducial(model, space)
    n = len(model.shifted_modes)
    grid = TimeGrid.for_horizon(args.dt, args.horizon)

    h_matrix = build_operator(model.hamiltonian, space, model.numeric_parameters())
    from .fock import coherent_state
    from .operators import Generator, Kind, OperatorExpr

    p0 = [args.p0] * n
    q0 = [args.q0] * n
    psi0 = coherent_state(space, fid.state, p0, q0, model.shifted_sets).state
    q_ops, p_ops = [], []
    for set_id, k in model.shifted_modes:
        from .fock import build_generators
        qop, pop = build_generators(space, set_id, k)
        q_ops.append(qop)
        p_ops.append(pop)
    full = schrodinger_evolve(h_matrix, psi0, grid, q_ops=q_ops, p_ops=p_ops)

    h_classical, corrections = hbar_split(model.wcp_polynomial())
    params = dict(model.numeric_parameters())
    params["hbar"] = float(model.hbar_value)
    reduced = reduced_evolve(h_classical, p0, q0, grid, params=params)
    report = compare_trajectories(full, reduced)

    merged = reduced.__class__(
        times=grid.times,
        p=reduced.p,
        q=reduced.q,
        q_expect=full.q_expect,
        p_expect=full.p_expect,
        norm=full.norm,
        energy=full.energy,
    )
    buf = io.StringIO()
    merged.write_csv(buf)
    if args.output:
        _write_atomic(args.output, buf.getvalue())
        print(report.to_json())
    else:
        sys.stdout.write(buf.getvalue())
        print(report.to_json())
    return 0


def cmd_rotsym(args) -> int:
    params = RotsymParams(
        n_modes=args.N,
        m=_parse_rational(args.m),
        zeta=_parse_rational(args.zeta),
        v=_parse_rational(args.v),
    )
    truncation = _default_truncation(args) or 24
    report = verify_match(params, truncation=truncation,
                          numeric=not args.no_numeric)
    _emit(args, report.to_json() + "\n")
    return 0 if report.exact_match else 1


def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(
        prog="eqlab",
        description="coherent-state quantization laboratory",
    )
    sub = top.add_subparsers(dest="command", required=True)

    def common(p, model=True):
        if model:
            p.add_argument("--model", required=True, help="path to a .eqm file")
        p.add_argument("--param", action="append", metavar="NAME=VALUE",
                       help="override a model parameter (exact rational)")
        p.add_argument("--truncation", type=int, help="per-mode Fock dimension")
        p.add_argument("--format", choices=("json", "csv"), default="json")
        p.add_argument("--output", "-o", help="write primary artifact here")

    p = sub.add_parser("parse", help="validate a model file")
    p.add_argument("model")
    p.add_argument("--param", action="append", metavar="NAME=VALUE")
    p.add_argument("--truncation", type=int)
    p.set_defaults(fn=cmd_parse)

    p = sub.add_parser("normal-order", help="normal order an expression")
    common(p)
    p.add_argument("--frame", required=True)
    p.add_argument("expression")
    p.set_defaults(fn=cmd_normal_order)

    p = sub.add_parser("wcp", help="coherent expectation over a grid")
    common(p)
    p.add_argument("--grid-p", default="-1:1:3", help="lo:hi:count")
    p.add_argument("--grid-q", default="-1:1:3", help="lo:hi:count")
    p.add_argument("--leakage-bound", type=float, default=1e-6)
    p.set_defaults(fn=cmd_wcp)

    p = sub.add_parser("metric", help="phase-space metric at a point")
    common(p)
    p.add_argument("--p", type=float, default=0.0)
    p.add_argument("--q", type=float, default=0.0)
    p.add_argument("--step", type=float, default=1e-3)
    p.set_defaults(fn=cmd_metric)

    p = sub.add_parser("evolve", help="full vs reduced trajectories")
    common(p)
    p.add_argument("--p0", type=float, default=0.0)
    p.add_argument("--q0", type=float, default=1.0)
    p.add_argument("--dt", type=float, default=1e-2)
    p.add_argument("--horizon", type=float, default=10.0)
    p.set_defaults(fn=cmd_evolve)

    p = sub.add_parser("rotsym", help="reducible-model match report")
    p.add_argument("--N", type=int, default=1)
    p.add_argument("--m", default="1")
    p.add_argument("--zeta", default="1/2")
    p.add_argument("--v", default="1")
    p.add_argument("--no-numeric", action="store_true")
    p.add_argument("--truncation", type=int)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--output", "-o")
    p.set_defaults(fn=cmd_rotsym)

    return top


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.fn(args)
    except UsageError as exc:
        print(f"eqlab: {exc}", file=sys.stderr)
        return 2
    except EqlabError as exc:
        print(f"eqlab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
