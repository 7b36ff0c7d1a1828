"""Command-line interface: config ingestion, dispatch, machine-readable reports.

Commands (all take --params <file>, a JSON document with keys d, c, beta,
B, nu, mu):

    validate         admissibility report (JSON)
    derive           btilde, beta_tilde, C_k, classification, spectrum,
                     Perron pair when critical (JSON)
    vsolve           v(t, lambda) and the psi-integral (JSON)
    laplace          exact transition Laplace transform (JSON)
    dgen             one discrete-generator value on e_lambda (JSON)
    prop31           corrected discrete-generator sweep over n
                     (CSV: n, raw, corrected, limit, gap; verdict JSON)
    cgen             scaled-generator sweep on a bump plus its limit (CSV + JSON)
    simulate         CBI paths (CSV: path_id, t, x_1..x_d) + moment summary
    simulate-scaled  step-scaled chain paths (CSV) + moment summary
    simulate-limit   limiting ray diffusion paths (CSV) + moment summary

Exit codes: 0 success, 2 validation/classification failure, 3 solver
failure, 64 usage error or unknown command, 65 unreadable or malformed
params JSON, 66 dimension mismatch. Every JSON report embeds the fully
resolved configuration so a run is reproducible from the report alone;
CSV output is byte-stable for a fixed config and seed.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import affine, generators, moments, simulate
from .errors import ClassificationError, ConsistencyError, NumericRangeError, SolverError
from .model import CbiParams, validate
from .testfunctions import bump

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_SOLVER = 3
EXIT_USAGE = 64
EXIT_INPUT = 65
EXIT_DIMENSION = 66


class _UsageError(Exception):
    pass


class _InputError(Exception):
    pass


class _DimensionError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would sys.exit(2); keep codes ours
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="cbi", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command")
    for name in ("validate", "derive", "vsolve", "laplace", "dgen", "prop31",
                 "cgen", "simulate", "simulate-scaled", "simulate-limit"):
        p = sub.add_parser(name)
        p.add_argument("--params", required=True)
        p.add_argument("--t", type=float, default=None)
        p.add_argument("--x", default=None)
        p.add_argument("--lambda", dest="lam", default=None)
        p.add_argument("--n", type=int, default=None)
        p.add_argument("--n-list", dest="n_list", default="10,100,1000,10000")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default=None)
        p.add_argument("--tol", type=float, default=1e-10)
        p.add_argument("--quad-order", dest="quad_order", type=int, default=32)
        p.add_argument("--dt", type=float, default=1e-3)
        p.add_argument("--n-paths", dest="n_paths", type=int, default=100)
        p.add_argument("--bump-center", dest="bump_center", default=None)
        p.add_argument("--bump-radius", dest="bump_radius", type=float, default=None)
        p.add_argument("--bump-amplitude", dest="bump_amplitude", type=float, default=1.0)
    return parser


def _load_params(path: str) -> CbiParams:
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise _InputError(f"cannot read params file {path!r}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise _InputError(f"malformed JSON in {path!r}: {exc}") from exc
    try:
        return CbiParams.from_dict(data)
    except ValueError as exc:
        raise _InputError(str(exc)) from exc


def _vec(text: str | None, d: int, name: str) -> np.ndarray:
    if text is None:
        raise _UsageError(f"--{name} is required for this command")
    try:
        v = np.array([float(s) for s in text.split(",")], dtype=float)
    except ValueError as exc:
        raise _UsageError(f"--{name} must be comma-separated decimals: {exc}") from exc
    if len(v) != d:
        raise _DimensionError(f"--{name} has length {len(v)}, params require d={d}")
    return v


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(s) for s in text.split(","))
    except ValueError as exc:
        raise _UsageError(f"--n-list must be comma-separated integers: {exc}") from exc


def _jsonify(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, dict):
        return {str(k): _jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonify(v) for v in obj]
    return obj


def _emit(report: dict) -> None:
    print(json.dumps(_jsonify(report), indent=2, sort_keys=True))


def _config(args, **extra) -> dict:
    base = {"params_file": args.params, "tol": args.tol,
            "quad_order": args.quad_order, "seed": args.seed}
    base.update(extra)
    return base


def _require_admissible(args, params) -> dict | None:
    """Returns the failure report when inadmissible, else None."""
    report = validate(params)
    if report.admissible:
        return None
    return {"command": args.command, "config": _config(args),
            "result": {"admissible": False, "violations": report.violations}}


def _write_csv(args, header: str, rows: list[str]) -> None:
    text = header + "\n" + "\n".join(rows) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def _cmd_validate(args) -> int:
    params = _load_params(args.params)
    report = validate(params)
    _emit({"command": "validate", "config": _config(args),
           "result": {"admissible": report.admissible,
                      "moment_order_ok": {str(k): bool(v) for k, v in report.moment_order_ok.items()},
                      "computed_integrals": report.computed_integrals,
                      "violations": report.violations}})
    return EXIT_OK if report.admissible else EXIT_VALIDATION


def _cmd_derive(args) -> int:
    params = _load_params(args.params)
    fail = _require_admissible(args, params)
    if fail:
        _emit(fail)
        return EXIT_VALIDATION
    dq = moments.derive(params)
    result = {
        "btilde": dq.btilde,
        "beta_tilde": dq.beta_tilde,
        "C": list(dq.big_c),
        "cbar": dq.cbar,
        "classification": dq.classification,
        "spectral": {"eigenvalues": list(dq.spectral.eigenvalues),
                     "spectral_radius": dq.spectral.spectral_radius,
                     "spectral_abscissa": dq.spectral.spectral_abscissa},
        "perron": None if dq.perron is None else
                  {"u_right": dq.perron.u_right, "u_left": dq.perron.u_left},
    }
    _emit({"command": "derive", "config": _config(args), "result": result})
    return EXIT_OK


def _cmd_vsolve(args) -> int:
    params = _load_params(args.params)
    fail = _require_admissible(args, params)
    if fail:
        _emit(fail)
        return EXIT_VALIDATION
    if args.t is None:
        raise _UsageError("--t is required for vsolve")
    lam = _vec(args.lam, params.d, "lambda")
    sol = affine.solve_v(params, args.t, lam, rtol=args.tol, atol=args.tol * 1e-2,
                         quad_order=args.quad_order)
    _emit({"command": "vsolve",
           "config": _config(args, t=args.t, **{"lambda": lam}),
           "result": {"v": sol.v_final, "psi_integral": sol.psi_integral,
                      "solver_stats": sol.solver_stats}})
    return EXIT_OK


def _cmd_laplace(args) -> int:
    params = _load_params(args.params)
    fail = _require_admissible(args, params)
    if fail:
        _emit(fail)
        return EXIT_VALIDATION
    if args.t is None:
        raise _UsageError("--t is required for laplace")
    x = _vec(args.x, params.d, "x")
    lam = _vec(args.lam, params.d, "lambda")
    value = affine.laplace_transform(params, args.t, x, lam, rtol=args.tol,
                                     atol=args.tol * 1e-2, quad_order=args.quad_order)
    _emit({"command": "laplace",
           "config": _config(args, t=args.t, x=x, **{"lambda": lam}),
           "result": {"laplace_transform": value}})
    return EXIT_OK


def _cmd_dgen(args) -> int:
    params = _load_params(args.params)
    fail = _require_admissible(args, params)
    if fail:
        _emit(fail)
        return EXIT_VALIDATION
    if args.n is None:
        raise _UsageError("--n is required for dgen")
    x = _vec(args.x, params.d, "x")
    lam = _vec(args.lam, params.d, "lambda")
    value = generators.discrete_gen_exp(params, args.n, x, lam,
                                        quad_order=args.quad_order)
    _emit({"command": "dgen",
           "config": _config(args, n=args.n, x=x, **{"lambda": lam}),
           "result": {"discrete_generator": value}})
    return EXIT_OK


def _cmd_prop31(args) -> int:
    params = _load_params(args.params)
    fail = _require_admissible(args, params)
    if fail:
        _emit(fail)
        return EXIT_VALIDATION
    x = _vec(args.x, params.d, "x")
    lam = _vec(args.lam, params.d, "lambda")
    n_list = _int_list(args.n_list)
    table = generators.discrete_gen_table(params, x, lam, n_list,
                                          quad_order=args.quad_order)
    rows = [f"{n},{float(raw)!r},{float(corr)!r},{float(table.limit_formula)!r},{float(gap)!r}"
            for n, raw, corr, gap in zip(table.n_values, table.raw,
                                         table.corrected, table.gaps)]
    _write_csv(args, "n,raw,corrected,limit,gap", rows)
    if args.out:
        _emit({"command": "prop31",
               "config": _config(args, x=x, n_list=list(n_list), **{"lambda": lam}),
               "result": {"verdict": table.verdict, "fitted_slope": table.fitted_slope,
                          "limit": table.limit_formula, "csv": args.out}})
    return EXIT_OK


def _cmd_cgen(args) -> int:
    params = _load_params(args.params)
    fail = _require_admissible(args, params)
    if fail:
        _emit(fail)
        return EXIT_VALIDATION
    x = _vec(args.x, params.d, "x")
    n_list = _int_list(args.n_list)
    radius = args.bump_radius if args.bump_radius is not None else 2.0 * (1.0 + float(np.max(np.abs(x))))
    center = (_vec(args.bump_center, params.d, "bump-center")
              if args.bump_center is not None else np.zeros(params.d))
    f = bump(center, radius, args.bump_amplitude)
    dq = moments.derive(params)
    grad = f.gradient(x)
    drift_rate = float((dq.btilde @ x) @ grad)
    limit = generators.scaled_gen_limit(params, f, x)
    rows = []
    for n in n_list:
        val = generators.scaled_gen_apply(params, n, f, x)
        corrected = val - n * drift_rate
        rows.append(f"{n},{float(val)!r},{float(n * drift_rate)!r},{float(corrected)!r},"
                    f"{float(limit)!r},{float(abs(corrected - limit))!r}")
    _write_csv(args, "n,scaled,drift_term,corrected,limit,gap", rows)
    if args.out:
        _emit({"command": "cgen",
               "config": _config(args, x=x, n_list=list(n_list),
                                 bump_center=center, bump_radius=radius,
                                 bump_amplitude=args.bump_amplitude),
               "result": {"limit": limit, "drift_rate": drift_rate,
                          "converges_uncorrected":
                              generators.drift_convergence_criterion(params, f, x),
                          "csv": args.out}})
    return EXIT_OK


def _path_config(args, params) -> simulate.PathConfig:
    if args.t is None:
        raise _UsageError("--t (horizon) is required for simulation commands")
    x0 = _vec(args.x, params.d, "x")
    return simulate.PathConfig(x0=x0, horizon=args.t, dt=args.dt,
                               seed=args.seed, n_paths=args.n_paths)


def _moment_summary(states_end: np.ndarray, reference: np.ndarray) -> dict:
    emp = states_end.mean(axis=0)
    se = states_end.std(axis=0, ddof=1) / np.sqrt(len(states_end))
    return {"empirical_mean": emp, "reference_mean": reference,
            "standard_error": se,
            "within_3se": bool(np.all(np.abs(emp - reference) <= 3.0 * se + 1e-12))}


def _cmd_simulate(args) -> int:
    params = _load_params(args.params)
    fail = _require_admissible(args, params)
    if fail:
        _emit(fail)
        return EXIT_VALIDATION
    if args.out is None:
        raise _UsageError("--out is required for simulation commands")
    cfg = _path_config(args, params)
    paths = simulate.simulate_cbi(params, cfg)
    with open(args.out, "w") as fh:
        simulate.paths_to_csv(paths, fh)
    ends = np.stack([p.states[-1] for p in paths])
    ref = moments.mean(params, cfg.x0, cfg.horizon, order=args.quad_order)
    _emit({"command": "simulate",
           "config": _config(args, t=cfg.horizon, x=cfg.x0, dt=cfg.dt,
                             n_paths=cfg.n_paths),
           "result": {"csv": args.out, "moment_check": _moment_summary(ends, ref)}})
    return EXIT_OK


def _cmd_simulate_scaled(args) -> int:
    params = _load_params(args.params)
    fail = _require_admissible(args, params)
    if fail:
        _emit(fail)
        return EXIT_VALIDATION
    if args.out is None:
        raise _UsageError("--out is required for simulation commands")
    if args.n is None:
        raise _UsageError("--n (scale) is required for simulate-scaled")
    cfg = _path_config(args, params)
    paths = simulate.simulate_scaled_step(params, args.n, cfg)
    with open(args.out, "w") as fh:
        simulate.paths_to_csv(paths, fh)
    ends = np.stack([p.states[-1] for p in paths])
    m = int(np.floor(args.n * cfg.horizon + 1e-9))
    ref = moments.mean(params, args.n * cfg.x0, float(m), order=args.quad_order) / args.n
    _emit({"command": "simulate-scaled",
           "config": _config(args, t=cfg.horizon, x=cfg.x0, dt=cfg.dt,
                             n=args.n, n_paths=cfg.n_paths),
           "result": {"csv": args.out, "moment_check": _moment_summary(ends, ref)}})
    return EXIT_OK


def _cmd_simulate_limit(args) -> int:
    params = _load_params(args.params)
    fail = _require_admissible(args, params)
    if fail:
        _emit(fail)
        return EXIT_VALIDATION
    if args.out is None:
        raise _UsageError("--out is required for simulation commands")
    cfg = _path_config(args, params)
    paths = simulate.simulate_limit_diffusion(params, cfg)
    with open(args.out, "w") as fh:
        simulate.paths_to_csv(paths, fh)
    dq = moments.derive(params)
    ends = np.array([p.scalar[-1] for p in paths])[:, None]
    ref = np.array([float(dq.perron.u_left @ cfg.x0)
                    + cfg.horizon * float(dq.perron.u_left @ dq.beta_tilde)])
    _emit({"command": "simulate-limit",
           "config": _config(args, t=cfg.horizon, x=cfg.x0, dt=cfg.dt,
                             n_paths=cfg.n_paths),
           "result": {"csv": args.out, "moment_check": _moment_summary(ends, ref)}})
    return EXIT_OK


_HANDLERS = {
    "validate": _cmd_validate,
    "derive": _cmd_derive,
    "vsolve": _cmd_vsolve,
    "laplace": _cmd_laplace,
    "dgen": _cmd_dgen,
    "prop31": _cmd_prop31,
    "cgen": _cmd_cgen,
    "simulate": _cmd_simulate,
    "simulate-scaled": _cmd_simulate_scaled,
    "simulate-limit": _cmd_simulate_limit,
}


def run(argv: list[str]) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise _UsageError("a command is required (see --help)")
        return _HANDLERS[args.command](args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except _InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except _DimensionError as exc:
        print(f"dimension mismatch: {exc}", file=sys.stderr)
        return EXIT_DIMENSION
    except ClassificationError as exc:
        print(f"classification error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (SolverError, NumericRangeError, ConsistencyError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
