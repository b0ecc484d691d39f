"""Command-line workflows: ``run``, ``certify``, ``verify`` and ``compare``.

Exit codes: 0 success, 1 load or validation failure, 2 horizon reached before
tolerance, 3 divergence guard, 4 certificate fails, 5 not an equilibrium or
solvers disagree.
"""
import argparse
import csv
import json
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from .dynamics import SimParams, simulate
from .equilibrium import classify_equilibrium, kkt_residual, lyapunov_report
from .errors import MissingModulusError, OracleError
from .fixtures import fixture_path
from .game import load_scenario
from .operators import certify_strict_monotonicity
from .oracle import OracleParams, cross_validate, solve_vi
from .state import SystemState

log = logging.getLogger("aggdyn")

EXIT_OK, EXIT_LOAD, EXIT_HORIZON, EXIT_DIVERGED, EXIT_UNCERTIFIED, EXIT_MISMATCH = range(6)
EMITS = ("trajectory_csv", "report_json", "lyapunov_csv")
_TERMINATION_EXIT = {"tol_reached": EXIT_OK, "t_max": EXIT_HORIZON, "divergence_guard": EXIT_DIVERGED}


class _LoadFailure(Exception):
    pass


def _positive(kind):
    def parse(text):
        v = kind(text)
        if not v > 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return v
    return parse


def _emit_list(text):
    items = [t.strip() for t in text.split(",") if t.strip()]
    bad = [t for t in items if t not in EMITS]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown artifact(s) {bad}; choose from {list(EMITS)}")
    return items


def _resolve_scenario(path):
    """A file path, or the name of a bundled fixture such as ``G1.json``."""
    p = Path(path)
    if p.exists():
        return p
    bundled = fixture_path(p.stem)
    return Path(str(bundled)) if p.parent == Path(".") and bundled.is_file() else p


def _load(path):
    try:
        return load_scenario(_resolve_scenario(path))
    except (OSError, ValueError, KeyError, TypeError, IndexError) as exc:
        raise _LoadFailure(f"cannot load scenario {path}: {exc}") from exc


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")


def _out_dir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _lyapunov_reference(game, traj, args):
    """The final state when it meets ``--tol``, otherwise the oracle solution."""
    if traj.kkt_norms[-1] <= args.tol:
        return traj.final, args.tol
    ref, _ = solve_vi(game, args.mode, OracleParams(), seed=args.seed)
    return ref, max(args.tol, kkt_residual(game, ref, args.mode).norm)


def cmd_run(args):
    game = _load(args.scenario)
    params = SimParams(step_h=args.step, t_max=args.t_max, mode=args.mode,
                       stop_tol=args.tol, record_every=args.record_every)
    try:
        traj = simulate(game, params=params)
    except FloatingPointError as exc:
        print(f"simulation diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    out = _out_dir(args)
    emit = args.emit if args.emit is not None else list(EMITS)
    final = traj.final
    if "trajectory_csv" in emit:
        traj.to_csv(out / "trajectory.csv")
    if "report_json" in emit:
        _write_json(out / "report.json", {
            "mode": args.mode, "step_h": args.step, "t_max": args.t_max, "stop_tol": args.tol,
            "terminated_by": traj.terminated_by, "n_records": len(traj.states),
            "final_state": final.to_dict(),
            "kkt": kkt_residual(game, final, args.mode).to_dict()})
    if "lyapunov_csv" in emit and traj.terminated_by != "divergence_guard":
        try:
            ref, ref_tol = _lyapunov_reference(game, traj, args)
            rep = lyapunov_report(game, traj, ref, ref_tol=ref_tol)
        except (OracleError, ValueError) as exc:
            print(f"lyapunov reference unavailable: {exc}", file=sys.stderr)
        else:
            with open(out / "lyapunov.csv", "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["t", "V"])
                for s, v in zip(traj.states, rep.values):
                    w.writerow([f"{s.t:.17g}", f"{v:.17g}"])
    print(f"{traj.terminated_by}: t={final.t:.6g} kkt={traj.kkt_norms[-1]:.3e} "
          f"x={np.array2string(final.x, precision=6)}")
    return _TERMINATION_EXIT[traj.terminated_by]


def cmd_certify(args):
    game = _load(args.scenario)
    try:
        cert = certify_strict_monotonicity(game, args.mode)
    except MissingModulusError as exc:
        print(f"cannot certify: {exc}", file=sys.stderr)
        return EXIT_UNCERTIFIED
    report = cert.to_dict()
    _write_json(_out_dir(args) / "certificate.json", report)
    print(json.dumps(report, indent=2, sort_keys=True))
    return EXIT_OK if cert.holds else EXIT_UNCERTIFIED


def cmd_verify(args):
    game = _load(args.scenario)
    try:
        with open(args.state) as fh:
            state = SystemState.from_dict(json.load(fh))
        state.check_dims(game)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise _LoadFailure(f"cannot read state {args.state}: {exc}") from exc
    report = classify_equilibrium(game, state, args.tol)
    d = report.to_dict()
    _write_json(_out_dir(args) / "classification.json", d)
    print(json.dumps({k: d[k] for k in ("is_vgae", "is_vgne", "tol")}, sort_keys=True))
    return EXIT_OK if (report.is_vgae or report.is_vgne) else EXIT_MISMATCH


def multiplier_is_unique(game, state, tol=1e-7):
    """Linear independence of the active coupling rows and local-set normals.

    Under this condition the KKT multiplier at ``state`` is unique, so the
    dual gap between two solvers is meaningful.
    """
    m = game.constraint_dim
    if m == 0:
        return True
    active = np.flatnonzero(game.coupling_value(state.x) >= -tol)
    rows = [game.A[r] for r in active]
    blocks = game.agent_blocks(state.x)
    n = game.decision_dim
    for i, (omega, xi) in enumerate(zip(game.local_sets, blocks)):
        for v in np.atleast_2d(omega.active_normals(xi, tol)):
            if v.size:
                row = np.zeros(game.primal_dim)
                row[i * n:(i + 1) * n] = v
                rows.append(row)
    if not rows:
        return True
    M = np.array(rows)
    return bool(np.linalg.matrix_rank(M, tol=1e-9) == M.shape[0])


def cmd_compare(args):
    game = _load(args.scenario)
    try:
        if not certify_strict_monotonicity(game, args.mode).holds:
            print(f"warning: certificate does not hold for mode {args.mode}; comparing anyway",
                  file=sys.stderr)
    except MissingModulusError:
        print("warning: certificate unavailable; comparing anyway", file=sys.stderr)
    params = SimParams(step_h=args.step, t_max=args.t_max, mode=args.mode,
                       stop_tol=args.tol, record_every=args.record_every)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        try:
            traj = simulate(game, params=params)
        except FloatingPointError as exc:
            print(f"simulation diverged: {exc}", file=sys.stderr)
            return EXIT_DIVERGED
        code = _TERMINATION_EXIT[traj.terminated_by]
        if code != EXIT_OK:
            print(f"dynamics stopped by {traj.terminated_by}", file=sys.stderr)
            return code
        try:
            cv = cross_validate(game, args.mode, traj.final, dyn_tol=args.tol,
                                compare_lambda=multiplier_is_unique(game, traj.final))
        except OracleError as exc:
            print(f"oracle failed: {exc}", file=sys.stderr)
            return EXIT_MISMATCH
    d = cv.to_dict()
    d["dynamics_state"] = traj.final.to_dict()
    d["mode"] = args.mode
    _write_json(_out_dir(args) / "comparison.json", d)
    print(json.dumps({k: d[k] for k in ("agree", "primal_gap", "sigma_gap", "lambda_gap")},
                     sort_keys=True))
    return EXIT_OK if cv.agree else EXIT_MISMATCH


def build_parser():
    parser = argparse.ArgumentParser(prog="aggdyn", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--scenario", required=True, help="scenario JSON file or bundled fixture name")
        p.add_argument("--mode", choices=("gae", "gne"), default="gae")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--seed", type=int, default=0)

    def sim(p):
        p.add_argument("--step", type=_positive(float), default=0.01)
        p.add_argument("--t-max", type=_positive(float), default=200.0)
        p.add_argument("--tol", type=_positive(float), default=1e-6)
        p.add_argument("--record-every", type=_positive(int), default=10)

    p = sub.add_parser("run", help="simulate the dynamics and write artifacts")
    common(p)
    sim(p)
    p.add_argument("--emit", type=_emit_list, default=None,
                   help=f"comma-separated subset of {','.join(EMITS)} (default: all)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("certify", help="evaluate the strict-monotonicity certificate")
    common(p)
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("verify", help="classify a state as v-GAE / v-GNE")
    common(p)
    p.add_argument("--state", required=True, help="state JSON with keys x, sigma, lambda")
    p.add_argument("--tol", type=_positive(float), default=1e-8)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("compare", help="cross-validate the dynamics against the VI oracle")
    common(p)
    sim(p)
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_LOAD if exc.code else EXIT_OK
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except _LoadFailure as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_LOAD


if __name__ == "__main__":
    sys.exit(main())
