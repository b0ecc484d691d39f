"""Reference solver and feasibility probe, independent of the dynamics.

:func:`solve_vi` runs the extragradient method on the extended operator
over a compactified copy of the state space; :func:`cross_validate`
compares its answer with a result obtained elsewhere.
"""
import itertools
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .operators import _check_mode, certify_strict_monotonicity, extended_operator_stacked
from .errors import OracleError
from .state import SystemState


@dataclass
class FeasibilityReport:
    feasible_point: np.ndarray
    slater_margin: float


def _project_primal(game, x):
    blocks = game.agent_blocks(x)
    return np.concatenate([s.project(blocks[i]) for i, s in enumerate(game.local_sets)])


def feasibility_probe(game, max_iters=500, max_rounds=60):
    """Look for a point of ``Omega`` with ``A x <= b`` and maximize its slack.

    Projected gradient on ``1/2 |max(A x - b + t, 0)|^2`` first with ``t = 0``,
    then with ``t`` bisected upwards. ``slater_margin`` is ``min(b - A x)`` at
    the best point found (``+inf`` without coupling constraints).
    """
    x0 = np.concatenate([s.center() for s in game.local_sets])
    if game.constraint_dim == 0:
        return FeasibilityReport(x0, math.inf)
    A, b = game.A, game.coupling_b
    lip = float(np.linalg.norm(A, 2)) ** 2
    if lip == 0.0:
        margin = float(np.min(b))
        return FeasibilityReport(x0 if margin >= 0 else None, margin)
    gamma = 1.0 / lip

    def margin(x):
        return float(np.min(b - A @ x))

    def descend(x, t):
        for _ in range(max_iters):
            r = np.maximum(A @ x - b + t, 0.0)
            if not r.any():
                break
            x_new = _project_primal(game, x - gamma * (A.T @ r))
            moved = np.linalg.norm(x_new - x)
            x = x_new
            if moved <= 1e-13 * (1.0 + np.linalg.norm(x)):
                break
        return x

    best = descend(x0, 0.0)
    best_m = margin(best)
    if best_m < -1e-12:
        return FeasibilityReport(None, best_m)

    t_lo, t_hi = max(best_m, 0.0), None
    for _ in range(max_rounds):
        t = 2.0 * t_lo + 1e-3 if t_hi is None else 0.5 * (t_lo + t_hi)
        xt = descend(best, t)
        mt = margin(xt)
        if mt > best_m:
            best, best_m = xt, mt
        if mt >= t - 1e-12:
            t_lo = max(t, mt)
        else:
            t_hi = t
        if t_hi is not None and t_hi - t_lo <= 1e-9 * (1.0 + abs(t_lo)):
            break
    return FeasibilityReport(best, best_m)


@dataclass
class OracleParams:
    step: float = None
    max_iters: int = 200_000
    tol: float = 1e-10
    lambda_cap: float = None
    max_cap_doublings: int = 3


@dataclass
class OracleReport:
    iters: int
    final_residual: float
    lambda_cap_active: bool
    lambda_cap: float
    step: float
    lipschitz_estimate: float

    def to_dict(self):
        return dict(self.__dict__)


def sigma_radius(game):
    """Half-width of the box for ``sigma``; it contains ``avg(x)`` for all ``x`` in ``Omega``."""
    diam = max(s.diameter() for s in game.local_sets)
    return 2.0 * diam + max(float(np.linalg.norm(s.center())) for s in game.local_sets)


def default_lambda_cap(game):
    worst = 0.0
    for cost, omega in zip(game.costs, game.local_sets):
        for v in omega.vertices():
            worst = max(worst, float(np.linalg.norm(cost.f_grad(v))))
    return 10.0 * (1.0 + float(np.linalg.norm(game.coupling_b)) + worst)


class _WorkingSet:
    """``Omega x [-R, R]^p x [0, cap]^m`` in stacked coordinates."""

    def __init__(self, game, cap):
        self.game = game
        self.nx, self.p = game.primal_dim, game.aggregate_dim
        self.R = sigma_radius(game)
        self.cap = cap

    def project(self, z):
        nx, p = self.nx, self.p
        return np.concatenate([
            _project_primal(self.game, z[:nx]),
            np.clip(z[nx:nx + p], -self.R, self.R),
            np.clip(z[nx + p:], 0.0, self.cap),
        ])

    def sample(self, rng):
        x = np.concatenate([s.sample(rng, 1)[0] for s in self.game.local_sets])
        sigma = rng.uniform(-self.R, self.R, self.p)
        lam = rng.uniform(0.0, self.cap, self.game.constraint_dim)
        return np.concatenate([x, sigma, lam])


def estimate_lipschitz(game, mode, work, n_points=4, eps=1e-6, seed=0):
    """Largest spectral norm of a finite-difference Jacobian of ``F_ext``."""
    rng = np.random.default_rng(seed)
    dim = work.nx + work.p + game.constraint_dim
    eye = np.eye(dim)
    best = 0.0
    for _ in range(n_points):
        z = work.sample(rng)
        fwd = extended_operator_stacked(game, z + eps * eye, mode)
        bwd = extended_operator_stacked(game, z - eps * eye, mode)
        J = (fwd - bwd).T / (2 * eps)
        best = max(best, float(np.linalg.norm(J, 2)))
    return best


def _extragradient(game, mode, params, work, z0, step):
    def F(z):
        return extended_operator_stacked(game, z, mode)

    def natural_residual(z, Fz):
        return float(np.linalg.norm(z - work.project(z - Fz)))

    z = work.project(z0)
    Fz = F(z)
    res = natural_residual(z, Fz)
    it = 0
    while res > params.tol and it < params.max_iters:
        z_half = work.project(z - step * Fz)
        z = work.project(z - step * F(z_half))
        Fz = F(z)
        res = natural_residual(z, Fz)
        it += 1
    return z, it, res


def solve_vi(game, mode="gae", params=None, z0=None, seed=0):
    """Solve ``VI(C, F_ext)`` with ``C = Omega x [-R, R]^p x [0, cap]^m``.

    Returns ``(SystemState, OracleReport)``. The dual cap is doubled while a
    multiplier sits on it, at most ``max_cap_doublings`` times.
    """
    _check_mode(mode)
    params = params or OracleParams()
    if all(c.mu is not None for c in game.costs):
        if not certify_strict_monotonicity(game, mode).holds:
            warnings.warn(f"certificate does not hold for mode {mode!r}; "
                          "the VI solution may not be unique", RuntimeWarning, stacklevel=2)
    cap = params.lambda_cap or default_lambda_cap(game)
    for attempt in range(params.max_cap_doublings + 1):
        work = _WorkingSet(game, cap)
        L = estimate_lipschitz(game, mode, work, seed=seed)
        step = params.step if params.step is not None else 0.9 / max(L, 1e-12)
        if step * L > 0.9 + 1e-12:
            raise ValueError(f"oracle step {step} too large for Lipschitz estimate {L:.4g}")
        start = (z0 if z0 is not None
                 else np.concatenate([np.concatenate([s.center() for s in game.local_sets]),
                                      np.zeros(work.p), np.zeros(game.constraint_dim)]))
        z, iters, res = _extragradient(game, mode, params, work, np.asarray(start, float), step)
        lam = z[work.nx + work.p:]
        active = bool(lam.size and np.any(cap - lam <= max(params.tol, 1e-9 * cap)))
        report = OracleReport(iters, res, active, cap, step, L)
        if res > params.tol:
            raise OracleError(f"extragradient did not reach tol {params.tol:g} in "
                              f"{params.max_iters} iterations (residual {res:.3e})")
        if not active:
            return SystemState.from_stacked(game, z), report
        cap *= 2.0
    raise OracleError(f"dual cap still active after {params.max_cap_doublings} doublings "
                      f"(cap {cap / 2:.4g})")


def multi_start(game, mode="gae", params=None, n_starts=3, seed=0):
    """Run the oracle from random starts; returns states and the ``(x, sigma)`` spread."""
    params = params or OracleParams()
    rng = np.random.default_rng(seed)
    cap = params.lambda_cap or default_lambda_cap(game)
    work = _WorkingSet(game, cap)
    states = [solve_vi(game, mode, params, z0=work.sample(rng), seed=seed)[0]
              for _ in range(n_starts)]
    spread = 0.0
    for a, b in itertools.combinations(states, 2):
        spread = max(spread, float(np.linalg.norm(np.concatenate([a.x - b.x, a.sigma - b.sigma]))))
    return states, spread


@dataclass
class CrossValidation:
    primal_gap: float
    sigma_gap: float
    lambda_gap: float
    agree: bool
    threshold: float
    oracle_state: SystemState
    oracle_report: OracleReport

    def to_dict(self):
        return {"primal_gap": self.primal_gap, "sigma_gap": self.sigma_gap,
                "lambda_gap": self.lambda_gap, "agree": self.agree,
                "threshold": self.threshold, "oracle_state": self.oracle_state.to_dict(),
                "oracle_report": self.oracle_report.to_dict()}


def cross_validate(game, mode, dyn_result, params=None, dyn_tol=1e-6, compare_lambda=False):
    """Distances between ``dyn_result`` and the oracle solution.

    ``agree`` requires the primal and aggregate gaps (and the multiplier gap
    when ``compare_lambda``) to be at most ``10 * max(dyn_tol, oracle tol)``.
    """
    params = params or OracleParams()
    oracle_state, report = solve_vi(game, mode, params)
    primal_gap = float(np.linalg.norm(dyn_result.x - oracle_state.x))
    sigma_gap = float(np.linalg.norm(dyn_result.sigma - oracle_state.sigma))
    lambda_gap = float(np.linalg.norm(dyn_result.lam - oracle_state.lam))
    threshold = 10.0 * max(dyn_tol, params.tol)
    agree = primal_gap <= threshold and sigma_gap <= threshold
    if compare_lambda:
        agree = agree and lambda_gap <= threshold
    return CrossValidation(primal_gap, sigma_gap, lambda_gap,
                           bool(agree), threshold, oracle_state, report)
