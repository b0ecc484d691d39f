"""Lift separable convex coupling ``sum_i g_i(x_i) <= 0`` to affine coupling.

Agent ``i`` gets an auxiliary ``y_i`` with ``g_i(x_i) <= y_i`` kept locally
and the shared constraint becomes ``sum_i y_i <= 0``. ``y_i`` carries no
cost and does not enter the aggregate.
"""
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError
from .game import CostFn, GameSpec, validate_game
from .maps import ConstraintMap
from .sets import Box, LiftedSublevel, set_from_dict
from .state import SystemState


class CoverageError(ValueError):
    """``Y_i`` does not contain the range of ``g_i`` over ``Omega_i``."""


@dataclass
class NonlinearCoupling:
    g: tuple
    y_boxes: tuple

    def __post_init__(self):
        self.g = tuple(gi if isinstance(gi, ConstraintMap) else ConstraintMap.from_dict(gi)
                       for gi in self.g)
        self.y_boxes = tuple(set_from_dict(b) if isinstance(b, dict) else b for b in self.y_boxes)
        if len(self.g) != len(self.y_boxes):
            raise DimensionMismatchError("y_box", (len(self.g),), (len(self.y_boxes),))
        for i, (gi, yb) in enumerate(zip(self.g, self.y_boxes)):
            if not isinstance(yb, Box) or yb.dim != gi.out_dim:
                raise DimensionMismatchError(f"y_box[{i}]", (gi.out_dim,), (getattr(yb, "dim", None),))

    @property
    def constraint_dim(self):
        return self.g[0].out_dim

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d["g"]), tuple(d["y_box"]))

    def to_dict(self):
        return {"g": [gi.to_dict() for gi in self.g], "y_box": [b.to_dict() for b in self.y_boxes]}


def exact_range(g, omega):
    """Per-row ``[min, max]`` of ``g`` over a box, or ``None`` where no closed form exists."""
    return [row.range_over_box(omega.lower, omega.upper) for row in g.rows]


def sampled_range(g, omega, n_samples=1000, seed=0):
    rng = np.random.default_rng(seed)
    pts = np.vstack([omega.vertices(), omega.sample(rng, n_samples)])
    vals = np.array([g.value(p) for p in pts])
    return vals.min(axis=0), vals.max(axis=0)


def required_range(g, omega, n_samples=1000, seed=0):
    """Smallest box known to contain ``g(Omega)``: exact rows where possible, sampled otherwise."""
    lo, hi = sampled_range(g, omega, n_samples, seed)
    for r, rr in enumerate(exact_range(g, omega)):
        if rr is not None:
            lo[r], hi[r] = min(lo[r], rr[0]), max(hi[r], rr[1])
    return lo, hi


def default_y_box(g, omega, pad=0.1, n_samples=1000, seed=0):
    """Required range widened by ``pad`` times its width on each side."""
    lo, hi = required_range(g, omega, n_samples, seed)
    width = np.maximum(hi - lo, 1e-6)
    return Box(lo - pad * width, hi + pad * width)


def check_coverage(g, omega, y_box, n_samples=1000, seed=0):
    lo, hi = required_range(g, omega, n_samples, seed)
    short = np.maximum(y_box.lower - lo, 0.0) + np.maximum(hi - y_box.upper, 0.0)
    if np.any(short > 0.0):
        raise CoverageError(
            f"Y = [{y_box.lower.tolist()}, {y_box.upper.tolist()}] must contain "
            f"the range [{lo.tolist()}, {hi.tolist()}] of g over Omega")


def _lift_cost(cost, m):
    n = cost.dim
    if cost.kind == "separable_quadratic":
        Q = np.zeros((n + m, n + m))
        Q[:n, :n] = cost.Q
        return CostFn.quadratic(Q, np.concatenate([cost.q, np.zeros(m)]), cost.C)

    def fun(z):
        return cost.f(z[:n])

    def grad(z):
        return np.concatenate([cost.f_grad(z[:n]), np.zeros(m)])

    def hess(z):
        H = np.zeros((n + m, n + m))
        H[:n, :n] = cost.f_hessian(z[:n])
        return H

    return CostFn.smooth(fun, grad, hess, cost.C, dim=n + m, mu=0.0)


def reformulate(game, coupling, n_samples=1000, seed=0):
    """Game with decisions ``(x_i, y_i)`` and coupling ``sum_i y_i <= 0``."""
    if game.constraint_dim != 0:
        raise ValueError("reformulate expects a game without affine coupling (m = 0)")
    N, n = game.n_agents, game.decision_dim
    if len(coupling.g) != N:
        raise DimensionMismatchError("coupling.g", (N,), (len(coupling.g),))
    m = coupling.constraint_dim
    for i, (gi, omega) in enumerate(zip(coupling.g, game.local_sets)):
        if gi.in_dim != n:
            raise DimensionMismatchError(f"coupling.g[{i}]", (n,), (gi.in_dim,))
        if gi.out_dim != m:
            raise DimensionMismatchError(f"coupling.g[{i}] rows", (m,), (gi.out_dim,))
        if not isinstance(omega, Box):
            raise TypeError(f"agent {i}: lifting requires a box local set, got {omega.kind}")
        check_coverage(gi, omega, coupling.y_boxes[i], n_samples, seed)

    sets = [LiftedSublevel(omega, yb, gi)
            for omega, yb, gi in zip(game.local_sets, coupling.y_boxes, coupling.g)]
    costs = [_lift_cost(c, m) for c in game.costs]
    A_i = np.hstack([np.zeros((m, n)), np.eye(m)])
    lifted = GameSpec(N, n + m, m, costs, sets, [A_i] * N, np.zeros(m), game.gain_k,
                      aggregate_dim=game.aggregate_dim,
                      name=f"{game.name}-lifted" if game.name else "lifted")
    return validate_game(lifted)


@dataclass
class PullBack:
    x: np.ndarray
    consistent: bool
    slack: float
    sigma: np.ndarray
    lam: np.ndarray

    def state(self):
        """The pulled-back point as a state of the original affine-coupled game."""
        return SystemState(self.x, self.sigma, self.lam)


def pull_back(game, coupling, lifted_state, tol=1e-6):
    """Recover ``x`` from a state of the lifted game ``game``.

    For each constraint row: consistent when that row of ``sum_j y_j <= 0``
    is slack by more than ``tol``, or every agent has ``y_i = g_i(x_i)``
    to within ``tol``. ``slack`` is ``-sum_j y_j`` (smallest over rows).
    """
    n = game.decision_dim - coupling.constraint_dim
    blocks = game.agent_blocks(lifted_state.x)
    xs, ys = blocks[:, :n], blocks[:, n:]
    gaps = np.array([gi.value(x) for gi, x in zip(coupling.g, xs)]) - ys
    row_slack = -ys.sum(axis=0)
    tight = np.all(np.abs(gaps) <= tol, axis=0)
    consistent = bool(np.all((row_slack > tol) | tight))
    return PullBack(xs.reshape(-1).copy(), consistent, float(row_slack.min()),
                    lifted_state.sigma.copy(), lifted_state.lam.copy())
