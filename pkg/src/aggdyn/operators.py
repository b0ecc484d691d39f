"""Pseudo-gradient maps, the extended primal-dual operator, and
sufficient conditions for their strict monotonicity."""
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatchError, MissingModulusError

MODES = ("gae", "gne")


def _check_mode(mode):
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")


@dataclass
class OperatorOutput:
    grad_x: np.ndarray
    grad_sigma: np.ndarray
    grad_lambda: np.ndarray

    def stacked(self):
        return np.concatenate([self.grad_x, self.grad_sigma, self.grad_lambda], axis=-1)


def _split_primal(game, x, sigma):
    x = np.asarray(x, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if x.shape[-1:] != (game.primal_dim,):
        raise DimensionMismatchError("x", (game.primal_dim,), x.shape)
    if sigma.shape[-1:] != (game.aggregate_dim,):
        raise DimensionMismatchError("sigma", (game.aggregate_dim,), sigma.shape)
    return x, sigma


def pseudo_gradient(game, x, sigma, mode="gae"):
    """Pseudo-gradient in either mode; accepts leading batch axes."""
    _check_mode(mode)
    x, sigma = _split_primal(game, x, sigma)
    blocks = game.agent_blocks(x)
    N = game.n_agents
    grads = []
    for i, cost in enumerate(game.costs):
        xi = blocks[..., i, :]
        g = cost.grad_x(xi, sigma)
        if mode == "gne":
            # x_i also enters the aggregate with weight 1/N.
            g = g + cost.grad_sigma(xi) / N
        grads.append(g)
    grad_x = np.concatenate(grads, axis=-1)
    grad_sigma = game.gain_k * (sigma - game.average(x))
    grad_lambda = np.zeros(x.shape[:-1] + (0,))
    return OperatorOutput(grad_x, grad_sigma, grad_lambda)


def pseudo_gradient_gae(game, x, sigma):
    """``col(grad f_i(x_i) + C_i sigma) , k (sigma - avg x)``."""
    return pseudo_gradient(game, x, sigma, "gae")


def pseudo_gradient_gne(game, x, sigma):
    """As :func:`pseudo_gradient_gae` plus ``(1/N) C_i^T x_i`` per agent."""
    return pseudo_gradient(game, x, sigma, "gne")


def extended_operator(game, state, mode="gae"):
    """``[F(x, sigma) + (A^T lam, 0) ; b - A x]`` at a :class:`SystemState`."""
    return extended_operator_at(game, state.x, state.sigma, state.lam, mode)


def extended_operator_at(game, x, sigma, lam, mode="gae"):
    lam = np.asarray(lam, dtype=float)
    if lam.shape[-1:] != (game.constraint_dim,):
        raise DimensionMismatchError("lambda", (game.constraint_dim,), lam.shape)
    out = pseudo_gradient(game, x, sigma, mode)
    if game.constraint_dim:
        out.grad_x = out.grad_x + lam @ game.A
        out.grad_lambda = -game.coupling_value(x)
    return out


def extended_operator_stacked(game, z, mode="gae"):
    """``F_ext`` on a stacked vector ``z = (x, sigma, lam)``."""
    z = np.asarray(z, dtype=float)
    nx, p = game.primal_dim, game.aggregate_dim
    return extended_operator_at(game, z[..., :nx], z[..., nx:nx + p], z[..., nx + p:], mode).stacked()


def _norm_inf(C):
    return float(np.max(np.sum(np.abs(C), axis=1)))


def _norm_1(C):
    return float(np.max(np.sum(np.abs(C), axis=0)))


@dataclass
class MonotonicityCertificate:
    mode: str
    mu_min: float
    lhs: float
    rhs: float
    holds: bool
    margin: float
    per_agent: list = field(default_factory=list)
    # Row-by-row Gershgorin test; sharper than the headline bound.
    gershgorin_rows_hold: bool = False
    gershgorin_margin: float = float("nan")

    def to_dict(self):
        return {
            "mode": self.mode,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "margin": self.margin,
            "holds": self.holds,
            "mu_min": self.mu_min,
            "per_agent": self.per_agent,
            "gershgorin_rows_hold": self.gershgorin_rows_hold,
            "gershgorin_margin": self.gershgorin_margin,
        }


def certify_strict_monotonicity(game, mode="gae"):
    """Evaluate the Gershgorin-type sufficient condition for strict monotonicity.

    ``gae``: ``min(mu, k) > 1/2 (max_i |C_i|_inf + k/N)``.
    ``gne``: ``min(mu, k) > max_i (1/2 |C_i|_inf + |C_i|_1 / N) + k / (2N)``.
    Norms are the induced matrix norms (max absolute row / column sums).
    """
    _check_mode(mode)
    N, k = game.n_agents, game.gain_k
    mus = []
    for i, cost in enumerate(game.costs):
        if cost.mu is None:
            raise MissingModulusError(
                f"agent {i}: smooth cost has no declared strong-convexity modulus")
        mus.append(cost.mu)
    mu = min(mus)
    lhs = min(mu, k)
    per_agent = [{"norm_inf": _norm_inf(c.C), "norm_1": _norm_1(c.C), "mu": m}
                 for c, m in zip(game.costs, mus)]
    if mode == "gae":
        rhs = 0.5 * (max(a["norm_inf"] for a in per_agent) + k / N)
    else:
        rhs = max(0.5 * a["norm_inf"] + a["norm_1"] / N for a in per_agent) + 0.5 * k / N
    margin = lhs - rhs

    row_margins = []
    for cost, m in zip(game.costs, mus):
        C = cost.C
        diag = np.diag(C)
        off_row = np.sum(np.abs(C), axis=1) - np.abs(diag)
        radius = 0.5 * np.abs(diag - k / N) + 0.5 * off_row
        if mode == "gae":
            left = np.full_like(diag, min(m, k))
        else:
            off_col = np.sum(np.abs(C), axis=0) - np.abs(diag)
            left = np.minimum(m + diag / N, k)
            radius = radius + off_col / N
        row_margins.append(np.min(left - radius))
    g_margin = float(min(row_margins))

    return MonotonicityCertificate(
        mode=mode, mu_min=float(mu), lhs=float(lhs), rhs=float(rhs),
        holds=bool(margin > 0.0), margin=float(margin), per_agent=per_agent,
        gershgorin_rows_hold=bool(g_margin > 0.0), gershgorin_margin=g_margin)


@dataclass
class MonotonicityReport:
    min_inner_product: float
    violating_pair: tuple = None
    n_pairs: int = 0


def _sample_primal(game, rng, size):
    cols = [s.sample(rng, size) for s in game.local_sets]
    return np.concatenate(cols, axis=1)


def empirical_monotonicity_test(game, mode="gae", n_pairs=1000, seed=0):
    """Smallest normalized inner product ``<F(u) - F(v), u - v> / |u - v|^2``.

    Pairs are drawn uniformly from ``Omega x [-R, R]^p`` where ``R`` is the
    largest local-set diameter. A negative minimum comes with the offending
    pair ``(u, v)`` as stacked ``(x, sigma)`` vectors.
    """
    _check_mode(mode)
    if n_pairs < 1:
        raise ValueError("n_pairs must be >= 1")
    rng = np.random.default_rng(seed)
    R = max(s.diameter() for s in game.local_sets)
    p = game.aggregate_dim

    def draw():
        x = _sample_primal(game, rng, n_pairs)
        sigma = rng.uniform(-R, R, size=(n_pairs, p))
        return x, sigma

    xu, su = draw()
    xv, sv = draw()
    Fu = pseudo_gradient(game, xu, su, mode)
    Fv = pseudo_gradient(game, xv, sv, mode)
    dz = np.concatenate([xu - xv, su - sv], axis=1)
    dF = np.concatenate([Fu.grad_x - Fv.grad_x, Fu.grad_sigma - Fv.grad_sigma], axis=1)
    sq = np.sum(dz * dz, axis=1)
    keep = sq > 0.0
    ratios = np.full(n_pairs, np.inf)
    ratios[keep] = np.sum(dF * dz, axis=1)[keep] / sq[keep]
    j = int(np.argmin(ratios))
    worst = float(ratios[j])
    pair = None
    if worst < 0.0:
        pair = (np.concatenate([xu[j], su[j]]), np.concatenate([xv[j], sv[j]]))
    return MonotonicityReport(min_inner_product=worst, violating_pair=pair,
                              n_pairs=int(keep.sum()))
