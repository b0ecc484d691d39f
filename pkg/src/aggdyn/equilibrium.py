"""KKT residuals, equilibrium classification, Lagrangians, Lyapunov diagnostics."""
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError
from .game import cost_value
from .operators import pseudo_gradient


@dataclass
class KktResidual:
    """Violation of each KKT condition at a state.

    ``stationarity[i]`` is the natural-map residual
    ``|x_i - proj_Omega_i(x_i - (grad_i J_i + A_i^T lam))|``.
    """

    stationarity: np.ndarray
    consensus: float
    primal_feas: float
    dual_feas: float
    complementarity: float

    @property
    def norm(self):
        return float(np.sqrt(np.sum(self.stationarity ** 2) + self.consensus ** 2
                             + self.primal_feas ** 2 + self.dual_feas ** 2
                             + self.complementarity ** 2))

    def to_dict(self):
        return {"stationarity": self.stationarity.tolist(), "consensus": self.consensus,
                "primal_feas": self.primal_feas, "dual_feas": self.dual_feas,
                "complementarity": self.complementarity, "norm": self.norm}


def kkt_residual(game, s, mode="gae"):
    """Residuals of the KKT system with a single shared multiplier ``lam``."""
    s.check_dims(game)
    F = pseudo_gradient(game, s.x, s.sigma, mode)
    grad = F.grad_x + (s.lam @ game.A if game.constraint_dim else 0.0)
    xb = game.agent_blocks(s.x)
    gb = game.agent_blocks(grad)
    stat = np.array([np.linalg.norm(xb[i] - omega.project(xb[i] - gb[i]))
                     for i, omega in enumerate(game.local_sets)])
    consensus = float(np.linalg.norm(s.sigma - game.average(s.x)))
    if game.constraint_dim:
        viol = game.coupling_value(s.x)
        primal = float(np.linalg.norm(np.maximum(viol, 0.0)))
        dual = float(np.linalg.norm(np.maximum(-s.lam, 0.0)))
        compl = float(abs(s.lam @ viol))
    else:
        primal = dual = compl = 0.0
    return KktResidual(stat, consensus, primal, dual, compl)


def lagrangian_value(game, agent, x, lambda_i):
    """``J_i(x_i, avg(x)) + lambda_i^T (A x - b)``."""
    x = np.asarray(x, dtype=float)
    if x.shape != (game.primal_dim,):
        raise DimensionMismatchError("x", (game.primal_dim,), x.shape)
    lambda_i = np.asarray(lambda_i, dtype=float).reshape(-1)
    if lambda_i.shape != (game.constraint_dim,):
        raise DimensionMismatchError("lambda_i", (game.constraint_dim,), lambda_i.shape)
    # cost_value performs the index check
    value = cost_value(game, agent, game.agent_blocks(x)[agent], game.average(x))
    if game.constraint_dim:
        value += float(lambda_i @ game.coupling_value(x))
    return value


@dataclass
class ClassificationReport:
    is_vgae: bool
    is_vgne: bool
    gae_residual: KktResidual
    gne_residual: KktResidual
    tol: float

    def to_dict(self):
        return {"is_vgae": self.is_vgae, "is_vgne": self.is_vgne,
                "gae_residual": self.gae_residual.to_dict(),
                "gne_residual": self.gne_residual.to_dict(), "tol": self.tol}


def classify_equilibrium(game, s, tol=1e-8):
    if not tol > 0:
        raise ValueError("tol must be positive")
    gae = kkt_residual(game, s, "gae")
    gne = kkt_residual(game, s, "gne")
    return ClassificationReport(gae.norm <= tol, gne.norm <= tol, gae, gne, float(tol))


def lyapunov_value(s, ref):
    """``1/2 |x - x'|^2 + 1/2 |sigma - sigma'|^2 + 1/2 |lam - lam'|^2``."""
    for name in ("x", "sigma", "lam"):
        a, b = getattr(s, name), getattr(ref, name)
        if a.shape != b.shape:
            raise DimensionMismatchError(name, b.shape, a.shape)
    d = s.stacked() - ref.stacked()
    return 0.5 * float(d @ d)


@dataclass
class LyapunovReport:
    values: list
    max_increase: float
    monotone_within: float


def lyapunov_report(game, traj, ref, mode=None, ref_tol=1e-8):
    """Lyapunov values along ``traj`` relative to the equilibrium ``ref``.

    ``monotone_within`` is the smallest nonnegative slack ``tau`` with
    ``V_{k+1} <= V_k + tau`` for every pair of consecutive records. The values
    are also stored on ``traj.lyapunov_values``.
    """
    mode = mode or traj.mode
    res = kkt_residual(game, ref, mode).norm
    if res > ref_tol:
        raise ValueError(f"reference state is not an equilibrium: KKT residual {res:.3e} > {ref_tol:.1e}")
    values = [lyapunov_value(s, ref) for s in traj.states]
    traj.lyapunov_values = values
    incs = np.diff(values)
    max_inc = float(incs.max()) if incs.size else 0.0
    return LyapunovReport(values, max_inc, max(max_inc, 0.0))
