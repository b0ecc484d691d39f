"""Projected-Euler integration of the semi-decentralized primal-dual dynamics.

Each agent updates ``x_i`` from its own data and the two broadcast signals
``(sigma, lam)``; a coordinator integrates ``sigma`` towards ``avg(x)`` and
``lam`` along the coupling violation ``A x - b``.
"""
import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import InfeasiblePointError
from .operators import _check_mode, certify_strict_monotonicity, extended_operator_stacked
from .sets import FEAS_TOL
from .state import SystemState


@dataclass
class SimParams:
    step_h: float = 0.01
    t_max: float = 200.0
    mode: str = "gae"
    stop_tol: float = 1e-6
    record_every: int = 10
    adaptive: bool = False
    min_step: float = 1e-6

    def __post_init__(self):
        _check_mode(self.mode)
        if not (self.step_h > 0 and self.t_max > 0 and self.stop_tol > 0):
            raise ValueError("step_h, t_max and stop_tol must be positive")
        if int(self.record_every) < 1:
            raise ValueError("record_every must be a positive integer")
        self.record_every = int(self.record_every)


@dataclass
class Trajectory:
    states: list
    kkt_norms: list
    terminated_by: str
    mode: str
    step_h: float
    lyapunov_values: list = field(default_factory=list)

    @property
    def final(self):
        return self.states[-1]

    def times(self):
        return np.array([s.t for s in self.states])

    def as_array(self):
        """Records as rows ``(x, sigma, lam)``."""
        return np.array([s.stacked() for s in self.states])

    def to_csv(self, path):
        s0 = self.states[0]
        header = (["t"] + [f"x_{j + 1}" for j in range(s0.x.size)]
                  + [f"sigma_{j + 1}" for j in range(s0.sigma.size)]
                  + [f"lambda_{j + 1}" for j in range(s0.lam.size)] + ["kkt_norm"])
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for s, r in zip(self.states, self.kkt_norms):
                w.writerow([f"{v:.17g}" for v in np.concatenate([[s.t], s.stacked(), [r]])])


def agent_update(cost, omega, A_i, x_i, sigma, lam, h, mode, n_agents):
    """One projected-Euler step for a single agent.

    Reads only the agent's own data and the broadcast ``(sigma, lam)``.
    """
    g = cost.grad_x(x_i, sigma)
    if mode == "gne":
        g += cost.grad_sigma(x_i) / n_agents
    if lam.size:
        g += lam @ A_i
    return omega.project(x_i - h * g)


def coordinator_update(game, x, sigma, lam, h):
    """Integrate the broadcast signals from ``avg(x)`` and ``A x - b``."""
    sigma_new = sigma + h * game.gain_k * (game.average(x) - sigma)
    if lam.size:
        lam_new = np.maximum(lam + h * game.coupling_value(x), 0.0)
    else:
        lam_new = lam.copy()
    return sigma_new, lam_new


def step(game, s, h, mode="gae"):
    """Advance a feasible state by one projected-Euler step of length ``h``."""
    _check_mode(mode)
    if not h > 0:
        raise ValueError("step length must be positive")
    s.check_dims(game)
    if not s.is_feasible(game):
        raise InfeasiblePointError("step: input state is infeasible")
    blocks = game.agent_blocks(s.x)
    n = game.decision_dim
    x_new = np.empty_like(s.x)
    for i in range(game.n_agents):
        x_new[i * n:(i + 1) * n] = agent_update(
            game.costs[i], game.local_sets[i], game.coupling_A[i], blocks[i],
            s.sigma, s.lam, h, mode, game.n_agents)
    sigma_new, lam_new = coordinator_update(game, s.x, s.sigma, s.lam, h)
    out = SystemState(x_new, sigma_new, lam_new, s.t + h)
    if not (np.all(np.isfinite(out.x)) and np.all(np.isfinite(out.sigma))
            and np.all(np.isfinite(out.lam))):
        raise FloatingPointError("step produced non-finite values")
    return out


def default_initial_state(game):
    """Set centres, ``sigma = avg(x)``, ``lam = 0``."""
    x0 = np.concatenate([s.center() for s in game.local_sets])
    return SystemState(x0, game.average(x0), np.zeros(game.constraint_dim), 0.0)


def _feasible_start(game, s0):
    blocks = game.agent_blocks(s0.x)
    x = np.concatenate([s.project(blocks[i]) for i, s in enumerate(game.local_sets)])
    return SystemState(x, s0.sigma.copy(), np.maximum(s0.lam, 0.0), s0.t)


def simulate(game, s0=None, params=None):
    """Integrate until the KKT residual drops below ``stop_tol`` or ``t_max``.

    The residual is checked at every record. With ``adaptive=True`` the step
    is halved whenever the discrete velocity norm, which is nonincreasing for
    the exact flow of a monotone system, grows between records.
    """
    from .equilibrium import kkt_residual

    params = params or SimParams()
    mode = params.mode
    cert = certify_strict_monotonicity(game, mode) if all(
        c.mu is not None for c in game.costs) else None
    if cert is None or not cert.holds:
        warnings.warn(f"strict-monotonicity certificate does not hold for mode {mode!r}; "
                      "convergence is not guaranteed", RuntimeWarning, stacklevel=2)

    s = _feasible_start(game, s0 if s0 is not None else default_initial_state(game))
    s.check_dims(game)
    guard = 1e6 * (1.0 + np.linalg.norm(s.stacked()))
    h = params.step_h
    t_end = s.t + params.t_max

    states = [s]
    kkt = [kkt_residual(game, s, mode).norm]
    if kkt[0] <= params.stop_tol:
        return Trajectory(states, kkt, "tol_reached", mode, h)

    last_speed = math.inf
    terminated = "t_max"
    k = 0
    while True:
        prev = s
        try:
            s = step(game, s, h, mode)
        except FloatingPointError:
            terminated = "divergence_guard"
            break
        k += 1
        if np.linalg.norm(s.stacked()) > guard:
            terminated = "divergence_guard"
            break
        done = s.t >= t_end - 1e-12 * max(1.0, t_end)
        if k % params.record_every == 0 or done:
            res = kkt_residual(game, s, mode).norm
            states.append(s)
            kkt.append(res)
            if res <= params.stop_tol:
                terminated = "tol_reached"
                break
            if params.adaptive:
                speed = np.linalg.norm(s.stacked() - prev.stacked()) / h
                if speed > last_speed * (1.0 + 1e-9) and h / 2 >= params.min_step:
                    h /= 2.0
                last_speed = speed
        if done:
            break
    if terminated == "divergence_guard":
        warnings.warn("divergence guard tripped", RuntimeWarning, stacklevel=2)
        if s is not states[-1] and np.all(np.isfinite(s.stacked())):
            states.append(s)
            kkt.append(float("nan"))
    return Trajectory(states, kkt, terminated, mode, params.step_h)


def evi_residual(game, traj, index, mode=None, probe_radius=0.1):
    """Discrete check of the evolution variational inequality between two records.

    Forms ``zdot = (z_{k+1} - z_k) / dt`` and returns the smallest value of
    ``<zdot + F_ext(z_k), v - z_k> / |v - z_k|`` over probes ``v``: the
    feasible axis perturbations of ``z_k`` and the final recorded state.
    """
    mode = mode or traj.mode
    if not 0 <= index < len(traj.states) - 1:
        raise IndexError(f"index {index} does not address two consecutive records")
    a, b = traj.states[index], traj.states[index + 1]
    z = a.stacked()
    dt = b.t - a.t
    zdot = (b.stacked() - z) / dt
    direction = zdot + extended_operator_stacked(game, z, mode)

    probes = [traj.states[-1].stacked()]
    for j in range(z.size):
        for sign in (1.0, -1.0):
            v = z.copy()
            v[j] += sign * probe_radius
            probes.append(_project_state(game, v))
    worst = math.inf
    for v in probes:
        d = v - z
        dn = np.linalg.norm(d)
        val = 0.0 if dn == 0.0 else float(direction @ d) / dn
        worst = min(worst, val)
    return worst


def _project_state(game, z):
    s = SystemState.from_stacked(game, z)
    return _feasible_start(game, s).stacked()
