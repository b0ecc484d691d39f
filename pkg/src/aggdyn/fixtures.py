"""Reference games with closed-form equilibria, and a random game generator."""
from importlib import resources

import numpy as np

from .game import CostFn, GameSpec, load_scenario, validate_game
from .sets import Box
from .state import SystemState

# G1: f_i(x) = x^2/2 - d_i x, d = (1, 3), C_i = 1/2, k = 1, no coupling.
# GAE: x_i + sigma/2 = d_i, sigma = avg(x)      -> x = (1/3, 7/3), sigma = 4/3.
# GNE: 5/4 x_i + sigma/2 = d_i, sigma = avg(x)  -> x = (12/35, 68/35), sigma = 8/7.
G1_GAE = SystemState([1 / 3, 7 / 3], [4 / 3], [])
G1_GNE = SystemState([12 / 35, 68 / 35], [8 / 7], [])
# G2: f_i(x) = x^2/2 - 2x on [0, 2], x_1 + x_2 <= 2: x_i - 2 + lam = 0 with the
# constraint active gives x = (1, 1), lam = 1 (C_i = 0, so GAE = GNE).
G2_EQ = SystemState([1.0, 1.0], [1.0], [1.0])


def fixture_path(name):
    return resources.files("aggdyn") / "data" / f"{name}.json"


def load_fixture(name):
    with resources.as_file(fixture_path(name)) as path:
        return load_scenario(path)


def random_certified_game(seed, mode="gae", max_agents=5, max_dim=3, max_constraints=2):
    """Random box-constrained quadratic game whose certificate holds in ``mode``.

    Each ``C_i`` is scaled so that its row-sum norm uses a random fraction in
    [0.1, 0.9] of what the certificate allows. Coupling rows are built around
    an interior reference point so that Slater's condition holds.
    """
    rng = np.random.default_rng(seed)
    N = int(rng.integers(1, max_agents + 1))
    n = int(rng.integers(1, max_dim + 1))
    m = int(rng.integers(0, max_constraints + 1))
    k = float(rng.uniform(0.5, 2.0))

    costs_raw = []
    for _ in range(N):
        B = rng.normal(size=(n, n))
        mu = rng.uniform(0.5, 2.0)
        Q = B @ B.T / n + mu * np.eye(n)
        costs_raw.append((Q, rng.normal(scale=2.0, size=n), rng.normal(size=(n, n))))
    mu_min = min(np.linalg.eigvalsh(Q).min() for Q, _, _ in costs_raw)
    lhs = min(mu_min, k)
    frac = rng.uniform(0.1, 0.9)
    if mode == "gae":
        budget = 2.0 * lhs - k / N
    else:
        budget = (lhs - 0.5 * k / N) / (0.5 + 1.0 / N)
    costs = []
    for Q, q, C in costs_raw:
        if mode == "gae":
            scale = frac * budget / np.max(np.sum(np.abs(C), axis=1))
        else:
            scale = frac * budget / max(np.max(np.sum(np.abs(C), axis=1)),
                                        np.max(np.sum(np.abs(C), axis=0)))
        costs.append(CostFn.quadratic(Q, q, max(scale, 0.0) * C))

    sets = []
    for _ in range(N):
        lo = rng.uniform(-3.0, -0.5, n)
        sets.append(Box(lo, lo + rng.uniform(1.0, 4.0, n)))
    x_ref = np.concatenate([s.center() for s in sets])
    sigma_ref = np.mean(x_ref.reshape(N, n), axis=0)
    A = []
    for c, s in zip(costs, sets):
        # Rows lean against the agent's descent direction at the centre so
        # the constraint tends to bind at the equilibrium.
        g = c.grad_x(s.center(), sigma_ref)
        d = -g / (np.linalg.norm(g) + 1e-12)
        A.append(d + 0.5 * rng.normal(size=(m, n)))
    # b slightly above A x_ref keeps x_ref strictly feasible while often
    # leaving the constraint active at the equilibrium.
    b = np.hstack(A) @ x_ref + rng.uniform(0.05, 0.5, m) if m else np.zeros(0)
    game = GameSpec(N, n, m, costs, sets, A, b, k, name=f"random-{seed}")
    return validate_game(game)
