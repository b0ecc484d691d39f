"""Aggregative game instances: costs, local sets, coupling constraint.

Costs are separable, ``J_i(x_i, sigma) = f_i(x_i) + (C_i sigma)^T x_i``,
with ``f_i`` either a convex quadratic or a registered smooth convex
function. ``sigma`` is the aggregate of the first ``aggregate_dim``
coordinates of every decision (all of them unless the game is a lifted
reformulation).
"""
import json
from pathlib import Path

import numpy as np

from .errors import DimensionMismatchError, GameValidationError, ScenarioParseError
from .sets import ConvexSet, set_from_dict

_SMOOTH_REGISTRY = {}


def register_smooth_cost(name, fun, grad, hess):
    """Make a smooth convex ``f`` available to scenario files by ``name``."""
    _SMOOTH_REGISTRY[name] = (fun, grad, hess)


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


def _square(values, n, field):
    a = np.asarray(values, dtype=float)
    if a.size != n * n:
        raise DimensionMismatchError(field, (n, n), a.shape)
    return a.reshape(n, n)


class CostFn:
    """Separable agent cost ``f(x) + (C sigma)^T x[:p]``.

    Use :meth:`quadratic` or :meth:`smooth` to build one. Gradients accept
    arrays with leading batch axes.
    """

    def __init__(self, kind, C, Q=None, q=None, fun=None, grad=None, hess=None,
                 mu=None, name=None, dim=None):
        if kind not in ("separable_quadratic", "separable_smooth"):
            raise ValueError(f"unknown cost kind {kind!r}")
        self.kind = kind
        C = np.atleast_2d(np.asarray(C, dtype=float))
        self.C = _frozen(C)
        self.agg_dim = C.shape[0]
        self.name = name
        if kind == "separable_quadratic":
            q = np.atleast_1d(np.asarray(q, dtype=float))
            self.dim = q.size
            self.Q = _frozen(_square(Q, self.dim, "Q"))
            self.q = _frozen(q)
            self.mu = float(np.linalg.eigvalsh(0.5 * (self.Q + self.Q.T)).min())
        else:
            if dim is None:
                raise ValueError("smooth cost needs its decision dimension")
            self.dim = int(dim)
            self.Q = self.q = None
            self._fun, self._grad, self._hess = fun, grad, hess
            self.mu = None if mu is None else float(mu)

    @classmethod
    def quadratic(cls, Q, q, C):
        return cls("separable_quadratic", C, Q=Q, q=q)

    @classmethod
    def smooth(cls, fun, grad, hess, C, dim, mu=None, name=None):
        return cls("separable_smooth", C, fun=fun, grad=grad, hess=hess, mu=mu, name=name, dim=dim)

    def f(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "separable_quadratic":
            return 0.5 * np.einsum("...i,ij,...j->...", x, self.Q, x) + x @ self.q
        if x.ndim == 1:
            return float(self._fun(x))
        return np.apply_along_axis(lambda row: float(self._fun(row)), -1, x)

    def f_grad(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "separable_quadratic":
            return x @ self.Q.T + self.q
        if x.ndim == 1:
            return np.array(self._grad(x), dtype=float).reshape(self.dim)
        return np.apply_along_axis(lambda row: np.asarray(self._grad(row), dtype=float), -1, x)

    def f_hessian(self, x):
        if self.kind == "separable_quadratic":
            return np.array(self.Q)
        return np.asarray(self._hess(np.asarray(x, dtype=float)), dtype=float).reshape(self.dim, self.dim)

    def value(self, x, sigma):
        x = np.asarray(x, dtype=float)
        coupling = np.asarray(sigma, dtype=float) @ self.C.T
        return self.f(x) + np.sum(coupling * x[..., : self.agg_dim], axis=-1)

    def grad_x(self, x, sigma):
        """``grad_x J(x, sigma) = grad f(x) + pad(C sigma)``."""
        g = self.f_grad(x)
        g[..., : self.agg_dim] += np.asarray(sigma, dtype=float) @ self.C.T
        return g

    def grad_sigma(self, x):
        """``grad_sigma J(x, sigma) = C^T x[:p]``, padded to the decision dimension."""
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        out[..., : self.agg_dim] = x[..., : self.agg_dim] @ self.C
        return out

    def to_dict(self):
        if self.kind == "separable_quadratic":
            return {"Q": self.Q.tolist(), "q": self.q.tolist(), "C": self.C.tolist()}
        if self.name is None or self.name not in _SMOOTH_REGISTRY:
            raise TypeError("only registered smooth costs can be serialized")
        return {"f": {"kind": "registered", "name": self.name, "mu": self.mu, "dim": self.dim},
                "C": self.C.tolist()}


class GameSpec:
    """An aggregative game with affine coupling ``sum_i A_i x_i <= b``.

    Instances are immutable; arrays are stored read-only.
    """

    def __init__(self, n_agents, decision_dim, constraint_dim, costs, local_sets,
                 coupling_A, coupling_b, gain_k, aggregate_dim=None, name=""):
        self.n_agents = int(n_agents)
        self.decision_dim = int(decision_dim)
        self.constraint_dim = int(constraint_dim)
        self.aggregate_dim = self.decision_dim if aggregate_dim is None else int(aggregate_dim)
        self.gain_k = float(gain_k)
        self.name = name
        self.costs = tuple(costs)
        self.local_sets = tuple(local_sets)

        N, n, m, p = self.n_agents, self.decision_dim, self.constraint_dim, self.aggregate_dim
        problems = []
        if N < 1:
            problems.append(f"n_agents must be >= 1, got {N}")
        if n < 1:
            problems.append(f"decision_dim must be >= 1, got {n}")
        if m < 0:
            problems.append(f"constraint_dim must be >= 0, got {m}")
        if not 1 <= p <= max(n, 1):
            problems.append(f"aggregate_dim must lie in [1, decision_dim], got {p}")
        if problems:
            raise GameValidationError(problems)

        if len(self.costs) != N:
            raise DimensionMismatchError("costs", (N,), (len(self.costs),))
        if len(self.local_sets) != N:
            raise DimensionMismatchError("local_sets", (N,), (len(self.local_sets),))
        blocks = list(coupling_A) if m > 0 else [np.zeros((0, n))] * N
        if len(blocks) != N:
            raise DimensionMismatchError("A", (N,), (len(blocks),))
        A_list = []
        for i, blk in enumerate(blocks):
            blk = np.asarray(blk, dtype=float)
            if blk.size == m * n and (blk.ndim != 2 or blk.shape == (m, n)):
                blk = blk.reshape(m, n)
            if blk.shape != (m, n):
                raise DimensionMismatchError(f"A[{i}]", (m, n), blk.shape)
            A_list.append(_frozen(blk))
        self.coupling_A = tuple(A_list)
        b = np.atleast_1d(np.asarray(coupling_b, dtype=float)) if m > 0 else np.zeros(0)
        if b.shape != (m,):
            raise DimensionMismatchError("b", (m,), b.shape)
        self.coupling_b = _frozen(b)
        self.A = _frozen(np.hstack(A_list)) if m > 0 else _frozen(np.zeros((0, N * n)))

        for i, (c, s) in enumerate(zip(self.costs, self.local_sets)):
            if c.dim != n:
                raise DimensionMismatchError(f"agents[{i}].q", (n,), (c.dim,))
            if c.C.shape != (p, p):
                raise DimensionMismatchError(f"agents[{i}].C", (p, p), c.C.shape)
            if not isinstance(s, ConvexSet) or s.dim != n:
                raise DimensionMismatchError(f"agents[{i}].omega", (n,), (getattr(s, "dim", None),))

        if not self.gain_k > 0.0:
            problems.append(f"gain_k must be positive, got {self.gain_k}")
        for i, (c, s) in enumerate(zip(self.costs, self.local_sets)):
            if c.kind == "separable_quadratic":
                if not np.allclose(c.Q, c.Q.T, rtol=0.0, atol=1e-12):
                    problems.append(f"agents[{i}].Q is not symmetric")
                if c.mu < -1e-12:
                    problems.append(f"agents[{i}].Q is not positive semidefinite (min eig {c.mu:.3e})")
            if not s.bounded or not np.isfinite(s.diameter()):
                problems.append(f"agents[{i}].omega is unbounded")
        for name, arr in (("b", b), ("A", self.A)):
            if not np.all(np.isfinite(arr)):
                problems.append(f"{name} has non-finite entries")
        if problems:
            raise GameValidationError(problems)

    @property
    def primal_dim(self):
        return self.n_agents * self.decision_dim

    def agent_blocks(self, x):
        """View of a stacked decision as an ``(..., N, n)`` array."""
        x = np.asarray(x, dtype=float)
        return x.reshape(x.shape[:-1] + (self.n_agents, self.decision_dim))

    def average(self, x):
        """Aggregate ``avg(x)`` restricted to the first ``aggregate_dim`` coordinates."""
        blocks = self.agent_blocks(x)
        return blocks[..., : self.aggregate_dim].mean(axis=-2)

    def coupling_value(self, x):
        """``A x - b``."""
        return np.asarray(x, dtype=float) @ self.A.T - self.coupling_b

    def to_dict(self):
        d = {
            "n_agents": self.n_agents,
            "decision_dim": self.decision_dim,
            "constraint_dim": self.constraint_dim,
            "gain_k": self.gain_k,
            "agents": [dict(c.to_dict(), omega=s.to_dict())
                       for c, s in zip(self.costs, self.local_sets)],
            "A": [blk.tolist() for blk in self.coupling_A],
            "b": self.coupling_b.tolist(),
        }
        if self.aggregate_dim != self.decision_dim:
            d["aggregate_dim"] = self.aggregate_dim
        if self.name:
            d["name"] = self.name
        return d

    def __repr__(self):
        return (f"GameSpec(N={self.n_agents}, n={self.decision_dim}, m={self.constraint_dim}, "
                f"k={self.gain_k}{', ' + self.name if self.name else ''})")


def average(x_stack, n_agents):
    """Componentwise mean of the ``n_agents`` blocks of a stacked vector."""
    x = np.atleast_1d(np.asarray(x_stack, dtype=float))
    if n_agents < 1 or x.size % n_agents:
        raise DimensionMismatchError("x_stack", f"multiple of {n_agents}", x.shape)
    return x.reshape(n_agents, -1).mean(axis=0)


def cost_value(game, agent, x_i, sigma):
    """``J_agent(x_i, sigma)``; agents are indexed from 0."""
    if not 0 <= agent < game.n_agents:
        raise IndexError(f"agent index {agent} out of range for {game.n_agents} agents")
    x_i = np.atleast_1d(np.asarray(x_i, dtype=float))
    sigma = np.atleast_1d(np.asarray(sigma, dtype=float))
    if x_i.shape != (game.decision_dim,):
        raise DimensionMismatchError("x_i", (game.decision_dim,), x_i.shape)
    if sigma.shape != (game.aggregate_dim,):
        raise DimensionMismatchError("sigma", (game.aggregate_dim,), sigma.shape)
    return float(game.costs[agent].value(x_i, sigma))


def _cost_from_dict(d, n, p, i):
    if "f" in d:
        spec = d["f"]
        if spec.get("kind") != "registered" or spec.get("name") not in _SMOOTH_REGISTRY:
            raise ScenarioParseError(f"agents[{i}].f: unknown registered cost {spec!r}")
        fun, grad, hess = _SMOOTH_REGISTRY[spec["name"]]
        C = _square(d["C"], p, f"agents[{i}].C")
        return CostFn.smooth(fun, grad, hess, C, dim=spec.get("dim", n),
                             mu=spec.get("mu"), name=spec["name"])
    q = np.atleast_1d(np.asarray(d["q"], dtype=float))
    if q.size != n:
        raise DimensionMismatchError(f"agents[{i}].q", (n,), q.shape)
    return CostFn.quadratic(_square(d["Q"], n, f"agents[{i}].Q"), q,
                            _square(d["C"], p, f"agents[{i}].C"))


def game_from_dict(d):
    """Build a :class:`GameSpec` from the scenario schema (no feasibility check)."""
    try:
        N, n = int(d["n_agents"]), int(d["decision_dim"])
        m = int(d.get("constraint_dim", 0))
        p = int(d.get("aggregate_dim", n))
        agents = d["agents"]
        if len(agents) != N:
            raise DimensionMismatchError("agents", (N,), (len(agents),))
        costs, sets = [], []
        for i, a in enumerate(agents):
            costs.append(_cost_from_dict(a, n, p, i))
            sets.append(set_from_dict(a["omega"]))
        A = d.get("A", [[]] * N) if m > 0 else []
        b = d.get("b", []) if m > 0 else []
        if m > 0 and ("A" not in d or "b" not in d):
            raise ScenarioParseError("scenario with constraint_dim > 0 needs 'A' and 'b'")
        return GameSpec(N, n, m, costs, sets, A, b, float(d["gain_k"]),
                        aggregate_dim=p, name=d.get("name", ""))
    except KeyError as exc:
        raise ScenarioParseError(f"scenario is missing key {exc}") from exc
    except (TypeError, AttributeError) as exc:
        raise ScenarioParseError(f"malformed scenario: {exc}") from exc


def validate_game(game, slater_tol=0.0):
    """Check the nonempty-interior requirement on the coupled feasible set."""
    from .oracle import feasibility_probe

    report = feasibility_probe(game)
    if report.feasible_point is None or not report.slater_margin > slater_tol:
        raise GameValidationError([
            "coupled feasible set has no Slater point "
            f"(best margin min(b - A x) = {report.slater_margin:.6g})"])
    return game


def load_scenario(path, check_feasibility=True):
    """Read and validate a JSON scenario file."""
    path = Path(path)
    try:
        with path.open() as fh:
            d = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ScenarioParseError(f"{path}: {exc}") from exc
    if not isinstance(d, dict):
        raise ScenarioParseError(f"{path}: top level must be an object")
    game = game_from_dict(d)
    if check_feasibility:
        validate_game(game)
    return game


def save_scenario(game, path):
    with Path(path).open("w") as fh:
        json.dump(game.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
