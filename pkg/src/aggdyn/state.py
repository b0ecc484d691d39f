"""The stacked primal-dual state ``(x, sigma, lam)``."""
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError
from .sets import FEAS_TOL


@dataclass
class SystemState:
    x: np.ndarray
    sigma: np.ndarray
    lam: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.x = np.atleast_1d(np.asarray(self.x, dtype=float))
        self.sigma = np.atleast_1d(np.asarray(self.sigma, dtype=float))
        self.lam = np.asarray(self.lam, dtype=float).reshape(-1)
        self.t = float(self.t)

    def stacked(self):
        return np.concatenate([self.x, self.sigma, self.lam])

    @classmethod
    def from_stacked(cls, game, z, t=0.0):
        nx, p = game.primal_dim, game.aggregate_dim
        z = np.asarray(z, dtype=float)
        if z.shape != (nx + p + game.constraint_dim,):
            raise DimensionMismatchError("state", (nx + p + game.constraint_dim,), z.shape)
        return cls(z[:nx].copy(), z[nx:nx + p].copy(), z[nx + p:].copy(), t)

    def check_dims(self, game):
        for name, arr, size in (("x", self.x, game.primal_dim),
                                ("sigma", self.sigma, game.aggregate_dim),
                                ("lambda", self.lam, game.constraint_dim)):
            if arr.shape != (size,):
                raise DimensionMismatchError(name, (size,), arr.shape)

    def is_feasible(self, game, tol=FEAS_TOL):
        blocks = game.agent_blocks(self.x)
        ok = all(s.contains(blocks[i], tol) for i, s in enumerate(game.local_sets))
        return ok and bool(np.all(self.lam >= -1e-12))

    def to_dict(self):
        return {"x": self.x.tolist(), "sigma": self.sigma.tolist(),
                "lambda": self.lam.tolist(), "t": self.t}

    @classmethod
    def from_dict(cls, d):
        return cls(d["x"], d["sigma"], d.get("lambda", []), d.get("t", 0.0))
