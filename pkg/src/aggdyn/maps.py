"""Smooth convex constraint maps ``g : R^n -> R^m`` given row by row.

Each row knows how to evaluate itself, its gradient, and the box-constrained
proximal step ``argmin_{lo <= x <= hi} 1/2 |x - z|^2 + nu * g_r(x)`` used by
the lifted-sublevel projector.
"""
import itertools

import numpy as np
from scipy.optimize import minimize

from ._polyhedral import project_polyhedron
from .errors import DimensionMismatchError


def _box_rows(lo, hi):
    n = lo.size
    G = np.vstack([np.eye(n), -np.eye(n)])
    h = np.concatenate([hi, -lo])
    return G, h


def _lbfgsb_prox(fun, grad, z, nu, lo, hi):
    res = minimize(
        lambda x: 0.5 * np.sum((x - z) ** 2) + nu * fun(x),
        np.clip(z, lo, hi),
        jac=lambda x: (x - z) + nu * grad(x),
        method="L-BFGS-B",
        bounds=list(zip(lo, hi)),
        options={"ftol": 1e-15, "gtol": 1e-12, "maxiter": 500},
    )
    return np.clip(res.x, lo, hi)


class AffineRow:
    """``g(x) = a^T x + c``."""

    kind = "affine"

    def __init__(self, a, c):
        self.a = np.asarray(a, dtype=float).reshape(-1)
        self.c = float(c)
        self.dim = self.a.size

    def value(self, x):
        return float(self.a @ x + self.c)

    def grad(self, x):
        return self.a.copy()

    def prox_box(self, z, nu, lo, hi):
        return np.clip(z - nu * self.a, lo, hi)

    def range_over_box(self, lo, hi):
        lo_val = self.c + np.sum(np.minimum(self.a * lo, self.a * hi))
        hi_val = self.c + np.sum(np.maximum(self.a * lo, self.a * hi))
        return float(lo_val), float(hi_val)


class QuadraticRow:
    """``g(x) = 1/2 x^T P x + p^T x + r`` with ``P`` symmetric PSD."""

    kind = "quadratic"

    def __init__(self, P, p, r):
        p = np.asarray(p, dtype=float).reshape(-1)
        n = p.size
        P = np.asarray(P, dtype=float).reshape(n, n)
        if not np.allclose(P, P.T, atol=1e-12):
            raise ValueError("quadratic constraint row: P must be symmetric")
        if np.linalg.eigvalsh(P).min() < -1e-12:
            raise ValueError("quadratic constraint row: P must be positive semidefinite")
        self.P, self.p, self.r = P, p, float(r)
        self.dim = n
        self._diagonal = np.count_nonzero(P - np.diag(np.diag(P))) == 0

    def value(self, x):
        return float(0.5 * x @ self.P @ x + self.p @ x + self.r)

    def grad(self, x):
        return self.P @ x + self.p

    def prox_box(self, z, nu, lo, hi):
        if self._diagonal:
            return np.clip((z - nu * self.p) / (1.0 + nu * np.diag(self.P)), lo, hi)
        # Change variables u = L^T x with I + nu P = L L^T: the prox becomes a
        # projection onto the image of the box.
        H = np.eye(self.dim) + nu * self.P
        free = np.linalg.solve(H, z - nu * self.p)
        if np.all(free >= lo) and np.all(free <= hi):
            return free
        L = np.linalg.cholesky(H)
        target = np.linalg.solve(L, z - nu * self.p)
        Linv_T = np.linalg.inv(L).T
        G, h = _box_rows(lo, hi)
        u = project_polyhedron(G @ Linv_T, h, target)
        return np.clip(Linv_T @ u, lo, hi)

    def range_over_box(self, lo, hi):
        # A convex function peaks at a vertex of the box.
        hi_val = max(self.value(np.array(v)) for v in itertools.product(*zip(lo, hi)))
        if self.dim == 1:
            cands = [lo, hi]
            if self.P[0, 0] > 0.0:
                cands.append(np.clip(-self.p / self.P[0, 0], lo, hi))
            lo_val = min(self.value(np.asarray(c, dtype=float)) for c in cands)
        elif np.linalg.eigvalsh(self.P).min() > 1e-12:
            L = np.linalg.cholesky(self.P)
            Linv_T = np.linalg.inv(L).T
            G, h = _box_rows(lo, hi)
            u = project_polyhedron(G @ Linv_T, h, -np.linalg.solve(L, self.p))
            lo_val = self.value(np.clip(Linv_T @ u, lo, hi))
        else:
            res = minimize(self.value, 0.5 * (lo + hi), jac=self.grad,
                           method="L-BFGS-B", bounds=list(zip(lo, hi)))
            lo_val = float(res.fun)
        return float(lo_val), float(hi_val)


class CallbackRow:
    """A user-supplied smooth convex row with a gradient callback."""

    kind = "callback"

    def __init__(self, fun, grad, dim):
        self._fun, self._grad, self.dim = fun, grad, int(dim)

    def value(self, x):
        return float(self._fun(x))

    def grad(self, x):
        return np.asarray(self._grad(x), dtype=float).reshape(self.dim)

    def prox_box(self, z, nu, lo, hi):
        return _lbfgsb_prox(self.value, self.grad, z, nu, lo, hi)

    def range_over_box(self, lo, hi):
        return None


class ConstraintMap:
    """Stack of convex rows forming ``g : R^n -> R^m``."""

    def __init__(self, rows):
        self.rows = tuple(rows)
        if not self.rows:
            raise ValueError("constraint map needs at least one row")
        dims = {r.dim for r in self.rows}
        if len(dims) != 1:
            raise DimensionMismatchError("g rows", "common input dim", sorted(dims))
        self.in_dim = dims.pop()
        self.out_dim = len(self.rows)

    @classmethod
    def affine(cls, A, c):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        c = np.asarray(c, dtype=float).reshape(-1)
        if c.size != A.shape[0]:
            raise DimensionMismatchError("g.c", (A.shape[0],), c.shape)
        return cls(AffineRow(a, ci) for a, ci in zip(A, c))

    def value(self, x):
        return np.array([r.value(x) for r in self.rows])

    def jacobian(self, x):
        return np.vstack([r.grad(x) for r in self.rows])

    def to_dict(self):
        if all(r.kind == "affine" for r in self.rows):
            return {"kind": "affine",
                    "A": [r.a.tolist() for r in self.rows],
                    "c": [r.c for r in self.rows]}
        out = []
        for r in self.rows:
            if r.kind == "affine":
                out.append({"kind": "affine", "A": [r.a.tolist()], "c": [r.c]})
            elif r.kind == "quadratic":
                out.append({"kind": "quadratic", "P": r.P.tolist(), "p": r.p.tolist(), "r": r.r})
            else:
                raise TypeError("callback constraint rows cannot be serialized")
        return out

    @classmethod
    def from_dict(cls, desc):
        if isinstance(desc, dict):
            desc = [desc]
        rows = []
        for d in desc:
            kind = d.get("kind")
            if kind == "affine":
                rows.extend(cls.affine(d["A"], d["c"]).rows)
            elif kind == "quadratic":
                rows.append(QuadraticRow(d["P"], d["p"], d["r"]))
            else:
                raise ValueError(f"unknown constraint map kind {kind!r}")
        return cls(rows)
