"""Convex sets: Euclidean projection, tangent-cone projection, normal cones.

Every set is an immutable descriptor. The module-level functions
:func:`project`, :func:`tangent_project` and :func:`normal_cone_contains`
dispatch to the set's methods.
"""
import itertools

import numpy as np

from ._polyhedral import project_onto_cone, project_polyhedron
from .errors import DimensionMismatchError, InfeasiblePointError, ProjectionError
from .maps import ConstraintMap

FEAS_TOL = 1e-8
ACTIVE_TOL = 1e-10


def _vec(z, dim, field="z"):
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if z.shape != (dim,):
        raise DimensionMismatchError(field, (dim,), z.shape)
    return z


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


class ConvexSet:
    """Base class; subclasses define ``kind``, ``dim`` and the geometry."""

    kind = None
    bounded = True

    def project(self, z):
        raise NotImplementedError

    def slack(self, x):
        """Constraint values ``G x - h`` (nonpositive inside the set)."""
        raise NotImplementedError

    def active_normals(self, x, tol=ACTIVE_TOL):
        """Outward normals of the constraints active at ``x``, one per row."""
        raise NotImplementedError

    def contains(self, x, tol=FEAS_TOL):
        x = _vec(x, self.dim, "x")
        s = self.slack(x)
        return bool(s.size == 0 or np.max(s) <= tol)

    def _require_member(self, x, tol):
        x = _vec(x, self.dim, "x")
        if not self.contains(x, tol):
            raise InfeasiblePointError(
                f"point lies outside the {self.kind} set "
                f"(max violation {np.max(self.slack(x)):.3e})")
        return x

    def tangent_project(self, x, v, tol=FEAS_TOL):
        # Moreau: the tangent part is v minus its normal-cone projection.
        x = self._require_member(x, tol)
        v = _vec(v, self.dim, "v")
        return v - project_onto_cone(self.active_normals(x), v)

    def normal_cone_contains(self, x, w, tol=FEAS_TOL):
        x = self._require_member(x, tol)
        w = _vec(w, self.dim, "w")
        # constraints within tol of binding count as active at this tolerance
        gap = w - project_onto_cone(self.active_normals(x, max(tol, ACTIVE_TOL)), w)
        return bool(np.linalg.norm(gap) <= tol)

    def center(self):
        raise NotImplementedError

    def diameter(self):
        raise NotImplementedError

    def vertices(self):
        """A finite set of extreme (or near-extreme) points of the set."""
        raise NotImplementedError

    def sample(self, rng, size):
        raise NotImplementedError

    def to_dict(self):
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}({self.to_dict()})"


class Box(ConvexSet):
    kind = "box"

    def __init__(self, lower, upper):
        lower = np.atleast_1d(np.asarray(lower, dtype=float))
        upper = np.atleast_1d(np.asarray(upper, dtype=float))
        if lower.shape != upper.shape or lower.ndim != 1:
            raise DimensionMismatchError("box.upper", lower.shape, upper.shape)
        if np.any(lower > upper):
            raise ValueError("box: lower must not exceed upper")
        if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
            raise ValueError("box: bounds must be finite")
        self.lower, self.upper = _frozen(lower), _frozen(upper)
        self.dim = lower.size

    def project(self, z):
        return np.minimum(np.maximum(_vec(z, self.dim), self.lower), self.upper)

    def slack(self, x):
        return np.concatenate([x - self.upper, self.lower - x])

    def active_normals(self, x, tol=ACTIVE_TOL):
        eye = np.eye(self.dim)
        up = self.upper - x <= tol
        lo = x - self.lower <= tol
        return np.vstack([eye[up], -eye[lo]])

    def tangent_project(self, x, v, tol=FEAS_TOL):
        x = self._require_member(x, tol)
        v = _vec(v, self.dim, "v").copy()
        v[(x - self.lower <= ACTIVE_TOL) & (v < 0.0)] = 0.0
        v[(self.upper - x <= ACTIVE_TOL) & (v > 0.0)] = 0.0
        return v

    def normal_cone_contains(self, x, w, tol=FEAS_TOL):
        # sup over the box of w^T (z - x), coordinate by coordinate.
        x = self._require_member(x, tol)
        w = _vec(w, self.dim, "w")
        sup = np.sum(np.maximum(w * (self.lower - x), w * (self.upper - x)))
        return bool(sup <= tol)

    def center(self):
        return 0.5 * (self.lower + self.upper)

    def diameter(self):
        return float(np.linalg.norm(self.upper - self.lower))

    def vertices(self):
        return np.array(list(itertools.product(*zip(self.lower, self.upper))))

    def sample(self, rng, size):
        return rng.uniform(self.lower, self.upper, size=(size, self.dim))

    def to_dict(self):
        return {"kind": "box", "lower": self.lower.tolist(), "upper": self.upper.tolist()}


class Ball(ConvexSet):
    kind = "ball"

    def __init__(self, center, radius):
        self._center = _frozen(np.atleast_1d(np.asarray(center, dtype=float)))
        self.radius = float(radius)
        if not self.radius > 0.0:
            raise ValueError("ball: radius must be positive")
        self.dim = self._center.size

    def project(self, z):
        z = _vec(z, self.dim)
        d = z - self._center
        dist = np.linalg.norm(d)
        if dist <= self.radius:
            return z.copy()
        return self._center + d * (self.radius / dist)

    def slack(self, x):
        return np.array([np.linalg.norm(x - self._center) - self.radius])

    def active_normals(self, x, tol=ACTIVE_TOL):
        d = x - self._center
        dist = np.linalg.norm(d)
        if self.radius - dist > tol * (1.0 + self.radius):
            return np.zeros((0, self.dim))
        return (d / dist)[None, :]

    def tangent_project(self, x, v, tol=FEAS_TOL):
        x = self._require_member(x, tol)
        v = _vec(v, self.dim, "v")
        normals = self.active_normals(x)
        if normals.shape[0] == 0:
            return v.copy()
        nrm = normals[0]
        out = v @ nrm
        return v - out * nrm if out > 0.0 else v.copy()

    def normal_cone_contains(self, x, w, tol=FEAS_TOL):
        x = self._require_member(x, tol)
        w = _vec(w, self.dim, "w")
        sup = w @ (self._center - x) + self.radius * np.linalg.norm(w)
        return bool(sup <= tol)

    def center(self):
        return self._center.copy()

    def diameter(self):
        return 2.0 * self.radius

    def vertices(self):
        eye = np.eye(self.dim)
        return np.vstack([self._center + self.radius * eye, self._center - self.radius * eye])

    def sample(self, rng, size):
        d = rng.standard_normal((size, self.dim))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        r = self.radius * rng.uniform(size=(size, 1)) ** (1.0 / self.dim)
        return self._center + r * d

    def to_dict(self):
        return {"kind": "ball", "center": self._center.tolist(), "radius": self.radius}


class NonnegOrthant(ConvexSet):
    """The dual feasible set R^m_{>=0}; the only unbounded set supported."""

    kind = "nonneg_orthant"
    bounded = False

    def __init__(self, dim):
        self.dim = int(dim)

    def project(self, z):
        return np.maximum(_vec(z, self.dim), 0.0)

    def slack(self, x):
        return -x

    def active_normals(self, x, tol=ACTIVE_TOL):
        return -np.eye(self.dim)[x <= tol]

    def tangent_project(self, x, v, tol=FEAS_TOL):
        x = self._require_member(x, tol)
        v = _vec(v, self.dim, "v").copy()
        v[(x <= ACTIVE_TOL) & (v < 0.0)] = 0.0
        return v

    def normal_cone_contains(self, x, w, tol=FEAS_TOL):
        # sup_{z >= 0} w^T (z - x) is finite only for w <= 0, where it equals -w^T x.
        x = self._require_member(x, tol)
        w = _vec(w, self.dim, "w")
        if w.size and np.max(w) > tol:
            return False
        return bool(np.sum(np.maximum(-w, 0.0) * x) <= tol)

    def center(self):
        return np.zeros(self.dim)

    def diameter(self):
        return np.inf

    def to_dict(self):
        return {"kind": "nonneg_orthant", "dim": self.dim}


class Halfspaces(ConvexSet):
    """``{x : a_k^T x <= beta_k}`` intersected with a bounding box."""

    kind = "halfspaces"

    def __init__(self, a, beta, bbox):
        if isinstance(bbox, dict):
            bbox = Box(bbox["lower"], bbox["upper"])
        self.bbox = bbox
        self.dim = bbox.dim
        a = np.asarray(a, dtype=float).reshape(-1, self.dim)
        beta = np.atleast_1d(np.asarray(beta, dtype=float))
        if beta.shape != (a.shape[0],):
            raise DimensionMismatchError("halfspaces.beta", (a.shape[0],), beta.shape)
        self.a, self.beta = _frozen(a), _frozen(beta)
        eye = np.eye(self.dim)
        self._G = np.vstack([a, eye, -eye])
        self._h = np.concatenate([beta, bbox.upper, -bbox.lower])
        try:
            self._center = project_polyhedron(self._G, self._h, bbox.center())
        except ProjectionError as exc:
            raise ValueError("halfspaces: the intersection is empty") from exc

    def project(self, z):
        z = _vec(z, self.dim)
        y = project_polyhedron(self._G, self._h, z)
        return np.minimum(np.maximum(y, self.bbox.lower), self.bbox.upper)

    def slack(self, x):
        return self._G @ x - self._h

    def active_normals(self, x, tol=ACTIVE_TOL):
        s = self.slack(x)
        return self._G[s >= -tol * (1.0 + np.abs(self._h))]

    def center(self):
        return self._center.copy()

    def diameter(self):
        return self.bbox.diameter()

    def vertices(self):
        return np.array([self.project(v) for v in self.bbox.vertices()])

    def sample(self, rng, size):
        pts = self.bbox.sample(rng, size)
        bad = np.max(pts @ self.a.T - self.beta, axis=1) > 0.0
        # Rejected draws are redrawn a few times, then projected.
        for _ in range(20):
            if not bad.any():
                break
            pts[bad] = self.bbox.sample(rng, int(bad.sum()))
            bad = np.max(pts @ self.a.T - self.beta, axis=1) > 0.0
        for i in np.flatnonzero(bad):
            pts[i] = self.project(pts[i])
        return pts

    def to_dict(self):
        return {"kind": "halfspaces", "a": self.a.tolist(), "beta": self.beta.tolist(),
                "bbox": self.bbox.to_dict()}


class LiftedSublevel(ConvexSet):
    """``{(x, y) : x in X, y in Y, g(x) <= y}`` with boxes ``X``, ``Y``.

    The projection dualizes each row of ``g(x) - y <= 0``; a single row is
    solved by bisection on its multiplier, several rows by Dykstra over the
    single-row sets.
    """

    kind = "lifted_sublevel"
    bisection_tol = 1e-10
    max_bisection = 200
    max_dykstra = 5000

    def __init__(self, x_box, y_box, g):
        if isinstance(x_box, dict):
            x_box = Box(x_box["lower"], x_box["upper"])
        if isinstance(y_box, dict):
            y_box = Box(y_box["lower"], y_box["upper"])
        if not isinstance(g, ConstraintMap):
            g = ConstraintMap.from_dict(g)
        if g.in_dim != x_box.dim:
            raise DimensionMismatchError("lifted_sublevel.g", (x_box.dim,), (g.in_dim,))
        if g.out_dim != y_box.dim:
            raise DimensionMismatchError("lifted_sublevel.y_box", (g.out_dim,), (y_box.dim,))
        self.x_box, self.y_box, self.g = x_box, y_box, g
        self.n, self.m = x_box.dim, y_box.dim
        self.dim = self.n + self.m

    def split(self, z):
        return z[: self.n], z[self.n:]

    def slack(self, z):
        x, y = self.split(z)
        return np.concatenate([self.x_box.slack(x), self.y_box.slack(y), self.g.value(x) - y])

    def _row_projection(self, zx, zy, r):
        """Project onto the set carrying only row ``r`` of the constraint."""
        lo, hi = self.x_box.lower, self.x_box.upper
        ylo, yhi = self.y_box.lower[r], self.y_box.upper[r]
        row = self.g.rows[r]
        y = np.clip(zy, self.y_box.lower, self.y_box.upper)

        def at(nu):
            x = row.prox_box(zx, nu, lo, hi)
            yr = min(max(zy[r] + nu, ylo), yhi)
            return x, yr, row.value(x) - yr

        x, yr, phi = at(0.0)
        if phi <= 0.0:
            y[r] = yr
            return x, y

        nu_lo, nu_hi = 0.0, 1.0
        for _ in range(60):
            x, yr, phi = at(nu_hi)
            if phi <= 0.0:
                break
            nu_lo, nu_hi = nu_hi, 2.0 * nu_hi
        else:
            raise ProjectionError("lifted_sublevel: no multiplier restores feasibility", phi)

        # Keep the feasible end of the bracket so the output is in the set.
        best = (x, yr)
        for _ in range(self.max_bisection):
            if nu_hi - nu_lo <= self.bisection_tol * (1.0 + nu_hi):
                break
            nu = 0.5 * (nu_lo + nu_hi)
            x, yr, phi = at(nu)
            if phi <= 0.0:
                nu_hi, best = nu, (x, yr)
                if phi >= -self.bisection_tol:
                    break
            else:
                nu_lo = nu
        y[r] = best[1]
        return best[0], y

    def _polyhedral_rows(self):
        n, m = self.n, self.m
        G = [np.hstack([np.eye(n), np.zeros((n, m))]), np.hstack([-np.eye(n), np.zeros((n, m))]),
             np.hstack([np.zeros((m, n)), np.eye(m)]), np.hstack([np.zeros((m, n)), -np.eye(m)]),
             np.hstack([np.vstack([r.a for r in self.g.rows]), -np.eye(m)])]
        h = [self.x_box.upper, -self.x_box.lower, self.y_box.upper, -self.y_box.lower,
             -np.array([r.c for r in self.g.rows])]
        return np.vstack(G), np.concatenate(h)

    def project(self, z):
        z = _vec(z, self.dim)
        if self.contains(z, 0.0):
            return z.copy()
        zx, zy = self.split(z)
        if all(r.kind == "affine" for r in self.g.rows):
            # Affine rows make the set a polyhedron: project exactly.
            if not hasattr(self, "_poly"):
                self._poly = self._polyhedral_rows()
            y = project_polyhedron(*self._poly, z)
            return np.concatenate([np.clip(y[: self.n], self.x_box.lower, self.x_box.upper),
                                   np.clip(y[self.n:], self.y_box.lower, self.y_box.upper)])
        if self.m == 1:
            x, y = self._row_projection(zx, zy, 0)
            return np.concatenate([x, y])

        # Dykstra's alternating projections over the single-row sets.
        cur = z.copy()
        incr = np.zeros((self.m, self.dim))
        for _ in range(self.max_dykstra):
            prev, prev_incr = cur, incr.copy()
            for r in range(self.m):
                w = cur + incr[r]
                x, y = self._row_projection(w[: self.n], w[self.n:], r)
                nxt = np.concatenate([x, y])
                incr[r] = w - nxt
                cur = nxt
            # The iterate can stall for a sweep while the corrections still move.
            moved = np.linalg.norm(cur - prev) + np.linalg.norm(incr - prev_incr)
            if moved <= 1e-12 * (1.0 + np.linalg.norm(cur)):
                break
        viol = float(np.max(self.slack(cur)))
        if viol > 1e-10:
            # Dykstra approaches the intersection slowly near corners; lift y
            # onto the epigraph once it is close.
            x, y = self.split(cur)
            y = np.minimum(np.maximum(y, self.g.value(x)), self.y_box.upper)
            cur = np.concatenate([x, y])
            viol = max(viol if viol > 1e-7 else 0.0, float(np.max(self.slack(cur))))
        if viol > 1e-10:
            raise ProjectionError("lifted_sublevel: Dykstra iteration did not converge", viol)
        return cur

    def active_normals(self, z, tol=ACTIVE_TOL):
        x, y = self.split(z)
        rows = []
        for normal in self.x_box.active_normals(x, tol):
            rows.append(np.concatenate([normal, np.zeros(self.m)]))
        for normal in self.y_box.active_normals(y, tol):
            rows.append(np.concatenate([np.zeros(self.n), normal]))
        gx = self.g.value(x)
        if np.any(gx - y >= -tol):
            jac = self.g.jacobian(x)
            eye = np.eye(self.m)
            for r in np.flatnonzero(gx - y >= -tol):
                rows.append(np.concatenate([jac[r], -eye[r]]))
        if not rows:
            return np.zeros((0, self.dim))
        return np.vstack(rows)

    def center(self):
        xc = self.x_box.center()
        return self.project(np.concatenate([xc, self.y_box.center()]))

    def diameter(self):
        return float(np.hypot(self.x_box.diameter(), self.y_box.diameter()))

    def vertices(self):
        out = []
        for xv in self.x_box.vertices():
            y = np.clip(self.g.value(xv), self.y_box.lower, self.y_box.upper)
            out.append(self.project(np.concatenate([xv, y])))
        return np.array(out)

    def sample(self, rng, size):
        xs = self.x_box.sample(rng, size)
        out = np.empty((size, self.dim))
        for i, x in enumerate(xs):
            gx = np.clip(self.g.value(x), self.y_box.lower, self.y_box.upper)
            y = rng.uniform(gx, self.y_box.upper)
            z = np.concatenate([x, y])
            out[i] = z if self.contains(z, 0.0) else self.project(z)
        return out

    def to_dict(self):
        return {"kind": "lifted_sublevel", "x_box": self.x_box.to_dict(),
                "y_box": self.y_box.to_dict(), "g": self.g.to_dict()}


def set_from_dict(desc):
    """Build a set from its JSON descriptor."""
    try:
        kind = desc["kind"]
    except (KeyError, TypeError) as exc:
        raise ValueError(f"set descriptor needs a 'kind': {desc!r}") from exc
    if kind == "box":
        return Box(desc["lower"], desc["upper"])
    if kind == "ball":
        return Ball(desc["center"], desc["radius"])
    if kind == "halfspaces":
        return Halfspaces(desc["a"], desc["beta"], desc["bbox"])
    if kind == "lifted_sublevel":
        return LiftedSublevel(desc["x_box"], desc["y_box"], desc["g"])
    if kind == "nonneg_orthant":
        return NonnegOrthant(desc["dim"])
    raise ValueError(f"unknown set kind {kind!r}")


def project(cset, z):
    """Euclidean projection of ``z`` onto ``cset``."""
    return cset.project(z)


def tangent_project(cset, x, v, tol=FEAS_TOL):
    """Projection of ``v`` onto the tangent cone of ``cset`` at ``x``."""
    return cset.tangent_project(x, v, tol)


def normal_cone_contains(cset, x, w, tol=FEAS_TOL):
    """Whether ``w`` lies in the normal cone of ``cset`` at ``x`` (to ``tol``)."""
    return cset.normal_cone_contains(x, w, tol)
