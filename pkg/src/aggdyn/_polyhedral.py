"""Least-distance problems over polyhedra and finitely generated cones.

Both reduce to nonnegative least squares (Lawson-Hanson active set), which
terminates in finitely many steps and is exact up to rounding at the sizes
used here.
"""
import numpy as np
from scipy.optimize import nnls

from .errors import ProjectionError


def project_polyhedron(G, h, z, feas_tol=1e-12):
    """Euclidean projection of ``z`` onto ``{y : G y <= h}``.

    Solved as the least-distance program ``min |u|  s.t.  -G u >= G z - h``
    through its NNLS dual, then polished on the identified active set.
    """
    z = np.asarray(z, dtype=float)
    G = np.atleast_2d(np.asarray(G, dtype=float))
    h = np.asarray(h, dtype=float).reshape(-1)
    if G.shape[0] == 0:
        return z.copy()
    slack = G @ z - h
    if np.all(slack <= 0.0):
        return z.copy()

    n = z.size
    E = np.vstack([-G.T, slack[None, :]])
    f = np.zeros(n + 1)
    f[-1] = 1.0
    w, _ = nnls(E, f, maxiter=50 * max(G.shape))
    r = E @ w - f
    if abs(r[-1]) < 1e-14:
        raise ProjectionError("polyhedron is empty", float(np.linalg.norm(r)))
    y = z - r[:n] / r[-1]

    active = w > 0.0
    if np.any(active):
        Ga = G[active]
        mu, *_ = np.linalg.lstsq(Ga @ Ga.T, Ga @ z - h[active], rcond=None)
        y_pol = z - Ga.T @ mu
        if np.all(mu >= -1e-12) and np.max(G @ y_pol - h) <= max(np.max(G @ y - h), 0.0):
            y = y_pol

    viol = float(np.max(G @ y - h))
    scale = 1.0 + float(np.max(np.abs(h)))
    if viol > feas_tol * scale:
        raise ProjectionError("polyhedral projection infeasible", viol)
    return y


def project_onto_cone(generators, v):
    """Projection of ``v`` onto the cone spanned by the rows of ``generators``."""
    v = np.asarray(v, dtype=float)
    if generators.shape[0] == 0:
        return np.zeros_like(v)
    mu, _ = nnls(generators.T, v, maxiter=50 * max(generators.shape))
    return generators.T @ mu
