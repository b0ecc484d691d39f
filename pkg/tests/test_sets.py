import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aggdyn.errors import DimensionMismatchError, InfeasiblePointError
from aggdyn.maps import ConstraintMap
from aggdyn.sets import (Ball, Box, Halfspaces, LiftedSublevel, NonnegOrthant, normal_cone_contains,
                         project, set_from_dict, tangent_project)


def _quadratic_map(P, p, r):
    return ConstraintMap.from_dict([{"kind": "quadratic", "P": P, "p": p, "r": r}])


def all_sets():
    return {
        "box": Box([-1.0, 0.0, 2.0], [1.0, 0.5, 4.0]),
        "ball": Ball([0.5, -1.0], 2.0),
        "orthant": NonnegOrthant(3),
        "halfspaces": Halfspaces([[1.0, 1.0], [-1.0, 2.0]], [1.0, 2.0], Box([-5.0, -5.0], [5.0, 5.0])),
        "lifted_affine": LiftedSublevel(Box([0.0], [2.0]), Box([-1.0], [1.0]),
                                        ConstraintMap.affine([[1.0]], [-1.0])),
        "lifted_quadratic": LiftedSublevel(Box([-2.0, -1.0], [2.0, 1.0]), Box([-1.0], [4.0]),
                                           _quadratic_map([[1.0, 0.3], [0.3, 0.5]], [0.1, 0.0], -1.0)),
        "lifted_two_rows": LiftedSublevel(
            Box([-2.0], [2.0]), Box([-1.0, -3.0], [3.0, 3.0]),
            ConstraintMap.from_dict([{"kind": "quadratic", "P": [[2.0]], "p": [0.0], "r": -1.0},
                                     {"kind": "affine", "A": [[1.0]], "c": [-0.5]}])),
    }


SET_NAMES = list(all_sets())


def _points(S, rng, size, scale=3.0):
    dim = S.dim
    if S.bounded:
        c, d = S.center(), S.diameter()
        return c + scale * d * (rng.random((size, dim)) - 0.5)
    return scale * rng.standard_normal((size, dim))


def test_box_clamp():
    assert project(Box([0.0], [1.0]), [1.5]) == pytest.approx([1.0])


def test_ball_radial():
    np.testing.assert_allclose(project(Ball([0.0, 0.0], 1.0), [3.0, 4.0]), [0.6, 0.8], atol=1e-15)


def test_halfspace_projection_matches_grid_search():
    S = Halfspaces([[1.0, 1.0]], [1.0], Box([-5.0, -5.0], [5.0, 5.0]))
    z = np.array([1.0, 1.0])
    p = project(S, z)
    np.testing.assert_allclose(p, [0.5, 0.5], atol=1e-12)
    g = np.linspace(-1.0, 2.0, 1201)
    X, Y = np.meshgrid(g, g)
    feas = X + Y <= 1.0 + 1e-12
    d = np.where(feas, (X - 1.0) ** 2 + (Y - 1.0) ** 2, np.inf)
    k = np.unravel_index(np.argmin(d), d.shape)
    assert np.hypot(X[k] - p[0], Y[k] - p[1]) <= 2 * (g[1] - g[0])
    assert np.sum((p - z) ** 2) <= d[k] + 1e-12


@pytest.mark.parametrize("name", SET_NAMES)
def test_projection_feasible_and_idempotent(name, rng):
    S = all_sets()[name]
    for z in _points(S, rng, 200):
        p = S.project(z)
        assert S.contains(p, tol=1e-10)
        np.testing.assert_allclose(S.project(p), p, atol=1e-10)


@pytest.mark.parametrize("name", SET_NAMES)
def test_firm_nonexpansiveness(name, rng):
    S = all_sets()[name]
    Z, W = _points(S, rng, 1000), _points(S, rng, 1000)
    for z, w in zip(Z, W):
        pz, pw = S.project(z), S.project(w)
        assert np.sum((pz - pw) ** 2) <= (z - w) @ (pz - pw) + 1e-8


@pytest.mark.parametrize("name", SET_NAMES)
def test_projection_variational_inequality(name, rng):
    # (z - P z)^T (y - P z) <= 0 for every y in S
    S = all_sets()[name]
    members = [S.project(y) for y in _points(S, rng, 50)]
    for z in _points(S, rng, 50):
        p = S.project(z)
        for y in members:
            assert (z - p) @ (y - p) <= 1e-8 * (1 + np.linalg.norm(z - p))


def test_lifted_two_rows_against_generic_solver(rng):
    from scipy.optimize import minimize

    S = all_sets()["lifted_two_rows"]
    cons = [{"type": "ineq", "fun": lambda v, r=r: v[1 + r] - S.g.value(v[:1])[r]} for r in range(2)]
    box = list(zip(np.r_[S.x_box.lower, S.y_box.lower], np.r_[S.x_box.upper, S.y_box.upper]))
    for z in _points(S, rng, 20):
        p = S.project(z)
        ref = minimize(lambda v: 0.5 * np.sum((v - z) ** 2), S.project(z) * 0 + S.center(),
                       jac=lambda v: v - z, bounds=box, constraints=cons, method="SLSQP",
                       options={"ftol": 1e-14, "maxiter": 500}).x
        np.testing.assert_allclose(p, ref, atol=1e-5)


def test_tangent_interior_is_identity():
    assert tangent_project(Box([0.0], [1.0]), [0.5], [-7.0]) == pytest.approx([-7.0])


def test_tangent_removes_outward_direction():
    assert tangent_project(Box([0.0], [1.0]), [0.0], [-3.0]) == pytest.approx([0.0])


def test_tangent_orthant_limit_definition():
    S, x, v = NonnegOrthant(2), np.array([0.0, 2.0]), np.array([-1.0, -1.0])

    def quotient(h):
        return (S.project(x + h * v) - x) / h

    richardson = 2 * quotient(1e-6) - quotient(2e-6)
    np.testing.assert_allclose(tangent_project(S, x, v), [0.0, -1.0], atol=1e-12)
    np.testing.assert_allclose(richardson, [0.0, -1.0], atol=1e-8)


@pytest.mark.parametrize("name", ["box", "orthant"])
def test_tangent_matches_limit_on_boundary(name, rng):
    S = all_sets()[name]
    h = 1e-7
    for _ in range(200):
        x = S.project(_points(S, rng, 1)[0])
        if name == "box":
            face = rng.random(S.dim) < 0.5
            x[face] = np.where(rng.random(S.dim) < 0.5, S.lower, S.upper)[face]
        else:
            x[rng.random(S.dim) < 0.5] = 0.0
        v = rng.standard_normal(S.dim)
        np.testing.assert_allclose(S.tangent_project(x, v), (S.project(x + h * v) - x) / h, atol=1e-4)


@pytest.mark.parametrize("name", SET_NAMES)
def test_moreau_decomposition(name, rng):
    S = all_sets()[name]
    for z in _points(S, rng, 100):
        x = S.project(z)
        v = 2.0 * rng.standard_normal(S.dim)
        t = S.tangent_project(x, v)
        n = v - t
        # exact up to the rounding of one subtraction and one addition
        np.testing.assert_allclose(t + n, v, rtol=0, atol=4 * np.finfo(float).eps * np.abs(v).max())
        assert S.normal_cone_contains(x, n, tol=1e-7)
        assert abs(t @ n) <= 1e-7 * (1 + v @ v)


@pytest.mark.parametrize("name", SET_NAMES)
def test_projection_residual_lies_in_normal_cone(name, rng):
    S = all_sets()[name]
    for z in _points(S, rng, 100):
        p = S.project(z)
        assert S.normal_cone_contains(p, z - p, tol=1e-7)


def test_normal_cone_box_examples():
    B = Box([0.0], [1.0])
    assert normal_cone_contains(B, [0.5], [0.0], 1e-12)
    assert normal_cone_contains(B, [1.0], [2.0], 1e-12)
    assert not normal_cone_contains(B, [1.0], [-2.0], 1e-12)
    assert not normal_cone_contains(B, [0.5], [1e-3], 1e-12)


def test_normal_cone_orthant_nonpositive_ray():
    assert normal_cone_contains(NonnegOrthant(1), [0.0], [-5.0], 1e-12)
    assert not normal_cone_contains(NonnegOrthant(1), [0.0], [5.0], 1e-12)
    assert not normal_cone_contains(NonnegOrthant(1), [1.0], [-5.0], 1e-12)


def test_normal_cone_ball_radial():
    S = Ball([0.0, 0.0], 1.0)
    assert S.normal_cone_contains([0.6, 0.8], [1.2, 1.6], 1e-12)
    assert not S.normal_cone_contains([0.6, 0.8], [1.0, 0.0], 1e-9)


def test_infeasible_point_rejected():
    with pytest.raises(InfeasiblePointError):
        Box([0.0], [1.0]).tangent_project([2.0], [1.0])
    with pytest.raises(InfeasiblePointError):
        NonnegOrthant(1).normal_cone_contains([-1.0], [0.0], 1e-8)


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        project(Box([0.0, 0.0], [1.0, 1.0]), [1.0])


def test_invalid_construction():
    with pytest.raises(ValueError):
        Box([1.0], [0.0])
    with pytest.raises(ValueError):
        Ball([0.0], 0.0)
    with pytest.raises(ValueError):
        Halfspaces([[1.0]], [-10.0], Box([0.0], [1.0]))


@pytest.mark.parametrize("name", ["box", "ball", "orthant", "halfspaces", "lifted_affine", "lifted_quadratic"])
def test_descriptor_round_trip(name, rng):
    S = all_sets()[name]
    T = set_from_dict(S.to_dict())
    assert T.to_dict() == S.to_dict()
    for z in _points(S, rng, 20):
        np.testing.assert_array_equal(T.project(z), S.project(z))


@settings(max_examples=200, deadline=None)
@given(lo=st.floats(-5, 5), width=st.floats(0, 5), z=st.floats(-20, 20), w=st.floats(-20, 20))
def test_box_projection_properties(lo, width, z, w):
    B = Box([lo], [lo + width])
    pz, pw = B.project([z])[0], B.project([w])[0]
    assert lo <= pz <= lo + width
    assert (pz - pw) ** 2 <= (z - w) * (pz - pw) + 1e-12


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=2, max_size=2), st.floats(0.1, 5))
def test_ball_projection_properties(z, r):
    S = Ball([1.0, -1.0], r)
    p = S.project(z)
    assert np.linalg.norm(p - [1.0, -1.0]) <= r * (1 + 1e-12)
    assert S.normal_cone_contains(p, np.asarray(z) - p, tol=1e-8)
