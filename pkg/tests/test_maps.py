import numpy as np
import pytest

from aggdyn.maps import AffineRow, CallbackRow, ConstraintMap, QuadraticRow


ROWS = {
    "affine": AffineRow([1.0, -2.0], 0.5),
    "quadratic_diag": QuadraticRow([[2.0, 0.0], [0.0, 1.0]], [0.5, -1.0], -1.0),
    "quadratic_full": QuadraticRow([[2.0, 0.8], [0.8, 1.0]], [0.5, -1.0], -1.0),
    "callback": CallbackRow(lambda x: float(np.sum(x ** 4)), lambda x: 4 * x ** 3, 2),
}
LO, HI = np.array([-1.0, -0.5]), np.array([1.5, 2.0])


@pytest.mark.parametrize("name", list(ROWS))
def test_gradient_matches_finite_differences(name, rng):
    row = ROWS[name]
    h = 1e-6
    for x in rng.uniform(LO, HI, (50, 2)):
        fd = np.array([(row.value(x + h * e) - row.value(x - h * e)) / (2 * h) for e in np.eye(2)])
        np.testing.assert_allclose(row.grad(x), fd, rtol=1e-6, atol=1e-7)


@pytest.mark.parametrize("name", list(ROWS))
def test_prox_box_optimality(name, rng):
    # x = argmin over the box of 1/2 |x - z|^2 + nu g(x): the residual is a box normal.
    row = ROWS[name]
    for _ in range(30):
        z, nu = 3 * rng.standard_normal(2), rng.uniform(0.0, 3.0)
        x = row.prox_box(z, nu, LO, HI)
        assert np.all(x >= LO) and np.all(x <= HI)
        r = z - x - nu * row.grad(x)
        tol = 1e-5 if name == "callback" else 1e-9
        at_lo, at_hi = x <= LO + 1e-9, x >= HI - 1e-9
        free = ~(at_lo | at_hi)
        assert np.all(np.abs(r[free]) <= tol)
        assert np.all(r[at_lo & ~at_hi] <= tol) and np.all(r[at_hi & ~at_lo] >= -tol)


@pytest.mark.parametrize("name", ["affine", "quadratic_diag", "quadratic_full"])
def test_range_over_box_brackets_samples(name, rng):
    row = ROWS[name]
    lo, hi = row.range_over_box(LO, HI)
    corners = np.array([[a, b] for a in (LO[0], HI[0]) for b in (LO[1], HI[1])])
    vals = [row.value(x) for x in np.vstack([corners, rng.uniform(LO, HI, (2000, 2))])]
    assert lo <= min(vals) + 1e-12 and max(vals) <= hi + 1e-12
    assert min(vals) - lo < 0.05 and hi - max(vals) < 0.05


def test_range_one_dimensional_quadratic():
    row = QuadraticRow([[2.0]], [0.0], -1.0)
    assert row.range_over_box(np.array([-2.0]), np.array([2.0])) == pytest.approx((-1.0, 3.0))


def test_descriptor_round_trip():
    g = ConstraintMap.from_dict(
        [{"kind": "affine", "A": [[1.0, 2.0]], "c": [0.5]},
         {"kind": "quadratic", "P": [[1.0, 0.0], [0.0, 2.0]], "p": [0.0, 1.0], "r": -3.0}])
    assert (g.in_dim, g.out_dim) == (2, 2)
    h = ConstraintMap.from_dict(g.to_dict())
    x = np.array([0.7, -0.2])
    np.testing.assert_array_equal(h.value(x), g.value(x))
    np.testing.assert_array_equal(h.jacobian(x), g.jacobian(x))
    np.testing.assert_allclose(g.value(x), [0.7 - 0.4 + 0.5, 0.5 * 0.49 + 0.04 - 0.2 - 3.0])
