"""
Nonlinear coupling by lifting
=============================

The dynamics only handle affine coupling rows. A convex coupling
sum_i g_i(x_i) <= 0 can still be solved by giving each agent an extra
variable y_i with g_i(x_i) <= y_i and coupling sum_i y_i <= 0 instead.

Here g_i(x) = x^2 - 1 and both agents want x_i = 2, so the constraint
x_1^2 + x_2^2 <= 2 binds at x = (1, 1) with multiplier 1/2.
"""
import warnings

import numpy as np

from aggdyn import (Box, ConstraintMap, CostFn, GameSpec, NonlinearCoupling, SimParams,
                    certify_strict_monotonicity, pull_back, reformulate, simulate)
from aggdyn.reformulation import default_y_box

cost = CostFn.quadratic([[1.0]], [-2.0], [[0.0]])
base = GameSpec(2, 1, 0, [cost] * 2, [Box([-2.0], [2.0])] * 2, [], [], 1.0)
g = ConstraintMap.from_dict({"kind": "quadratic", "P": [[2.0]], "p": [0.0], "r": -1.0})

# y_i must be able to reach every value g takes on [-2, 2].
y_box = default_y_box(g, base.local_sets[0])
print("y box:", y_box.lower, y_box.upper)
coupling = NonlinearCoupling([g, g], [y_box, y_box])
lifted = reformulate(base, coupling)

# y_i carries no cost, so the lifted game is only monotone and the
# strict certificate fails. The flow still converges here.
print("lifted certificate holds:", certify_strict_monotonicity(lifted, "gae").holds)
with warnings.catch_warnings():
    warnings.simplefilter("ignore", RuntimeWarning)
    traj = simulate(lifted, params=SimParams(stop_tol=1e-7))

pb = pull_back(lifted, coupling, traj.final)
print(f"\nterminated by {traj.terminated_by} at t={traj.final.t:.1f}")
print("x =", np.round(pb.x, 6), " lambda =", np.round(pb.lam, 6))
print("consistent:", pb.consistent, " constraint value:", float(np.sum(pb.x ** 2) - 2))
