"""
A shared capacity constraint
============================

Same two-agent setup, but now total output is capped: x_1 + x_2 <= 2.
Both agents would like to produce 2, so the cap binds and the multiplier
lambda becomes a congestion price. The Lyapunov distance to the equilibrium
shrinks along the flow, and an independent VI solver lands on the same point.
"""
import numpy as np

from aggdyn import SimParams, SystemState, cross_validate, lyapunov_report, simulate
from aggdyn.fixtures import G2_EQ, load_fixture

game = load_fixture("G2")
s0 = SystemState([0.0, 0.0], [0.0], [0.0])
traj = simulate(game, s0, SimParams(step_h=0.01, record_every=50, stop_tol=1e-8))

print(" t       x_1      x_2      lambda   kkt")
for s, r in list(zip(traj.states, traj.kkt_norms))[::10]:
    print(f"{s.t:6.2f}  {s.x[0]:.5f}  {s.x[1]:.5f}  {s.lam[0]:.5f}  {r:.1e}")

final = traj.final
print("\nfinal", np.round(final.x, 6), "lambda", np.round(final.lam, 6))
print("slack b - Ax =", float(game.coupling_b[0] - (game.A @ final.x)[0]))

rep = lyapunov_report(game, traj, G2_EQ)
print(f"\nV(0) = {rep.values[0]:.4f}  V(end) = {rep.values[-1]:.2e}  "
      f"largest increase = {rep.monotone_within:.1e}")

# Extragradient on a compactified VI; it never touches the dynamics code.
cv = cross_validate(game, "gae", final, compare_lambda=True)
print(f"oracle agrees: {cv.agree} (primal gap {cv.primal_gap:.1e}, lambda gap {cv.lambda_gap:.1e})")
