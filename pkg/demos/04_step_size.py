"""
How small must the step be?
===========================

On G1 the trajectory never touches a bound, so the flow is linear and its
exact solution is a matrix exponential. Forward Euler should lose accuracy
linearly in the step size h.
"""
import numpy as np
from scipy.linalg import expm

from aggdyn import SimParams, SystemState, simulate
from aggdyn.fixtures import load_fixture

game = load_fixture("G1")
M = np.array([[-1.0, 0.0, -0.5], [0.0, -1.0, -0.5], [0.5, 0.5, -1.0]])
r = np.array([1.0, 3.0, 0.0])
z_star = np.linalg.solve(M, -r)
T = 2.0
exact = z_star - expm(M * T) @ z_star

hs = [0.1, 0.05, 0.025, 0.0125, 0.00625]
errs = []
s0 = SystemState([0.0, 0.0], [0.0], [])
for h in hs:
    traj = simulate(game, s0, SimParams(step_h=h, t_max=T, stop_tol=1e-14, record_every=10**6))
    errs.append(np.linalg.norm(traj.final.stacked() - exact))
    print(f"h={h:<8} error at t={T:g}: {errs[-1]:.3e}")

slope = np.polyfit(np.log(hs), np.log(errs), 1)[0]
print(f"\nfitted order: {slope:.3f}")

# Euler stays stable while |1 + h*ev| < 1 for every eigenvalue ev of M.
ev = np.linalg.eigvals(M)
h_max = np.min(-2 * ev.real / np.abs(ev) ** 2)
print("eigenvalues of the linear flow:", np.round(ev, 4), f" stable for h < {h_max:.3f}")
