"""Why sublinear uniqueness fails in one direction and not the other.

The wrong-sign power ODE u'' = |u|^{q-2} u admits a C^2 solution that is
identically zero up to a chosen time t0 and strictly positive afterwards:
a solution can "rest" on the zero state and wake up.  The good-sign ODE
-u'' = |u|^{q-2} u conserves u'^2/2 + |u|^q/q, so a nontrivial solution can
never have u = u' = 0 simultaneously and every zero is simple.
"""

import numpy as np

from freqlab import counterexample_profile, conserved_energy, integrate_plane, zero_audit
from freqlab.odes import OdeTrajectory, counterexample_slope

q = 1.5
t0 = 0.0

print("=== the glued profile (wrong sign) ===")
t = np.linspace(-1.0, 2.0, 3001)
u, upp = counterexample_profile(q, t0, t)
f = np.sign(u) * np.abs(u) ** (q - 1.0)
print(f"q = {q}: u(2) = {u[-1]:.6f} (closed form 1/9 = {1/9:.6f})")
print(f"max |u'' - f(u)| over both branches: {np.max(np.abs(upp - f)):.2e}")

traj = OdeTrajectory(t, u, counterexample_slope(q, t0, t), q, 1,
                     (0.0, 0.0), t[1] - t[0])
zeros = zero_audit(traj)
print(f"zero audit finds {len(zeros)} zero(s):")
for z in zeros:
    kind = "degenerate (u = u' = 0)" if z.degenerate else "simple"
    print(f"  t* = {z.location:+.4f}  |u'| = {z.slope:.2e}  -> {kind}")

print()
print("=== the conserved quantity (good sign) ===")
traj = integrate_plane(q, 1.0, 0.0, 1e-3, 10.0)
E = conserved_energy(traj)
print(f"E = u'^2/2 + |u|^q/q stays at {E[0]:.6f} "
      f"(max drift {np.max(np.abs(E - E[0])):.2e})")
zeros = zero_audit(traj)
print(f"every zero is simple; the slope there carries the full energy:")
for z in zeros:
    print(f"  t* = {z.location:.4f}  u'^2 = {z.slope ** 2:.8f}  "
          f"(2 E = {2 * E[0]:.8f})")
