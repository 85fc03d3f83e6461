"""The frequency function N(r) = r D(r) / H(r) as a vanishing-order meter.

For a homogeneous harmonic polynomial of degree k the frequency is
identically k: the quantity reads the local vanishing order off the
solution.  For a sublinear solution with u(0) != 0 the frequency collapses
to zero as r -> 0, and the nonlinearity drags it negative at larger radii.
"""

import numpy as np

from freqlab import ProblemSpec, frequency_profile, solve_radial
from freqlab.fields import sample_grid2d
from freqlab.model import CoefficientField, NonlinearitySpec

linear = ProblemSpec(2, 1.0, CoefficientField.identity(2),
                     NonlinearitySpec.zero())

print("=== harmonic polynomials: N(r) == degree ===")
for label, fn, deg in (("x1", lambda x: x[..., 0], 1),
                       ("x1*x2", lambda x: x[..., 0] * x[..., 1], 2)):
    fld = sample_grid2d(fn, 1.0, 128, 512, q=1.5)
    prof = frequency_profile(linear, fld)
    print(f"  u = {label:6s}: N in [{np.nanmin(prof.N):.12f}, "
          f"{np.nanmax(prof.N):.12f}]  (degree {deg})")

print()
print("=== a sublinear radial solution: N(r) -> 0 at the center ===")
spec = ProblemSpec.model(3, 1.5, outer_radius=1.5)
fld = solve_radial(spec, 0.5, h=1e-3)
prof = frequency_profile(spec, fld)
sel = np.linspace(0, len(prof.r) - 1, 8).astype(int)
print("      r        H(r)          D(r)          N(r)")
for k in sel:
    print(f"  {prof.r[k]:7.4f}  {prof.H[k]:12.5e}  {prof.D[k]:+12.5e}  "
          f"{prof.N[k]:+9.5f}")
print("the mass H grows like the sphere area while D stays small and")
print("eventually negative: vanishing order zero, nothing to continue from.")
