"""Admissibility checks and the affine normalization of the coefficients.

The analysis machinery assumes a symmetric elliptic coefficient field, a
bounded potential, and a genuinely sublinear positive nonlinearity.  The
checker samples each clause and reports margins with witnesses on failure.
The normalization carries any interior point to the origin while turning
the coefficient matrix there into the identity, which is the chart in which
every audit runs.
"""

import numpy as np

from freqlab.model import (CoefficientField, NonlinearitySpec, PowerTerm,
                           ProblemSpec, check_A1, check_A3,
                           normalize_coordinates)

print("=== an admissible mixed-power nonlinearity ===")
coef = lambda x: 1.0 + 0.5 * x[..., 0] ** 2
cgrad = lambda x: np.stack([x[..., 0], np.zeros_like(x[..., 0])], axis=-1)
nl = NonlinearitySpec.sum_of_powers(
    [PowerTerm(1.5, coef, cgrad), PowerTerm(1.0, 1.0)], kappa1=2.0, kappa2=0.5)
rep = check_A3(nl)
for name, clause in sorted(rep.clauses.items()):
    print(f"  {name:28s} {'pass' if clause.passed else 'FAIL':4s} "
          f"margin {clause.margin:+.3e}")

print()
print("=== a violator is pinned to a witness point ===")
bad = NonlinearitySpec.tabulated(
    lambda x, s: -np.sign(s) * np.abs(s) ** 0.5, q=1.5, kappa2=0.5)
from freqlab.model import ball_grid, s_grid
clause = check_A3(bad, points=ball_grid(2, 1.0, 16),
                  s_values=s_grid(1.0, 32)).clauses["A3.i.lower"]
print(f"  sign-flipped power law: clause fails with witness (x, s) = "
      f"{[round(v, 3) for v in clause.witness]}")

print()
print("=== coefficient admissibility ===")
A = CoefficientField.rotation_perturbed(0.2, 2)
rep = check_A1(A)
for name, clause in sorted(rep.clauses.items()):
    print(f"  {name:24s} {'pass' if clause.passed else 'FAIL':4s} {clause.note}")

print()
print("=== normalization: A(x0) becomes the identity ===")
spec = ProblemSpec(2, 1.0, CoefficientField.diagonal([4.0, 1.0]),
                   NonlinearitySpec.homogeneous(1.5))
out = normalize_coordinates(spec, np.zeros(2))
A0 = out.coefficients.entries(np.zeros((1, 2)))[0]
print(f"  before: diag(4, 1); after: A~(0) =\n{np.round(A0, 14)}")
print(f"  pulled-back ball radius: {out.outer_radius} "
      f"(shrunk by the stretch of the square root)")
