"""Darboux factors and a first integral detected from the flow curvature.

The synthetic 5-D system ("gear5") has a phi determinant that factors in
closed form: phi = (x1^2 + x2^2)(x1^2 + x2^2 - x3)(x4^2 + beta1) Q(X).
factor_check recovers each factor's cofactor K from L_V(factor) = K factor
by pointwise division and a polynomial fit; K = 0 flags the first integral
x1^2 + x2^2.
"""

from flowcurv import factor_check, get_model

model = get_model("gear5")
box = [(-2, 2), (-2, 2), (-2, 2), (-5, 5), (-2, 2)]

for factor in ("x1^2 + x2^2",
               "x1^2 + x2^2 - x3",
               "x4^2 + beta1",
               "(x1^2 + x2^2)*(x1^2 + x2^2 - x3)*(x4^2 + beta1)"):
    rep = factor_check(model, factor, box, samples=150, seed=0)
    print(f"factor: {factor}")
    if rep.zero_set_count:
        print(f"  zero set sampled at {rep.zero_set_count} points; "
              f"max scaled |phi| there = {rep.phi_scaled_max:.2e}")
    else:
        print("  factor has no real zero set in the box (always positive)")
    if rep.first_integral:
        print("  L_V(factor) = 0 identically: FIRST INTEGRAL (cofactor K = 0)")
    else:
        terms = [f"{c:+.6g}*{name}" for name, c
                 in zip(rep.cofactor_basis, rep.cofactor_coeffs)
                 if abs(c) > 1e-6]
        print(f"  cofactor fit: K = {' '.join(terms)}"
              f"  (fit residual {rep.cofactor_fit_residual:.1e})")
    print(f"  verdict: {'invariant' if rep.invariant else 'not invariant'}\n")

# negative control: x1 = 0 is not invariant for the Chua circuit
rep = factor_check(get_model("chua3-pwl"), "x1", [(-2, 2)] * 3, samples=100, seed=1)
print("negative control, factor x1 on chua3-pwl:")
print(f"  cofactor fit residual {rep.cofactor_fit_residual:.2e} "
      f"-> {'invariant' if rep.invariant else 'not invariant'}")
