"""Invariant hyperplanes of the Chua circuits, two ways.

The scrolls of the piecewise-linear Chua circuits wind on hyperplanes
through the outer fixed points.  This script computes those planes from the
eigenvector construction (left eigenvector of the dominant real eigenvalue)
and then checks, completely independently, that the flow-curvature
determinant phi = det(Xdot, ..., X^(n)) vanishes on them: the plane is a
factor of phi inside its region.
"""

import numpy as np

from flowcurv import fixed_points, get_model, phi, tls_hyperplane

for name, style in [("chua3-pwl", "last1"), ("chua4-pwl", "lambda-ty"),
                    ("chua5-pwl", "lambda-ty")]:
    model = get_model(name)
    print(f"== {name} (n = {model.dim})")
    for fp in fixed_points(model):
        if fp.region not in ("pos", "neg"):
            continue
        plane = tls_hyperplane(model, fp)
        loc = np.array2string(fp.location, precision=5, suppress_small=True)
        virtual = " [virtual: outside its own branch region]" if fp.virtual else ""
        print(f" fixed point {loc}{virtual}")
        lam = plane.fast_eigenvalue
        if lam.imag:
            print(f"  dominant eigenvalue {lam.real:.4f} +- {abs(lam.imag):.4f}i "
                  f"(complex); plane uses the dominant real one {plane.eigenvalue:.5f}")
        else:
            print(f"  fast eigenvalue {lam.real:.5f}")
        print(f"  Pi(X) = {plane.equation(style)}")

        # cross-check: phi vanishes on the plane, not next to it
        rng = np.random.default_rng(1)
        solve = int(np.argmax(np.abs(plane.normal)))
        on, off = [], []
        while len(on) < 60:
            x = fp.location + rng.uniform(-1.5, 1.5, model.dim)
            x[0] = np.sign(fp.location[0]) * rng.uniform(1.2, 2.4)
            x[solve] = 0.0
            x[solve] = -(plane.normal @ x + plane.offset) / plane.normal[solve]
            if model.classify(x) != fp.region:
                continue
            on.append(abs(float(phi(model, x))))
            off.append(abs(float(phi(model, x + 0.1 * plane.normal))))
        print(f"  |phi| on plane / off plane: {max(on) / np.median(off):.2e} "
              f"(the plane factors phi)")
    print()
