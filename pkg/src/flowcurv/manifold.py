"""Flow-curvature manifold machinery.

The slow invariant manifold of an n-dimensional flow is carried by the zero
set of phi = det(d_1, ..., d_n), the determinant of the first n trajectory
derivatives.  Its Lie derivative along the flow is the same determinant with
the last column advanced one order, and flow-invariance is certified in the
Darboux sense through the trace cofactor: wherever the Jacobian is
stationary, L_V phi = Tr(J) phi holds identically.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import expr as ex
from .geometry import det_scaled
from .jets import derivative_stack

__all__ = [
    "ManifoldSample", "ZeroSet", "SlowFastSplit", "GspSummary", "FactorReport",
    "phi", "lie_phi", "phi_scaled", "darboux_residual", "manifold_sample",
    "zero_set_grid", "zero_crossings_on_trajectory",
    "default_split", "gsp_order0_residual", "factor_check",
]


def _det(matrix):
    # partial-pivot LU with exact power-of-two column equilibration
    return det_scaled(matrix)


def phi(model, x, region=None):
    """Curvature-of-the-flow determinant det(d_1, ..., d_n) at `x`.

    Accepts a single state of shape (n,) or a batch of shape (n, npts).
    Total: degenerate stacks simply give phi = 0, which is the signal of
    interest.
    """
    stack = derivative_stack(model, x, model.dim, region=region)
    return _det(stack.matrix())


def lie_phi(model, x, region=None):
    """Lie derivative of phi along the flow: the determinant with X^(n+1) last."""
    n = model.dim
    stack = derivative_stack(model, x, n + 1, region=region)
    return _det(stack.matrix(count=n, replace_last_with=n + 1))


def phi_scaled(model, x, region=None):
    """|phi| normalized by the product of derivative norms (Hadamard scale).

    Dimensionless in [0, 1]; the natural "how zero is phi here" measure when
    raw determinants span hundreds of orders of magnitude across models.
    """
    stack = derivative_stack(model, x, model.dim, region=region)
    value = np.abs(_det(stack.matrix()))
    norms = np.linalg.norm(stack.derivs, axis=1)  # (n,) or (n, npts)
    scale = np.prod(norms, axis=0)
    return np.where(scale > 0.0, value / np.where(scale > 0.0, scale, 1.0), 0.0)[()]


def darboux_residual(model, x, region=None):
    """|L_V phi - Tr(J) phi| / (1 + |Tr(J) phi|).

    Near zero exactly where the Jacobian is stationary along the flow: all
    of a PWL region, any linear system, and the vicinity of a cubic model's
    singular approximation.  The stack and determinants run in extended
    precision: the identity's cancellation sits far below double rounding
    when the derivative columns are stiff and nearly parallel.
    """
    x = np.asarray(x, dtype=float)
    n = model.dim
    stack = derivative_stack(model, x.astype(np.longdouble), n + 1, region=region)
    p = _det(stack.matrix(count=n))
    lie = _det(stack.matrix(count=n, replace_last_with=n + 1))
    if x.ndim == 1:
        tr = np.trace(model.jacobian(x, region=stack.region))
    else:
        tr = np.array([np.trace(model.jacobian(x[:, k], region=None))
                       for k in range(x.shape[1])])
    return np.abs(lie - tr * p) / (1.0 + np.abs(tr * p))


@dataclass(frozen=True)
class ManifoldSample:
    """phi, its Lie derivative, and the Darboux cofactor residual at a point."""

    point: np.ndarray
    phi: float
    lie: float
    cofactor_residual: float
    region: object = None


def manifold_sample(model, x, region=None):
    x = np.asarray(x, dtype=float)
    n = model.dim
    stack = derivative_stack(model, x.astype(np.longdouble), n + 1, region=region)
    p = float(_det(stack.matrix(count=n)))
    lie = float(_det(stack.matrix(count=n, replace_last_with=n + 1)))
    tr = float(np.trace(model.jacobian(x, region=stack.region)))
    resid = abs(lie - tr * p) / (1.0 + abs(tr * p))
    return ManifoldSample(point=x, phi=p, lie=lie, cofactor_residual=resid,
                          region=stack.region)


@dataclass(frozen=True)
class ZeroSet:
    """Refined phi = 0 points with their provenance.

    Every point satisfies |phi| <= tol_abs + tol_rel * scale with scale the
    larger |phi| of its bracketing pair, except where bisection hit the
    floating-point width of the bracket first (phi is then sign-changing
    between adjacent floats).
    """

    points: np.ndarray              # (npts, n)
    phi_values: np.ndarray          # (npts,)
    regions: tuple = ()
    provenance: str = "grid-edge"
    degenerate: bool = False
    n_nonfinite: int = 0
    metadata: dict = field(default_factory=dict)

    def __len__(self):
        return self.points.shape[0]


def _bisect_edge(eval_phi, p_lo, p_hi, f_lo, f_hi, tol_abs, tol_rel, max_iter=90):
    """Refine a sign change of phi along the segment [p_lo, p_hi]."""
    scale = max(abs(f_lo), abs(f_hi))
    target = tol_abs + tol_rel * scale
    lo, hi = 0.0, 1.0
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        point = p_lo + mid * (p_hi - p_lo)
        f_mid = eval_phi(point)
        if not np.isfinite(f_mid):
            return None, None
        if abs(f_mid) <= target:
            return point, f_mid
        if (f_mid > 0) == (f_lo > 0):
            lo = mid
        else:
            hi = mid
        if hi - lo <= np.finfo(float).eps:
            break
    point = p_lo + 0.5 * (lo + hi) * (p_hi - p_lo)
    return point, eval_phi(point)


def zero_set_grid(model, axes, slice_values=None, tol_abs=0.0, tol_rel=1e-9,
                  chunk=4096):
    """Extract the phi = 0 point cloud over a coordinate-aligned grid.

    `axes` maps 2 or 3 coordinate indices to (lo, hi, count) ranges; the
    remaining coordinates are fixed at `slice_values` (default 0).  Grid
    edges whose endpoints carry opposite phi signs are bisected until |phi|
    drops below tol_abs + tol_rel * (bracket scale).  The result is a point
    cloud for plotting, not a meshed surface.
    """
    n = model.dim
    axis_items = sorted(axes.items())
    if len(axis_items) not in (2, 3):
        raise ValueError("grid must span 2 or 3 coordinates")
    slice_values = dict(slice_values or {})
    axis_set = {i for i, _ in axis_items}
    if axis_set & set(slice_values):
        raise ValueError("a coordinate cannot be both a grid axis and a slice value")
    if not (axis_set | set(slice_values)) <= set(range(n)):
        raise ValueError("axis or slice index out of range")
    for i in set(range(n)) - axis_set - set(slice_values):
        slice_values[i] = 0.0  # documented default slice for >3-D models
    for idx, (lo, hi, count) in axis_items:
        if count < 2:
            raise ValueError(f"axis x{idx + 1} needs at least 2 nodes")
        if not (np.isfinite(lo) and np.isfinite(hi)):
            raise ValueError("grid ranges must be finite")

    grids = [np.linspace(lo, hi, count) for _, (lo, hi, count) in axis_items]
    mesh = np.meshgrid(*grids, indexing="ij")
    shape = mesh[0].shape
    npts = mesh[0].size

    states = np.empty((n, npts))
    for i in range(n):
        states[i] = slice_values.get(i, 0.0)
    for (idx, _), m in zip(axis_items, mesh):
        states[idx] = m.ravel()

    values = np.empty(npts)
    for start in range(0, npts, chunk):
        sl = slice(start, min(start + chunk, npts))
        values[sl] = phi(model, states[:, sl])
    finite = np.isfinite(values)
    n_nonfinite = int(npts - finite.sum())
    values_grid = values.reshape(shape)
    finite_grid = finite.reshape(shape)

    def eval_scalar(point):
        return float(phi(model, point))

    points, phis = [], []
    ndim_grid = len(shape)
    for axis in range(ndim_grid):
        sl_lo = [slice(None)] * ndim_grid
        sl_hi = [slice(None)] * ndim_grid
        sl_lo[axis] = slice(0, -1)
        sl_hi[axis] = slice(1, None)
        f_lo = values_grid[tuple(sl_lo)]
        f_hi = values_grid[tuple(sl_hi)]
        ok = finite_grid[tuple(sl_lo)] & finite_grid[tuple(sl_hi)]
        crossing = ok & (np.sign(f_lo) * np.sign(f_hi) < 0)
        for flat in np.flatnonzero(crossing):
            idx_lo = np.unravel_index(flat, crossing.shape)
            idx_hi = list(idx_lo)
            idx_hi[axis] += 1
            idx_hi = tuple(idx_hi)
            p_lo = np.array([slice_values.get(i, 0.0) for i in range(n)])
            p_hi = p_lo.copy()
            for k, (coord, _) in enumerate(axis_items):
                p_lo[coord] = grids[k][idx_lo[k]]
                p_hi[coord] = grids[k][idx_hi[k]]
            point, f_mid = _bisect_edge(eval_scalar, p_lo, p_hi,
                                        values_grid[idx_lo], values_grid[idx_hi],
                                        tol_abs, tol_rel)
            if point is not None:
                points.append(point)
                phis.append(f_mid)

    if points:
        order = sorted(range(len(points)), key=lambda k: tuple(points[k]))
        pts = np.array([points[k] for k in order])
        pvals = np.array([phis[k] for k in order])
    else:
        pts = np.empty((0, n))
        pvals = np.empty(0)
    regions = tuple(model.classify(p) for p in pts) if model.regions else ()
    return ZeroSet(points=pts, phi_values=pvals, regions=regions,
                   provenance="grid-edge", n_nonfinite=n_nonfinite,
                   metadata={"axes": dict(axes), "slice": dict(slice_values)})


def zero_crossings_on_trajectory(model, traj, time_tol=1e-10,
                                 degenerate_rtol=1e-12):
    """States where phi changes sign along an integrated trajectory.

    Each bracketed sign change is refined by bisection in time, re-running
    the integrator over the shrinking subinterval (the trajectory stores no
    interpolant).  A trajectory with phi ~ 0 at every sample (for instance a
    fixed point) returns an empty, degenerate-flagged set.
    """
    from .integrate import integrate  # local import: integrate pulls no manifold code

    times = np.asarray(traj.times)
    states = np.asarray(traj.states)
    if len(times) < 2:
        return ZeroSet(points=np.empty((0, model.dim)), phi_values=np.empty(0),
                       provenance="trajectory", degenerate=True)
    values = phi(model, states.T)
    scale = np.max(np.abs(values))
    if scale == 0.0 or np.all(np.abs(values) <= degenerate_rtol * scale):
        return ZeroSet(points=np.empty((0, model.dim)), phi_values=np.empty(0),
                       provenance="trajectory", degenerate=True)

    points, phis, regions, straddle = [], [], [], []
    for k in range(len(times) - 1):
        f0, f1 = values[k], values[k + 1]
        if not (np.isfinite(f0) and np.isfinite(f1)) or np.sign(f0) * np.sign(f1) >= 0:
            continue
        straddles = False
        if model.regions is not None:
            r0, r1 = model.classify(states[k]), model.classify(states[k + 1])
            if r0 != r1:
                straddles = True
                warnings.warn(
                    f"phi sign change between t={times[k]:.6g} and t={times[k+1]:.6g} "
                    f"straddles PWL regions {r0!r}/{r1!r}; phi is discontinuous there")
        t_lo, t_hi = times[k], times[k + 1]
        x_lo = states[k]
        s_lo = np.sign(f0)
        while t_hi - t_lo > time_tol:
            t_mid = 0.5 * (t_lo + t_hi)
            sub = integrate(model, x_lo, t_mid - t_lo, rel_tol=1e-12, abs_tol=1e-14)
            x_mid = sub.states[-1]
            f_mid = float(phi(model, x_mid))
            if np.sign(f_mid) == s_lo and f_mid != 0.0:
                t_lo, x_lo = t_mid, x_mid
            else:
                t_hi = t_mid
        points.append(x_lo)
        phis.append(float(phi(model, x_lo)))
        straddle.append(straddles)
        if model.regions is not None:
            regions.append(model.classify(x_lo))

    pts = np.array(points) if points else np.empty((0, model.dim))
    return ZeroSet(points=pts, phi_values=np.array(phis), regions=tuple(regions),
                   provenance="trajectory",
                   metadata={"straddle": tuple(straddle)})


# ---------------------------------------------------------------------------
# Slow/fast (order-eps^0) residuals
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SlowFastSplit:
    """Fast components, small parameter, and slow-variable sampling box."""

    fast_indices: tuple
    epsilon: float
    box: tuple              # one (lo, hi) per slow coordinate
    box_center: np.ndarray | None = None

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")


def default_split(model):
    """SlowFastSplit from the model's registered defaults."""
    d = model.slowfast_defaults
    if d is None:
        raise ValueError(f"model {model.name!r} has no slow/fast defaults")
    pname, mode = d["epsilon_param"]
    eps = model.params[pname]
    if mode == "inverse":
        eps = 1.0 / eps
    center = None
    if d.get("box_center") == "equilibrium":
        from .models import magneto_equilibrium
        eq = magneto_equilibrium(model)
        slow = [i for i in range(model.dim) if i not in d["fast"]]
        center = eq[slow]
    return SlowFastSplit(fast_indices=tuple(d["fast"]), epsilon=float(eps),
                         box=tuple(tuple(b) for b in d["box"]), box_center=center)


def _solve_fast(model, split, slow_values, seeds):
    """Solve the fast components' equations for the fast coordinates."""
    fast = list(split.fast_indices)
    slow = [i for i in range(model.dim) if i not in fast]
    for seed in seeds:
        x = np.zeros(model.dim)
        x[slow] = slow_values
        x[fast] = seed
        ok = False
        for _ in range(80):
            f = np.asarray(model.velocity(x))[fast]
            if np.linalg.norm(f) <= 1e-12 * (1.0 + np.linalg.norm(x)):
                ok = True
                break
            J = model.jacobian(x)[np.ix_(fast, fast)]
            try:
                step = np.linalg.solve(J, f)
            except np.linalg.LinAlgError:
                break
            limit = 1.0 + np.linalg.norm(x[fast])
            norm = np.linalg.norm(step)
            if norm > limit:
                step *= limit / norm
            x[fast] = x[fast] - step
        if ok:
            return x
    return None


@dataclass(frozen=True)
class GspSummary:
    n_requested: int
    n_solved: int
    n_skipped: int
    max_scaled: float
    mean_scaled: float
    epsilon: float


def _grad_phi(model, x):
    n = model.dim
    g = np.empty(n)
    for i in range(n):
        h = 1e-6 * (1.0 + abs(x[i]))
        xp = x.copy(); xp[i] += h
        xm = x.copy(); xm[i] -= h
        g[i] = (float(phi(model, xp)) - float(phi(model, xm))) / (2.0 * h)
    return g


def gsp_order0_residual(model, split, samples, seed=0):
    """|phi| on the singular approximation, scaled by phi's local gradient.

    Samples the slow variables in the split's box, solves the fast equations
    f(x, z, 0) = 0 for the fast components, and reports the max and mean of
    |phi| / |grad phi| there (a distance-to-zero-set estimate).  The
    order-eps^0 claim is that these vanish as the split stiffens; rebuild
    the model with a scaled stiffness parameter to observe the trend.
    """
    if samples == 0:
        return GspSummary(0, 0, 0, 0.0, 0.0, split.epsilon)
    rng = np.random.default_rng(seed)
    fast = list(split.fast_indices)
    center = split.box_center
    residuals = []
    skipped = 0
    for _ in range(samples):
        slow_values = np.array([rng.uniform(lo, hi) for lo, hi in split.box])
        if center is not None:
            slow_values = center + slow_values
        seeds = [np.zeros(len(fast))] + [rng.uniform(-3, 3, len(fast)) for _ in range(4)]
        x = _solve_fast(model, split, slow_values, seeds)
        if x is None:
            skipped += 1
            continue
        value = abs(float(phi(model, x)))
        grad = np.linalg.norm(_grad_phi(model, x))
        residuals.append(value / grad if grad > 0 else 0.0)
    if not residuals:
        return GspSummary(samples, 0, skipped, float("nan"), float("nan"), split.epsilon)
    arr = np.array(residuals)
    return GspSummary(samples, len(arr), skipped, float(arr.max()),
                      float(arr.mean()), split.epsilon)


# ---------------------------------------------------------------------------
# Darboux factor / first-integral detection
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FactorReport:
    """Outcome of testing a candidate Darboux factor against phi and L_V."""

    factor: str
    zero_set_count: int
    phi_scaled_max: float | None     # max scaled |phi| on the factor's zero set
    cofactor_coeffs: np.ndarray      # affine + quadratic basis coefficients
    cofactor_basis: tuple
    cofactor_fit_residual: float     # relative RMS of the polynomial fit
    lie_factor_max: float            # max |L_V factor| over the box (first-integral test)
    first_integral: bool
    invariant: bool


def _poly_basis(n):
    names = ["1"] + [f"x{i + 1}" for i in range(n)]
    pairs = [(i, j) for i in range(n) for j in range(i, n)]
    names += [f"x{i + 1}*x{j + 1}" for i, j in pairs]
    return names, pairs


def factor_check(model, factor, box, samples=200, seed=0,
                 phi_tol=1e-6, fit_tol=1e-6):
    """Test whether `factor` (an expression string) is a Darboux factor.

    Verifies that phi vanishes (in the Hadamard-scaled sense) on the
    factor's sampled zero set, and estimates the cofactor K in
    L_V(factor) = K * factor by pointwise division away from the zero set,
    fitting an affine-plus-quadratic polynomial ansatz.  K identically zero
    flags a first integral.
    """
    n = model.dim
    var_names = {f"x{i + 1}": i for i in range(n)}
    node, _ = ex.parse_expression(factor, var_names, model.params)
    grads = [node.diff(i) for i in range(n)]

    def f_value(x):
        return float(node.eval(x))

    def f_grad(x):
        return np.array([g.eval(x) for g in grads], dtype=float)

    def lie_factor(x):
        # exact summation: a first integral must cancel to a true zero
        v = model.velocity(x)
        return math.fsum(g.eval(x) * v[i] for i, g in enumerate(grads))

    rng = np.random.default_rng(seed)
    box = [tuple(b) for b in box]
    if len(box) != n:
        raise ValueError("box must give one (lo, hi) range per coordinate")

    def sample_point():
        return np.array([rng.uniform(lo, hi) for lo, hi in box])

    # sample the zero set by gradient-flow Newton from random box points
    zero_points = []
    for _ in range(samples):
        x = sample_point()
        ok = False
        for _ in range(80):
            v = f_value(x)
            scale = 1.0 + abs(v)
            g = f_grad(x)
            gnorm2 = g @ g
            if gnorm2 == 0.0:
                break
            x = x - v * g / gnorm2
            if abs(f_value(x)) <= 1e-12 * scale:
                ok = True
                break
        if ok and np.isfinite(x).all():
            zero_points.append(x)

    phi_scaled_max = None
    if zero_points:
        vals = [float(phi_scaled(model, p)) for p in zero_points]
        phi_scaled_max = max(vals)

    # cofactor estimate K = L_V(factor)/factor away from the zero set
    box_values, box_points = [], []
    for _ in range(max(samples, 50)):
        x = sample_point()
        box_points.append(x)
        box_values.append(f_value(x))
    box_values = np.array(box_values)
    factor_scale = np.max(np.abs(box_values))
    if factor_scale == 0.0:
        raise ValueError("factor is identically zero on the sampling box")
    lie_values = np.array([lie_factor(p) for p in box_points])
    lie_max = float(np.max(np.abs(lie_values)))
    vel_scale = max(np.linalg.norm(model.velocity(p)) for p in box_points)
    first_integral = lie_max <= 1e-9 * (1.0 + factor_scale) * (1.0 + vel_scale)

    keep = np.abs(box_values) >= 0.05 * factor_scale
    pts = np.array(box_points)[keep]
    K = lie_values[keep] / box_values[keep]
    basis_names, pairs = _poly_basis(n)
    A = np.column_stack(
        [np.ones(len(pts))] + [pts[:, i] for i in range(n)]
        + [pts[:, i] * pts[:, j] for i, j in pairs])
    coeffs, *_ = np.linalg.lstsq(A, K, rcond=None)
    fitted = A @ coeffs
    k_scale = max(1.0, float(np.max(np.abs(K))))
    fit_residual = float(np.sqrt(np.mean((K - fitted) ** 2))) / k_scale

    invariant = fit_residual <= fit_tol and (
        phi_scaled_max is None or phi_scaled_max <= phi_tol)
    return FactorReport(
        factor=factor, zero_set_count=len(zero_points),
        phi_scaled_max=phi_scaled_max, cofactor_coeffs=coeffs,
        cofactor_basis=tuple(basis_names), cofactor_fit_residual=fit_residual,
        lie_factor_max=lie_max, first_integral=first_integral,
        invariant=invariant or first_integral)
