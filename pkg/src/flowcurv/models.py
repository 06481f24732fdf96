"""Model zoo and config loader for n-dimensional autonomous vector fields.

Built-in systems: the piecewise-linear Chua circuits in dimensions 3/4/5,
their cubic-nonlinearity variants in dimensions 4/5, a five-mode
magnetoconvection truncation, and a five-dimensional synthetic system with
known invariant manifolds ("gear5").  User systems load from a JSON config
with polynomial + pwl right-hand sides; the Jacobian is derived by
differentiating the expression tree, so scalar, batch and jet evaluation all
share one definition.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import expr as ex

__all__ = [
    "ModelDef", "FixedPoint", "ModelError",
    "pwl_k", "cubic_k", "fixed_points", "load_model", "get_model", "registry",
    "region_box",
]


class ModelError(ValueError):
    """Raised for invalid configs and unsupported model requests."""


def pwl_k(x1, a, b):
    """Chua's three-segment diode characteristic.

    b*x1 + a - b for x1 >= 1, a*x1 for |x1| <= 1, b*x1 - a + b for
    x1 <= -1.  The outer branches are evaluated anchored at the breakpoints
    (a + b*(x1 - 1), -a + b*(x1 + 1)), which makes the branch values agree
    exactly at |x1| = 1 for every (a, b); |x1| = 1 itself counts as the
    middle branch (the value is branch-independent there, the slope is not).
    """
    x1 = np.asarray(x1, dtype=float)
    out = np.where(x1 > 1.0, b * (x1 - 1.0) + a,
                   np.where(x1 < -1.0, b * (x1 + 1.0) - a, a * x1))
    return float(out) if out.ndim == 0 else out


def cubic_k(x1, c1, c2):
    """Smooth odd-symmetric diode characteristic c1*x1^3 + c2*x1."""
    return c1 * x1 ** 3 + c2 * x1


@dataclass(frozen=True)
class FixedPoint:
    """Equilibrium (or branch equilibrium) of a model.

    `region` records the branch the point was solved on.  `virtual` marks a
    PWL branch equilibrium that falls outside its own region; the published
    4-D Chua circuit values are of this kind, and every analysis that uses
    such a point pins evaluation to its branch.
    """

    location: np.ndarray
    region: object = None
    virtual: bool = False

    def __post_init__(self):
        object.__setattr__(self, "location", np.asarray(self.location, dtype=float))


@dataclass(frozen=True)
class ModelDef:
    """Immutable model definition; all evaluators are pure and re-entrant."""

    name: str
    dim: int
    params: dict
    rhs: object            # callable(state, region=None) -> list of components
    jacobian: object       # callable(state, region=None) -> (n, n) ndarray
    regions: object = None  # callable(state) -> branch label, or None
    rhs_exprs: tuple = ()
    jac_exprs: tuple = ()
    pwl_args: tuple = ()     # argument expression of each pwl node, for events
    fixed_point_guesses: tuple = ()
    odd_symmetric: bool = False
    slowfast_defaults: dict | None = field(default=None, compare=False)
    _fp_solver: object = field(default=None, compare=False, repr=False)

    def velocity(self, x, region=None):
        """rhs evaluated on a plain state vector, as an ndarray."""
        return np.asarray(self.rhs(np.asarray(x, dtype=float), region=region), dtype=float)

    def classify(self, x):
        return self.regions(x) if self.regions is not None else None


def _build_evaluators(dim, exprs):
    def rhs(state, region=None):
        return [e.eval(state, region) for e in exprs]

    jac_exprs = tuple(tuple(e.diff(j) for j in range(dim)) for e in exprs)

    def jacobian(state, region=None):
        state = np.asarray(state, dtype=float) if not isinstance(state, (list, tuple)) else state
        return np.array([[jac_exprs[i][j].eval(state, region) for j in range(dim)]
                         for i in range(dim)], dtype=float)

    return rhs, jacobian, jac_exprs


def _build_regions(pwl_nodes):
    if not pwl_nodes:
        return None
    args = [node.arg for node in pwl_nodes]
    if len(args) == 1:
        arg = args[0]

        def regions(x):
            return ex.classify_pwl(arg.eval(x))
    else:
        def regions(x):
            return tuple(ex.classify_pwl(a.eval(x)) for a in args)
    return regions


def _model_from_config(config, extras=None):
    required = {"name", "dim", "params", "rhs"}
    allowed = required | {"fixed_point_guesses"}
    unknown = set(config) - allowed
    if unknown:
        raise ModelError(f"unknown config keys: {sorted(unknown)}")
    missing = required - set(config)
    if missing:
        raise ModelError(f"missing config keys: {sorted(missing)}")

    name = config["name"]
    dim = config["dim"]
    if not isinstance(dim, int) or dim < 1:
        raise ModelError(f"dim must be a positive integer, got {dim!r}")
    params = dict(config["params"])
    for key, value in params.items():
        if not isinstance(value, (int, float)):
            raise ModelError(f"parameter {key!r} is not numeric")
        params[key] = float(value)
    rhs_strings = config["rhs"]
    if len(rhs_strings) != dim:
        raise ModelError(
            f"dimension mismatch: dim = {dim} but {len(rhs_strings)} rhs expressions")

    var_names = {f"x{i + 1}": i for i in range(dim)}
    exprs = []
    pwl_count = 0
    for text in rhs_strings:
        node, pwl_count = ex.parse_expression(text, var_names, params, pwl_offset=pwl_count)
        exprs.append(node)
    exprs = tuple(exprs)

    pwl_nodes = [p for e in exprs for p in e.pwl_nodes()]
    pwl_nodes.sort(key=lambda p: p.node_id)
    rhs, jacobian, jac_exprs = _build_evaluators(dim, exprs)

    guesses = tuple(np.asarray(g, dtype=float) for g in config.get("fixed_point_guesses", ()))
    for g in guesses:
        if g.shape != (dim,):
            raise ModelError(f"fixed-point guess {g} has wrong dimension")

    extras = extras or {}
    return ModelDef(
        name=name, dim=dim, params=params,
        rhs=rhs, jacobian=jacobian, regions=_build_regions(pwl_nodes),
        rhs_exprs=exprs, jac_exprs=jac_exprs,
        pwl_args=tuple(node.arg for node in pwl_nodes),
        fixed_point_guesses=guesses,
        **extras,
    )


# ---------------------------------------------------------------------------
# Built-in configs.  Parameter values are stored as the exact rational
# expressions evaluated in double precision, not re-typed decimals.
# ---------------------------------------------------------------------------

def _chua3_config(params):
    p = {"alpha": 9.0, "beta": 100.0 / 7.0, "a": -8.0 / 7.0, "b": -5.0 / 7.0}
    p.update(params)
    return {
        "name": "chua3-pwl", "dim": 3, "params": p,
        "rhs": [
            "alpha*(x2 - x1 - pwl(x1; a, b))",
            "x1 - x2 + x3",
            "-beta*x2",
        ],
    }


def _chua4_pwl_config(params):
    # The published eigenvector and hyperplane coefficients for this circuit
    # require alpha2 = +0.18 even though the defining text prints -0.18.
    p = {"alpha1": 2.1429, "alpha2": 0.18, "beta1": 0.0774, "beta2": 0.003,
         "a": -0.42, "b": 1.2}
    p.update(params)
    return {
        "name": "chua4-pwl", "dim": 4, "params": p,
        "rhs": [
            "alpha1*(x3 - pwl(x1; a, b))",
            "alpha2*x2 - x3 - x4",
            "beta1*(x2 - x1 - x3)",
            "beta2*x2",
        ],
    }


def _chua5_pwl_config(params):
    p = {"alpha1": 9.934, "alpha2": 1.0, "beta1": 14.47, "beta2": -406.5,
         "gamma1": -0.0152, "gamma2": 41000.0, "a": -1.246, "b": -0.6724}
    p.update(params)
    return {
        "name": "chua5-pwl", "dim": 5, "params": p,
        "rhs": [
            "alpha1*(x2 - x1 - pwl(x1; a, b))",
            "alpha2*x1 - x2 + x3",
            "beta1*(x4 - x2)",
            "beta2*(x3 + x5)",
            "gamma2*(x4 + gamma1*x5)",
        ],
    }


def _chua4_cubic_config(params):
    p = {"alpha1": 2.1429, "alpha2": 0.18, "beta1": 0.0774, "beta2": 0.003,
         "c1": 0.3937, "c2": -0.7235}
    p.update(params)
    return {
        "name": "chua4-cubic", "dim": 4, "params": p,
        "rhs": [
            "alpha1*(x3 - (c1*x1^3 + c2*x1))",
            "alpha2*x2 - x3 - x4",
            "beta1*(x2 - x1 - x3)",
            "beta2*x2",
        ],
    }


def _chua5_cubic_config(params):
    p = {"alpha1": 9.934, "alpha2": 1.0, "beta1": 14.47, "beta2": -406.5,
         "gamma1": -0.0152, "gamma2": 41000.0, "c1": 0.1068, "c2": -0.3056}
    p.update(params)
    return {
        "name": "chua5-cubic", "dim": 5, "params": p,
        "rhs": [
            "alpha1*(x2 - x1 - (c1*x1^3 + c2*x1))",
            "alpha2*x1 - x2 + x3",
            "beta1*(x4 - x2)",
            "beta2*(x3 + x5)",
            "gamma2*(x4 + gamma1*x5)",
        ],
    }


def _magneto_config(params):
    p = {"sigma": 1.0, "r": 14.47, "q": 5.0, "varsigma": 0.09683, "omega": 0.1081}
    extra = set(params) - set(p)
    if extra:
        raise ModelError(f"unknown magnetoconvection parameters: {sorted(extra)}")
    p.update(params)
    om, vs = p["omega"], p["varsigma"]
    # derived couplings; recomputed whenever the base parameters change
    p["cq"] = om * (3.0 - om) / (vs ** 2 * (4.0 - om))
    p["cm"] = om / (vs * (4.0 - om))
    p["c5"] = vs * (4.0 - om)
    return {
        "name": "magnetoconvection5", "dim": 5, "params": p,
        "rhs": [
            "sigma*(r*x2 - x1 - q*x4*(1 + cq*x5))",
            "x1 - x2 - x1*x3",
            "omega*(x1*x2 - x3)",
            "-varsigma*(x4 - x1) - cm*x1*x5",
            "-c5*(x5 - x1*x4)",
        ],
    }


def _gear_config(params):
    p = {"L": 1000.0, "beta1": 800.0, "beta2": 1200.0}
    p.update(params)
    return {
        "name": "gear5", "dim": 5, "params": p,
        "rhs": [
            "-x2",
            "x1",
            "L*(x1^2 + x2^2 - x3)",
            "beta1 + x4^2",
            "beta2 + x2^2",
        ],
    }


def region_box(model, region, center=None, halfwidth=2.0):
    """Axis-aligned sampling box inside one PWL region.

    The pwl-driven coordinate is clamped to the region's side of the
    breakpoints with a small safety margin; other coordinates span
    ``center +- halfwidth``.
    """
    center = np.zeros(model.dim) if center is None else np.asarray(center, dtype=float)
    lo = center - halfwidth
    hi = center + halfwidth
    if model.pwl_args and isinstance(model.pwl_args[0], ex.Var):
        i = model.pwl_args[0].index
        outer = max(2.5, abs(center[i]) + 1.0)
        if region == "pos":
            lo[i], hi[i] = 1.05, outer
        elif region == "neg":
            lo[i], hi[i] = -outer, -1.05
        else:
            lo[i], hi[i] = -0.95, 0.95
    return lo, hi


# ---------------------------------------------------------------------------
# Fixed points
# ---------------------------------------------------------------------------

_ULP_SCAN = 400


def _ulp_neighbors(x, count):
    """x and its `count` nearest floats on either side, nearest first."""
    yield x
    lo = hi = x
    for _ in range(count):
        lo = np.nextafter(lo, -math.inf)
        hi = np.nextafter(hi, math.inf)
        yield hi
        yield lo


def _rhs_is_zero(model, x, region):
    return all(v == 0.0 for v in model.rhs(np.asarray(x, dtype=float), region=region))


def _mirror(fp):
    loc = -fp.location
    region = {"pos": "neg", "neg": "pos", "mid": "mid"}.get(fp.region, fp.region)
    return FixedPoint(location=loc, region=region, virtual=fp.virtual)


def _chua3_fixed_points(model):
    p = model.params
    alpha, b = p["alpha"], p["b"]
    base = (p["b"] - p["a"]) / (1.0 + b)  # outer-branch x1 solving -(1+b)x1 = a-b
    pts = [FixedPoint(np.zeros(3), region="mid")]
    for x1 in _ulp_neighbors(base, _ULP_SCAN):
        cand = np.array([x1, 0.0, -x1])
        if _rhs_is_zero(model, cand, "pos"):
            fp = FixedPoint(cand, region="pos", virtual=abs(x1) < 1.0)
            pts += [fp, _mirror(fp)]
            break
    return pts


def _chua4_fixed_points(model):
    p = model.params
    b = p["b"]
    base = (p["b"] - p["a"]) / (1.0 + b)  # bx1 + a - b = -x1
    pts = [FixedPoint(np.zeros(4), region="mid")]
    for x1 in _ulp_neighbors(base, _ULP_SCAN):
        cand = np.array([x1, 0.0, -x1, x1])
        if _rhs_is_zero(model, cand, "pos"):
            fp = FixedPoint(cand, region="pos", virtual=abs(x1) < 1.0)
            pts += [fp, _mirror(fp)]
            break
    return pts


def _chua5_fixed_points(model):
    p = model.params
    b, g1 = p["b"], p["gamma1"]
    x3_base = (b - p["a"]) / (1.0 - b * (g1 - 1.0))
    pts = [FixedPoint(np.zeros(5), region="mid")]
    found = None
    for x3 in _ulp_neighbors(x3_base, _ULP_SCAN // 4):
        x5 = -x3
        x4 = -(g1 * x5)
        x2 = x4
        x1_base = x2 - x3
        for x1 in _ulp_neighbors(x1_base, _ULP_SCAN // 4):
            cand = np.array([x1, x2, x3, x4, x5])
            region = "neg" if x1 < 0 else "pos"
            if _rhs_is_zero(model, cand, region):
                found = FixedPoint(cand, region=region, virtual=abs(x1) < 1.0)
                break
        if found is not None:
            break
    if found is not None:
        pts += [found, _mirror(found)]
    return pts


def _chua4_cubic_fixed_points(model):
    p = model.params
    pts = [FixedPoint(np.zeros(4), region=None)]
    # x2 = 0, x3 = -x1, x4 = x1, with cubic_k(x1) = -x1
    disc = -(1.0 + p["c2"]) / p["c1"]
    if disc > 0:
        x1 = math.sqrt(disc)
        x1 = _newton_polish(model, np.array([x1, 0.0, -x1, x1]))
        pts += [FixedPoint(x1), FixedPoint(-x1)]
    return pts


def _chua5_cubic_fixed_points(model):
    p = model.params
    pts = [FixedPoint(np.zeros(5), region=None)]
    g1 = p["gamma1"]
    disc = (1.0 / (g1 - 1.0) - p["c2"]) / p["c1"]
    if disc > 0:
        x1 = math.sqrt(disc)
        x3 = x1 / (g1 - 1.0)
        guess = np.array([x1, x1 + x3, x3, x1 + x3, -x3])
        loc = _newton_polish(model, guess)
        pts += [FixedPoint(loc), FixedPoint(-loc)]
    return pts


def _magneto_fixed_points(model):
    # The nontrivial convection equilibria do not evaluate to exactly zero in
    # double arithmetic, so only the origin is returned by default; callers
    # wanting the convection branch pass it as a guess (see
    # magneto_equilibrium for the closed-form reduction).
    return [FixedPoint(np.zeros(5), region=None)]


def magneto_equilibrium(model):
    """Positive-branch convection equilibrium of the magnetoconvection model."""
    p = model.params
    r, q, vs, cq, cm = p["r"], p["q"], p["varsigma"], p["cq"], p["cm"]

    def g(x1):
        x2 = x1 / (1.0 + x1 * x1)
        x4 = vs * x1 / (vs + cm * x1 * x1)
        x5 = x1 * x4
        return -x1 + r * x2 - q * x4 * (1.0 + cq * x5)

    lo, hi = 1e-6, 50.0
    glo = g(lo)
    xs = np.linspace(lo, hi, 4000)
    bracket = None
    prev = glo
    for x in xs[1:]:
        cur = g(x)
        if prev * cur <= 0:
            bracket = (x - (hi - lo) / 3999.0, x)
            break
        prev = cur
    if bracket is None:
        raise ModelError("no nontrivial magnetoconvection equilibrium found")
    a_, b_ = bracket
    for _ in range(200):
        m = 0.5 * (a_ + b_)
        if g(a_) * g(m) <= 0:
            b_ = m
        else:
            a_ = m
    x1 = 0.5 * (a_ + b_)
    x2 = x1 / (1.0 + x1 * x1)
    x3 = x1 * x2
    x4 = vs * x1 / (vs + cm * x1 * x1)
    x5 = x1 * x4
    return _newton_polish(model, np.array([x1, x2, x3, x4, x5]))


def _newton_polish(model, x0, max_iter=60, tol=1e-14):
    x = np.asarray(x0, dtype=float).copy()
    region = model.classify(x)
    for _ in range(max_iter):
        f = model.velocity(x, region=region)
        scale = 1.0 + np.linalg.norm(x)
        if np.linalg.norm(f) <= tol * scale:
            break
        J = model.jacobian(x, region=region)
        try:
            step = np.linalg.solve(J, f)
        except np.linalg.LinAlgError:
            raise ModelError("singular Jacobian in fixed-point Newton iteration")
        damping = 1.0
        fn = np.linalg.norm(f)
        for _ in range(30):
            x_new = x - damping * step
            if np.linalg.norm(model.velocity(x_new, region=model.classify(x_new))) < fn:
                break
            damping *= 0.5
        x = x - damping * step
        region = model.classify(x)
    return x


def _generic_fixed_points(model):
    """Per-region affine solve for PWL systems, Newton from guesses otherwise."""
    pts = []
    if model.pwl_args and len(model.pwl_args) == 1:
        for region in ex.PWL_LABELS:
            c = model.velocity(np.zeros(model.dim), region=region)
            J = model.jacobian(np.zeros(model.dim), region=region)
            try:
                loc = np.linalg.solve(J, -c)
            except np.linalg.LinAlgError:
                continue
            resid = np.linalg.norm(model.velocity(loc, region=region))
            if resid > 1e-10 * (1.0 + np.linalg.norm(loc)):
                continue  # branch is not affine: fall through to Newton below
            actual = model.classify(loc)
            if actual != region:
                warnings.warn(
                    f"{model.name}: candidate {loc} solved on branch {region!r} "
                    f"classifies as {actual!r}; discarded as spurious")
                continue
            if all(abs(v) < 1e-13 for v in model.velocity(loc, region=region)):
                loc = _round_tiny(model, loc, region)
            pts.append(FixedPoint(loc, region=region))
    for guess in model.fixed_point_guesses:
        loc = _newton_polish(model, guess)
        resid = np.linalg.norm(model.velocity(loc, region=model.classify(loc)))
        if resid > 1e-10 * (1.0 + np.linalg.norm(loc)):
            warnings.warn(f"{model.name}: Newton iteration from {guess} did not converge")
            continue
        pts.append(FixedPoint(loc, region=model.classify(loc)))
    # dedupe
    out = []
    for fp in pts:
        if not any(np.allclose(fp.location, o.location, atol=1e-9) for o in out):
            out.append(fp)
    return out


def _round_tiny(model, loc, region):
    snapped = loc.copy()
    scale = 1.0 + np.linalg.norm(loc)
    snapped[np.abs(snapped) < 1e-13 * scale] = 0.0
    if np.linalg.norm(model.velocity(snapped, region=region)) <= \
            np.linalg.norm(model.velocity(loc, region=region)):
        return snapped
    return loc


_FP_SOLVERS = {
    "chua3-pwl": _chua3_fixed_points,
    "chua4-pwl": _chua4_fixed_points,
    "chua5-pwl": _chua5_fixed_points,
    "chua4-cubic": _chua4_cubic_fixed_points,
    "chua5-cubic": _chua5_cubic_fixed_points,
    "magnetoconvection5": _magneto_fixed_points,
    "gear5": lambda model: [],
}


def fixed_points(model, include_virtual=True):
    """All equilibria of `model`, canonically ordered.

    Built-in models use structured per-family solvers whose results evaluate
    to an exactly zero velocity in double arithmetic.  Branch equilibria that
    fall outside their own PWL region are returned with ``virtual=True``
    (drop them with ``include_virtual=False``).
    """
    solver = model._fp_solver or _FP_SOLVERS.get(model.name) or _generic_fixed_points
    pts = solver(model)
    if not include_virtual:
        pts = [fp for fp in pts if not fp.virtual]
    pts.sort(key=lambda fp: tuple(fp.location))
    return pts


# ---------------------------------------------------------------------------
# Registry / loader
# ---------------------------------------------------------------------------

_BUILTIN_BUILDERS = {
    "chua3-pwl": _chua3_config,
    "chua4-pwl": _chua4_pwl_config,
    "chua5-pwl": _chua5_pwl_config,
    "chua4-cubic": _chua4_cubic_config,
    "chua5-cubic": _chua5_cubic_config,
    "magnetoconvection5": _magneto_config,
    "gear5": _gear_config,
}

# Defaults used by the slow/fast residual analyses: which component is fast,
# the interpretation of the small parameter, and where to sample the slow
# variables.  The magnetoconvection box hugs its convection equilibrium: the
# stationarity of its Jacobian on f1 = 0 is only a near-equilibrium property.
_SLOWFAST_DEFAULTS = {
    "chua4-cubic": {"fast": (0,), "epsilon_param": ("alpha1", "inverse"),
                    "box": [(-2.0, 2.0)] * 3, "box_center": None},
    "chua5-cubic": {"fast": (0,), "epsilon_param": ("alpha1", "inverse"),
                    "box": [(-1.5, 1.5)] * 4, "box_center": None},
    "magnetoconvection5": {"fast": (0,), "epsilon_param": ("varsigma", "direct"),
                           "box": [(-0.02, 0.02)] * 4, "box_center": "equilibrium"},
}

_ODD_SYMMETRIC = {"chua3-pwl", "chua4-pwl", "chua5-pwl", "chua4-cubic", "chua5-cubic"}


def registry():
    """Names of the built-in models."""
    return sorted(_BUILTIN_BUILDERS)


def get_model(name, **param_overrides):
    """Build a built-in model, optionally overriding parameters."""
    if name not in _BUILTIN_BUILDERS:
        raise ModelError(f"unknown model {name!r}; known: {', '.join(registry())}")
    config = _BUILTIN_BUILDERS[name](param_overrides)
    extras = {
        "odd_symmetric": name in _ODD_SYMMETRIC,
        "slowfast_defaults": _SLOWFAST_DEFAULTS.get(name),
    }
    return _model_from_config(config, extras=extras)


def load_model(source):
    """Load a ModelDef from a registry name, JSON text, config dict, or path."""
    if isinstance(source, dict):
        return _model_from_config(source)
    if isinstance(source, str):
        if source in _BUILTIN_BUILDERS:
            return get_model(source)
        stripped = source.lstrip()
        if stripped.startswith("{"):
            return _model_from_config(json.loads(source))
        with open(source, "r", encoding="utf-8") as fh:
            return _model_from_config(json.load(fh))
    if hasattr(source, "read"):
        return _model_from_config(json.load(source))
    raise ModelError(f"cannot load model from {type(source).__name__}")
