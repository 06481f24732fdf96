"""Command-line front end.

Commands: list-models, integrate, phi-scan, manifold, hyperplane, curvature,
verify.  All numeric output uses shortest round-trip decimals, so identical
configurations produce byte-identical files.  Exit codes: 0 success, 1
configuration error, 2 numerical failure (diagnostic on stderr).
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import geometry, manifold, models, spectral, verify
from .integrate import IntegrationError, integrate
from .ioutil import fmt, write_table
from .jets import derivative_stack

__all__ = ["main"]


class ConfigError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on usage errors; config errors are exit 1 here
    def error(self, message):
        self.exit(1, f"{self.prog}: error: {message}\n")


def _threads():
    try:
        return max(1, int(os.environ.get("FLOWCURV_THREADS", "1")))
    except ValueError:
        return 1


def _load(name_or_path):
    try:
        return models.load_model(name_or_path)
    except (models.ModelError, OSError, ValueError) as err:
        raise ConfigError(str(err)) from err


def _parse_vector(text, dim, what="--x0"):
    parts = [p for p in text.split(",") if p.strip()]
    if len(parts) != dim:
        raise ConfigError(f"{what} needs {dim} comma-separated values, got {len(parts)}")
    try:
        return np.array([float(p) for p in parts])
    except ValueError as err:
        raise ConfigError(f"bad {what}: {err}") from err


def _axis_index(token, dim):
    if not token.startswith("x"):
        raise ConfigError(f"coordinate names are x1..x{dim}, got {token!r}")
    try:
        idx = int(token[1:]) - 1
    except ValueError:
        raise ConfigError(f"bad coordinate name {token!r}")
    if not 0 <= idx < dim:
        raise ConfigError(f"{token} out of range for a {dim}-dimensional model")
    return idx


def _parse_grid(text, dim):
    """x1=-4:4:200,x2=-1:1:200 -> {0: (-4.0, 4.0, 200), 1: (...)}"""
    axes = {}
    for part in text.split(","):
        if not part.strip():
            continue
        try:
            name, spec = part.split("=")
            lo, hi, count = spec.split(":")
            axes[_axis_index(name.strip(), dim)] = (float(lo), float(hi), int(count))
        except ConfigError:
            raise
        except ValueError as err:
            raise ConfigError(f"bad grid component {part!r}: expected x1=lo:hi:count") from err
    if len(axes) not in (2, 3):
        raise ConfigError("--grid must span 2 or 3 coordinates")
    return axes


def _parse_slice(text, dim, model, axes):
    """x3=fp,x4=0 -> {2: <fp coordinate>, 3: 0.0}; fp = nearest fixed point."""
    if not text:
        return {}
    raw = {}
    for part in text.split(","):
        if not part.strip():
            continue
        try:
            name, value = part.split("=")
        except ValueError as err:
            raise ConfigError(f"bad slice component {part!r}") from err
        raw[_axis_index(name.strip(), dim)] = value.strip()
    resolved = {}
    fp_needed = [i for i, v in raw.items() if v == "fp"]
    if fp_needed:
        fps = models.fixed_points(model)
        if not fps:
            raise ConfigError("slice value 'fp' requested but the model has no fixed points")
        center = np.zeros(dim)
        for i, (lo, hi, _) in axes.items():
            center[i] = 0.5 * (lo + hi)
        grid_idx = sorted(axes)
        nearest = min(fps, key=lambda fp: float(
            np.linalg.norm(fp.location[grid_idx] - center[grid_idx])))
        for i in fp_needed:
            resolved[i] = float(nearest.location[i])
    for i, v in raw.items():
        if v != "fp":
            try:
                resolved[i] = float(v)
            except ValueError as err:
                raise ConfigError(f"bad slice value {v!r}") from err
    return resolved


def _region_label(model, x):
    label = model.classify(x)
    if label is None:
        return ""
    return label if isinstance(label, str) else "/".join(label)


# -- commands -----------------------------------------------------------------

def _cmd_list_models(args):
    for name in models.registry():
        print(name)
    return 0


def _cmd_integrate(args):
    model = _load(args.model)
    x0 = _parse_vector(args.x0, model.dim)
    traj = integrate(model, x0, args.t_end, rel_tol=args.rel_tol, abs_tol=args.abs_tol)
    header = ["t"] + [f"x{i + 1}" for i in range(model.dim)] + ["region"]
    rows = [[t] + list(x) + [_region_label(model, x)]
            for t, x in zip(traj.times, traj.states)]
    write_table(args.out, header, rows, args.format)
    print(f"{len(traj)} samples, {len(traj.events)} region crossings -> {args.out}")
    return 0


def _scan_states(model, states):
    """ManifoldSample columns for a batch of states, chunked and thread-capped."""
    from concurrent.futures import ThreadPoolExecutor

    n = model.dim
    npts = states.shape[1]
    chunklen = 2048
    chunks = [slice(s, min(s + chunklen, npts)) for s in range(0, npts, chunklen)]

    def do(sl):
        block = states[:, sl]
        stack = derivative_stack(model, block, n + 1)
        p = geometry.det_scaled(stack.matrix(count=n))
        lie = geometry.det_scaled(stack.matrix(count=n, replace_last_with=n + 1))
        tr = np.zeros(block.shape[1])
        for i in range(n):
            tr = tr + np.broadcast_to(
                np.asarray(model.jac_exprs[i][i].eval(block), dtype=float),
                (block.shape[1],))
        resid = np.abs(lie - tr * p) / (1.0 + np.abs(tr * p))
        return p, lie, resid

    workers = _threads()
    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(do, chunks))
    else:
        parts = [do(sl) for sl in chunks]
    p = np.concatenate([a for a, _, _ in parts])
    lie = np.concatenate([b for _, b, _ in parts])
    resid = np.concatenate([c for _, _, c in parts])
    return p, lie, resid


def _cmd_phi_scan(args):
    model = _load(args.model)
    if bool(args.grid) == bool(args.x0):
        raise ConfigError("phi-scan needs exactly one of --grid or --x0/--t-end")
    if args.grid:
        axes = _parse_grid(args.grid, model.dim)
        slices = _parse_slice(args.slice, model.dim, model, axes)
        grids = [np.linspace(lo, hi, c) for _, (lo, hi, c) in sorted(axes.items())]
        mesh = np.meshgrid(*grids, indexing="ij")
        states = np.empty((model.dim, mesh[0].size))
        for i in range(model.dim):
            states[i] = slices.get(i, 0.0)
        for (idx, _), m in zip(sorted(axes.items()), mesh):
            states[idx] = m.ravel()
    else:
        if args.t_end is None:
            raise ConfigError("--x0 requires --t-end")
        x0 = _parse_vector(args.x0, model.dim)
        traj = integrate(model, x0, args.t_end, rel_tol=args.rel_tol,
                         abs_tol=args.abs_tol)
        states = traj.states.T
    p, lie, resid = _scan_states(model, states)
    header = [f"x{i + 1}" for i in range(model.dim)] + ["phi", "lie", "cofactor_residual"]
    rows = [list(states[:, k]) + [p[k], lie[k], resid[k]]
            for k in range(states.shape[1])]
    write_table(args.out, header, rows, args.format)
    print(f"{len(rows)} samples -> {args.out}")
    return 0


def _cmd_manifold(args):
    model = _load(args.model)
    axes = _parse_grid(args.grid, model.dim)
    slices = _parse_slice(args.slice, model.dim, model, axes)
    zs = manifold.zero_set_grid(model, axes, slices, tol_rel=args.tol_rel)
    header = [f"x{i + 1}" for i in range(model.dim)] + ["phi", "region"]
    rows = []
    for k in range(len(zs)):
        region = zs.regions[k] if zs.regions else ""
        if not isinstance(region, str):
            region = "/".join(region)
        rows.append(list(zs.points[k]) + [zs.phi_values[k], region])
    write_table(args.out, header, rows, args.format)
    print(f"{len(rows)} manifold points ({zs.n_nonfinite} non-finite nodes) -> {args.out}")
    return 0


def _cmd_hyperplane(args):
    model = _load(args.model)
    fps = [fp for fp in models.fixed_points(model) if fp.region in ("pos", "neg")] \
        or models.fixed_points(model)
    if not fps:
        raise ConfigError(f"model {model.name!r} has no fixed points")
    style = "last1" if model.dim == 3 else "lambda-ty"
    rows = []
    for fp in fps:
        plane = spectral.tls_hyperplane(model, fp)
        loc = ", ".join(fmt(v) for v in fp.location)
        lam = plane.fast_eigenvalue
        lam_s = fmt(lam.real) if lam.imag == 0 else f"{fmt(lam.real)} {'+' if lam.imag >= 0 else '-'} {fmt(abs(lam.imag))}i"
        print(f"fixed point ({loc})  region={fp.region}"
              f"{' [virtual]' if fp.virtual else ''}")
        print(f"  fast eigenvalue lambda_1 = {lam_s}")
        if plane.eigenvalue != lam.real or lam.imag != 0:
            print(f"  plane eigenvalue (dominant real) = {fmt(plane.eigenvalue)}")
        print(f"  Pi(X) = {plane.equation(style)}")
        rows.append(plane.csv_row())
    if args.out:
        header = [f"c{i + 1}" for i in range(model.dim)] + ["offset"]
        write_table(args.out, header, rows, args.format)
        print(f"{len(rows)} planes -> {args.out}")
    return 0


def _cmd_curvature(args):
    model = _load(args.model)
    x0 = _parse_vector(args.x0, model.dim)
    traj = integrate(model, x0, args.t_end, rel_tol=args.rel_tol, abs_tol=args.abs_tol)
    header = ["t"] + [f"kappa{i + 1}" for i in range(model.dim - 1)]
    rows = []
    for t, x in zip(traj.times, traj.states):
        try:
            cs = geometry.curvatures(derivative_stack(model, x, model.dim))
            rows.append([t] + list(cs.kappas))
        except geometry.DegenerateStackError:
            rows.append([t] + [float("nan")] * (model.dim - 1))
    write_table(args.out, header, rows, args.format)
    print(f"{len(rows)} samples -> {args.out}")
    return 0


def _cmd_verify(args):
    names = models.registry() if args.all else [args.model]
    if names == [None]:
        raise ConfigError("verify needs --model NAME or --all")
    failed = 0
    for name in names:
        model = _load(name)
        results = verify.verify_model(model, seed=args.seed)
        print(f"== {name}")
        for r in results:
            status = "PASS" if r.passed else "FAIL"
            failed += not r.passed
            note = f"  ({r.note})" if r.note else ""
            print(f"  [{status}] {r.name}: residual {r.residual:.3e} "
                  f"vs {r.threshold:.1e}{note}")
    if failed:
        print(f"{failed} check(s) failed", file=sys.stderr)
        return 2
    return 0


def build_parser():
    parser = _Parser(prog="flowcurv",
                     description="Slow invariant manifolds via curvature of the flow")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("list-models", help="print the built-in model registry") \
        .set_defaults(func=_cmd_list_models)

    def add_common(p, needs_out=True):
        p.add_argument("--model", "-m", required=True,
                       help="registry name or model config path")
        if needs_out:
            p.add_argument("--out", "-o", required=True, help="output file")
            p.add_argument("--format", choices=("csv", "json"), default="csv")

    p = sub.add_parser("integrate", help="integrate a trajectory to CSV")
    add_common(p)
    p.add_argument("--x0", required=True, help="initial state, comma separated")
    p.add_argument("--t-end", type=float, required=True)
    p.add_argument("--rel-tol", type=float, default=1e-9)
    p.add_argument("--abs-tol", type=float, default=1e-12)
    p.set_defaults(func=_cmd_integrate)

    p = sub.add_parser("phi-scan", help="phi/Lie/cofactor samples on a grid or trajectory")
    add_common(p)
    p.add_argument("--grid", help="grid spec, e.g. x1=-4:4:100,x2=-1:1:100")
    p.add_argument("--slice", default="", help="fixed coordinates, e.g. x3=fp,x4=0")
    p.add_argument("--x0", help="trajectory scan: initial state")
    p.add_argument("--t-end", type=float)
    p.add_argument("--rel-tol", type=float, default=1e-9)
    p.add_argument("--abs-tol", type=float, default=1e-12)
    p.set_defaults(func=_cmd_phi_scan)

    p = sub.add_parser("manifold", help="extract the phi = 0 point cloud on a grid")
    add_common(p)
    p.add_argument("--grid", required=True)
    p.add_argument("--slice", default="")
    p.add_argument("--tol-rel", type=float, default=1e-9,
                   help="|phi| refinement tolerance relative to the bracket scale")
    p.set_defaults(func=_cmd_manifold)

    p = sub.add_parser("hyperplane", help="TLS invariant hyperplanes at the fixed points")
    p.add_argument("--model", "-m", required=True)
    p.add_argument("--out", "-o", help="optional CSV of plane coefficients")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=_cmd_hyperplane)

    p = sub.add_parser("curvature", help="Frenet curvatures along a trajectory")
    add_common(p)
    p.add_argument("--x0", required=True)
    p.add_argument("--t-end", type=float, required=True)
    p.add_argument("--rel-tol", type=float, default=1e-9)
    p.add_argument("--abs-tol", type=float, default=1e-12)
    p.set_defaults(func=_cmd_curvature)

    p = sub.add_parser("verify", help="run the residual verification suites")
    p.add_argument("--model", "-m")
    p.add_argument("--all", action="store_true", help="verify every built-in model")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_verify)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"flowcurv: config error: {err}", file=sys.stderr)
        return 1
    except (IntegrationError, spectral.SpectralError, geometry.DegenerateStackError,
            np.linalg.LinAlgError, FloatingPointError) as err:
        print(f"flowcurv: numerical failure: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
