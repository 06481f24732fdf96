"""Tangent-linear-system spectra and invariant hyperplanes.

At a fixed point of a piecewise-linear system the scroll lies on a
hyperplane through the point whose normal is a left eigenvector of the
Jacobian: Pi(X) = lambda * (X - I) . tY = 0.  The construction needs a real
eigenvalue; it uses the real eigenvalue of largest |Re| (for the 3-D and
4-D circuits that is also the overall dominant one, for the 5-D circuit the
overall dominant eigenvalue is a complex pair and the published plane comes
from the dominant real one).

The coplanarity form of the same statement: the velocity lies in the span
of the slow right eigenvectors exactly where it is orthogonal to the fast
left eigenvector, because the wedge of the slow right eigenvectors is
parallel to the fast left eigenvector.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .geometry import wedge
from .jets import derivative_stack

__all__ = [
    "SpectralError", "Spectrum", "Hyperplane",
    "spectrum_at", "tls_hyperplane", "darboux_check_plane",
    "coplanarity_equivalence", "hypercoplanarity_check",
]

_EIG_RESIDUAL_RTOL = 1e-8


class SpectralError(ValueError):
    """No usable eigenstructure for the requested construction."""


def _sign_fix(vector):
    """Deterministic sign: the largest-magnitude entry is made positive."""
    idx = int(np.argmax(np.abs(vector)))
    if np.real(vector[idx]) < 0:
        return -vector
    return vector


@dataclass(frozen=True)
class Spectrum:
    """Eigen-decomposition of a Jacobian, ordered by descending |Re|."""

    eigenvalues: np.ndarray         # (n,) complex
    right_eigenvectors: np.ndarray  # (n, n), column i pairs with eigenvalue i
    left_eigenvectors: np.ndarray   # (n, n), column i is tY for eigenvalue i
    jacobian: np.ndarray

    @property
    def fast_eigenvalue(self):
        return self.eigenvalues[0]

    @property
    def left_fast_eigenvector(self):
        return self.left_eigenvectors[:, 0]

    def is_real(self, i, rtol=1e-9):
        lam = self.eigenvalues[i]
        return abs(lam.imag) <= rtol * (1.0 + abs(lam))

    def dominant_real(self):
        """Index of the real eigenvalue with the largest |Re|."""
        for i in range(len(self.eigenvalues)):
            if self.is_real(i):
                return i
        raise SpectralError("no real eigenvalue: no real invariant hyperplane exists")


def spectrum_at(model, x, region=None):
    """Full eigen-decomposition of the Jacobian at `x`.

    Dense nonsymmetric solve; eigenvalues are sorted by descending |Re(λ)|
    (ties broken by |Im| then sign, so the ordering is deterministic), and
    real eigenvectors carry a fixed sign convention.  A near-defective
    Jacobian (eigenvector residual beyond threshold) raises SpectralError.
    """
    x = np.asarray(x, dtype=float)
    J = model.jacobian(x, region=region)
    if not np.isfinite(J).all():
        raise SpectralError("non-finite Jacobian")
    evals, rights = np.linalg.eig(J)
    order = sorted(range(len(evals)),
                   key=lambda i: (-abs(evals[i].real), abs(evals[i].imag),
                                  -evals[i].imag))
    evals = evals[order]
    rights = rights[:, order]

    evals_t, lefts_raw = np.linalg.eig(J.T)
    lefts = np.empty_like(rights)
    used = set()
    for i, lam in enumerate(evals):
        dist = np.abs(evals_t - lam)
        for k in used:
            dist[k] = np.inf
        j = int(np.argmin(dist))
        used.add(j)
        lefts[:, i] = lefts_raw[:, j]

    n = len(evals)
    for i in range(n):
        lam = evals[i]
        if abs(lam.imag) <= 1e-9 * (1.0 + abs(lam)):
            rights[:, i] = _sign_fix(np.real(rights[:, i]))
            lefts[:, i] = _sign_fix(np.real(lefts[:, i]))
        resid = np.linalg.norm(J @ rights[:, i] - lam * rights[:, i])
        if resid > _EIG_RESIDUAL_RTOL * (abs(lam) + 1.0) * np.linalg.norm(rights[:, i]):
            raise SpectralError(
                f"near-defective Jacobian: eigenvector residual {resid:.3e} "
                f"for eigenvalue {lam}")
    return Spectrum(eigenvalues=evals, right_eigenvectors=rights,
                    left_eigenvectors=lefts, jacobian=J)


def _canonical(normal, offset):
    """Unit-norm normal with the first nonzero coefficient positive."""
    norm = np.linalg.norm(normal)
    normal = normal / norm
    offset = offset / norm
    for c in normal:
        if abs(c) > 1e-14:
            if c < 0:
                normal, offset = -normal, -offset
            break
    return normal, offset


@dataclass(frozen=True)
class Hyperplane:
    """Invariant hyperplane normal . x + offset = 0 through a fixed point.

    Stored canonically (unit normal, first nonzero coefficient positive);
    `eigenvalue` is the real eigenvalue whose left eigenvector is the
    normal, and `display` reproduces the publication normalizations.
    """

    normal: np.ndarray
    offset: float
    base_point: object            # FixedPoint
    eigenvalue: float
    fast_eigenvalue: complex      # largest-|Re| eigenvalue at the base point

    def value(self, x):
        return self.normal @ np.asarray(x, dtype=float) + self.offset

    def display(self, normalization="unit"):
        """Coefficients (c_1..c_n, offset) under a display normalization.

        "unit": the canonical form.  "last1": scaled so the last coefficient
        is 1 (3-D circuit convention).  "lambda-ty": eigenvalue times the
        unit left eigenvector signed so its largest entry is negative (4/5-D
        convention).
        """
        c = np.append(self.normal, self.offset)
        if normalization == "unit":
            return c
        if normalization == "last1":
            if self.normal[-1] == 0:
                raise ValueError("last coefficient is zero; cannot normalize to 1")
            return c / self.normal[-1]
        if normalization == "lambda-ty":
            # eigenvalue times the unit eigenvector whose largest entry is negative
            idx = int(np.argmax(np.abs(self.normal)))
            sigma = -1.0 if self.normal[idx] > 0 else 1.0
            return (self.eigenvalue * sigma) * c
        raise ValueError(f"unknown normalization {normalization!r}")

    def equation(self, normalization="unit", digits=8):
        coeffs = self.display(normalization)
        terms = []
        for i, c in enumerate(coeffs[:-1]):
            s = f"{abs(c):.{digits}g}*x{i + 1}"
            terms.append(("- " if c < 0 else ("+ " if terms else "")) + s)
        off = coeffs[-1]
        terms.append(("- " if off < 0 else "+ ") + f"{abs(off):.{digits}g}")
        return " ".join(terms) + " = 0"

    def csv_row(self):
        return list(self.normal) + [self.offset]


def tls_hyperplane(model, fp):
    """Invariant hyperplane of the tangent linear system at a fixed point.

    normal = left eigenvector of the dominant real eigenvalue in the fixed
    point's region, offset = -normal . fp (the plane passes through the
    point).  Raises SpectralError when the Jacobian has no real eigenvalue.
    """
    spec = spectrum_at(model, fp.location, region=fp.region)
    i = spec.dominant_real()
    lam = float(spec.eigenvalues[i].real)
    t_y = np.real(spec.left_eigenvectors[:, i])
    normal, offset = _canonical(t_y, -float(t_y @ fp.location))
    return Hyperplane(normal=normal, offset=offset, base_point=fp,
                      eigenvalue=lam, fast_eigenvalue=complex(spec.eigenvalues[0]))


def darboux_check_plane(model, plane, samples=200, seed=0):
    """Residual of L_V Pi = lambda * Pi at random points of the plane's region.

    Zero (to rounding) throughout the linear region of a PWL model; samples
    that classify into a different region are excluded with a warning.
    """
    from .models import region_box

    rng = np.random.default_rng(seed)
    region = plane.base_point.region
    lo, hi = region_box(model, region, center=plane.base_point.location)
    residuals = []
    excluded = 0
    lam = plane.eigenvalue
    attempts = 0
    while len(residuals) < samples and attempts < 50 * samples:
        attempts += 1
        x = rng.uniform(lo, hi)
        if model.regions is not None and model.classify(x) != region:
            excluded += 1
            continue
        v = model.velocity(x)
        pi = plane.value(x)
        scale = 1.0 + abs(lam * pi) + np.linalg.norm(v)
        residuals.append(abs(plane.normal @ v - lam * pi) / scale)
    if excluded:
        warnings.warn(f"{excluded} region-straddling samples excluded")
    residuals = np.array(residuals)
    return {"max": float(residuals.max()), "mean": float(residuals.mean()),
            "count": int(len(residuals)), "excluded": int(excluded)}


def _realized_slow_basis(spectrum, skip_index):
    """Real basis of the span of all eigenvectors except `skip_index`.

    Complex-conjugate pairs are replaced by (Re, Im) of one member, the
    standard real realization of their invariant subspace.
    """
    n = len(spectrum.eigenvalues)
    basis = []
    handled = set()
    for i in range(n):
        if i == skip_index or i in handled:
            continue
        lam = spectrum.eigenvalues[i]
        vec = spectrum.right_eigenvectors[:, i]
        if spectrum.is_real(i):
            basis.append(np.real(vec))
            continue
        # find the conjugate partner
        partner = None
        for j in range(n):
            if j in (i, skip_index) or j in handled:
                continue
            if abs(spectrum.eigenvalues[j] - np.conj(lam)) <= 1e-9 * (1.0 + abs(lam)):
                partner = j
                break
        if partner is None:
            raise SpectralError(
                "complex eigenvalue without a conjugate partner in the slow set")
        handled.update({i, partner})
        basis.append(np.real(vec))
        basis.append(np.imag(vec))
    return np.array(basis)


def coplanarity_equivalence(model, x, spectrum=None, region=None):
    """Residual pair for the coplanarity and orthogonality slow-manifold forms.

    r1 = |V . (Y_2 ^ ... ^ Y_n)| over the realized slow right eigenvectors,
    r2 = |V . tY_1| against the fast left eigenvector; the two vanish
    together because the slow wedge is parallel to the fast left
    eigenvector.  The fast direction is the dominant real eigenvalue (the
    hyperplane-constructing one).  Returns the residuals with their scales
    and the parallelism defect 1 - |cos| of the two normals.
    """
    x = np.asarray(x, dtype=float)
    if spectrum is None:
        spectrum = spectrum_at(model, x, region=region)
    i_fast = spectrum.dominant_real()
    slow = _realized_slow_basis(spectrum, i_fast)
    if slow.shape[0] != model.dim - 1:
        raise SpectralError("eigenvalue multiplicity collapse: slow basis incomplete")
    v = model.velocity(x, region=region)
    w = wedge(slow)
    t_y = np.real(spectrum.left_eigenvectors[:, i_fast])
    r1 = abs(v @ w)
    r2 = abs(v @ t_y)
    scale1 = np.linalg.norm(v) * np.linalg.norm(w)
    scale2 = np.linalg.norm(v) * np.linalg.norm(t_y)
    cosine = abs(w @ t_y) / (np.linalg.norm(w) * np.linalg.norm(t_y))
    return {"r1": r1, "r2": r2, "scale1": scale1, "scale2": scale2,
            "parallelism_defect": 1.0 - cosine}


@dataclass(frozen=True)
class HypercoplanarityResult:
    value_det: float
    value_wedge: float
    agreement_residual: float
    scaled_value: float


def hypercoplanarity_check(model, x, region=None):
    """phi two ways: determinant of the stack vs V . (wedge of the rest).

    The two are the same multilinear expression, so they must agree to
    rounding; the agreement residual is scaled by the stack's Hadamard bound
    (the product of derivative norms), the common magnitude of both routes'
    rounding, so it stays meaningful near phi's zero set.  Both values
    vanish on the TLS plane of the region, where the stack vectors are
    hypercoplanar (spanned by the slow eigenbasis).
    """
    from .geometry import det_scaled

    x = np.asarray(x, dtype=float)
    n = model.dim
    stack = derivative_stack(model, x, n, region=region)
    value_det = float(det_scaled(stack.matrix()))
    value_wedge = float(stack.derivs[0] @ wedge(stack.derivs[1:]))
    norms = np.linalg.norm(stack.derivs, axis=1)
    scale = float(np.prod(norms))
    agreement = abs(value_det - value_wedge) / scale if scale > 0 else 0.0
    scaled = abs(value_det) / scale if scale > 0 else 0.0
    return HypercoplanarityResult(value_det=value_det, value_wedge=value_wedge,
                                  agreement_residual=agreement, scaled_value=scaled)
