"""Truncated Taylor-series (jet) arithmetic and exact trajectory derivatives.

A `Jet` stores the Taylor coefficients in time of one scalar quantity along
a trajectory.  Feeding jets through a vector field and applying the standard
recurrence  c_{k+1} = (rhs coefficient k) / (k + 1)  yields every time
derivative of the solution through a point, exact up to rounding: no
truncation error, no symbolic differentiation.

Coefficient arrays have shape ``(order + 1,)`` for a single point or
``(order + 1, npts)`` for a batch of points evaluated together; all
arithmetic broadcasts over the trailing axis.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["Jet", "DerivStack", "derivative_stack", "jet_eval", "MAX_ORDER"]

# All uses in this package need order <= n + 1 = 6; the cap leaves headroom
# without letting callers allocate unbounded coefficient arrays.
MAX_ORDER = 12


class Jet:
    """Taylor coefficients c_0..c_M of a scalar function of time."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs):
        coeffs = np.asarray(coeffs)
        if not np.issubdtype(coeffs.dtype, np.floating):
            coeffs = coeffs.astype(float)
        self.coeffs = coeffs

    # -- constructors -------------------------------------------------------

    @classmethod
    def constant(cls, value, order, batch_shape=(), dtype=float):
        c = np.zeros((order + 1,) + tuple(batch_shape), dtype=dtype)
        c[0] = value
        return cls(c)

    @classmethod
    def from_value(cls, value, order):
        """Seed a jet whose order-0 coefficient is `value` (scalar or 1-D batch)."""
        value = np.asarray(value, dtype=float)
        c = np.zeros((order + 1,) + value.shape)
        c[0] = value
        return cls(c)

    # -- introspection ------------------------------------------------------

    @property
    def order(self):
        return self.coeffs.shape[0] - 1

    @property
    def value(self):
        """Order-0 coefficient (the underlying point value)."""
        return self.coeffs[0]

    def __repr__(self):
        return f"Jet({self.coeffs!r})"

    # -- arithmetic (exact truncated-series algebra) -------------------------

    def _coerce(self, other):
        if isinstance(other, Jet):
            if other.order != self.order:
                raise ValueError(
                    f"mixed jet truncation orders: {self.order} vs {other.order}"
                )
            return other
        if isinstance(other, (int, float, np.floating, np.ndarray)):
            return Jet.constant(other, self.order, self.coeffs.shape[1:],
                                dtype=self.coeffs.dtype)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return Jet(self.coeffs + other.coeffs)

    __radd__ = __add__

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return Jet(self.coeffs - other.coeffs)

    def __rsub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return Jet(other.coeffs - self.coeffs)

    def __neg__(self):
        return Jet(-self.coeffs)

    def __mul__(self, other):
        if isinstance(other, (int, float, np.floating)):
            return Jet(self.coeffs * other)
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        a, b = self.coeffs, other.coeffs
        out = np.zeros_like(a)
        for k in range(a.shape[0]):
            # Cauchy product: (f*g)_k = sum_j f_j g_{k-j}
            for j in range(k + 1):
                out[k] += a[j] * b[k - j]
        return Jet(out)

    __rmul__ = __mul__

    def __pow__(self, exponent):
        if not isinstance(exponent, (int, np.integer)) or exponent < 0:
            raise ValueError("jets support nonnegative integer powers only")
        # square-and-multiply, in the same operation order as expr._ipow
        result = Jet.constant(1.0, self.order, self.coeffs.shape[1:],
                              dtype=self.coeffs.dtype)
        base = self
        e = int(exponent)
        while e:
            if e & 1:
                result = result * base
            if e > 1:
                base = base * base
            e >>= 1
        return result


@dataclass(frozen=True)
class DerivStack:
    """Time derivatives d_k = X^(k) of the trajectory through one point.

    ``derivs[k - 1]`` is the k-th derivative; shape ``(order, n)`` for a
    single point or ``(order, n, npts)`` for a batch.
    """

    point: np.ndarray
    derivs: np.ndarray
    region: object = field(default=None, compare=False)

    @property
    def order(self):
        return self.derivs.shape[0]

    @property
    def dim(self):
        return self.derivs.shape[1]

    def matrix(self, count=None, replace_last_with=None):
        """First `count` derivatives as determinant-ready column matrices.

        Returns shape ``(n, count)`` (or ``(npts, n, count)`` for batches)
        with derivative k in column k.  `replace_last_with` swaps the final
        column for another derivative index (1-based), which is how the Lie
        derivative determinant is formed.
        """
        count = self.order if count is None else count
        idx = list(range(count))
        if replace_last_with is not None:
            idx[-1] = replace_last_with - 1
        m = self.derivs[idx]  # (count, n) or (count, n, npts)
        if m.ndim == 2:
            return m.T
        return np.transpose(m, (2, 1, 0))


def jet_eval(model, x_jets, region=None):
    """Evaluate `model.rhs` componentwise under truncated-series algebra.

    All input jets must share one truncation order; the order-0 row of the
    result equals the plain scalar rhs.
    """
    orders = {j.order for j in x_jets}
    if len(orders) != 1:
        raise ValueError(f"mixed jet truncation orders: {sorted(orders)}")
    return model.rhs(list(x_jets), region=region)


def derivative_stack(model, x, order, region=None):
    """Compute d_1..d_order, the exact time derivatives of the flow at `x`.

    Uses the Taylor-coefficient recurrence: with X(t) = sum c_k t^k the ODE
    gives c_{k+1} = (rhs(X jet))_k / (k + 1), so coefficient k + 1 needs one
    rhs evaluation on jets truncated at order k.  Derivatives are then
    d_k = k! c_k.

    For piecewise-linear models the region is classified once at `x` (or
    pinned by the caller) and frozen for the whole stack.
    """
    if not isinstance(order, (int, np.integer)) or order < 1:
        raise ValueError("order must be a positive integer")
    if order > MAX_ORDER:
        raise ValueError(f"order {order} exceeds cap {MAX_ORDER}")
    x = np.asarray(x)
    if not np.issubdtype(x.dtype, np.floating):
        x = x.astype(float)
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite state")
    n = x.shape[0]
    if region is None and model.regions is not None:
        region = model.regions(x.astype(float))

    # coeffs[k] holds c_k for every component (and batch point); the dtype
    # follows the input, so extended-precision states propagate
    coeffs = np.zeros((order + 1,) + x.shape, dtype=x.dtype)
    coeffs[0] = x
    for k in range(order):
        jets = [Jet(coeffs[: k + 1, i]) for i in range(n)]
        fx = model.rhs(jets, region=region)
        for i in range(n):
            coeffs[k + 1, i] = fx[i].coeffs[k] / (k + 1)

    derivs = np.empty((order,) + x.shape, dtype=x.dtype)
    fact = 1.0
    for k in range(1, order + 1):
        fact *= k
        derivs[k - 1] = fact * coeffs[k]
    return DerivStack(point=x, derivs=derivs, region=region)
