"""Gram-Schmidt frame, curvatures, and the determinant identities."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from flowcurv import (DegenerateStackError, curvature1_3d, curvatures,
                      gram_schmidt, det_norm_product_residual,
                      det_multiplicativity_residual, trace_expansion_residual,
                      torsion_3d, wedge)


def test_already_orthogonal_unchanged():
    v = np.array([[1.0, 0, 0], [0, 1.0, 0]])
    basis = gram_schmidt(v)
    np.testing.assert_array_equal(basis.vectors, v)
    np.testing.assert_array_equal(basis.beta, np.eye(2))


def test_single_projection_removal():
    basis = gram_schmidt([[1.0, 0.0], [1.0, 1.0]])
    np.testing.assert_allclose(basis.vectors, [[1, 0], [0, 1]], atol=1e-15)
    # u_1 is the first input exactly; beta has unit diagonal
    np.testing.assert_array_equal(basis.vectors[0], [1.0, 0.0])
    np.testing.assert_array_equal(np.diag(basis.beta), [1.0, 1.0])


@given(arrays(np.float64, (5, 5), elements=st.floats(-10, 10)))
@settings(max_examples=60, deadline=None)
def test_orthogonality_and_beta_reconstruction(v):
    try:
        basis = gram_schmidt(v)
    except DegenerateStackError:
        return
    u = basis.vectors
    for i in range(5):
        for j in range(i):
            tol = 1e-10 * np.linalg.norm(u[i]) * np.linalg.norm(u[j])
            assert abs(u[i] @ u[j]) <= tol
    # u_i = sum_j beta[i, j] input_j
    np.testing.assert_allclose(basis.beta @ v, u, atol=1e-9 * max(1, np.abs(u).max()))


def test_prefix_span_invariance():
    rng = np.random.default_rng(4)
    for _ in range(50):
        v = rng.standard_normal((4, 6))
        u = gram_schmidt(v).vectors
        for k in range(1, 5):
            # project each input onto span(u_1..u_k) and reconstruct
            for i in range(k):
                proj = sum((u[j] @ v[i]) / (u[j] @ u[j]) * u[j] for j in range(k))
                assert np.linalg.norm(proj - v[i]) <= 1e-10 * np.linalg.norm(v[i])


def test_rank_deficiency_detected():
    with pytest.raises(DegenerateStackError):
        gram_schmidt([[1.0, 0.0, 0.0], [2.0, 0.0, 0.0]])
    with pytest.raises(ValueError, match="cannot orthogonalize"):
        gram_schmidt(np.ones((4, 3)))


def test_circle_curvature():
    # circle of radius R: stack d1 = (0, R), d2 = (-R, 0) gives kappa = 1/R
    for R in (0.5, 1.0, 3.0):
        cs = curvatures(np.array([[0.0, R], [-R, 0.0]]))
        assert cs.kappas[0] == pytest.approx(1.0 / R, rel=1e-14)


def test_straight_line_degenerate():
    with pytest.raises(DegenerateStackError):
        curvatures(np.array([[1.0, 0.0], [2.0, 0.0]]))


def test_curvature1_3d_examples():
    assert curvature1_3d([1, 0, 0], [0, 1, 0]) == pytest.approx(1.0, rel=1e-15)
    assert curvature1_3d([2, 0, 0], [4, 0, 0]) == 0.0
    with pytest.raises(ValueError, match="fixed point"):
        curvature1_3d([0, 0, 0], [1, 0, 0])


def test_torsion_3d_examples():
    # planar stack: zero torsion
    assert torsion_3d([1, 0, 0], [0, 1, 0], [1, 1, 0]) == 0.0
    # unit-pitch helix: torsion a/(a^2+b^2) = 1/2
    assert torsion_3d([0, 1, 1], [-1, 0, 0], [0, -1, 0]) == pytest.approx(0.5, rel=1e-15)
    with pytest.raises(ValueError, match="torsion"):
        torsion_3d([1, 0, 0], [2, 0, 0], [0, 1, 0])


def test_closed_forms_match_general_formula():
    # kappa_1 and |kappa_2| from the 3-D closed forms vs the norm-ratio route
    rng = np.random.default_rng(10)
    for _ in range(100):
        stack = rng.standard_normal((3, 3))
        try:
            cs = curvatures(stack)
        except DegenerateStackError:
            continue
        v, gamma, gamma_dot = stack
        assert curvature1_3d(v, gamma) == pytest.approx(cs.kappas[0], rel=1e-10)
        assert abs(torsion_3d(v, gamma, gamma_dot)) == pytest.approx(
            cs.kappas[1], rel=1e-10)
        assert cs.torsion == pytest.approx(torsion_3d(v, gamma, gamma_dot), rel=0)


def test_curvature_time_reparametrization_invariance():
    # rescaling time t -> t/s multiplies d_k by s^k; curvatures are geometric
    # quantities and must not change
    rng = np.random.default_rng(2)
    stack = rng.standard_normal((4, 4))
    base = curvatures(stack).kappas
    s = 2.75
    scaled = np.array([stack[k] * s ** (k + 1) for k in range(4)])
    np.testing.assert_allclose(curvatures(scaled).kappas, base, rtol=1e-10)


def test_det_norm_product_identity_examples():
    assert det_norm_product_residual(np.eye(3)) == 0.0
    rng = np.random.default_rng(0)
    worst = max(det_norm_product_residual(rng.standard_normal((4, 4)))
                for _ in range(200))
    assert worst <= 1e-10
    # rank-deficient: both sides zero
    m = np.array([[1.0, 0, 0], [2.0, 0, 0], [0, 0, 1.0]])
    assert det_norm_product_residual(m) <= 1e-15


def test_det_multiplicativity_identity_examples():
    assert det_multiplicativity_residual(np.eye(3), np.eye(3)) == 0.0
    J = np.diag([2.0, 3.0, 4.0])
    assert det_multiplicativity_residual(J, np.eye(3)) <= 1e-15
    rng = np.random.default_rng(1)
    worst = max(det_multiplicativity_residual(rng.standard_normal((5, 5)),
                                      rng.standard_normal((5, 5)))
                for _ in range(200))
    assert worst <= 1e-10


def test_trace_expansion_identity_examples():
    n = 4
    assert trace_expansion_residual(np.eye(n), np.eye(n)) <= 1e-15
    traceless = np.array([[0, 1.0], [1.0, 0]])
    assert trace_expansion_residual(traceless, np.eye(2)) <= 1e-15
    rng = np.random.default_rng(2)
    worst = max(trace_expansion_residual(rng.standard_normal((4, 4)),
                                      rng.standard_normal((4, 4)))
                for _ in range(200))
    assert worst <= 1e-10


def test_wedge_matches_determinant_contraction():
    rng = np.random.default_rng(5)
    for n in (3, 4, 5):
        for _ in range(20):
            a = rng.standard_normal((n - 1, n))
            w = wedge(a)
            v = rng.standard_normal(n)
            det = np.linalg.det(np.column_stack([v] + list(a)))
            assert v @ w == pytest.approx(det, rel=1e-10, abs=1e-12)
    # n = 3: ordinary cross product
    a = rng.standard_normal((2, 3))
    np.testing.assert_allclose(wedge(a), np.cross(a[0], a[1]), rtol=1e-14)


def _normalized_frame(stack):
    u = gram_schmidt(stack).vectors
    return u / np.linalg.norm(u, axis=1, keepdims=True)


def _frenet_matrix(stack_at, t, h=1e-6):
    """Coefficients of d(e_i)/dt expanded in the frame (e_j), by central FD."""
    e = _normalized_frame(stack_at(t))
    de = (_normalized_frame(stack_at(t + h)) - _normalized_frame(stack_at(t - h))) / (2 * h)
    return de @ e.T, e


@pytest.mark.parametrize("curve", ["circle", "helix"])
def test_frenet_tridiagonal_structure(curve):
    # differentiating the normalized frame along the curve reproduces the
    # tridiagonal pattern: de_i/dt = v(-kappa_{i-1} e_{i-1} + kappa_i e_{i+1})
    if curve == "circle":
        R, omega = 2.0, 0.7

        def stack_at(t):
            d1 = R * omega * np.array([-np.sin(omega * t), np.cos(omega * t)])
            d2 = R * omega ** 2 * np.array([-np.cos(omega * t), -np.sin(omega * t)])
            return np.array([d1, d2])
    else:
        def stack_at(t):
            d1 = np.array([-np.sin(t), np.cos(t), 1.0])
            d2 = np.array([-np.cos(t), -np.sin(t), 0.0])
            d3 = np.array([np.sin(t), -np.cos(t), 0.0])
            return np.array([d1, d2, d3])

    for t in (0.0, 0.4, 1.3):
        alpha, _ = _frenet_matrix(stack_at, t)
        stack = stack_at(t)
        v = np.linalg.norm(stack[0])
        kappas = curvatures(stack).kappas
        m = len(stack)
        expected = np.zeros((m, m))
        for i in range(m - 1):
            expected[i, i + 1] = v * kappas[i]
            expected[i + 1, i] = -v * kappas[i]
        dominant = v * kappas.max()
        np.testing.assert_allclose(alpha, expected, atol=1e-3 * dominant)
