"""Jet arithmetic and the derivative-stack recurrence."""

import numpy as np
import pytest

from flowcurv import derivative_stack, get_model, integrate, jet_eval, load_model
from flowcurv.jets import MAX_ORDER, Jet

ROTATION = {"name": "rotation", "dim": 2, "params": {}, "rhs": ["-x2", "x1"]}


def test_planar_rotation_stack():
    # circular motion: successive derivatives rotate by 90 degrees
    model = load_model(ROTATION)
    st = derivative_stack(model, [1.0, 0.0], 3)
    np.testing.assert_array_equal(st.derivs[0], [0.0, 1.0])
    np.testing.assert_array_equal(st.derivs[1], [-1.0, 0.0])
    np.testing.assert_array_equal(st.derivs[2], [0.0, -1.0])


def test_jet_product_expansion():
    # (2 + t)^2 = 4 + 4t + t^2
    j = Jet([2.0, 1.0, 0.0, 0.0])
    sq = j * j
    np.testing.assert_array_equal(sq.coeffs, [4.0, 4.0, 1.0, 0.0])
    np.testing.assert_array_equal((j ** 2).coeffs, sq.coeffs)


def test_constant_jets_give_rhs_in_order_zero(gear):
    x = np.array([1.0, 0.0, 1.0, 0.0, 0.0])
    jets = [Jet.constant(v, 4) for v in x]
    out = jet_eval(gear, jets)
    values = [j.coeffs[0] for j in out]
    np.testing.assert_array_equal(values, [0.0, 1.0, 0.0, 800.0, 1200.0])
    for j in out:
        assert np.all(j.coeffs[2:] == 0.0)  # constant input, derivative zero above order 1


def test_jet_eval_order0_matches_scalar_rhs():
    model = get_model("chua5-cubic")
    rng = np.random.default_rng(5)
    for _ in range(100):
        x = rng.uniform(-2, 2, 5)
        jets = [Jet.from_value(v, 3) for v in x]
        out = jet_eval(model, jets)
        scalar = model.velocity(x)
        np.testing.assert_array_equal([j.coeffs[0] for j in out], scalar)


def test_mixed_truncation_orders_rejected(gear):
    jets = [Jet.constant(0.0, 3)] * 4 + [Jet.constant(0.0, 4)]
    with pytest.raises(ValueError, match="mixed jet truncation orders"):
        jet_eval(gear, jets)


def test_order_cap_and_bad_input(chua3):
    with pytest.raises(ValueError, match="cap"):
        derivative_stack(chua3, [1.5, 0.0, -1.5], MAX_ORDER + 1)
    with pytest.raises(ValueError):
        derivative_stack(chua3, [np.nan, 0.0, 0.0], 3)
    with pytest.raises(ValueError):
        derivative_stack(chua3, [1.0, 0.0, 0.0], 0)


def test_linear_region_identity_chua3(chua3):
    # inside one PWL region the stack obeys d_{k+1} = J d_k
    rng = np.random.default_rng(7)
    for _ in range(50):
        x = rng.uniform([1.05, -2, -2], [2.5, 2, 2])
        if chua3.classify(x) != "pos":
            continue
        st = derivative_stack(chua3, x, 4)
        J = chua3.jacobian(x)
        for k in range(3):
            resid = np.linalg.norm(st.derivs[k + 1] - J @ st.derivs[k])
            assert resid <= 1e-12 * np.linalg.norm(st.derivs[k + 1])


def test_prefix_stability(chua4):
    x = np.array([1.4, 0.2, -0.3, 0.8])
    full = derivative_stack(chua4, x, 5)
    short = derivative_stack(chua4, x, 4)
    np.testing.assert_array_equal(full.derivs[:4], short.derivs)


def test_second_derivative_against_directional_fd():
    # d2 = J d1, probed as a central difference of the rhs along d1
    model = get_model("chua4-cubic")
    rng = np.random.default_rng(11)
    h = 1e-6
    for _ in range(20):
        x = rng.uniform(-2, 2, 4)
        st = derivative_stack(model, x, 2)
        d1 = st.derivs[0]
        fd = (model.velocity(x + h * d1) - model.velocity(x - h * d1)) / (2 * h)
        err = np.linalg.norm(st.derivs[1] - fd)
        assert err <= 1e-4 * max(1.0, np.linalg.norm(st.derivs[1]))


def test_taylor_polynomial_convergence_order(chua3):
    # degree-m polynomial from the stack vs an accurately integrated state:
    # halving t must shrink the defect by at least 2^m
    x0 = np.array([1.6, 0.3, -1.2])
    m = 3
    st = derivative_stack(chua3, x0, m)

    def taylor(t):
        out = x0.copy()
        fact = 1.0
        for k in range(1, m + 1):
            fact *= k
            out = out + st.derivs[k - 1] * t ** k / fact
        return out

    errs = []
    for t in (1e-3, 5e-4):
        ref = integrate(chua3, x0, t, rel_tol=1e-13, abs_tol=1e-16).states[-1]
        errs.append(np.linalg.norm(taylor(t) - ref))
    assert errs[0] / errs[1] >= 2 ** m


def test_region_frozen_for_whole_stack(chua3):
    # stack pinned to a branch uses that branch even where classification differs
    x = np.array([0.5, 0.0, 0.0])
    pinned = derivative_stack(chua3, x, 2, region="pos")
    free = derivative_stack(chua3, x, 2)
    assert pinned.region == "pos"
    assert free.region == "mid"
    assert not np.array_equal(pinned.derivs[0], free.derivs[0])


def test_batch_matches_scalar(chua5):
    rng = np.random.default_rng(3)
    X = rng.uniform(-2, 2, size=(5, 17))
    batch = derivative_stack(chua5, X, 6)
    for k in range(17):
        single = derivative_stack(chua5, X[:, k], 6)
        np.testing.assert_array_equal(batch.derivs[:, :, k], single.derivs)
