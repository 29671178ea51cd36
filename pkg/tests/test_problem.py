import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vbpg.errors import DomainError, NumericError
from vbpg.problem import (AnalyticOracles, CompositeProblem, as_point,
                          box_indicator_term, derive_constants, l1_term,
                          least_squares_smooth, mcp_term, objective,
                          power_iteration_lmax, quadratic_smooth,
                          validate_problem, zero_smooth, zero_term)


def test_as_point_coercion():
    assert as_point(1.5).shape == (1,)
    np.testing.assert_array_equal(as_point([1, 2]), [1.0, 2.0])
    with pytest.raises(ValueError):
        as_point([1, 2], dim=3)
    with pytest.raises(DomainError):
        as_point([np.nan, 0.0])
    with pytest.raises(ValueError):
        as_point(np.zeros((2, 2)))


def test_derive_constants_reference_values():
    c = derive_constants(m=1.0, M=1.0, eps_lo=0.5, eps_hi=0.5, L=1.0)
    assert c.a == pytest.approx(0.5, abs=1e-15)
    assert c.frak_a == 2.0
    assert c.frak_b == pytest.approx(7.0, abs=1e-15)
    assert c.frak_c == pytest.approx(-1.0, abs=1e-15)
    assert c.kappa == pytest.approx(7.5, abs=1e-15)
    assert c.c0 == pytest.approx(2.5, abs=1e-15)
    assert c.descent_regime and not c.strict_regime


def test_derive_constants_validation():
    with pytest.raises(ValueError):
        derive_constants(0.0, 1.0, 0.1, 0.1, 1.0)
    with pytest.raises(ValueError):
        derive_constants(1.0, 0.5, 0.1, 0.1, 1.0)
    with pytest.raises(ValueError):
        derive_constants(1.0, 1.0, 0.2, 0.1, 1.0)
    with pytest.raises(ValueError):
        derive_constants(1.0, 1.0, 0.1, 0.1, -1.0)


@given(st.floats(0.1, 10.0), st.floats(0.0, 5.0), st.floats(0.01, 2.0))
@settings(max_examples=50)
def test_derive_constants_pure(m, L, eps):
    M = 2.0 * m
    c1 = derive_constants(m, M, eps, eps, L)
    c2 = derive_constants(m, M, eps, eps, L)
    assert c1 == c2
    assert c1.a == 0.5 * (m / eps - L)


def test_quadratic_smooth_gradient_and_L():
    Q = np.array([[2.0, 0.0], [0.0, 5.0]])
    f = quadratic_smooth(Q, np.array([1.0, -1.0]), const=3.0)
    x = np.array([1.0, 2.0])
    assert f(x) == pytest.approx(0.5 * x @ Q @ x - x[0] + x[1] + 3.0)
    np.testing.assert_allclose(f.grad(x), Q @ x - np.array([1.0, -1.0]))
    assert f.lipschitz_L == pytest.approx(5.0)
    assert f.quadratic is not None


def test_least_squares_smooth_L_dominates():
    rng = np.random.default_rng(0)
    A = rng.standard_normal((20, 6))
    f = least_squares_smooth(A, rng.standard_normal(20))
    lam_max = np.linalg.eigvalsh(A.T @ A)[-1]
    assert f.lipschitz_L >= lam_max * (1 - 1e-12)
    assert f.lipschitz_L == pytest.approx(lam_max, rel=1e-6)


def test_power_iteration():
    Q = np.diag([1.0, 3.0, 7.0])
    lam = power_iteration_lmax(lambda v: Q @ v, 3)
    assert lam == pytest.approx(7.0, rel=1e-9)


def test_objective_nan_identifies_term():
    f = zero_smooth()
    bad_g = zero_term()
    p = CompositeProblem(
        f=f,
        g=type(bad_g)(fn=lambda x: float("nan"), scaled_prox=bad_g.scaled_prox),
        dim=1)
    with pytest.raises(NumericError, match="nonsmooth"):
        objective(p, [0.0])


def test_objective_allows_inf_outside_domain():
    p = CompositeProblem(f=zero_smooth(), g=box_indicator_term([0.0], [1.0]),
                         dim=1)
    assert objective(p, [2.0]) == math.inf
    assert objective(p, [0.5]) == 0.0


@given(st.lists(st.floats(-5, 5), min_size=1, max_size=6),
       st.floats(0.01, 2.0), st.floats(0.1, 5.0))
@settings(max_examples=100)
def test_l1_prox_is_soft_threshold(vals, lam, w):
    g = l1_term(lam)
    c = np.asarray(vals)
    out = g.scaled_prox(c, np.zeros_like(c), np.full(c.size, w))
    ref = np.sign(c) * np.maximum(np.abs(c) - lam / w, 0.0)
    np.testing.assert_allclose(out, ref, atol=1e-14)


def test_l1_min_norm_subgrad():
    g = l1_term(0.5)
    # at zero, the subdifferential absorbs shifts up to lam
    assert g.min_norm_subgrad(np.array([0.0]), np.array([0.3])) == 0.0
    assert g.min_norm_subgrad(np.array([0.0]), np.array([0.8])) == pytest.approx(0.3)
    # away from zero the subdifferential is the singleton {lam*sign}
    assert g.min_norm_subgrad(np.array([1.0]), np.array([0.0])) == pytest.approx(0.5)


def test_box_indicator_prox_and_subgrad():
    g = box_indicator_term([0.0, 0.0], [1.0, 1.0])
    out = g.scaled_prox(np.array([2.0, -1.0]), np.zeros(2), np.ones(2))
    np.testing.assert_allclose(out, [1.0, 0.0])
    # the normal cone at the upper face is [0, inf): it absorbs negative shifts
    assert g.min_norm_subgrad(np.array([1.0, 0.5]), np.array([-2.0, 0.0])) == 0.0
    assert g.min_norm_subgrad(np.array([1.0, 0.5]), np.array([3.0, 0.0])) == 3.0


@given(st.floats(-3, 3), st.floats(0.05, 1.0), st.floats(0.6, 4.0),
       st.floats(-1, 1))
@settings(max_examples=150)
def test_mcp_prox_minimizes_scalar_objective(center, lam, b, shift):
    """The firm-threshold formula beats a fine scalar grid."""
    g = mcp_term(lam, b)
    w = 1.0 / b + 1.0      # strictly above the semiconvexity modulus
    c = np.array([center])
    s = np.array([shift])
    y = g.scaled_prox(c, s, np.array([w]))[0]

    def obj(t):
        arr = np.array([t])
        return shift * t + g(arr) + 0.5 * w * (t - center) ** 2

    grid = np.linspace(center - 3.0, center + 3.0, 4001)
    best = min(obj(t) for t in grid)
    assert obj(y) <= best + 1e-6


def test_mcp_prox_rejects_weak_weights():
    g = mcp_term(0.5, 2.0)
    with pytest.raises(ValueError):
        g.scaled_prox(np.array([1.0]), np.zeros(1), np.array([0.4]))


def test_mcp_value_flat_beyond_threshold():
    g = mcp_term(0.5, 2.0)      # lam*b = 1, plateau value lam^2 b / 2 = 0.25
    assert g(np.array([5.0])) == pytest.approx(0.25)
    assert g(np.array([1.0])) == pytest.approx(0.25)
    assert g(np.array([0.0])) == 0.0


def test_validate_problem_accepts_correct_L():
    p = CompositeProblem(f=quadratic_smooth(np.diag([1.0, 4.0])), g=zero_term(),
                         dim=2)
    report = validate_problem(p, (np.full(2, -1.0), np.full(2, 1.0)), 200, 0)
    assert report.passed


def test_validate_problem_flags_wrong_L():
    f = quadratic_smooth(np.diag([1.0, 4.0]))
    lying = type(f)(fn=f.fn, grad=f.grad, lipschitz_L=1.0)
    p = CompositeProblem(f=lying, g=zero_term(), dim=2)
    report = validate_problem(p, (np.full(2, -1.0), np.full(2, 1.0)), 200, 0)
    assert not report.passed
    kinds = {v[0] for v in report.violations}
    assert "lipschitz" in kinds or "descent" in kinds
