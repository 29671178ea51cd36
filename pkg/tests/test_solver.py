import numpy as np
import pytest

from vbpg.bregman import euclidean_kernel
from vbpg.errors import CapabilityError, NonDescentError, TargetValueError
from vbpg.problem import (CompositeProblem, l1_term, quadratic_smooth,
                          zero_term)
from vbpg.solver import (BlockJacobiSchedule, ConstantSchedule, CustomSchedule,
                         DiagonalBBSchedule, VbpgConfig, block_jacobi_kernel,
                         check_vp_eb, measure_rates, run_regularized_jacobi,
                         run_vbpg)


def _scalar():
    return CompositeProblem(f=quadratic_smooth(np.array([[1.0]])),
                            g=zero_term(), dim=1)


def _cfg(eps=0.5, iters=30, **kw):
    return VbpgConfig(schedule=ConstantSchedule(euclidean_kernel()), eps=eps,
                      max_iters=iters, **kw)


def test_run_vbpg_halving_iteration():
    trace = run_vbpg(_scalar(), _cfg(stop_tol=1e-30), np.array([1.0]))
    assert trace.iters == 30
    xs = trace.iterates()[:, 0]
    np.testing.assert_allclose(xs, 0.5 ** np.arange(31), rtol=0, atol=0)
    assert trace.stop_reason == "max_iters"
    # monotone objective with the guaranteed per-step drop
    a = trace.constants.a
    for k in range(trace.iters):
        assert (trace.F_values[k + 1]
                <= trace.F_values[k] - a * trace.step_norms[k] ** 2 + 1e-12)


def test_run_vbpg_stop_rule():
    trace = run_vbpg(_scalar(), _cfg(stop_tol=1e-4, iters=1000), np.array([1.0]))
    assert trace.stop_reason == "step_tol"
    assert trace.step_norms[-1] <= 1e-4


def test_non_descent_regime_rejected():
    with pytest.raises(NonDescentError):
        run_vbpg(_scalar(), _cfg(eps=2.0), np.array([1.0]))


def test_eps_schedule_bounds():
    with pytest.raises(ValueError):
        VbpgConfig(schedule=ConstantSchedule(euclidean_kernel()),
                   eps=[0.1, 0.5], eps_hi=0.3)
    cfg = VbpgConfig(schedule=ConstantSchedule(euclidean_kernel()),
                     eps=[0.1, 0.2, 0.3])
    assert cfg.eps_at(0) == 0.1
    assert cfg.eps_at(5) == 0.3
    assert (cfg.eps_lo, cfg.eps_hi) == (0.1, 0.3)


def test_measure_rates_closed_form():
    trace = run_vbpg(_scalar(), _cfg(stop_tol=1e-30), np.array([1.0]))
    rates = measure_rates(trace, 0.0, np.zeros(1), tail_fraction=1.0)
    assert rates.beta_Q == pytest.approx(0.25, abs=1e-12)
    assert rates.beta_R == pytest.approx(0.5, abs=1e-10)
    assert rates.linear


def test_measure_rates_rejects_bad_target():
    trace = run_vbpg(_scalar(), _cfg(), np.array([1.0]))
    with pytest.raises(TargetValueError):
        measure_rates(trace, 1.0, np.zeros(1), 0.5)


def test_check_vp_eb_quadratic():
    trace = run_vbpg(_scalar(), _cfg(stop_tol=1e-30), np.array([1.0]))
    # F(x_{k+1}) = x_{k+1}^2/2, step = x_k/2 = x_{k+1}; minimal kappa' = 1/2
    rep = check_vp_eb(trace, np.zeros(1), kappa_prime=0.5 + 1e-12, eta=2.0,
                      nu=1.0)
    assert rep.passed
    assert rep.details["minimal_kappa"] == pytest.approx(0.5, abs=1e-12)
    rep_far = check_vp_eb(trace, np.full(1, 50.0), 1.0, eta=0.1, nu=0.1)
    assert rep_far.details["empty_region"]


def test_diagonal_bb_schedule_stays_within_moduli():
    sched = DiagonalBBSchedule(0.5, 4.0)
    p = CompositeProblem(f=quadratic_smooth(np.diag([1.0, 3.0])),
                         g=zero_term(), dim=2)
    cfg = VbpgConfig(schedule=sched, eps=0.1, max_iters=25, stop_tol=1e-30)
    trace = run_vbpg(p, cfg, np.array([1.0, 1.0]))
    assert trace.iters == 25
    x, g = np.array([1.0, 1.0]), p.grad_f(np.array([1.0, 1.0]))
    x2 = trace.iterates()[1]
    kern = sched.kernel_for(1, x2, p.grad_f(x2), x, g)
    assert kern.m >= 0.5 - 1e-12 and kern.M <= 4.0 + 1e-12
    # for a diagonal quadratic the BB ratio recovers the exact curvatures
    np.testing.assert_allclose(kern.weights, [1.0, 3.0], atol=1e-12)


def test_custom_schedule_repeats_last():
    ks = [euclidean_kernel(), euclidean_kernel(2.0)]
    sched = CustomSchedule(ks)
    assert sched.kernel_for(7, None, None, None, None) is ks[1]
    assert (sched.m, sched.M) == (1.0, 2.0)


def test_block_jacobi_kernel_structure():
    Q = np.arange(16, dtype=float).reshape(4, 4)
    Q = Q + Q.T + 40 * np.eye(4)
    blocks = [np.array([0, 1]), np.array([2, 3])]
    kern = block_jacobi_kernel(Q, blocks, np.array([1.0, 2.0]))
    H = kern.matrix
    assert H[0, 2] == 0.0 and H[1, 3] == 0.0
    np.testing.assert_allclose(H[:2, :2], Q[:2, :2] + np.eye(2))
    np.testing.assert_allclose(H[2:, 2:], Q[2:, 2:] + 2 * np.eye(2))
    with pytest.raises(ValueError):
        block_jacobi_kernel(Q, blocks, np.array([-1.0, 1.0]))


def test_block_jacobi_schedule_needs_quadratic():
    p = CompositeProblem(
        f=type(quadratic_smooth(np.eye(1)))(fn=lambda x: 0.0,
                                            grad=np.zeros_like,
                                            lipschitz_L=0.0),
        g=zero_term(), dim=1)
    with pytest.raises(CapabilityError):
        BlockJacobiSchedule(p, [np.array([0])], np.array([1.0]))


def test_regularized_jacobi_matches_full_kernel_run():
    rng = np.random.default_rng(3)
    A = rng.standard_normal((8, 8))
    Q = A.T @ A / 8 + np.eye(8)
    p = CompositeProblem(f=quadratic_smooth(Q, rng.standard_normal(8)),
                         g=l1_term(0.1), dim=8)
    blocks = [np.arange(0, 4), np.arange(4, 8)]
    c = np.ones(2)
    tr_j = run_regularized_jacobi(p, blocks, c, 0.1, np.zeros(8), 40,
                                  inner_tol=1e-13)
    cfg = VbpgConfig(schedule=BlockJacobiSchedule(p, blocks, c), eps=0.1,
                     max_iters=40, stop_tol=1e-300, inner_tol=1e-13)
    tr_v = run_vbpg(p, cfg, np.zeros(8))
    dev = np.max(np.linalg.norm(tr_j.iterates() - tr_v.iterates(), axis=1))
    assert dev <= 1e-10
