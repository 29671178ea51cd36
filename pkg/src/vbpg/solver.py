"""Outer VBPG iteration, kernel schedules, traces, and rate measurement."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .bregman import (BregmanKernel, BregmanStep, InequalityReport, diagonal_kernel,
                      euclidean_kernel, solve_subproblem, spd_kernel)
from .errors import CapabilityError, NonDescentError, TargetValueError
from .problem import (CompositeProblem, SmoothTerm, as_point, derive_constants,
                      objective)

__all__ = [
    "ConstantSchedule",
    "DiagonalBBSchedule",
    "BlockJacobiSchedule",
    "CustomSchedule",
    "VbpgConfig",
    "SolverTrace",
    "RateReport",
    "run_vbpg",
    "check_vp_eb",
    "measure_rates",
    "run_regularized_jacobi",
    "block_jacobi_kernel",
]


# --------------------------------------------------------------------------
# kernel schedules
# --------------------------------------------------------------------------

class ConstantSchedule:
    """The same kernel every iteration."""

    def __init__(self, kernel: BregmanKernel):
        self.kernel = kernel
        self.m = kernel.m
        self.M = kernel.M

    def kernel_for(self, k, x, grad, x_prev, grad_prev) -> BregmanKernel:
        return self.kernel


class DiagonalBBSchedule:
    """Barzilai-Borwein diagonal weights clipped to [m, M].

    Iteration 0 uses the Euclidean kernel scaled to m; afterwards each weight
    is |dg_i / dx_i| clipped into [m, M], which keeps Assumption-2 moduli by
    construction.
    """

    def __init__(self, m: float, M: float):
        if not (0 < m <= M):
            raise ValueError("need 0 < m <= M")
        self.m = m
        self.M = M

    def kernel_for(self, k, x, grad, x_prev, grad_prev) -> BregmanKernel:
        if k == 0 or x_prev is None:
            return euclidean_kernel(self.m)
        dx = x - x_prev
        dg = grad - grad_prev
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.abs(dg) / np.abs(dx)
        ratio = np.where(np.isfinite(ratio), ratio, self.m)
        return diagonal_kernel(np.clip(ratio, self.m, self.M))


def block_jacobi_kernel(Q, blocks: Sequence[np.ndarray], c_weights) -> BregmanKernel:
    """SPD kernel with Hessian blockdiag(Q_ii + c_i I).

    This is the distance induced by linearizing a quadratic f coordinate-block
    by coordinate-block and adding a per-block proximal weight.
    """
    Q = np.asarray(Q, dtype=float)
    n = Q.shape[0]
    c_weights = np.asarray(c_weights, dtype=float)
    # c_i = 0 is allowed when the corresponding Q_ii block is itself PD
    if np.any(c_weights < 0):
        raise ValueError("c_weights must be nonnegative")
    H = np.zeros((n, n))
    for i, idx in enumerate(blocks):
        idx = np.asarray(idx)
        H[np.ix_(idx, idx)] = Q[np.ix_(idx, idx)] + c_weights[i] * np.eye(idx.size)
    return spd_kernel(H)


class BlockJacobiSchedule(ConstantSchedule):
    """Constant block-Jacobi kernel for a quadratic smooth term."""

    def __init__(self, p: CompositeProblem, blocks: Sequence, c_weights):
        if p.f.quadratic is None:
            raise CapabilityError("block-Jacobi schedule needs a quadratic smooth term")
        Q, _ = p.f.quadratic
        self.blocks = [np.asarray(b) for b in blocks]
        self.c_weights = np.asarray(c_weights, dtype=float)
        super().__init__(block_jacobi_kernel(Q, self.blocks, self.c_weights))


class CustomSchedule:
    """An explicit kernel sequence; the last kernel repeats past the end."""

    def __init__(self, kernels: Sequence[BregmanKernel]):
        if not kernels:
            raise ValueError("empty kernel sequence")
        self.kernels = list(kernels)
        self.m = min(k.m for k in self.kernels)
        self.M = max(k.M for k in self.kernels)

    def kernel_for(self, k, x, grad, x_prev, grad_prev) -> BregmanKernel:
        return self.kernels[min(k, len(self.kernels) - 1)]


# --------------------------------------------------------------------------
# configuration and trace
# --------------------------------------------------------------------------

@dataclass
class VbpgConfig:
    schedule: object
    eps: object                    # float or sequence of floats
    eps_lo: Optional[float] = None
    eps_hi: Optional[float] = None
    max_iters: int = 1000
    stop_tol: float = 1e-10
    inner_tol: Optional[float] = None
    record_points: bool = True

    def __post_init__(self):
        eps_seq = np.atleast_1d(np.asarray(self.eps, dtype=float))
        lo = float(np.min(eps_seq)) if self.eps_lo is None else float(self.eps_lo)
        hi = float(np.max(eps_seq)) if self.eps_hi is None else float(self.eps_hi)
        if not (0 < lo <= hi):
            raise ValueError("need 0 < eps_lo <= eps_hi")
        if np.any(eps_seq < lo) or np.any(eps_seq > hi):
            raise ValueError("eps schedule leaves [eps_lo, eps_hi]")
        if self.stop_tol <= 0:
            raise ValueError("stop_tol must be positive")
        self._eps_seq = eps_seq
        self.eps_lo = lo
        self.eps_hi = hi

    def eps_at(self, k: int) -> float:
        return float(self._eps_seq[min(k, self._eps_seq.size - 1)])


@dataclass
class SolverTrace:
    """Per-iteration records of one VBPG run.

    Row k describes iteration k: the iterate x^k, F(x^k), the step to x^{k+1},
    the gap/envelope at x^k, and the residual bound (L + M/eps_lo)*step_norm.
    ``F_values`` has one extra trailing entry F(x^K) for the final point.
    """

    problem: CompositeProblem
    points: List[np.ndarray]
    F_values: List[float]
    step_norms: List[float]
    gaps: List[float]
    envelopes: List[float]
    residual_bounds: List[float]
    final_point: np.ndarray
    stop_reason: str
    constants: object

    @property
    def iters(self) -> int:
        return len(self.step_norms)

    @property
    def F_limit(self) -> float:
        return self.F_values[-1]

    def iterates(self) -> np.ndarray:
        return np.vstack(self.points + [self.final_point])

    def csv_rows(self):
        for k in range(self.iters):
            yield (k, self.F_values[k], self.step_norms[k], self.gaps[k],
                   self.envelopes[k], self.residual_bounds[k])

    def summary(self) -> dict:
        return {
            "iters": self.iters,
            "final_point": [float(v) for v in self.final_point],
            "F_limit": self.F_limit,
            "stop_reason": self.stop_reason,
        }


def run_vbpg(p: CompositeProblem, cfg: VbpgConfig, x0) -> SolverTrace:
    """Iterate x^{k+1} in T_{D^k, eps^k}(x^k) until the step-length stop rule."""
    x = as_point(x0, p.dim)
    L = p.f.lipschitz_L
    constants = derive_constants(cfg.schedule.m, cfg.schedule.M,
                                 cfg.eps_lo, cfg.eps_hi, L, p.g.semiconvex_rho)
    if not constants.descent_regime:
        raise NonDescentError(
            f"a = {constants.a} <= 0 for (m={constants.m}, eps_hi={constants.eps_hi}, "
            f"L={L}); monotone descent is not guaranteed")
    res_coeff = L + constants.M / constants.eps_lo

    points, F_vals, steps, gaps, envs, resb = [], [], [], [], [], []
    grad = p.grad_f(x)
    x_prev = None
    grad_prev = None
    stop_reason = "max_iters"
    for k in range(cfg.max_iters):
        kern = cfg.schedule.kernel_for(k, x, grad, x_prev, grad_prev)
        step = BregmanStep(kern, cfg.eps_at(k), cfg.eps_lo, cfg.eps_hi)
        sol = solve_subproblem(p, step, x, inner_tol=cfg.inner_tol)
        step_norm = float(np.linalg.norm(sol.point - x))
        points.append(x.copy() if cfg.record_points else None)
        F_vals.append(sol.F_x)
        steps.append(step_norm)
        gaps.append(sol.gap_value)
        envs.append(sol.envelope_value)
        resb.append(res_coeff * step_norm)
        x_prev, grad_prev = x, grad
        x = sol.point
        grad = p.grad_f(x)
        if step_norm <= cfg.stop_tol:
            stop_reason = "step_tol"
            break
    F_vals.append(objective(p, x))
    return SolverTrace(problem=p, points=points, F_values=F_vals, step_norms=steps,
                       gaps=gaps, envelopes=envs, residual_bounds=resb,
                       final_point=x, stop_reason=stop_reason, constants=constants)


# --------------------------------------------------------------------------
# trace diagnostics
# --------------------------------------------------------------------------

def check_vp_eb(trace: SolverTrace, x_bar, kappa_prime: float, eta: float,
                nu: float) -> InequalityReport:
    """Value-proximity error bound along the recorded iterates.

    For every recorded k whose successor lies in the ball-and-band region
    around x_bar, asserts F(x^{k+1}) - F(x_bar) <= kappa' * ||x^k - x^{k+1}||^2.
    The report carries the minimal kappa' that would make every such k pass.
    """
    x_bar = as_point(x_bar, trace.problem.dim)
    F_bar = objective(trace.problem, x_bar)
    xs = trace.iterates()
    min_kappa = 0.0
    worst_slack = math.inf
    n_in_region = 0
    for k in range(trace.iters):
        x_next = xs[k + 1]
        F_next = trace.F_values[k + 1]
        if not (np.linalg.norm(x_next - x_bar) < eta and F_bar < F_next < F_bar + nu):
            continue
        n_in_region += 1
        step_sq = trace.step_norms[k] ** 2
        if step_sq == 0.0:
            continue
        ratio = (F_next - F_bar) / step_sq
        min_kappa = max(min_kappa, ratio)
        worst_slack = min(worst_slack, kappa_prime * step_sq - (F_next - F_bar))
    passed = n_in_region > 0 and worst_slack >= -1e-8 * (1.0 + abs(F_bar))
    return InequalityReport(
        name="vp_eb",
        passed=passed,
        slacks={"worst": worst_slack if n_in_region else math.nan},
        details={"minimal_kappa": min_kappa, "n_in_region": n_in_region,
                 "empty_region": n_in_region == 0},
    )


@dataclass
class RateReport:
    beta_Q: float
    beta_R: float
    linear: bool
    tail_start: int


def measure_rates(trace: SolverTrace, F_bar: float, x_bar, tail_fraction: float) -> RateReport:
    """Q-rate of F values toward F_bar and R-rate of iterates toward x_bar."""
    if not (0 < tail_fraction <= 1):
        raise ValueError("tail_fraction must be in (0, 1]")
    n = trace.iters
    if n < 1:
        raise TargetValueError("empty trace")
    start = max(0, n - max(1, math.ceil(tail_fraction * n)))
    gaps = np.asarray(trace.F_values) - F_bar
    if np.any(gaps[start:] <= 0.0):
        raise TargetValueError(f"F(x^k) <= F_bar={F_bar} on the tail")
    ratios = gaps[start + 1:] / gaps[start:-1]
    beta_Q = float(np.max(ratios))

    x_bar = as_point(x_bar, trace.problem.dim)
    xs = trace.iterates()[start:]
    dists = np.linalg.norm(xs - x_bar, axis=1)
    floor = 100.0 * np.finfo(float).eps * (1.0 + float(np.linalg.norm(x_bar)))
    keep = dists > floor
    d = dists[keep]
    if d.size >= 2:
        beta_R = float(np.exp(np.mean(np.log(d[1:] / d[:-1]))))
    else:
        beta_R = math.nan
    return RateReport(beta_Q=beta_Q, beta_R=beta_R,
                      linear=beta_Q < 1.0 - 1e-6, tail_start=start)


# --------------------------------------------------------------------------
# regularized Jacobi
# --------------------------------------------------------------------------

def run_regularized_jacobi(p: CompositeProblem, blocks: Sequence, c_weights, eps: float,
                           x0, iters: int, stop_tol: float = 0.0,
                           inner_tol: Optional[float] = None) -> SolverTrace:
    """Blockwise-parallel VBPG specialization for quadratic f and separable g.

    Every iteration solves, independently per block i, the subproblem with
    distance 1/2 (y_i - x_i)'(Q_ii + c_i I)(y_i - x_i); this coincides
    iterate-by-iterate with run_vbpg under the block-Jacobi kernel.
    """
    if p.f.quadratic is None:
        raise CapabilityError("run_regularized_jacobi needs a quadratic smooth term")
    if p.g.restrict is None:
        raise CapabilityError("run_regularized_jacobi needs a block-separable g")
    Q, _ = p.f.quadratic
    blocks = [np.asarray(b) for b in blocks]
    c_weights = np.asarray(c_weights, dtype=float)
    kern = block_jacobi_kernel(Q, blocks, c_weights)

    # per-block solver pieces, built once
    block_pieces = []
    for i, idx in enumerate(blocks):
        H_i = Q[np.ix_(idx, idx)] + c_weights[i] * np.eye(idx.size)
        block_pieces.append((idx, spd_kernel(H_i), p.g.restrict(idx)))

    cfg = VbpgConfig(schedule=ConstantSchedule(kern), eps=eps,
                     max_iters=iters, stop_tol=stop_tol if stop_tol > 0 else 1e-300,
                     inner_tol=inner_tol)
    constants = derive_constants(kern.m, kern.M, cfg.eps_lo, cfg.eps_hi,
                                 p.f.lipschitz_L, p.g.semiconvex_rho)
    res_coeff = p.f.lipschitz_L + constants.M / constants.eps_lo

    x = as_point(x0, p.dim)
    points, F_vals, steps, gaps, envs, resb = [], [], [], [], [], []
    stop_reason = "max_iters"
    full_step = BregmanStep(kern, eps)
    for k in range(iters):
        grad = p.grad_f(x)
        x_next = x.copy()
        for idx, kern_i, g_i in block_pieces:
            # the block subproblem is the Bregman subproblem of a linear smooth
            # term (gradient frozen at x) restricted to the block coordinates
            f_lin = SmoothTerm(fn=lambda y, c=grad[idx]: float(c @ y),
                               grad=lambda y, c=grad[idx]: c, lipschitz_L=0.0)
            p_i = CompositeProblem(f=f_lin, g=g_i, dim=idx.size)
            sol_i = solve_subproblem(p_i, BregmanStep(kern_i, eps), x[idx],
                                     inner_tol=inner_tol)
            x_next[idx] = sol_i.point
        # envelope/gap bookkeeping evaluated through the equivalent full kernel
        sol = solve_subproblem(p, full_step, x, inner_tol=inner_tol)
        step_norm = float(np.linalg.norm(x_next - x))
        points.append(x.copy())
        F_vals.append(objective(p, x))
        steps.append(step_norm)
        gaps.append(sol.gap_value)
        envs.append(sol.envelope_value)
        resb.append(res_coeff * step_norm)
        x = x_next
        if stop_tol > 0 and step_norm <= stop_tol:
            stop_reason = "step_tol"
            break
    F_vals.append(objective(p, x))
    return SolverTrace(problem=p, points=points, F_values=F_vals, step_norms=steps,
                       gaps=gaps, envelopes=envs, residual_bounds=resb,
                       final_point=x, stop_reason=stop_reason, constants=constants)
