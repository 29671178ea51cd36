"""Bregman kernels, the proximal mapping / envelope / gap, and inequality checks.

The subproblem at x minimizes

    <grad f(x), y - x> + g(y) + (1/eps) D(x, y)

over y.  For Euclidean and diagonal quadratic kernels this reduces to one call
of the nonsmooth term's scaled prox; otherwise an inner proximal-gradient
iteration on the (m/eps)-strongly convex smooth part is used.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import CapabilityError, InnerSolverError, RegimeError
from .problem import CompositeProblem, SolverConstants, as_point, derive_constants, objective

__all__ = [
    "KernelKind",
    "BregmanKernel",
    "BregmanStep",
    "SubproblemSolution",
    "InequalityReport",
    "euclidean_kernel",
    "diagonal_kernel",
    "spd_kernel",
    "general_kernel",
    "bregman_distance",
    "solve_subproblem",
    "check_prop21",
    "check_lemma21",
    "check_prop22",
    "check_prop24",
]

INNER_ITER_CAP = 10_000


class KernelKind(enum.Enum):
    EUCLIDEAN = "euclidean"
    DIAGONAL_QUAD = "diagonal"
    SPD_QUAD = "spd"
    GENERAL = "general"


@dataclass(frozen=True)
class BregmanKernel:
    """Strongly convex generator K with moduli m <= M."""

    kind: KernelKind
    k_eval: Callable[[np.ndarray], float]
    k_grad: Callable[[np.ndarray], np.ndarray]
    m: float
    M: float
    weights: Optional[np.ndarray] = None
    matrix: Optional[np.ndarray] = None


def euclidean_kernel(scale: float = 1.0) -> BregmanKernel:
    """K(x) = scale/2 ||x||^2."""
    if scale <= 0:
        raise ValueError("scale must be positive")
    return BregmanKernel(
        kind=KernelKind.EUCLIDEAN if scale == 1.0 else KernelKind.DIAGONAL_QUAD,
        k_eval=lambda x: 0.5 * scale * float(x @ x),
        k_grad=lambda x: scale * x,
        m=scale, M=scale,
        weights=None if scale == 1.0 else np.asarray([scale]),
    )


def diagonal_kernel(weights) -> BregmanKernel:
    """K(x) = 1/2 sum_i w_i x_i^2; m and M are the exact extreme weights."""
    w = np.asarray(weights, dtype=float)
    if np.any(w <= 0):
        raise ValueError("diagonal kernel weights must be positive")
    return BregmanKernel(
        kind=KernelKind.DIAGONAL_QUAD,
        k_eval=lambda x: 0.5 * float((w * x) @ x),
        k_grad=lambda x: w * x,
        m=float(np.min(w)), M=float(np.max(w)),
        weights=w,
    )


def spd_kernel(matrix, m: Optional[float] = None, M: Optional[float] = None) -> BregmanKernel:
    """K(x) = 1/2 x'Hx for symmetric positive definite H.

    For n <= 200 the declared (m, M) bracket is audited against the exact
    eigenvalues; omitted moduli are filled in from them.
    """
    H = np.asarray(matrix, dtype=float)
    n = H.shape[0]
    if H.shape != (n, n) or not np.allclose(H, H.T, atol=1e-12):
        raise ValueError("SPD kernel needs a symmetric square matrix")
    if n <= 200:
        ev = np.linalg.eigvalsh(H)
        lo, hi = float(ev[0]), float(ev[-1])
        if lo <= 0:
            raise ValueError(f"kernel matrix not positive definite (lambda_min={lo})")
        if m is None:
            m = lo
        if M is None:
            M = hi
        if m > lo * (1 + 1e-10) or M < hi * (1 - 1e-10):
            raise ValueError(f"declared moduli ({m}, {M}) do not bracket eigenvalues ({lo}, {hi})")
    elif m is None or M is None:
        raise ValueError("m and M must be declared for n > 200")
    return BregmanKernel(
        kind=KernelKind.SPD_QUAD,
        k_eval=lambda x: 0.5 * float(x @ (H @ x)),
        k_grad=lambda x: H @ x,
        m=float(m), M=float(M),
        matrix=H,
    )


def general_kernel(k_eval, k_grad, m: float, M: float) -> BregmanKernel:
    if not (0 < m <= M):
        raise ValueError("need 0 < m <= M")
    return BregmanKernel(kind=KernelKind.GENERAL, k_eval=k_eval, k_grad=k_grad,
                         m=float(m), M=float(M))


@dataclass(frozen=True)
class BregmanStep:
    """A kernel with its step size and the declared step bounds."""

    kernel: BregmanKernel
    eps: float
    eps_lo: Optional[float] = None
    eps_hi: Optional[float] = None

    def __post_init__(self):
        lo = self.eps if self.eps_lo is None else self.eps_lo
        hi = self.eps if self.eps_hi is None else self.eps_hi
        object.__setattr__(self, "eps_lo", float(lo))
        object.__setattr__(self, "eps_hi", float(hi))
        if not (0 < self.eps_lo <= self.eps <= self.eps_hi):
            raise ValueError(
                f"eps={self.eps} outside declared bounds [{self.eps_lo}, {self.eps_hi}]")

    def constants(self, L: float, rho: Optional[float] = None) -> SolverConstants:
        return derive_constants(self.kernel.m, self.kernel.M,
                                self.eps_lo, self.eps_hi, L, rho)


def bregman_distance(kernel: BregmanKernel, x, y) -> float:
    """D(x, y) = K(y) - K(x) - <grad K(x), y - x>."""
    x = as_point(x)
    y = as_point(y, x.size)
    d = kernel.k_eval(y) - kernel.k_eval(x) - float(np.asarray(kernel.k_grad(x)) @ (y - x))
    return max(float(d), 0.0)


@dataclass(frozen=True)
class SubproblemSolution:
    point: np.ndarray
    inner_residual: float
    inner_iters: int
    envelope_value: float
    gap_value: float
    f_x: float
    F_x: float


def _envelope_and_gap(p, step, x, t, F_x, grad_x):
    f_x = p.f(x)
    E = (f_x + grad_x @ (t - x) + p.g(t)
         + bregman_distance(step.kernel, x, t) / step.eps)
    G = (F_x - E) / step.eps
    if G < 0.0:
        if G < -1e-10 * (1.0 + abs(F_x)):
            raise InnerSolverError(f"negative Bregman gap {G} at {x}")
        G = 0.0
    return float(E), float(G), float(f_x)


def solve_subproblem(p: CompositeProblem, step: BregmanStep, x, inner_tol=None,
                     y0=None) -> SubproblemSolution:
    """One element of T_{D,eps}(x) plus the envelope and gap values at x."""
    x = as_point(x, p.dim)
    F_x = objective(p, x)
    if not math.isfinite(F_x):
        raise ValueError("subproblem center must lie in dom F")
    grad_x = p.grad_f(x)
    if inner_tol is None:
        inner_tol = 1e-10 * (1.0 + float(np.linalg.norm(x)))
    kern = step.kernel

    if kern.kind in (KernelKind.EUCLIDEAN, KernelKind.DIAGONAL_QUAD):
        # D(x, y) = 1/2 sum_i w_i (y_i - x_i)^2, so the subproblem is exactly
        # one scaled prox with weights w/eps.
        if kern.kind is KernelKind.EUCLIDEAN:
            w = np.full(p.dim, 1.0 / step.eps)
        else:
            w = np.broadcast_to(kern.weights, (p.dim,)) / step.eps
        t = p.g.scaled_prox(x, grad_x, w)
        E, G, f_x = _envelope_and_gap(p, step, x, t, F_x, grad_x)
        return SubproblemSolution(point=t, inner_residual=0.0, inner_iters=0,
                                  envelope_value=E, gap_value=G, f_x=f_x, F_x=F_x)

    # inner proximal-gradient iteration: smooth part
    #   s(y) = <grad f(x), y> + (1/eps) D(x, y)
    # is (m/eps)-strongly convex with (M/eps)-Lipschitz gradient; fixed step eps/M.
    gKx = np.asarray(kern.k_grad(x))
    tau = step.eps / kern.M
    w_prox = np.full(p.dim, 1.0 / tau)
    y = x.copy() if y0 is None else as_point(y0, p.dim)
    residual = math.inf
    for it in range(1, INNER_ITER_CAP + 1):
        grad_s = grad_x + (np.asarray(kern.k_grad(y)) - gKx) / step.eps
        y_next = p.g.scaled_prox(y - tau * grad_s, np.zeros(p.dim), w_prox)
        residual = float(np.linalg.norm(y_next - y)) / tau
        y = y_next
        if residual <= inner_tol:
            break
    else:
        it = INNER_ITER_CAP
    if residual > inner_tol:
        raise InnerSolverError(
            f"inner solver stalled at residual {residual:.3e} > {inner_tol:.3e}",
            residual=residual, iters=it)
    E, G, f_x = _envelope_and_gap(p, step, x, y, F_x, grad_x)
    return SubproblemSolution(point=y, inner_residual=residual, inner_iters=it,
                              envelope_value=E, gap_value=G, f_x=f_x, F_x=F_x)


# --------------------------------------------------------------------------
# inequality checks
# --------------------------------------------------------------------------

@dataclass
class InequalityReport:
    name: str
    passed: bool
    slacks: dict
    details: dict


def _slack_tol(scale: float) -> float:
    return 1e-8 * (1.0 + abs(scale))


def check_prop21(p: CompositeProblem, step: BregmanStep, x, solution) -> InequalityReport:
    """Descent of F(t) below both the envelope and F(x) with a = (m/eps - L)/2."""
    x = as_point(x, p.dim)
    m, L = step.kernel.m, p.f.lipschitz_L
    if L > 0 and step.eps >= m / L:
        raise RegimeError(f"eps={step.eps} >= m/L={m / L}; descent not claimed here")
    a = 0.5 * (m / step.eps - L)
    t = solution.point
    F_t = objective(p, t)
    d2 = float(np.sum((x - t) ** 2))
    slack_env = solution.envelope_value - a * d2 - F_t
    slack_obj = solution.F_x - a * d2 - F_t
    tol = _slack_tol(solution.F_x)
    passed = slack_env >= -tol and slack_obj >= -tol
    return InequalityReport(
        name="prop2.1",
        passed=passed,
        slacks={"envelope": slack_env, "objective": slack_obj},
        details={"a": a, "F_t": F_t, "step_sq": d2},
    )


def check_lemma21(p: CompositeProblem, step: BregmanStep, x, u, solution) -> InequalityReport:
    """Generalized descent inequality and the cost-to-go form."""
    x = as_point(x, p.dim)
    u = as_point(u, p.dim)
    F_u = objective(p, u)
    if not math.isfinite(F_u):
        raise ValueError("u must lie in dom F")
    c = step.constants(p.f.lipschitz_L)
    t = solution.point
    F_t = objective(p, t)
    ux2 = float(np.sum((u - x) ** 2))
    ut2 = float(np.sum((u - t) ** 2))
    xt2 = float(np.sum((x - t) ** 2))
    lhs = c.frak_a * (F_t - F_u)
    rhs = c.frak_b * ux2 - ut2 - c.frak_c * xt2
    slack_gen = rhs - lhs
    slack_ctg = c.kappa * (ut2 + xt2) - (F_t - F_u)
    scale = max(abs(lhs), abs(rhs), abs(F_t - F_u))
    tol = _slack_tol(scale)
    return InequalityReport(
        name="lemma2.1",
        passed=slack_gen >= -tol and slack_ctg >= -tol,
        slacks={"generalized": slack_gen, "cost_to_go": slack_ctg},
        details={"frak_b": c.frak_b, "frak_c": c.frak_c, "kappa": c.kappa},
    )


def check_prop22(p: CompositeProblem, step: BregmanStep, x, solution) -> InequalityReport:
    """Residual bound dist(0, dF(t)) <= (L + M/eps_lo) ||x - t||."""
    if p.analytic is None or p.analytic.subdiff_dist is None:
        raise CapabilityError("check_prop22 needs an analytic subdiff_dist oracle")
    x = as_point(x, p.dim)
    t = solution.point
    lhs = p.analytic.subdiff_dist(t)
    rhs = (p.f.lipschitz_L + step.kernel.M / step.eps_lo) * float(np.linalg.norm(x - t))
    slack = rhs - lhs
    tol = _slack_tol(max(lhs, rhs))
    return InequalityReport(name="prop2.2", passed=slack >= -tol,
                            slacks={"residual": slack},
                            details={"lhs": lhs, "rhs": rhs})


def check_prop24(p: CompositeProblem, step: BregmanStep, x, solution,
                 inner_tol=None, probe_starts: int = 5, seed: int = 0) -> InequalityReport:
    """Gap/step/residual inequalities for semiconvex g, plus a single-valuedness probe."""
    rho = p.g.semiconvex_rho
    if rho is None:
        raise RegimeError("check_prop24 needs g.semiconvex_rho")
    m, M, L = step.kernel.m, step.kernel.M, p.f.lipschitz_L
    cap = m / L if L > 0 else math.inf
    if rho > 0:
        cap = min(cap, m / rho)
    if step.eps_hi >= cap:
        raise RegimeError(f"eps_hi={step.eps_hi} >= min(m/L, m/rho)={cap}")
    if p.analytic is None or p.analytic.subdiff_dist is None:
        raise CapabilityError("check_prop24 (iii)-(iv) need a subdiff_dist oracle")
    x = as_point(x, p.dim)
    eb, el = step.eps_hi, step.eps_lo
    t = solution.point
    G = solution.gap_value
    d = float(np.linalg.norm(x - t))
    r = p.analytic.subdiff_dist(x)
    slack_ii = G - (m - eb * rho) / (2.0 * eb * eb) * d * d
    slack_iii = eb / (2.0 * el * (m - eb * rho)) * r * r - G
    slack_iv = (eb / (m - eb * rho)) * math.sqrt(eb / el) * r - d
    tol = _slack_tol(max(G, d, r))

    # single-valuedness probe: restart the inner solver from perturbed starts
    if inner_tol is None:
        inner_tol = 1e-10 * (1.0 + float(np.linalg.norm(x)))
    rng = np.random.default_rng(seed)
    spread = 0.0
    for _ in range(probe_starts):
        y0 = t + rng.standard_normal(p.dim) * (0.1 * (1.0 + d))
        alt = solve_subproblem(p, step, x, inner_tol=inner_tol, y0=y0)
        spread = max(spread, float(np.linalg.norm(alt.point - t)))
    single_valued = spread <= 10.0 * inner_tol

    passed = (slack_ii >= -tol and slack_iii >= -tol and slack_iv >= -tol
              and single_valued)
    return InequalityReport(
        name="prop2.4",
        passed=passed,
        slacks={"ii": slack_ii, "iii": slack_iii, "iv": slack_iv},
        details={"gap": G, "step_norm": d, "subdiff_dist": r,
                 "multi_start_spread": spread},
    )
