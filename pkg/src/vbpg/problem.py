"""Composite objectives F = f + g with oracle capabilities and derived solver constants.

The smooth part carries a caller-declared Lipschitz constant that is audited by
sampling, never estimated silently.  The nonsmooth part exposes a scaled
proximal operator

    scaled_prox(center, shift, w)  =  argmin_y  <shift, y> + g(y)
                                               + 1/2 * sum_i w_i (y_i - center_i)^2

which is the single primitive every subproblem solver in this package needs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DomainError, NumericError

__all__ = [
    "as_point",
    "SmoothTerm",
    "NonsmoothTerm",
    "AnalyticOracles",
    "CompositeProblem",
    "SolverConstants",
    "ValidationReport",
    "objective",
    "derive_constants",
    "validate_problem",
    "quadratic_smooth",
    "least_squares_smooth",
    "zero_smooth",
    "zero_term",
    "l1_term",
    "box_indicator_term",
    "mcp_term",
    "power_iteration_lmax",
]


def as_point(x, dim: Optional[int] = None) -> np.ndarray:
    """Coerce to a finite float64 vector, rejecting NaN/Inf entries."""
    p = np.atleast_1d(np.asarray(x, dtype=float))
    if p.ndim != 1:
        raise ValueError(f"point must be a vector, got shape {p.shape}")
    if dim is not None and p.size != dim:
        raise ValueError(f"dimension mismatch: expected {dim}, got {p.size}")
    if not np.all(np.isfinite(p)):
        raise DomainError(f"non-finite entries in point {p}")
    return p


@dataclass(frozen=True)
class SmoothTerm:
    """Differentiable term with an L-Lipschitz gradient on its domain box.

    ``quadratic`` carries (Q, b) when f(x) = 1/2 x'Qx - b'x (+ const); block
    solvers need the Hessian blocks explicitly.
    """

    fn: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]
    lipschitz_L: float
    domain_box: Optional[tuple] = None  # (lo, hi) arrays; None means all of R^n
    quadratic: Optional[tuple] = None

    def __call__(self, x: np.ndarray) -> float:
        return float(self.fn(x))


@dataclass(frozen=True)
class NonsmoothTerm:
    """Proper lsc term with a scaled proximal operator.

    ``fn`` may return +inf outside dom g.  ``min_norm_subgrad(x, shift)``
    returns dist(0, shift + prox-subdifferential of g at x) when available.
    """

    fn: Callable[[np.ndarray], float]
    scaled_prox: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]
    semiconvex_rho: Optional[float] = None
    min_norm_subgrad: Optional[Callable[[np.ndarray, np.ndarray], float]] = None
    restrict: Optional[Callable[[np.ndarray], "NonsmoothTerm"]] = None

    def __call__(self, x: np.ndarray) -> float:
        return float(self.fn(x))


@dataclass(frozen=True)
class AnalyticOracles:
    """Hand-supplied ground truth for a problem instance."""

    critical_points: Optional[Sequence[np.ndarray]] = None
    project_critical: Optional[Callable[[np.ndarray], np.ndarray]] = None
    optimal_value: Optional[float] = None
    sublevel_project: Optional[Callable[[np.ndarray, float], np.ndarray]] = None
    subdiff_dist: Optional[Callable[[np.ndarray], float]] = None


@dataclass(frozen=True)
class CompositeProblem:
    """The objective F = f + g together with optional analytic oracles."""

    f: SmoothTerm
    g: NonsmoothTerm
    dim: int
    analytic: Optional[AnalyticOracles] = None

    def grad_f(self, x: np.ndarray) -> np.ndarray:
        gr = np.asarray(self.f.grad(x), dtype=float)
        if not np.all(np.isfinite(gr)):
            raise NumericError(f"non-finite gradient of smooth term at {x}")
        return gr


def objective(p: CompositeProblem, x) -> float:
    """F(x) = f(x) + g(x); +inf is allowed when x is outside dom g."""
    x = as_point(x, p.dim)
    fv = p.f(x)
    if math.isnan(fv):
        raise NumericError(f"smooth term returned NaN at {x}")
    gv = p.g(x)
    if math.isnan(gv):
        raise NumericError(f"nonsmooth term returned NaN at {x}")
    return fv + gv


# --------------------------------------------------------------------------
# solver constants
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SolverConstants:
    """Constants derived from the kernel moduli, step bounds and L.

    ``a`` is evaluated at the worst-case step eps_hi so it lower-bounds the
    per-iteration descent coefficient for every admissible step.
    """

    m: float
    M: float
    eps_lo: float
    eps_hi: float
    L: float
    rho: Optional[float]
    a: float
    frak_a: float
    frak_b: float
    frak_c: float
    kappa: float
    c0: float
    descent_regime: bool   # a > 0, i.e. eps_hi < m/L
    strict_regime: bool    # frak_c > 0, i.e. eps_hi < m/(L+2)

    def a_at(self, eps: float) -> float:
        return 0.5 * (self.m / eps - self.L)


def derive_constants(m, M, eps_lo, eps_hi, L, rho=None) -> SolverConstants:
    """Populate every derived constant exactly from its defining formula."""
    if not (m > 0 and M >= m):
        raise ValueError(f"need 0 < m <= M, got m={m}, M={M}")
    if not (0 < eps_lo <= eps_hi):
        raise ValueError(f"need 0 < eps_lo <= eps_hi, got {eps_lo}, {eps_hi}")
    if L < 0:
        raise ValueError(f"need L >= 0, got {L}")
    a = 0.5 * (m / eps_hi - L)
    frak_a = 2.0
    frak_b = M / eps_lo + 2.0 + 3.0 * L
    frak_c = m / eps_hi - (L + 2.0)
    kappa = max((2.0 * frak_b - 1.0) / frak_a, (2.0 * frak_b - frak_c) / frak_a)
    c0 = 1.5 * L + M / (2.0 * eps_lo)
    return SolverConstants(
        m=float(m), M=float(M), eps_lo=float(eps_lo), eps_hi=float(eps_hi),
        L=float(L), rho=None if rho is None else float(rho),
        a=a, frak_a=frak_a, frak_b=frak_b, frak_c=frak_c, kappa=kappa, c0=c0,
        descent_regime=a > 0.0, strict_regime=frak_c > 0.0,
    )


# --------------------------------------------------------------------------
# validation
# --------------------------------------------------------------------------

@dataclass
class ValidationReport:
    n_samples: int
    violations: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations


def validate_problem(p: CompositeProblem, box, n_samples: int, seed: int) -> ValidationReport:
    """Sample-audit the declared Lipschitz constant and the descent property.

    ``box`` is a pair (lo, hi) of vectors.  Each sampled pair (x, y) is checked
    against the Lipschitz bound on the gradient and against the quadratic upper
    model of f; violations beyond 1e-9 * (1 + magnitudes) are reported.
    """
    if n_samples < 2:
        raise ValueError("need at least 2 samples")
    lo, hi = (as_point(box[0], p.dim), as_point(box[1], p.dim))
    rng = np.random.default_rng(seed)
    pts = rng.uniform(lo, hi, size=(n_samples, p.dim))
    L = p.f.lipschitz_L
    report = ValidationReport(n_samples=n_samples)
    vals = np.empty(n_samples)
    grads = np.empty((n_samples, p.dim))
    for i, x in enumerate(pts):
        v = p.f(x)
        if not math.isfinite(v):
            raise DomainError(f"non-finite smooth value {v} at {x}")
        vals[i] = v
        grads[i] = p.grad_f(x)
    for i in range(n_samples - 1):
        x, y = pts[i], pts[i + 1]
        dx = np.linalg.norm(x - y)
        dg = np.linalg.norm(grads[i] - grads[i + 1])
        tol = 1e-9 * (1.0 + dg + L * dx)
        if dg > L * dx + tol:
            report.violations.append(("lipschitz", x.copy(), y.copy(), dg, L * dx))
        model = vals[i] + grads[i] @ (y - x) + 0.5 * L * dx * dx
        tol = 1e-9 * (1.0 + abs(vals[i + 1]) + abs(model))
        if vals[i + 1] > model + tol:
            report.violations.append(("descent", x.copy(), y.copy(), vals[i + 1], model))
    return report


# --------------------------------------------------------------------------
# smooth term factories
# --------------------------------------------------------------------------

def quadratic_smooth(Q, b=None, const: float = 0.0) -> SmoothTerm:
    """f(x) = 1/2 x'Qx - b'x + const with Q symmetric PSD."""
    Q = np.asarray(Q, dtype=float)
    n = Q.shape[0]
    b = np.zeros(n) if b is None else np.asarray(b, dtype=float)
    L = float(np.max(np.abs(np.linalg.eigvalsh(Q))))

    def fn(x):
        return 0.5 * x @ (Q @ x) - b @ x + const

    def grad(x):
        return Q @ x - b

    return SmoothTerm(fn=fn, grad=grad, lipschitz_L=L, quadratic=(Q, b))


def power_iteration_lmax(mat_vec, n, iters=500, tol=1e-12, seed=0) -> float:
    """Largest eigenvalue of a symmetric PSD operator by power iteration."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iters):
        w = mat_vec(v)
        lam_new = float(v @ w)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
        if abs(lam_new - lam) <= tol * (1.0 + abs(lam_new)):
            lam = lam_new
            break
        lam = lam_new
    return lam


def least_squares_smooth(A, b) -> SmoothTerm:
    """f(x) = 1/2 ||Ax - b||^2, L = lambda_max(A'A) by power iteration."""
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    n = A.shape[1]
    L = power_iteration_lmax(lambda v: A.T @ (A @ v), n)
    # guard against the tiny downward bias of a truncated power iteration
    L *= 1.0 + 1e-9

    def fn(x):
        r = A @ x - b
        return 0.5 * r @ r

    def grad(x):
        return A.T @ (A @ x - b)

    return SmoothTerm(fn=fn, grad=grad, lipschitz_L=L, quadratic=(A.T @ A, A.T @ b))


def zero_smooth() -> SmoothTerm:
    return SmoothTerm(fn=lambda x: 0.0, grad=np.zeros_like, lipschitz_L=0.0)


# --------------------------------------------------------------------------
# nonsmooth term factories
# --------------------------------------------------------------------------

def zero_term() -> NonsmoothTerm:
    def prox(center, shift, w):
        return center - shift / w

    def mns(x, shift):
        return float(np.linalg.norm(shift))

    return NonsmoothTerm(fn=lambda x: 0.0, scaled_prox=prox,
                         semiconvex_rho=0.0, min_norm_subgrad=mns,
                         restrict=lambda idx: zero_term())


def l1_term(lam: float) -> NonsmoothTerm:
    """g(x) = lam * ||x||_1."""

    def fn(x):
        return lam * float(np.sum(np.abs(x)))

    def prox(center, shift, w):
        v = center - shift / w
        t = lam / w
        return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)

    def mns(x, shift):
        r = np.where(x != 0.0, shift + lam * np.sign(x),
                     np.maximum(np.abs(shift) - lam, 0.0))
        return float(np.linalg.norm(r))

    return NonsmoothTerm(fn=fn, scaled_prox=prox, semiconvex_rho=0.0,
                         min_norm_subgrad=mns, restrict=lambda idx: l1_term(lam))


def box_indicator_term(lo, hi) -> NonsmoothTerm:
    """Indicator of the box [lo, hi]."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)

    def fn(x):
        return 0.0 if np.all(x >= lo - 1e-14) and np.all(x <= hi + 1e-14) else math.inf

    def prox(center, shift, w):
        return np.clip(center - shift / w, lo, hi)

    def mns(x, shift):
        # normal cone of the box: (-inf,0] at the lower face, [0,inf) at the upper
        r = np.abs(shift).astype(float)
        at_lo = np.isclose(x, lo)
        at_hi = np.isclose(x, hi)
        r = np.where(at_lo, np.maximum(-shift, 0.0), r)
        r = np.where(at_hi, np.maximum(shift, 0.0), r)
        r = np.where(at_lo & at_hi, 0.0, r)
        return float(np.linalg.norm(r))

    return NonsmoothTerm(fn=fn, scaled_prox=prox, semiconvex_rho=0.0,
                         min_norm_subgrad=mns,
                         restrict=lambda idx: box_indicator_term(lo[idx], hi[idx]))


def mcp_term(lam: float, b: float) -> NonsmoothTerm:
    """Minimax concave penalty, g(x) = sum_i mcp(x_i).

    mcp(t) = lam|t| - t^2/(2b) for |t| <= lam*b, else lam^2 b / 2.
    Semiconvex with modulus 1/b; the scaled prox is the firm threshold and
    needs every weight strictly above 1/b.
    """
    rho = 1.0 / b

    def fn(x):
        ax = np.abs(x)
        inner = lam * ax - ax * ax / (2.0 * b)
        return float(np.sum(np.where(ax <= lam * b, inner, 0.5 * lam * lam * b)))

    def prox(center, shift, w):
        w = np.broadcast_to(np.asarray(w, dtype=float), center.shape)
        if np.any(w <= rho):
            raise ValueError("MCP scaled prox needs all weights > 1/b")
        v = center - shift / w
        av = np.abs(v)
        y_mid = np.sign(v) * (w * av - lam) / (w - rho)
        out = np.where(av >= lam * b, v, np.where(w * av > lam, y_mid, 0.0))
        return out

    def mns(x, shift):
        ax = np.abs(x)
        d = np.where(ax > lam * b, np.abs(shift),
                     np.abs(shift + lam * np.sign(x) - x / b))
        d = np.where(x == 0.0, np.maximum(np.abs(shift) - lam, 0.0), d)
        return float(np.linalg.norm(d))

    return NonsmoothTerm(fn=fn, scaled_prox=prox, semiconvex_rho=rho,
                         min_norm_subgrad=mns, restrict=lambda idx: mcp_term(lam, b))
