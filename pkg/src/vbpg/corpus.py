"""Built-in problem instances with analytic ground truth.

Three raw piecewise functions exercise the refutation machinery (a cusp-shaped
piecewise cubic in two variables, used twice with different witness sequences,
and a one-dimensional staircase); the remaining entries are composite problems
whose minimizers, critical sets and subdifferential distances are available in
closed form or from a deterministic high-accuracy reference solve at load time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .diagnostics import (AnalyticDistanceOracle, ProjectionOracle, Region,
                          SolutionSetOracle)
from .errors import ConfigError, RegimeError
from .problem import (AnalyticOracles, CompositeProblem, SmoothTerm, as_point,
                      l1_term, least_squares_smooth, mcp_term, objective,
                      quadratic_smooth, validate_problem, zero_term)

__all__ = [
    "RawFunction",
    "CorpusEntry",
    "load_corpus",
    "list_corpus_ids",
    "staircase_subdiff_dist",
    "ex53_prox_reference",
]


@dataclass(frozen=True)
class RawFunction:
    """A piecewise objective with explicit seam handling, outside the f+g split.

    ``piecewise_grad`` is only defined off the seam set; ``subdiff_dist`` is the
    hand-derived distance to zero of the proximal subdifferential, including the
    interval subdifferential values on the seam.
    """

    fn: Callable[[np.ndarray], float]
    piecewise_grad: Callable[[np.ndarray], np.ndarray]
    seam: Callable[[np.ndarray], bool]
    subdiff_dist: Callable[[np.ndarray], float]
    dim: int


@dataclass
class CorpusEntry:
    id: str
    problem: object                  # CompositeProblem or RawFunction
    analytic: Optional[AnalyticOracles]
    regions: Sequence[Region]
    box: tuple
    notes: str
    extras: dict = field(default_factory=dict)

    @property
    def composite(self) -> Optional[CompositeProblem]:
        return self.problem if isinstance(self.problem, CompositeProblem) else None

    @property
    def raw(self) -> Optional[RawFunction]:
        return self.problem if isinstance(self.problem, RawFunction) else None


# --------------------------------------------------------------------------
# shared reference solvers
# --------------------------------------------------------------------------

def _prox_gradient_reference(p: CompositeProblem, x0, tol=1e-14,
                             max_iters=500_000) -> np.ndarray:
    """High-accuracy forward-backward solve with fixed step 1/L."""
    x = as_point(x0, p.dim)
    L = p.f.lipschitz_L
    w = np.full(p.dim, L)
    for _ in range(max_iters):
        x_next = p.g.scaled_prox(x, p.grad_f(x), w)
        if np.linalg.norm(x_next - x) <= tol * (1.0 + np.linalg.norm(x)):
            return x_next
        x = x_next
    return x


def _audit_composite(entry: CorpusEntry) -> None:
    p = entry.composite
    report = validate_problem(p, entry.box, n_samples=50, seed=0)
    if not report.passed:
        raise ValueError(f"corpus entry {entry.id}: declared constants fail "
                         f"their sample audit: {report.violations[0]}")


# --------------------------------------------------------------------------
# cusp-shaped piecewise cubic (two entries share it)
# --------------------------------------------------------------------------

def _cusp_fn(x):
    x1, x2 = float(x[0]), float(x[1])
    return x1 * x1 - x2 ** 3 if x2 > 0 else x2 ** 3


def _cusp_grad(x):
    x1, x2 = float(x[0]), float(x[1])
    if x2 > 0:
        return np.array([2.0 * x1, -3.0 * x2 * x2])
    return np.array([0.0, 3.0 * x2 * x2])


def _cusp_subdiff_dist(x):
    x1, x2 = float(x[0]), float(x[1])
    if x2 > 0:
        return math.hypot(2.0 * x1, 3.0 * x2 * x2)
    return 3.0 * x2 * x2


def _cusp_sublevel_dist(x, F_bar):
    """Exact distance to [F <= 0]: the lower half-plane plus the cusp region
    {x1^2 <= x2^3, x2 >= 0}; only the zero level is supported."""
    if abs(F_bar) > 1e-15:
        raise ValueError("analytic sublevel distance only available at level 0")
    x1, x2 = float(x[0]), float(x[1])
    if _cusp_fn(x) <= 0.0:
        return 0.0
    a = abs(x1)
    # nearest point is either the foot (x1, 0) on the half-plane or a point
    # (t^{3/2}, t) on the cusp boundary curve
    d_half = x2
    hi = x2 + a ** (2.0 / 3.0) + 1.0
    res = minimize_scalar(
        lambda t: (a - t ** 1.5) ** 2 + (x2 - t) ** 2,
        bounds=(0.0, hi), method="bounded",
        options={"xatol": 1e-14})
    d_curve = math.sqrt(max(float(res.fun), 0.0))
    return min(d_half, d_curve)


def _cusp_raw() -> RawFunction:
    return RawFunction(fn=_cusp_fn, piecewise_grad=_cusp_grad,
                       seam=lambda x: float(x[1]) == 0.0,
                       subdiff_dist=_cusp_subdiff_dist, dim=2)


def _cusp_entry(entry_id: str) -> CorpusEntry:
    raw = _cusp_raw()
    origin = np.zeros(2)
    analytic = AnalyticOracles(
        critical_points=[origin],
        project_critical=lambda x: origin,
        subdiff_dist=_cusp_subdiff_dist)
    region = Region(x_bar=origin, eta=0.3, nu=0.1, F_bar=0.0)
    extras = {
        "sublevel_oracle": AnalyticDistanceOracle(_cusp_sublevel_dist),
        "crit_dist": lambda x: float(np.linalg.norm(x)),
    }
    if entry_id == "EX_5_1":
        ns = 2.0 ** np.arange(1, 19)
        extras["witness_points"] = [np.array([n ** -1.25, 1.0 / n]) for n in ns]
        notes = ("cusp cubic with a flat subdifferential direction along "
                 "x_n=(n^-5/4, 1/n); refutes weak metric subregularity while "
                 "keeping the level-set subdifferential bound with constant 1/2")
    else:
        ns = np.arange(2, 51, dtype=float)
        extras["witness_points"] = [np.array([1.0 / n, 1.0 / (3.0 * n * n)])
                                    for n in ns]
        extras["prox_map"] = ex53_prox_reference
        notes = ("cusp cubic probed along x_n=(1/n, 1/(3n^2)), where the "
                 "Euclidean proximal step lands on (x_1, 0); refutes the "
                 "critical-set proximal error bound")
    return CorpusEntry(id=entry_id, problem=raw, analytic=analytic,
                       regions=[region], box=(np.array([-0.5, -0.5]),
                                              np.array([0.5, 0.5])),
                       notes=notes, extras=extras)


def ex53_prox_reference(x) -> np.ndarray:
    """Euclidean proximal point of the cusp cubic at unit step, near the origin.

    Valid on the wedge x1 > 2*x2 > 0, where the minimizer of
    F(y) + 1/2||y - x||^2 is exactly (x1, 0).
    """
    x = as_point(x, 2)
    if not (x[0] > 2.0 * x[1] > 0.0):
        raise RegimeError(f"prox reference needs x1 > 2*x2 > 0, got {x}")
    return np.array([x[0], 0.0])


# --------------------------------------------------------------------------
# staircase
# --------------------------------------------------------------------------

def _stair_branch(x: float) -> int:
    """Index n >= 3 with x in (1/n, 1/(n-1)], robust to roundoff at breakpoints."""
    r = 1.0 / x
    nearest = round(r)
    if abs(r - nearest) <= 1e-9 * max(1.0, abs(r)):
        m = int(nearest)
    else:
        m = int(math.floor(r))
    return m + 1


def _stair_fn(x):
    t = float(np.atleast_1d(x)[0])
    if t <= 0.0:
        return 0.0
    if t > 0.5:
        return t * t + 0.25
    n = _stair_branch(t)
    return t * t + 1.0 / n - 1.0 / (n * n)


def staircase_subdiff_dist(x) -> float:
    """dist(0, subdifferential) of the staircase: 0 on the flat piece, 2x to the
    right (the subdifferential at a breakpoint is [2x, inf), whose minimum-norm
    element is still 2x)."""
    t = float(np.atleast_1d(x)[0])
    return 0.0 if t <= 0.0 else 2.0 * t


def _stair_is_breakpoint(t: float) -> bool:
    if t <= 0.0 or t > 0.5:
        return t == 0.0
    r = 1.0 / t
    return abs(r - round(r)) <= 1e-9 * max(1.0, abs(r))


def _stair_entry() -> CorpusEntry:
    raw = RawFunction(
        fn=_stair_fn,
        piecewise_grad=lambda x: np.array(
            [0.0 if float(x[0]) < 0 else 2.0 * float(x[0])]),
        seam=lambda x: _stair_is_breakpoint(float(x[0])),
        subdiff_dist=staircase_subdiff_dist, dim=1)
    origin = np.zeros(1)
    analytic = AnalyticOracles(
        critical_points=None,
        project_critical=lambda x: np.minimum(x, 0.0),
        subdiff_dist=staircase_subdiff_dist)
    region = Region(x_bar=origin, eta=0.4, nu=0.4, F_bar=0.0)
    extras = {
        "sublevel_oracle": AnalyticDistanceOracle(
            lambda x, F_bar: max(float(x[0]), 0.0)),
        "crit_dist": lambda x: max(float(x[0]), 0.0),
        "witness_points": [np.array([1.0 / (n - 1.0)]) for n in range(3, 201)],
    }
    return CorpusEntry(
        id="EX_5_2", problem=raw, analytic=analytic, regions=[region],
        box=(np.array([-0.5]), np.array([0.5])),
        notes=("one-dimensional staircase of parabolic arcs with jumps "
               "accumulating at 0; flat and critical on (-inf, 0], keeps the "
               "level-set subdifferential bound but fails every "
               "Kurdyka-Lojasiewicz exponent"),
        extras=extras)


# --------------------------------------------------------------------------
# quadratic families
# --------------------------------------------------------------------------

def _ellipsoid_project(qdiag: np.ndarray, x: np.ndarray, level: float) -> np.ndarray:
    """Projection of x onto {y : 1/2 sum_i q_i y_i^2 <= level} for level >= 0."""
    if level <= 0.0:
        return np.zeros_like(x)

    def excess(t):
        return float(np.sum(qdiag * x * x / (1.0 + t * qdiag) ** 2)) - 2.0 * level

    if excess(0.0) <= 0.0:
        return x.copy()
    t_hi = 1.0
    while excess(t_hi) > 0.0:
        t_hi *= 2.0
    t = brentq(excess, 0.0, t_hi, xtol=1e-15, rtol=8.9e-16)
    return x / (1.0 + t * qdiag)


def _quad_sc_entry(n: int = 2, kappa: float = 10.0) -> CorpusEntry:
    qdiag = np.linspace(1.0, kappa, n)
    f = quadratic_smooth(np.diag(qdiag))
    p = CompositeProblem(
        f=f, g=zero_term(), dim=n,
        analytic=AnalyticOracles(
            critical_points=[np.zeros(n)],
            project_critical=lambda x: np.zeros(n),
            optimal_value=0.0,
            sublevel_project=lambda x, lvl: _ellipsoid_project(qdiag, x, lvl),
            subdiff_dist=lambda x: float(np.linalg.norm(qdiag * x))))
    region = Region(x_bar=np.zeros(n), eta=1.0, nu=0.5, F_bar=0.0)
    entry = CorpusEntry(
        id="QUAD_SC", problem=p,
        analytic=p.analytic, regions=[region],
        box=(-1.5 * np.ones(n), 1.5 * np.ones(n)),
        notes=f"strongly convex diagonal quadratic, condition number {kappa}",
        extras={
            "sublevel_oracle": ProjectionOracle(
                lambda x, lvl: _ellipsoid_project(qdiag, x, lvl)),
            "mu": 1.0,
            "qdiag": qdiag,
        })
    _audit_composite(entry)
    return entry


def _soft(t, lam):
    return math.copysign(max(abs(t) - lam, 0.0), t)


def _quad_l1_entry(n: int = 4, lam: float = 0.1) -> CorpusEntry:
    qdiag = np.linspace(1.0, 3.0, n)
    bvec = np.ones(n)
    f = quadratic_smooth(np.diag(qdiag), bvec)
    g = l1_term(lam)
    # coordinatewise closed form: x*_i = soft(b_i, lam) / q_i
    x_star = np.array([_soft(b, lam) / q for b, q in zip(bvec, qdiag)])
    p = CompositeProblem(f=f, g=g, dim=n)
    F_star = objective(p, x_star)
    analytic = AnalyticOracles(
        critical_points=[x_star],
        project_critical=lambda x: x_star,
        optimal_value=F_star,
        subdiff_dist=lambda x: g.min_norm_subgrad(x, qdiag * x - bvec))
    p = CompositeProblem(f=f, g=g, dim=n, analytic=analytic)
    region = Region(x_bar=x_star, eta=0.5, nu=0.2, F_bar=F_star)
    entry = CorpusEntry(
        id="QUAD_L1", problem=p, analytic=analytic, regions=[region],
        box=(x_star - 1.0, x_star + 1.0),
        notes="diagonal strongly convex quadratic with l1 penalty, "
              "closed-form minimizer",
        extras={"sublevel_oracle": SolutionSetOracle([x_star]),
                "x_star": x_star, "mu": 1.0})
    _audit_composite(entry)
    return entry


def _mcp_scalar_min(q: float, c: float, lam: float, b: float) -> float:
    """argmin of 1/2 q y^2 - c y + mcp(y) for q > 1/b (strictly convex)."""
    rho = 1.0 / b

    def mcp(t):
        at = abs(t)
        return lam * at - at * at / (2.0 * b) if at <= lam * b else 0.5 * lam * lam * b

    def h(y):
        return 0.5 * q * y * y - c * y + mcp(y)

    cands = []
    if abs(c) <= lam:
        cands.append(0.0)
    for s in (1.0, -1.0):
        y = (c - lam * s) / (q - rho)
        if s * y > 0 and abs(y) <= lam * b:
            cands.append(y)
        y = c / q
        if s * y > 0 and abs(y) >= lam * b:
            cands.append(y)
    if not cands:
        cands.append(0.0)
    return min(cands, key=h)


def _quad_mcp_entry(n: int = 2, lam: float = 0.3, rho: float = 0.5) -> CorpusEntry:
    if rho <= 0:
        raise ValueError("rho must be positive")
    b_mcp = 1.0 / rho
    qdiag = np.linspace(1.0, 2.0, n)
    if qdiag[0] <= rho:
        raise ValueError("need the smallest curvature above rho")
    cvec = 0.5 * np.ones(n)
    f = quadratic_smooth(np.diag(qdiag), cvec)
    g = mcp_term(lam, b_mcp)
    x_star = np.array([_mcp_scalar_min(q, c, lam, b_mcp)
                       for q, c in zip(qdiag, cvec)])
    p = CompositeProblem(f=f, g=g, dim=n)
    F_star = objective(p, x_star)
    analytic = AnalyticOracles(
        critical_points=[x_star],
        project_critical=lambda x: x_star,
        optimal_value=F_star,
        subdiff_dist=lambda x: g.min_norm_subgrad(x, qdiag * x - cvec))
    p = CompositeProblem(f=f, g=g, dim=n, analytic=analytic)
    region = Region(x_bar=x_star, eta=0.4, nu=0.2, F_bar=F_star)
    entry = CorpusEntry(
        id="QUAD_MCP", problem=p, analytic=analytic, regions=[region],
        box=(x_star - 1.0, x_star + 1.0),
        notes="diagonal quadratic with minimax concave penalty; the canonical "
              "semiconvex instance",
        extras={"sublevel_oracle": SolutionSetOracle([x_star]),
                "x_star": x_star, "rho": rho,
                "mu_lwsc_analytic": float(qdiag[0])})
    _audit_composite(entry)
    return entry


def _lasso_entry(m_rows: int = 30, n: int = 10, lam: float = 0.1,
                 seed: int = 0) -> CorpusEntry:
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((m_rows, n)) / math.sqrt(m_rows)
    b = rng.standard_normal(m_rows)
    f = least_squares_smooth(A, b)
    g = l1_term(lam)
    p = CompositeProblem(f=f, g=g, dim=n)
    x_star = _prox_gradient_reference(p, np.zeros(n))
    F_star = objective(p, x_star)
    AtA, Atb = f.quadratic
    analytic = AnalyticOracles(
        critical_points=[x_star],
        project_critical=lambda x: x_star,
        optimal_value=F_star,
        subdiff_dist=lambda x: g.min_norm_subgrad(x, AtA @ x - Atb))
    p = CompositeProblem(f=f, g=g, dim=n, analytic=analytic)
    mu = float(np.linalg.eigvalsh(AtA)[0])
    region = Region(x_bar=x_star, eta=0.5, nu=0.2, F_bar=F_star)
    entry = CorpusEntry(
        id="LASSO", problem=p, analytic=analytic, regions=[region],
        box=(x_star - 1.0, x_star + 1.0),
        notes=f"seeded Gaussian least squares ({m_rows}x{n}) with l1 penalty; "
              "overdetermined so the minimizer is unique",
        extras={"sublevel_oracle": SolutionSetOracle([x_star]),
                "x_star": x_star, "mu": mu})
    _audit_composite(entry)
    return entry


def _two_well_entry() -> CorpusEntry:
    # quartic with two wells at different depths plus the separating local max
    coeffs = [4.0, 0.0, -4.0, 0.5]      # derivative of (x^2-1)^2 + x/2
    roots = np.sort(np.real(np.roots(coeffs)))

    def fn(x):
        t = float(np.atleast_1d(x)[0])
        return (t * t - 1.0) ** 2 + 0.5 * t

    def grad(x):
        t = float(np.atleast_1d(x)[0])
        return np.array([4.0 * t ** 3 - 4.0 * t + 0.5])

    crits = [np.array([r]) for r in roots]

    def project(x):
        t = float(np.atleast_1d(x)[0])
        return crits[int(np.argmin([abs(t - r) for r in roots]))]

    f = SmoothTerm(fn=fn, grad=grad, lipschitz_L=27.0,
                   domain_box=(np.array([-1.6]), np.array([1.6])))
    values = [fn(c) for c in crits]
    i_min = int(np.argmin(values))
    analytic = AnalyticOracles(
        critical_points=crits,
        project_critical=project,
        optimal_value=float(values[i_min]),
        subdiff_dist=lambda x: float(np.linalg.norm(grad(x))))
    p = CompositeProblem(f=f, g=zero_term(), dim=1, analytic=analytic)
    x_low = crits[i_min]
    region = Region(x_bar=x_low, eta=0.3, nu=0.3, F_bar=float(values[i_min]))
    entry = CorpusEntry(
        id="TWO_WELL", problem=p, analytic=analytic, regions=[region],
        box=(np.array([-1.6]), np.array([1.6])),
        notes="one-dimensional quartic with two local minima at distinct "
              "values; the higher-valued critical points break the local "
              "value-dominance assumption by construction",
        extras={"critical_values": values, "lowest_index": i_min,
                "sublevel_oracle": SolutionSetOracle([x_low])})
    _audit_composite(entry)
    return entry


def _jacobi_block_entry(n: int = 40, n_blocks: int = 4, seed: int = 7,
                        lam: float = 0.1) -> CorpusEntry:
    if n % n_blocks != 0:
        raise ValueError("n must be divisible by n_blocks")
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n))
    Q = A.T @ A / n + np.eye(n)
    bvec = rng.standard_normal(n)
    f = quadratic_smooth(Q, bvec)
    g = l1_term(lam)
    p = CompositeProblem(f=f, g=g, dim=n)
    x_star = _prox_gradient_reference(p, np.zeros(n))
    F_star = objective(p, x_star)
    analytic = AnalyticOracles(
        critical_points=[x_star],
        project_critical=lambda x: x_star,
        optimal_value=F_star,
        subdiff_dist=lambda x: g.min_norm_subgrad(x, Q @ x - bvec))
    p = CompositeProblem(f=f, g=g, dim=n, analytic=analytic)
    size = n // n_blocks
    blocks = [np.arange(i * size, (i + 1) * size) for i in range(n_blocks)]
    region = Region(x_bar=x_star, eta=0.25, nu=0.2, F_bar=F_star)
    entry = CorpusEntry(
        id="JACOBI_BLOCK", problem=p, analytic=analytic, regions=[region],
        box=(x_star - 1.0, x_star + 1.0),
        notes=f"dense SPD quadratic with l1 penalty split into {n_blocks} "
              "coordinate blocks for the parallel block solver",
        extras={"sublevel_oracle": SolutionSetOracle([x_star]),
                "x_star": x_star, "blocks": blocks,
                "c_weights": np.ones(n_blocks)})
    _audit_composite(entry)
    return entry


# --------------------------------------------------------------------------
# registry
# --------------------------------------------------------------------------

_REGISTRY = {
    "EX_5_1": lambda **kw: _cusp_entry("EX_5_1"),
    "EX_5_2": lambda **kw: _stair_entry(),
    "EX_5_3": lambda **kw: _cusp_entry("EX_5_3"),
    "QUAD_SC": _quad_sc_entry,
    "LASSO": _lasso_entry,
    "QUAD_L1": _quad_l1_entry,
    "QUAD_MCP": _quad_mcp_entry,
    "TWO_WELL": lambda **kw: _two_well_entry(),
    "JACOBI_BLOCK": _jacobi_block_entry,
}


def list_corpus_ids():
    return sorted(_REGISTRY)


def load_corpus(entry_id: str, **params) -> CorpusEntry:
    """Build a fully-wired corpus entry; deterministic given its parameters."""
    if entry_id not in _REGISTRY:
        raise ConfigError(f"unknown corpus id {entry_id!r}; "
                          f"valid ids: {', '.join(list_corpus_ids())}")
    return _REGISTRY[entry_id](**params)
