"""Sample-based certification and refutation of error-bound conditions.

Everything here is desk-scale evidence, not proof: certificates over a region
are computed from seeded rejection samples and labeled CERTIFIED_ON_SAMPLES,
refutations come either from a concrete witness point or from a designated
witness sequence whose ratio blows up (or vanishes) monotonically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.spatial import cKDTree

from .bregman import BregmanStep, InequalityReport, euclidean_kernel, solve_subproblem
from .errors import (CapabilityError, InsufficientSamplesError, RegimeError,
                     TargetValueError)
from .problem import CompositeProblem, as_point, objective
from .solver import SolverTrace, VbpgConfig, run_vbpg

__all__ = [
    "Region",
    "EBCertificate",
    "SolutionSetOracle",
    "AnalyticDistanceOracle",
    "ProjectionOracle",
    "GridOracle",
    "sublevel_distance",
    "sample_region",
    "sample_ball",
    "evaluate_F",
    "subdiff_dist_of",
    "certify_level_set_subdiff_eb",
    "certify_level_set_bregman_eb",
    "certify_bregman_prox_eb",
    "certify_weak_metric_subreg",
    "certify_luo_tseng",
    "certify_kl",
    "certify_bp_gap",
    "certify_prox_pl",
    "check_strong_ls_subdiff",
    "check_prop53",
    "measure_levelset_contraction",
    "ContractionReport",
    "check_sufficient_conditions",
    "ConditionReport",
    "check_prop61_prediction",
    "scan_counterexample",
    "ScanReport",
    "check_assumption_h",
    "estimate_exponent",
    "prop41_theta",
    "prop41_shrunk_region",
    "thm41_c1_prime",
    "thm41_theta_interval",
    "prop54ii_kl_constant",
]

CERTIFIED = "CERTIFIED_ON_SAMPLES"
REFUTED = "REFUTED"


# --------------------------------------------------------------------------
# regions, sampling, generic evaluation
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Region:
    """The ball-and-value-band set: ||x - x_bar|| < eta and F_bar < F(x) < F_bar + nu."""

    x_bar: np.ndarray
    eta: float
    nu: float
    F_bar: float

    def contains(self, x: np.ndarray, F_x: float) -> bool:
        return (np.linalg.norm(x - self.x_bar) < self.eta
                and self.F_bar < F_x < self.F_bar + self.nu)

    def half_radius(self) -> "Region":
        return Region(self.x_bar, self.eta / 2.0, self.nu, self.F_bar)

    def to_dict(self) -> dict:
        return {"x_bar": [float(v) for v in self.x_bar], "eta": self.eta,
                "nu": self.nu, "F_bar": self.F_bar}


def evaluate_F(p, x) -> float:
    """Objective value for either a composite problem or a raw function."""
    if isinstance(p, CompositeProblem):
        return objective(p, x)
    return float(p.fn(np.asarray(x, dtype=float)))


def _dim_of(p) -> int:
    return p.dim


def subdiff_dist_of(p) -> Callable[[np.ndarray], float]:
    """dist(0, proximal subdifferential of F) oracle, or CapabilityError."""
    if isinstance(p, CompositeProblem):
        if p.analytic is not None and p.analytic.subdiff_dist is not None:
            return p.analytic.subdiff_dist
        if p.g.min_norm_subgrad is not None:
            return lambda x: p.g.min_norm_subgrad(x, p.grad_f(x))
        raise CapabilityError("problem has no subdifferential-distance oracle")
    if p.subdiff_dist is None:
        raise CapabilityError("raw function has no subdifferential-distance oracle")
    return p.subdiff_dist


def sample_ball(x_bar, eta, n, rng) -> np.ndarray:
    """Uniform draws from the open ball B(x_bar; eta)."""
    x_bar = np.asarray(x_bar, dtype=float)
    d = x_bar.size
    u = rng.standard_normal((n, d))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    r = eta * rng.uniform(size=(n, 1)) ** (1.0 / d)
    return x_bar + r * u


def sample_region(p, region: Region, n_samples: int, seed: int,
                  max_draw_factor: int = 500) -> np.ndarray:
    """Rejection-sample the ball-and-band region; < 30 acceptances is an error."""
    rng = np.random.default_rng(seed)
    accepted = []
    draws = 0
    limit = max_draw_factor * n_samples
    while len(accepted) < n_samples and draws < limit:
        batch = sample_ball(region.x_bar, region.eta, 256, rng)
        draws += 256
        for x in batch:
            F_x = evaluate_F(p, x)
            if region.contains(x, F_x):
                accepted.append(x)
                if len(accepted) == n_samples:
                    break
    if len(accepted) < 30:
        raise InsufficientSamplesError(
            f"only {len(accepted)} of {n_samples} samples accepted in region")
    return np.asarray(accepted)


def _sample_band_in_box(p, box, F_bar, nu, n_samples, seed, max_draw_factor=500):
    lo = np.asarray(box[0], dtype=float)
    hi = np.asarray(box[1], dtype=float)
    rng = np.random.default_rng(seed)
    accepted = []
    draws = 0
    limit = max_draw_factor * n_samples
    while len(accepted) < n_samples and draws < limit:
        x = rng.uniform(lo, hi)
        draws += 1
        F_x = evaluate_F(p, x)
        if F_bar < F_x < F_bar + nu:
            accepted.append(x)
    if len(accepted) < 30:
        raise InsufficientSamplesError(
            f"only {len(accepted)} of {n_samples} band samples accepted in box")
    return np.asarray(accepted)


# --------------------------------------------------------------------------
# sublevel-set distance oracles
# --------------------------------------------------------------------------

class SolutionSetOracle:
    """Distance to an explicit point set; valid when [F <= F_bar] equals that set."""

    method = "SOLUTION_SET"

    def __init__(self, points):
        self.points = np.atleast_2d(np.asarray(points, dtype=float))

    def distance(self, x, F_bar) -> float:
        return float(np.min(np.linalg.norm(self.points - x, axis=1)))


class AnalyticDistanceOracle:
    method = "ANALYTIC"

    def __init__(self, dist_fn: Callable[[np.ndarray, float], float]):
        self.dist_fn = dist_fn

    def distance(self, x, F_bar) -> float:
        return float(self.dist_fn(x, F_bar))


class ProjectionOracle:
    method = "ANALYTIC_PROJECTION"

    def __init__(self, project: Callable[[np.ndarray, float], np.ndarray]):
        self.project = project

    def distance(self, x, F_bar) -> float:
        return float(np.linalg.norm(x - self.project(x, F_bar)))


class GridOracle:
    """Brute-force distance to [F <= F_bar] over a regular grid, dim <= 3.

    Accurate to one grid-cell diagonal; the tree of in-set grid points is
    cached per F_bar value.
    """

    method = "GRID"

    def __init__(self, eval_fn, box, resolution: float):
        lo = np.asarray(box[0], dtype=float)
        hi = np.asarray(box[1], dtype=float)
        if lo.size > 3:
            raise CapabilityError("grid sublevel oracle only supported for dim <= 3")
        self.eval_fn = eval_fn
        self.lo, self.hi = lo, hi
        self.resolution = float(resolution)
        self.cell_diag = self.resolution * math.sqrt(lo.size)
        self._trees = {}

    def _tree(self, F_bar):
        key = float(F_bar)
        if key not in self._trees:
            axes = [np.arange(l, h + self.resolution / 2, self.resolution)
                    for l, h in zip(self.lo, self.hi)]
            mesh = np.meshgrid(*axes, indexing="ij")
            pts = np.stack([m.ravel() for m in mesh], axis=1)
            vals = np.array([self.eval_fn(pt) for pt in pts])
            inset = pts[vals <= key]
            self._trees[key] = cKDTree(inset) if inset.size else None
        return self._trees[key]

    def distance(self, x, F_bar) -> float:
        tree = self._tree(F_bar)
        if tree is None:
            return math.inf
        return float(tree.query(np.asarray(x, dtype=float))[0])


def sublevel_distance(p, x, F_bar: float, oracle) -> float:
    """dist(x, [F <= F_bar]); +inf when the oracle sees an empty sublevel set."""
    x = as_point(x, _dim_of(p))
    if evaluate_F(p, x) <= F_bar:
        return 0.0
    return oracle.distance(x, F_bar)


# --------------------------------------------------------------------------
# certificates
# --------------------------------------------------------------------------

@dataclass
class EBCertificate:
    condition: str
    params: dict
    region: Optional[dict]
    n_samples: int
    worst_ratio: float
    constant_estimate: float
    verdict: str
    witness: Optional[dict] = None

    @property
    def certified(self) -> bool:
        return self.verdict == CERTIFIED

    def to_dict(self) -> dict:
        out = {
            "condition": self.condition,
            "params": self.params,
            "region": self.region,
            "n_samples": self.n_samples,
            "worst_ratio": self.worst_ratio,
            "constant_estimate": self.constant_estimate,
            "verdict": self.verdict,
        }
        if self.witness is not None:
            out["witness"] = self.witness
        return out


def _witness_divergence(points: Sequence[np.ndarray], ratio_fn) -> Optional[dict]:
    """Monotone blow-up along the scan: increasing over the last 10 points and
    at least 10x the first value."""
    ratios = [float(ratio_fn(np.asarray(pt, dtype=float))) for pt in points]
    tail = ratios[-10:]
    increasing = all(b > a for a, b in zip(tail, tail[1:]))
    if increasing and ratios[-1] > 10.0 * ratios[0]:
        return {"ratios_first": ratios[0], "ratios_last": ratios[-1],
                "n_scan": len(ratios), "mode": "divergent",
                "last_point": [float(v) for v in np.asarray(points[-1])]}
    return None


def _witness_vanishing(points: Sequence[np.ndarray], ratio_fn) -> Optional[dict]:
    """Monotone decay to below a tenth of the initial ratio."""
    ratios = [float(ratio_fn(np.asarray(pt, dtype=float))) for pt in points]
    tail = ratios[-10:]
    decreasing = all(b < a for a, b in zip(tail, tail[1:]))
    if decreasing and ratios[-1] < 0.1 * ratios[0]:
        return {"ratios_first": ratios[0], "ratios_last": ratios[-1],
                "n_scan": len(ratios), "mode": "vanishing",
                "last_point": [float(v) for v in np.asarray(points[-1])]}
    return None


def certify_level_set_subdiff_eb(p, region: Region, gamma: float, n_samples: int,
                                 seed: int, oracle) -> EBCertificate:
    """dist^gamma(x, [F<=F_bar]) <= c1 * dist(0, dF(x)) over region samples."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    sd = subdiff_dist_of(p)
    xs = sample_region(p, region, n_samples, seed)
    worst = 0.0
    witness = None
    for x in xs:
        num = sublevel_distance(p, x, region.F_bar, oracle) ** gamma
        den = sd(x)
        if den == 0.0:
            if num > 0.0:
                witness = {"point": [float(v) for v in x], "lhs": num, "rhs": 0.0}
                break
            continue
        worst = max(worst, num / den)
    verdict = REFUTED if witness else CERTIFIED
    return EBCertificate("LEVEL_SET_SUBDIFF", {"gamma": gamma}, region.to_dict(),
                         len(xs), worst, worst, verdict, witness)


def _step_distance_fn(p, step, prox_map, inner_tol=None):
    if prox_map is not None:
        return lambda x: float(np.linalg.norm(x - prox_map(x)))
    if step is None:
        raise CapabilityError("need a Bregman step or an explicit prox map")

    def dist(x):
        sol = solve_subproblem(p, step, x, inner_tol=inner_tol)
        return float(np.linalg.norm(x - sol.point))

    return dist


def certify_level_set_bregman_eb(p, step, region: Region, p_exp: float,
                                 n_samples: int, seed: int, oracle,
                                 prox_map=None,
                                 witness_points: Optional[Sequence] = None,
                                 witness_ratio: Optional[Callable] = None) -> EBCertificate:
    """dist^p(x, [F<=F_bar]) <= theta * ||x - T(x)|| over region samples.

    A designated witness sequence with a divergent ratio (the caller may
    substitute its own numerator via ``witness_ratio``) refutes the condition
    without sampling.
    """
    step_dist = _step_distance_fn(p, step, prox_map)
    if witness_points is not None:
        if witness_ratio is None:
            def witness_ratio(x):
                den = step_dist(x)
                num = sublevel_distance(p, x, region.F_bar, oracle) ** p_exp
                return math.inf if den == 0.0 else num / den
        wit = _witness_divergence(witness_points, witness_ratio)
        if wit is not None:
            return EBCertificate("LEVEL_SET_BREGMAN", {"p": p_exp},
                                 region.to_dict(), 0, math.inf, math.inf,
                                 REFUTED, wit)
    xs = sample_region(p, region, n_samples, seed)
    worst = 0.0
    witness = None
    for x in xs:
        num = sublevel_distance(p, x, region.F_bar, oracle) ** p_exp
        den = step_dist(x)
        if den == 0.0:
            if num > 0.0:
                witness = {"point": [float(v) for v in x], "lhs": num, "rhs": 0.0}
                break
            continue
        worst = max(worst, num / den)
    verdict = REFUTED if witness else CERTIFIED
    return EBCertificate("LEVEL_SET_BREGMAN", {"p": p_exp}, region.to_dict(),
                         len(xs), worst, worst, verdict, witness)


def certify_bregman_prox_eb(p, step, region: Region, n_samples: int, seed: int,
                            crit_dist: Callable[[np.ndarray], float],
                            prox_map=None,
                            witness_points: Optional[Sequence] = None) -> EBCertificate:
    """dist(x, critical set) <= c3 * ||x - T(x)||; refutable by a divergent scan."""
    step_dist = _step_distance_fn(p, step, prox_map)

    def ratio(x):
        den = step_dist(x)
        return math.inf if den == 0.0 else crit_dist(x) / den

    witness = None
    if witness_points is not None:
        witness = _witness_divergence(witness_points, ratio)
    worst = 0.0
    n_used = 0
    if witness is None:
        xs = sample_region(p, region, n_samples, seed)
        n_used = len(xs)
        for x in xs:
            worst = max(worst, ratio(x))
    verdict = REFUTED if witness else CERTIFIED
    return EBCertificate("BREGMAN_PROX_EB", {}, region.to_dict(), n_used,
                         worst, worst, verdict, witness)


def certify_weak_metric_subreg(p, region: Region, n_samples: int, seed: int,
                               crit_dist: Callable[[np.ndarray], float],
                               witness_points: Optional[Sequence] = None) -> EBCertificate:
    """dist(x, critical set) <= c2 * dist(0, dF(x)); refutable by a divergent scan."""
    sd = subdiff_dist_of(p)

    def ratio(x):
        den = sd(x)
        return math.inf if den == 0.0 else crit_dist(x) / den

    witness = None
    if witness_points is not None:
        witness = _witness_divergence(witness_points, ratio)
    worst = 0.0
    n_used = 0
    if witness is None:
        xs = sample_region(p, region, n_samples, seed)
        n_used = len(xs)
        for x in xs:
            worst = max(worst, ratio(x))
    verdict = REFUTED if witness else CERTIFIED
    return EBCertificate("WEAK_METRIC_SUBREG", {}, region.to_dict(), n_used,
                         worst, worst, verdict, witness)


def certify_luo_tseng(p, xi_level: float, sigma: float, box, n_samples: int,
                      seed: int, crit_dist: Callable[[np.ndarray], float],
                      eps: float = 1.0) -> EBCertificate:
    """dist(x, critical set) <= c4 ||x - T(x)|| with Euclidean D, on the test set
    {F <= xi, ||x - T(x)|| <= sigma}."""
    step = BregmanStep(euclidean_kernel(), eps)
    step_dist = _step_distance_fn(p, step, None)
    lo = np.asarray(box[0], dtype=float)
    hi = np.asarray(box[1], dtype=float)
    rng = np.random.default_rng(seed)
    worst = 0.0
    used = 0
    draws = 0
    while used < n_samples and draws < 500 * n_samples:
        x = rng.uniform(lo, hi)
        draws += 1
        if evaluate_F(p, x) > xi_level:
            continue
        den = step_dist(x)
        if den == 0.0 or den > sigma:
            continue
        used += 1
        worst = max(worst, crit_dist(x) / den)
    if used < 30:
        raise InsufficientSamplesError(f"only {used} Luo-Tseng test points found")
    return EBCertificate("LUO_TSENG", {"xi": xi_level, "sigma": sigma}, None,
                         used, worst, worst, CERTIFIED)


def certify_kl(p, region: Region, alpha: float, n_samples: int, seed: int,
               witness_points: Optional[Sequence] = None) -> EBCertificate:
    """dist(0, dF(x)) >= c5 (F(x) - F_bar)^alpha; refutable by a vanishing scan."""
    if not (0 < alpha < 1):
        raise ValueError("alpha must lie in (0, 1)")
    sd = subdiff_dist_of(p)

    def ratio(x):
        gap = evaluate_F(p, x) - region.F_bar
        if gap <= 0:
            return math.inf
        return sd(x) / gap ** alpha

    witness = None
    if witness_points is not None:
        witness = _witness_vanishing(witness_points, ratio)
    best = math.inf
    n_used = 0
    if witness is None:
        xs = sample_region(p, region, n_samples, seed)
        n_used = len(xs)
        for x in xs:
            best = min(best, ratio(x))
    verdict = REFUTED if witness else CERTIFIED
    return EBCertificate("KL", {"alpha": alpha}, region.to_dict(), n_used,
                         best, best, verdict, witness)


def certify_bp_gap(p, step, region: Region, q: float, n_samples: int,
                   seed: int, prox_map=None) -> EBCertificate:
    """G_{D,eps}(x) >= mu (F(x) - F_bar)^q over region samples."""
    if not (0 <= q < 2):
        raise ValueError("q must lie in [0, 2)")
    xs = sample_region(p, region, n_samples, seed)
    best = math.inf
    used = 0
    for x in xs:
        F_x = evaluate_F(p, x)
        gap_pow = (F_x - region.F_bar) ** q
        sol = solve_subproblem(p, step, x)
        if gap_pow == 0.0 and sol.gap_value == 0.0:
            continue  # critical sample, vacuous
        if gap_pow == 0.0:
            continue
        used += 1
        best = min(best, sol.gap_value / gap_pow)
    if used < 30:
        raise InsufficientSamplesError(f"only {used} usable BP-gap samples")
    return EBCertificate("BP_GAP", {"q": q}, region.to_dict(), used,
                         best, best, CERTIFIED)


def certify_prox_pl(p, nu: float, mu_candidate: float, box, n_samples: int,
                    seed: int) -> EBCertificate:
    """Proximal-PL: G_{D,1/L}(x) >= mu (F(x) - F*) with the Euclidean kernel.

    Half the Euclidean forward-backward gap at step 1/L equals G, so the check
    runs through the ordinary subproblem solver.
    """
    if p.analytic is None or p.analytic.optimal_value is None:
        raise CapabilityError("proximal-PL check needs the optimal value F*")
    F_star = p.analytic.optimal_value
    L = p.f.lipschitz_L
    if L <= 0:
        raise CapabilityError("proximal-PL check needs L > 0")
    step = BregmanStep(euclidean_kernel(), 1.0 / L)
    xs = _sample_band_in_box(p, box, F_star, nu, n_samples, seed)
    best = math.inf
    witness = None
    for x in xs:
        gap = objective(p, x) - F_star
        G = solve_subproblem(p, step, x).gap_value
        ratio = G / gap
        best = min(best, ratio)
        if ratio < mu_candidate * (1.0 - 1e-8) and witness is None:
            witness = {"point": [float(v) for v in x], "ratio": ratio}
    verdict = REFUTED if witness else CERTIFIED
    return EBCertificate("PROX_PL", {"mu_candidate": mu_candidate}, None,
                         len(xs), best, best, verdict, witness)


def check_strong_ls_subdiff(p, F_bar: float, nu: float, box, c1_prime: float,
                            n_samples: int, seed: int, oracle) -> InequalityReport:
    """Strong level-set subdifferential EB with a supplied constant, on band samples."""
    sd = subdiff_dist_of(p)
    xs = _sample_band_in_box(p, box, F_bar, nu, n_samples, seed)
    worst_slack = math.inf
    worst_ratio = 0.0
    for x in xs:
        lhs = sublevel_distance(p, x, F_bar, oracle)
        rhs = c1_prime * sd(x)
        worst_slack = min(worst_slack, rhs - lhs)
        if sd(x) > 0:
            worst_ratio = max(worst_ratio, lhs / sd(x))
    tol = 1e-8 * (1.0 + abs(F_bar) + worst_ratio)
    return InequalityReport(name="strong_ls_subdiff_eb", passed=worst_slack >= -tol,
                            slacks={"worst": worst_slack},
                            details={"c1_prime": c1_prime, "worst_ratio": worst_ratio,
                                     "n_samples": len(xs)})


def check_prop53(p, step, F_bar: float, box, n_samples: int, seed: int,
                 oracle, nu: float = math.inf) -> InequalityReport:
    """Envelope proximity: E(x) - F_bar <= c0 * dist^2(x, [F<=F_bar]) on [F > F_bar]."""
    c = step.constants(p.f.lipschitz_L)
    xs = _sample_band_in_box(p, box, F_bar, nu, n_samples, seed)
    worst_slack = math.inf
    for x in xs:
        sol = solve_subproblem(p, step, x)
        lhs = sol.envelope_value - F_bar
        d = sublevel_distance(p, x, F_bar, oracle)
        slack = c.c0 * d * d - lhs
        if slack < worst_slack:
            worst_slack = slack
    tol = 1e-8 * (1.0 + abs(F_bar))
    return InequalityReport(name="prop5.3", passed=worst_slack >= -tol,
                            slacks={"worst": worst_slack},
                            details={"c0": c.c0, "n_samples": len(xs)})


# --------------------------------------------------------------------------
# level-set contraction (Thm 4.1)
# --------------------------------------------------------------------------

def thm41_theta_interval(constants) -> Optional[tuple]:
    """Admissible (theta_lo, theta_hi) for the contraction theorem, or None."""
    b, c = constants.frak_b, constants.frak_c
    if c <= 0 or b <= 1 or c <= b - 1:
        return None
    return (math.sqrt(c / b), math.sqrt(c / (b - 1)))


def thm41_c1_prime(beta_hat: float, constants) -> float:
    """Strong level-set subdifferential EB constant implied by contraction beta_hat."""
    rho = constants.rho or 0.0
    eb, el, m = constants.eps_hi, constants.eps_lo, constants.m
    return (eb / ((1.0 - beta_hat) * (m - eb * rho))) * math.sqrt(eb / el)


@dataclass
class ContractionReport:
    dists: list
    ratios: list
    beta_hat: float
    beta_theory: Optional[float]
    theorem_applicable: bool
    trace: SolverTrace = field(repr=False, default=None)


def measure_levelset_contraction(p, cfg: VbpgConfig, x0, F_bar: float, oracle,
                                 theta_prime: Optional[float] = None) -> ContractionReport:
    """Per-iteration sublevel-distance ratios of a VBPG run."""
    x0 = as_point(x0, p.dim)
    F0 = objective(p, x0)
    if not F0 > F_bar:
        raise TargetValueError("x0 must start strictly above the level F_bar")
    trace = run_vbpg(p, cfg, x0)
    xs = trace.iterates()
    dists = []
    for x in xs:
        d = sublevel_distance(p, x, F_bar, oracle)
        dists.append(d)
        if d == 0.0:
            break
    ratios = [dists[i + 1] / dists[i] for i in range(len(dists) - 1) if dists[i] > 0]
    beta_hat = max(ratios) if ratios else 0.0
    constants = trace.constants
    interval = thm41_theta_interval(constants)
    beta_theory = None
    applicable = False
    if theta_prime is not None and interval is not None:
        lo, hi = interval
        applicable = lo < theta_prime < hi
        val = constants.frak_b - constants.frak_c / theta_prime ** 2
        beta_theory = math.sqrt(val) if val >= 0 else None
    return ContractionReport(dists=dists, ratios=ratios, beta_hat=beta_hat,
                             beta_theory=beta_theory, theorem_applicable=applicable,
                             trace=trace)


# --------------------------------------------------------------------------
# local convexity-type sufficient conditions
# --------------------------------------------------------------------------

_CONDITIONS = ("LSC", "LESC", "LWSC", "LQGG", "LRSI", "LPL")


@dataclass
class ConditionReport:
    condition: str
    largest_mu: float
    mu_candidate: Optional[float]
    verdict: str
    witness: Optional[dict]
    n_samples: int


def _condition_holds(p, cond, mu, xs, proj, x_bar) -> Optional[dict]:
    """First witness violating the sampled inequality system, or None."""
    f = p.f
    tol = 1e-10
    if cond in ("LSC", "LESC"):
        for i in range(len(xs) - 1):
            x, y = xs[i], xs[i + 1]
            if cond == "LESC" and np.linalg.norm(proj(x) - proj(y)) > 1e-9:
                continue
            lhs = f(y) - f(x) - f.grad(x) @ (y - x)
            rhs = 0.5 * mu * float(np.sum((y - x) ** 2))
            if lhs < rhs - tol * (1 + abs(lhs)):
                return {"pair": (i, i + 1), "lhs": lhs, "rhs": rhs}
        return None
    for i, x in enumerate(xs):
        xp = proj(x)
        d2 = float(np.sum((x - xp) ** 2))
        if cond == "LWSC":
            lhs = f(xp) - f(x) - f.grad(x) @ (xp - x)
            rhs = 0.5 * mu * d2
        elif cond == "LQGG":
            lhs = float((f.grad(x) - f.grad(xp)) @ (x - xp))
            rhs = mu * d2
        elif cond == "LRSI":
            lhs = float(f.grad(x) @ (x - xp))
            rhs = mu * d2
        elif cond == "LPL":
            g = f.grad(x)
            lhs = 0.5 * float(g @ g)
            rhs = mu * (f(x) - f(x_bar))
        else:
            raise ValueError(f"unknown condition {cond}")
        if lhs < rhs - tol * (1 + abs(lhs)):
            return {"index": i, "lhs": lhs, "rhs": rhs}
    return None


def check_sufficient_conditions(p: CompositeProblem, x_bar, eta: float, which: str,
                                mu_candidate: Optional[float], n_samples: int,
                                seed: int) -> ConditionReport:
    """Largest sampled modulus for one of the local convexity-type conditions.

    The largest mu is located by binary search over [0, L] with the sampled
    inequality system re-evaluated at each probe.
    """
    if which not in _CONDITIONS:
        raise ValueError(f"condition must be one of {_CONDITIONS}")
    if p.analytic is None or p.analytic.project_critical is None:
        raise CapabilityError(f"{which} check needs a critical-set projection oracle")
    if which in ("LRSI", "LPL"):
        probe = sample_ball(np.asarray(x_bar, dtype=float), eta, 4,
                            np.random.default_rng(0))
        if any(p.g(q) != 0.0 for q in probe):
            raise CapabilityError(f"{which} is defined only for g = 0")
    x_bar = as_point(x_bar, p.dim)
    rng = np.random.default_rng(seed)
    xs = sample_ball(x_bar, eta, n_samples, rng)
    # drop samples sitting on the critical set (degenerate denominators)
    proj = p.analytic.project_critical
    xs = np.array([x for x in xs if np.linalg.norm(x - proj(x)) > 1e-9])

    if mu_candidate is not None:
        witness = _condition_holds(p, which, mu_candidate, xs, proj, x_bar)
        if witness is not None:
            return ConditionReport(which, math.nan, mu_candidate, REFUTED,
                                   witness, len(xs))
    lo, hi = 0.0, max(p.f.lipschitz_L, 1.0)
    if _condition_holds(p, which, hi, xs, proj, x_bar) is None:
        lo = hi
    else:
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if _condition_holds(p, which, mid, xs, proj, x_bar) is None:
                lo = mid
            else:
                hi = mid
    return ConditionReport(which, lo, mu_candidate, CERTIFIED, None, len(xs))


@dataclass
class PredictionReport:
    constant: float
    passed: bool
    worst_slack: float
    n_samples: int


def check_prop61_prediction(p, region: Region, mu: float, rho: float,
                            n_samples: int, seed: int) -> PredictionReport:
    """Weak metric subregularity with constant 2/(mu - rho), audited on fresh samples."""
    if mu <= rho:
        raise RegimeError(f"hypothesis needs mu > rho, got mu={mu}, rho={rho}")
    if p.analytic is None or p.analytic.project_critical is None:
        raise CapabilityError("prediction audit needs a critical-set projection oracle")
    sd = subdiff_dist_of(p)
    proj = p.analytic.project_critical
    c = 2.0 / (mu - rho)
    xs = sample_region(p, region, n_samples, seed)
    worst = math.inf
    for x in xs:
        lhs = float(np.linalg.norm(x - proj(x)))
        slack = c * sd(x) - lhs
        worst = min(worst, slack)
    tol = 1e-8 * (1.0 + c)
    return PredictionReport(constant=c, passed=worst >= -tol, worst_slack=worst,
                            n_samples=len(xs))


# --------------------------------------------------------------------------
# counterexample scans
# --------------------------------------------------------------------------

@dataclass
class ScanReport:
    example_id: str
    ns: np.ndarray
    ratios: np.ndarray
    monotone: bool
    concluded: bool          # divergence (5.1/5.3) or vanishing (5.2) established
    positive_certificate: Optional[EBCertificate]

    @property
    def passed(self) -> bool:
        ok = self.monotone and self.concluded
        if self.positive_certificate is not None:
            ok = ok and self.positive_certificate.certified
        return ok


def scan_counterexample(example_id: str, n_range, alpha: float = 0.5,
                        with_positive: bool = True) -> ScanReport:
    """Evaluate the designated refutation ratio of one of the three built-in
    counterexamples along its designated sequence."""
    ns = np.asarray(list(n_range), dtype=float)
    if np.any(ns > 2 ** 20):
        raise ValueError("scan range capped at n <= 2^20")
    from . import corpus  # deferred: corpus builds on this module

    if example_id == "EX_5_1":
        # x_n = (n^(-5/4), 1/n), ratio ||x_n|| / ||grad F(x_n)||
        x1, x2 = ns ** -1.25, 1.0 / ns
        ratios = np.sqrt(x1 ** 2 + x2 ** 2) / np.sqrt(4 * x1 ** 2 + 9 * x2 ** 4)
        concluded = ratios[-1] > 10.0 * ratios[0]
    elif example_id == "EX_5_3":
        # x_n = (1/n, 1/(3n^2)), ratio ||x_n|| / |x_{n,2}|
        x1, x2 = 1.0 / ns, 1.0 / (3.0 * ns ** 2)
        ratios = np.sqrt(x1 ** 2 + x2 ** 2) / x2
        concluded = ratios[-1] > 10.0 * ratios[0]
    elif example_id == "EX_5_2":
        # KL-ratio bound 2 n^alpha / (n - 1) along x_n = 1/(n-1)
        ratios = 2.0 * ns ** alpha / (ns - 1.0)
        concluded = ratios[-1] < 0.1 * ratios[0] or ratios[-1] < 0.25
    else:
        raise ValueError(f"unknown counterexample id {example_id!r}")

    diffs = np.diff(ratios)
    monotone = bool(np.all(diffs > 0)) if example_id != "EX_5_2" else bool(np.all(diffs < 0))

    positive = None
    if with_positive:
        entry = corpus.load_corpus(example_id)
        positive = certify_level_set_subdiff_eb(
            entry.raw, entry.regions[0], gamma=1.0, n_samples=200, seed=7,
            oracle=entry.extras["sublevel_oracle"])
    return ScanReport(example_id=example_id, ns=ns, ratios=ratios,
                      monotone=monotone, concluded=bool(concluded),
                      positive_certificate=positive)


# --------------------------------------------------------------------------
# Assumption (H)
# --------------------------------------------------------------------------

@dataclass
class AssumptionHReport:
    largest_delta: float
    refuted_at: Optional[float]
    witness: Optional[dict]

    @property
    def passed(self) -> bool:
        return self.refuted_at is None


def check_assumption_h(p, x_bar, delta_scan: Iterable[float],
                       n_probe: int = 200, seed: int = 0,
                       analytic=None) -> AssumptionHReport:
    """Critical points within delta of x_bar must not have larger F than F(x_bar).

    ``analytic`` supplies the critical-set oracles when p itself carries none
    (raw piecewise functions).
    """
    if analytic is None:
        analytic = p.analytic if isinstance(p, CompositeProblem) else None
    if analytic is None or (analytic.critical_points is None
                            and analytic.project_critical is None):
        raise CapabilityError("Assumption (H) check needs a critical-points oracle")
    x_bar = as_point(x_bar, _dim_of(p))
    F_bar = evaluate_F(p, x_bar)
    tol = 1e-10 * (1.0 + abs(F_bar))

    if analytic.critical_points is not None:
        crits = [np.asarray(c, dtype=float) for c in analytic.critical_points]
    else:
        rng = np.random.default_rng(seed)
        crits = []
        for delta in delta_scan:
            probes = sample_ball(x_bar, delta, n_probe, rng)
            crits.extend(analytic.project_critical(q) for q in probes)

    largest = 0.0
    for delta in sorted(delta_scan):
        bad = None
        for c in crits:
            if np.linalg.norm(c - x_bar) <= delta and evaluate_F(p, c) > F_bar + tol:
                bad = c
                break
        if bad is not None:
            return AssumptionHReport(largest_delta=largest, refuted_at=delta,
                                     witness={"point": [float(v) for v in bad],
                                              "F": evaluate_F(p, bad), "F_bar": F_bar})
        largest = delta
    return AssumptionHReport(largest_delta=largest, refuted_at=None, witness=None)


# --------------------------------------------------------------------------
# implication-audit constants
# --------------------------------------------------------------------------

def estimate_exponent(lhs_values, rhs_values) -> tuple:
    """Log-log least-squares slope of rhs against lhs, with R^2.

    Guides the choice of gamma or alpha; the certify operations still take the
    exponent as an explicit input.
    """
    lhs = np.asarray(lhs_values, dtype=float)
    rhs = np.asarray(rhs_values, dtype=float)
    keep = (lhs > 0) & (rhs > 0)
    if np.count_nonzero(keep) < 2:
        raise InsufficientSamplesError("need at least 2 positive pairs")
    X = np.log(lhs[keep])
    Y = np.log(rhs[keep])
    slope, intercept = np.polyfit(X, Y, 1)
    fit = slope * X + intercept
    ss_res = float(np.sum((Y - fit) ** 2))
    ss_tot = float(np.sum((Y - np.mean(Y)) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return float(slope), r2


def prop41_theta(c1: float, gamma: float, L: float, M: float, eps_lo: float,
                 eta: float) -> tuple:
    """(p, theta) implied for the level-set Bregman EB by a subdifferential EB."""
    coeff = c1 ** (1.0 / gamma) * (L + M / eps_lo) ** (1.0 / gamma)
    half = eta / 2.0
    theta1 = 1.0 + coeff * half ** (1.0 / gamma - 1.0)
    theta2 = half ** (1.0 - 1.0 / gamma) + coeff
    p_exp = 1.0 / min(1.0 / gamma, 1.0)
    return p_exp, max(theta1, theta2)


def prop41_shrunk_region(region: Region, m: float, eps_hi: float, L: float) -> Region:
    """Half-radius, 1/N-band region on which the implied Bregman EB is claimed."""
    if eps_hi >= m / L if L > 0 else False:
        raise RegimeError("need eps_hi < m/L")
    n_min = (2.0 * eps_hi * region.nu / (m - eps_hi * L)) / (region.eta / 2.0) ** 2
    N = max(n_min, 1.0) * 1.000001
    return Region(region.x_bar, region.eta / 2.0, region.nu / N, region.F_bar)


def prop54ii_kl_constant(mu: float, m: float, eps_lo: float, eps_hi: float,
                         rho: float) -> float:
    """KL(q/2) constant implied by a BP gap condition with constant mu."""
    return math.sqrt((2.0 * eps_lo / eps_hi) * (m - eps_hi * rho) * mu)
