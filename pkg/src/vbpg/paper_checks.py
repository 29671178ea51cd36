"""The acceptance suite: twelve desk-scale property checks of the theory.

Each check returns {"id", "name", "passed", "details"}; ``run_all`` executes
them in order. The same functions back both ``vbpg paper-checks`` and the
acceptance tests.
"""

from __future__ import annotations

import functools
import json
import math
import subprocess
import sys
import tempfile
from pathlib import Path

import numpy as np

from .bregman import (BregmanStep, check_lemma21, check_prop24, euclidean_kernel,
                      solve_subproblem, spd_kernel)
from .corpus import load_corpus
from .diagnostics import (SolutionSetOracle, certify_bp_gap, certify_kl,
                          certify_level_set_bregman_eb,
                          certify_level_set_subdiff_eb, check_prop53,
                          check_prop61_prediction, check_strong_ls_subdiff,
                          check_sufficient_conditions, evaluate_F,
                          measure_levelset_contraction, prop41_shrunk_region,
                          prop41_theta, prop54ii_kl_constant, sample_region,
                          scan_counterexample, subdiff_dist_of, sublevel_distance,
                          thm41_c1_prime)
from .problem import (AnalyticOracles, CompositeProblem, objective,
                      quadratic_smooth, zero_term)
from .solver import (BlockJacobiSchedule, ConstantSchedule, VbpgConfig,
                     measure_rates, run_regularized_jacobi, run_vbpg)

COMPOSITE_IDS = ("QUAD_SC", "LASSO", "QUAD_L1", "QUAD_MCP", "TWO_WELL",
                 "JACOBI_BLOCK")


@functools.lru_cache(maxsize=None)
def _entry(entry_id, **params):
    return load_corpus(entry_id, **params)


def _default_eps(p: CompositeProblem) -> float:
    L = p.f.lipschitz_L
    return 0.5 / L if L > 0 else 1.0


def _euclid_cfg(p, max_iters, stop_tol=1e-300, inner_tol=None, eps=None):
    eps = _default_eps(p) if eps is None else eps
    return VbpgConfig(schedule=ConstantSchedule(euclidean_kernel()), eps=eps,
                      max_iters=max_iters, stop_tol=stop_tol,
                      inner_tol=inner_tol)


def _result(check_id, name, passed, details):
    return {"id": check_id, "name": name, "passed": bool(passed),
            "details": details}


# --------------------------------------------------------------------------

def check_01_descent():
    """Per-step sufficient decrease on every composite corpus problem."""
    violations = []
    for cid in COMPOSITE_IDS:
        entry = _entry(cid)
        p = entry.composite
        lo, hi = entry.box
        rng = np.random.default_rng(11)
        for start in range(5):
            x0 = rng.uniform(lo, hi)
            trace = run_vbpg(p, _euclid_cfg(p, 200), x0)
            a = trace.constants.a
            for k in range(trace.iters):
                drop = trace.F_values[k] - trace.F_values[k + 1]
                need = a * trace.step_norms[k] ** 2
                if drop < need - 1e-8 * (1.0 + abs(trace.F_values[k])):
                    violations.append((cid, start, k, drop, need))
    return _result("A1", "per-step sufficient decrease", not violations,
                   {"violations": len(violations), "sample": violations[:3]})


def check_02_generalized_descent():
    """Generalized descent and cost-to-go inequalities on random pairs."""
    violations = []
    for cid in COMPOSITE_IDS:
        entry = _entry(cid)
        p = entry.composite
        lo, hi = entry.box
        eps = _default_eps(p)
        step = BregmanStep(euclidean_kernel(), eps)
        rng = np.random.default_rng(13)
        for _ in range(200):
            x = rng.uniform(lo, hi)
            u = rng.uniform(lo, hi)
            sol = solve_subproblem(p, step, x)
            rep = check_lemma21(p, step, x, u, sol)
            if not rep.passed:
                violations.append((cid, rep.slacks))
    return _result("A2", "generalized descent inequalities", not violations,
                   {"violations": len(violations), "sample": violations[:3]})


def check_03_gap_tightness():
    """The three gap/step/residual inequalities are tight on the scalar model."""
    p = CompositeProblem(
        f=quadratic_smooth(np.array([[1.0]])), g=zero_term(), dim=1,
        analytic=AnalyticOracles(subdiff_dist=lambda x: abs(float(x[0]))))
    step = BregmanStep(euclidean_kernel(), 0.5)
    sol = solve_subproblem(p, step, np.array([2.0]))
    rep = check_prop24(p, step, np.array([2.0]), sol)
    worst = max(abs(s) for s in rep.slacks.values())
    return _result("A3", "gap inequalities tight on the scalar model",
                   rep.passed and worst <= 1e-10,
                   {"slacks": rep.slacks, "max_abs_slack": worst})


def check_04_closed_form_rate():
    """Exact Q-rate 0.25 and contraction ratio 0.5 for the halving iteration."""
    p = CompositeProblem(f=quadratic_smooth(np.array([[1.0]])), g=zero_term(),
                         dim=1)
    cfg = _euclid_cfg(p, 30, stop_tol=1e-30, eps=0.5)
    trace = run_vbpg(p, cfg, np.array([1.0]))
    rates = measure_rates(trace, 0.0, np.zeros(1), tail_fraction=1.0)
    oracle = SolutionSetOracle([np.zeros(1)])
    contraction = measure_levelset_contraction(p, cfg, np.array([1.0]), 0.0,
                                               oracle)
    ratio_err = max(abs(r - 0.5) for r in contraction.ratios)
    ok = abs(rates.beta_Q - 0.25) <= 1e-10 and ratio_err <= 1e-10
    return _result("A4", "closed-form linear rate", ok,
                   {"beta_Q": rates.beta_Q, "max_ratio_error": ratio_err})


def check_05_oracle_equivalence():
    """Subproblem solver vs soft-threshold closed form and a brute-force grid."""
    entry = _entry("LASSO")
    p = entry.composite
    lam = 0.1
    eps = 0.1
    step = BregmanStep(euclidean_kernel(), eps)
    rng = np.random.default_rng(17)
    lo, hi = entry.box
    dev_soft = 0.0
    for _ in range(1000):
        x = rng.uniform(lo, hi)
        t = solve_subproblem(p, step, x).point
        v = x - eps * p.grad_f(x)
        t_ref = np.sign(v) * np.maximum(np.abs(v) - eps * lam, 0.0)
        dev_soft = max(dev_soft, float(np.max(np.abs(t - t_ref))))

    # SPD-kernel subproblem vs a local brute-force grid at resolution 1e-4
    from .problem import l1_term
    p2 = CompositeProblem(f=quadratic_smooth(np.diag([1.0, 2.0]),
                                             np.array([1.0, -1.0])),
                          g=l1_term(0.1), dim=2)
    H = np.array([[2.0, 0.5], [0.5, 1.0]])
    step2 = BregmanStep(spd_kernel(H), 0.2)
    res = 1e-4
    cell_diag = res * math.sqrt(2.0)
    dev_grid = 0.0
    for _ in range(3):
        x = rng.uniform(-0.5, 0.5, size=2)
        t = solve_subproblem(p2, step2, x, inner_tol=1e-12).point
        g0 = p2.grad_f(x)
        ax = np.arange(t[0] - 0.01, t[0] + 0.01 + res / 2, res)
        ay = np.arange(t[1] - 0.01, t[1] + 0.01 + res / 2, res)
        Y0, Y1 = np.meshgrid(ax, ay, indexing="ij")
        D0, D1 = Y0 - x[0], Y1 - x[1]
        quad = 0.5 * (H[0, 0] * D0 * D0 + 2 * H[0, 1] * D0 * D1
                      + H[1, 1] * D1 * D1) / step2.eps
        vals = g0[0] * D0 + g0[1] * D1 + 0.1 * (np.abs(Y0) + np.abs(Y1)) + quad
        i, j = np.unravel_index(np.argmin(vals), vals.shape)
        dev_grid = max(dev_grid, math.hypot(ax[i] - t[0], ay[j] - t[1]))
    ok = dev_soft <= 1e-12 and dev_grid <= cell_diag
    return _result("A5", "subproblem oracle equivalence", ok,
                   {"max_soft_threshold_dev": dev_soft,
                    "max_grid_dev": dev_grid, "cell_diag": cell_diag})


def check_06_counterexample_scans():
    """The three refutation scans plus the positive certificates."""
    details = {}
    ok = True

    s1 = scan_counterexample("EX_5_1", [2 ** k for k in range(4, 21)])
    r16, r256 = s1.ratios[0], s1.ratios[4]
    ok &= abs(r16 - 1.099) <= 1e-3 and abs(r256 - 2.061) <= 1e-3
    ok &= s1.monotone and s1.concluded and s1.positive_certificate.certified
    ok &= s1.positive_certificate.constant_estimate <= 0.5 + 1e-6
    details["EX_5_1"] = {"ratio_n16": float(r16), "ratio_n256": float(r256),
                         "c1": s1.positive_certificate.constant_estimate}

    s3 = scan_counterexample("EX_5_3", range(2, 51))
    ok &= s3.monotone and s3.ratios[-1] > 10.0 * s3.ratios[0]
    ok &= s3.positive_certificate.certified
    details["EX_5_3"] = {"first": float(s3.ratios[0]),
                         "last": float(s3.ratios[-1])}

    for alpha in (0.25, 0.5, 0.9):
        s2 = scan_counterexample("EX_5_2", range(3, 201), alpha=alpha,
                                 with_positive=(alpha == 0.5))
        ok &= s2.monotone
        if s2.positive_certificate is not None:
            ok &= s2.positive_certificate.certified
        details[f"EX_5_2_alpha_{alpha}"] = {
            "monotone_decreasing": s2.monotone,
            "first": float(s2.ratios[0]), "last": float(s2.ratios[-1])}
    return _result("A6", "counterexample scans", ok, details)


def check_07_implication_audit():
    """The implication chain KL => subdiff EB => Bregman EB => gap => KL."""
    details = {}
    ok = True
    for cid in ("QUAD_SC", "QUAD_L1"):
        entry = _entry(cid)
        p = entry.composite
        region = entry.regions[0]
        oracle = entry.extras["sublevel_oracle"]
        eps = _default_eps(p)
        step = BregmanStep(euclidean_kernel(), eps)
        m, M = 1.0, 1.0
        rho = p.g.semiconvex_rho or 0.0
        seed = 23

        kl = certify_kl(p, region, 0.5, 1000, seed)
        half = region.half_radius()
        sd = certify_level_set_subdiff_eb(p, half, 1.0, 1000, seed, oracle)
        ok &= kl.certified and kl.constant_estimate > 0 and sd.certified

        p_exp, theta_formula = prop41_theta(
            sd.constant_estimate, 1.0, p.f.lipschitz_L, M, eps, half.eta)
        shrunk = prop41_shrunk_region(half, m, eps, p.f.lipschitz_L)
        br = certify_level_set_bregman_eb(p, step, shrunk, p_exp, 1000, seed,
                                          oracle)
        ok &= br.certified and br.constant_estimate <= theta_formula + 1e-6

        q = 1.0 / min(1.0 / p_exp, 1.0)
        bp = certify_bp_gap(p, step, shrunk, q, 1000, seed)
        ok &= bp.certified and bp.constant_estimate > 0

        c5_pred = prop54ii_kl_constant(bp.constant_estimate, m, eps, eps, rho)
        sdist = subdiff_dist_of(p)
        xs = sample_region(p, shrunk, 1000, seed)
        kl_viol = 0
        for x in xs:
            gap = evaluate_F(p, x) - shrunk.F_bar
            if sdist(x) < c5_pred * gap ** (q / 2.0) - 1e-9:
                kl_viol += 1
        ok &= kl_viol == 0
        details[cid] = {
            "c5": kl.constant_estimate, "c1": sd.constant_estimate,
            "theta_hat": br.constant_estimate, "theta_formula": theta_formula,
            "mu_bp": bp.constant_estimate, "c5_predicted": c5_pred,
            "kl_violations": kl_viol}
    return _result("A7", "error-bound implication audit", ok, details)


def check_08_contraction_converse():
    """Measured contraction implies the strong subdifferential bound constant."""
    entry = _entry("LASSO")
    p = entry.composite
    F_star = p.analytic.optimal_value
    x_star = entry.extras["x_star"]
    oracle = entry.extras["sublevel_oracle"]
    eps = 0.3 / p.f.lipschitz_L
    cfg = _euclid_cfg(p, 600, eps=eps)
    rng = np.random.default_rng(29)
    x0 = x_star + 1.0 * rng.standard_normal(p.dim)
    report = measure_levelset_contraction(p, cfg, x0, F_star, oracle)
    beta_hat = report.beta_hat
    c1_prime = thm41_c1_prime(beta_hat, report.trace.constants)
    nu = float(objective(p, x0) - F_star)
    check = check_strong_ls_subdiff(p, F_star, nu, entry.box, c1_prime,
                                    1000, 31, oracle)
    ok = 0 < beta_hat < 1 and check.passed
    return _result("A8", "contraction converse bound", ok,
                   {"beta_hat": beta_hat, "c1_prime": c1_prime,
                    "worst_slack": check.slacks["worst"],
                    "worst_ratio": check.details["worst_ratio"]})


def check_09_jacobi_equivalence():
    """Blockwise-parallel solver matches the full block-kernel iteration."""
    entry = _entry("JACOBI_BLOCK")
    p = entry.composite
    blocks = entry.extras["blocks"]
    c_weights = entry.extras["c_weights"]
    eps = 0.1
    x0 = np.zeros(p.dim)
    tr_jac = run_regularized_jacobi(p, blocks, c_weights, eps, x0, 100,
                                    inner_tol=1e-13)
    cfg = VbpgConfig(schedule=BlockJacobiSchedule(p, blocks, c_weights),
                     eps=eps, max_iters=100, stop_tol=1e-300, inner_tol=1e-13)
    tr_vbpg = run_vbpg(p, cfg, x0)
    xs_j = tr_jac.iterates()
    xs_v = tr_vbpg.iterates()
    n = min(len(xs_j), len(xs_v))
    dev = float(np.max(np.linalg.norm(xs_j[:n] - xs_v[:n], axis=1)))
    return _result("A9", "regularized Jacobi equivalence", dev <= 1e-10,
                   {"max_deviation": dev, "iters": n - 1})


def check_10_sufficient_condition_pipeline():
    """Binary-searched curvature modulus and the subregularity prediction."""
    entry = _entry("QUAD_MCP")
    p = entry.composite
    region = entry.regions[0]
    rho = entry.extras["rho"]
    mu_true = entry.extras["mu_lwsc_analytic"]
    rep = check_sufficient_conditions(p, region.x_bar, region.eta, "LWSC",
                                      None, 1000, 37)
    mu_hat = rep.largest_mu
    within = abs(mu_hat - mu_true) <= 0.02 * mu_true
    pred = check_prop61_prediction(p, region, mu_hat, rho, 500, 41)
    ok = within and pred.passed
    return _result("A10", "sufficient-condition pipeline", ok,
                   {"mu_hat": mu_hat, "mu_true": mu_true,
                    "prediction_constant": pred.constant,
                    "prediction_worst_slack": pred.worst_slack})


def check_11_envelope_proximity():
    """Envelope above the level is controlled by the squared sublevel distance."""
    details = {}
    ok = True
    for cid in COMPOSITE_IDS:
        entry = _entry(cid)
        p = entry.composite
        F_bar = p.analytic.optimal_value
        oracle = entry.extras["sublevel_oracle"]
        step = BregmanStep(euclidean_kernel(), _default_eps(p))
        rep = check_prop53(p, step, F_bar, entry.box, 1000, 43, oracle)
        ok &= rep.passed
        details[cid] = {"passed": rep.passed,
                        "worst_slack": rep.slacks["worst"],
                        "c0": rep.details["c0"]}
    return _result("A11", "envelope proximity bound", ok, details)


def check_12_determinism(work_dir=None):
    """Identical seeds give byte-identical trace CSVs through the CLI."""
    base = Path(work_dir) if work_dir else Path(tempfile.mkdtemp())
    base.mkdir(parents=True, exist_ok=True)
    config = {
        "problem": {"corpus": "QUAD_SC"},
        "eps": 0.05,
        "x0": [1.0, 1.0],
        "max_iters": 50,
        "seed": 3,
    }
    cfg_path = base / "config.json"
    cfg_path.write_text(json.dumps(config))
    bodies = []
    for run in ("r1", "r2"):
        out = base / run
        proc = subprocess.run(
            [sys.executable, "-m", "vbpg.cli", "run", "--config",
             str(cfg_path), "--out", str(out)],
            capture_output=True, text=True)
        if proc.returncode != 0:
            return _result("A12", "CLI determinism", False,
                           {"returncode": proc.returncode,
                            "stderr": proc.stderr[-500:]})
        bodies.append((out / "trace.csv").read_bytes())
    identical = bodies[0] == bodies[1]
    return _result("A12", "CLI determinism", identical,
                   {"bytes": len(bodies[0]), "identical": identical})


ALL_CHECKS = [
    check_01_descent,
    check_02_generalized_descent,
    check_03_gap_tightness,
    check_04_closed_form_rate,
    check_05_oracle_equivalence,
    check_06_counterexample_scans,
    check_07_implication_audit,
    check_08_contraction_converse,
    check_09_jacobi_equivalence,
    check_10_sufficient_condition_pipeline,
    check_11_envelope_proximity,
    check_12_determinism,
]


def run_all(out_dir=None):
    results = []
    for fn in ALL_CHECKS:
        if fn is check_12_determinism and out_dir is not None:
            res = fn(Path(out_dir) / "determinism")
        else:
            res = fn()
        results.append(res)
    return results
