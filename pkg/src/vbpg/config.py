"""JSON experiment configurations: parsing, validation, and object assembly."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .bregman import diagonal_kernel, euclidean_kernel, spd_kernel
from .corpus import CorpusEntry, load_corpus
from .diagnostics import Region, SolutionSetOracle
from .errors import ConfigError
from .problem import (AnalyticOracles, CompositeProblem, box_indicator_term,
                      l1_term, least_squares_smooth, mcp_term, objective,
                      quadratic_smooth, zero_smooth, zero_term)
from .solver import (BlockJacobiSchedule, ConstantSchedule, DiagonalBBSchedule,
                     VbpgConfig)

__all__ = ["ExperimentConfig", "load_config", "parse_config"]


@dataclass
class ExperimentConfig:
    """A validated, fully-assembled experiment description."""

    problem: object                   # CompositeProblem or RawFunction
    entry: Optional[CorpusEntry]
    schedule: Optional[object]
    solver: Optional[VbpgConfig]
    x0: Optional[np.ndarray]
    seed: int
    diagnostics: list = field(default_factory=list)
    raw_dict: dict = field(default_factory=dict)

    @property
    def composite(self) -> Optional[CompositeProblem]:
        return self.problem if isinstance(self.problem, CompositeProblem) else None


def _require(cond, msg):
    if not cond:
        raise ConfigError(msg)


def _as_array(obj, msg):
    try:
        arr = np.asarray(obj, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{msg}: {exc}") from exc
    _require(np.all(np.isfinite(arr)), f"{msg}: non-finite entries")
    return arr


def _build_problem(spec: dict):
    _require(isinstance(spec, dict), "'problem' must be an object")
    if "corpus" in spec:
        params = spec.get("params", {})
        _require(isinstance(params, dict), "'problem.params' must be an object")
        entry = load_corpus(spec["corpus"], **params)
        return entry.problem, entry

    _require("f" in spec and "g" in spec,
             "inline problem needs 'f' and 'g' (or use 'corpus')")
    f_spec, g_spec = spec["f"], spec["g"]
    kind = f_spec.get("kind")
    if kind == "quadratic":
        Q = _as_array(f_spec["Q"], "f.Q")
        b = _as_array(f_spec["b"], "f.b") if "b" in f_spec else None
        f = quadratic_smooth(Q, b, float(f_spec.get("const", 0.0)))
        dim = Q.shape[0]
    elif kind == "least_squares":
        A = _as_array(f_spec["A"], "f.A")
        b = _as_array(f_spec["b"], "f.b")
        f = least_squares_smooth(A, b)
        dim = A.shape[1]
    elif kind == "zero":
        f = zero_smooth()
        dim = int(f_spec.get("dim", 0))
        _require(dim > 0, "zero smooth term needs an explicit 'dim'")
    else:
        raise ConfigError(f"unknown smooth kind {kind!r}")

    gkind = g_spec.get("kind")
    if gkind == "l1":
        g = l1_term(float(g_spec["lam"]))
    elif gkind == "mcp":
        g = mcp_term(float(g_spec["lam"]), float(g_spec["b"]))
    elif gkind == "indicator_box":
        g = box_indicator_term(_as_array(g_spec["lo"], "g.lo"),
                               _as_array(g_spec["hi"], "g.hi"))
    elif gkind == "zero":
        g = zero_term()
    else:
        raise ConfigError(f"unknown nonsmooth kind {gkind!r}")

    analytic = None
    a_spec = spec.get("analytic")
    if a_spec:
        x_star = (_as_array(a_spec["x_star"], "analytic.x_star")
                  if "x_star" in a_spec else None)
        analytic = AnalyticOracles(
            critical_points=None if x_star is None else [x_star],
            project_critical=None if x_star is None else (lambda x: x_star),
            optimal_value=(float(a_spec["optimal_value"])
                           if "optimal_value" in a_spec else None),
            subdiff_dist=(None if g.min_norm_subgrad is None
                          else (lambda x: g.min_norm_subgrad(x, f.grad(x)))))
    p = CompositeProblem(f=f, g=g, dim=dim, analytic=analytic)
    entry = None
    if a_spec and "x_star" in a_spec:
        entry_extras = {"sublevel_oracle": SolutionSetOracle(
            [_as_array(a_spec["x_star"], "analytic.x_star")])}
        entry = CorpusEntry(id="inline", problem=p, analytic=analytic,
                            regions=[], box=(None, None), notes="inline",
                            extras=entry_extras)
    return p, entry


def _build_schedule(spec: dict, p):
    kind = spec.get("kind", "euclidean")
    if kind == "euclidean":
        return ConstantSchedule(euclidean_kernel(float(spec.get("scale", 1.0))))
    if kind == "diagonal":
        return ConstantSchedule(diagonal_kernel(_as_array(spec["weights"],
                                                          "kernel.weights")))
    if kind == "spd":
        return ConstantSchedule(spd_kernel(_as_array(spec["matrix"],
                                                     "kernel.matrix")))
    if kind == "diagonal_bb":
        return DiagonalBBSchedule(float(spec["m"]), float(spec["M"]))
    if kind == "block_jacobi":
        _require(p is not None and isinstance(p, CompositeProblem),
                 "block_jacobi kernel needs a composite problem")
        blocks = [np.asarray(b, dtype=int) for b in spec["blocks"]]
        c_weights = _as_array(spec.get("c_weights", np.ones(len(blocks))),
                              "kernel.c_weights")
        return BlockJacobiSchedule(p, blocks, c_weights)
    raise ConfigError(f"unknown kernel kind {kind!r}")


def _parse_region(spec: dict, problem) -> Region:
    _require(isinstance(spec, dict) and "x_bar" in spec and "eta" in spec
             and "nu" in spec, "region needs x_bar, eta, nu")
    x_bar = _as_array(spec["x_bar"], "region.x_bar")
    eta, nu = float(spec["eta"]), float(spec["nu"])
    _require(eta > 0 and nu > 0, "region needs eta > 0 and nu > 0")
    if "F_bar" in spec:
        F_bar = float(spec["F_bar"])
    else:
        from .diagnostics import evaluate_F
        F_bar = evaluate_F(problem, x_bar)
    return Region(x_bar=x_bar, eta=eta, nu=nu, F_bar=F_bar)


def parse_config(doc: dict) -> ExperimentConfig:
    """Assemble and validate a config dictionary into live objects."""
    _require(isinstance(doc, dict), "config root must be a JSON object")
    _require("problem" in doc, "config needs a 'problem' section")
    problem, entry = _build_problem(doc["problem"])

    seed = int(doc.get("seed", 0))
    schedule = None
    solver = None
    x0 = None
    if "eps" in doc:
        comp = problem if isinstance(problem, CompositeProblem) else None
        schedule = _build_schedule(doc.get("kernel", {}), comp)
        try:
            solver = VbpgConfig(
                schedule=schedule,
                eps=doc["eps"],
                eps_lo=doc.get("eps_lo"),
                eps_hi=doc.get("eps_hi"),
                max_iters=int(doc.get("max_iters", 1000)),
                stop_tol=float(doc.get("stop_tol", 1e-10)),
                inner_tol=doc.get("inner_tol"))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if comp is not None and comp.f.lipschitz_L > 0:
            limit = schedule.m / comp.f.lipschitz_L
            _require(solver.eps_hi < limit,
                     f"descent regime violated: eps_hi={solver.eps_hi} >= "
                     f"m/L={limit}; the per-step descent coefficient "
                     "a = (m/eps - L)/2 must be positive")
    if "x0" in doc:
        x0 = _as_array(doc["x0"], "x0")

    diagnostics = doc.get("diagnostics", [])
    _require(isinstance(diagnostics, list), "'diagnostics' must be a list")
    for i, req in enumerate(diagnostics):
        _require(isinstance(req, dict) and "kind" in req,
                 f"diagnostics[{i}] needs a 'kind'")
        if "region" in req:
            req = dict(req)
            req["region"] = _parse_region(req["region"], problem)
            diagnostics[i] = req

    return ExperimentConfig(problem=problem, entry=entry, schedule=schedule,
                            solver=solver, x0=x0, seed=seed,
                            diagnostics=diagnostics, raw_dict=doc)


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path} at line {exc.lineno}, "
                          f"column {exc.colno}: {exc.msg}") from exc
    return parse_config(doc)
