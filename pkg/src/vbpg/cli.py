"""Command-line front end: run | certify | paper-checks.

Exit codes: 0 success (including REFUTED certificates, which are successful
computations), 1 failed paper check, 2 configuration error, 3 solver error,
4 missing capability (a requested diagnostic needs an oracle the problem does
not provide).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from .bregman import BregmanStep, euclidean_kernel
from .config import load_config
from .corpus import CorpusEntry
from .diagnostics import (certify_bp_gap, certify_bregman_prox_eb, certify_kl,
                          certify_level_set_bregman_eb,
                          certify_level_set_subdiff_eb, certify_prox_pl,
                          certify_weak_metric_subreg, check_assumption_h,
                          check_sufficient_conditions, scan_counterexample)
from .errors import (CapabilityError, ConfigError, InnerSolverError,
                     InsufficientSamplesError, NumericError, RegimeError,
                     VbpgError)
from .problem import CompositeProblem
from .solver import run_vbpg

log = logging.getLogger("vbpg")

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_CAPABILITY = 4

TRACE_HEADER = "k,F,step_norm,gap,envelope,residual_bound"


def _fmt(v) -> str:
    return f"{float(v):.17g}"


def write_text_atomic(path: Path, text: str) -> None:
    """Write via a sibling temp file and rename, so readers never see a torn file."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json_atomic(path: Path, obj) -> None:
    write_text_atomic(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def trace_to_csv(trace) -> str:
    lines = [TRACE_HEADER]
    for k, F, step, gap, env, resb in trace.csv_rows():
        lines.append(",".join([str(k), _fmt(F), _fmt(step), _fmt(gap),
                               _fmt(env), _fmt(resb)]))
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------

def cmd_run(config_path, out_dir, seed_override=None) -> int:
    cfg = load_config(config_path)
    if cfg.composite is None:
        raise ConfigError("this problem has no smooth/nonsmooth split, so the "
                          "solver does not apply; it is diagnostics-only")
    if cfg.solver is None:
        raise ConfigError("config needs 'eps' (and optionally 'kernel') to run")
    if cfg.x0 is None:
        raise ConfigError("config needs 'x0' to run")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    trace = run_vbpg(cfg.composite, cfg.solver, cfg.x0)
    write_text_atomic(out / "trace.csv", trace_to_csv(trace))
    write_json_atomic(out / "summary.json", trace.summary())
    log.info("run finished after %d iterations (%s)", trace.iters,
             trace.stop_reason)
    return EXIT_OK


def _entry_extras(cfg) -> dict:
    return cfg.entry.extras if isinstance(cfg.entry, CorpusEntry) else {}


def _default_region(cfg, req):
    if "region" in req:
        return req["region"]
    if cfg.entry is not None and cfg.entry.regions:
        return cfg.entry.regions[0]
    raise ConfigError("diagnostics request needs a 'region' (the problem has "
                      "no recommended region)")


def _oracle_for(cfg):
    oracle = _entry_extras(cfg).get("sublevel_oracle")
    if oracle is None:
        raise CapabilityError("no sublevel-set distance oracle available for "
                              "this problem")
    return oracle


def _step_for(cfg, req):
    eps = req.get("eps")
    if eps is None and cfg.solver is not None:
        eps = cfg.solver.eps_at(0)
    if eps is None:
        raise ConfigError("diagnostics request needs 'eps' (or a solver config)")
    return BregmanStep(euclidean_kernel(), float(eps))


def _dispatch_certify(cfg, req, seed):
    kind = req["kind"]
    extras = _entry_extras(cfg)
    n = int(req.get("n_samples", 1000))
    witness = extras.get("witness_points") if req.get("use_witness") else None

    if kind == "scan":
        ns = req.get("ns")
        if ns is None:
            ns = range(int(req.get("n_lo", 2)), int(req.get("n_hi", 50)) + 1)
        return scan_counterexample(req["example"], ns,
                                   alpha=float(req.get("alpha", 0.5)))
    if kind == "level_set_subdiff":
        return certify_level_set_subdiff_eb(
            cfg.problem, _default_region(cfg, req), float(req.get("gamma", 1.0)),
            n, seed, _oracle_for(cfg))
    if kind == "level_set_bregman":
        return certify_level_set_bregman_eb(
            cfg.problem, _step_for(cfg, req), _default_region(cfg, req),
            float(req.get("p", 1.0)), n, seed, _oracle_for(cfg),
            prox_map=extras.get("prox_map") if req.get("use_prox_map") else None,
            witness_points=witness,
            witness_ratio=(None if witness is None or "crit_dist" not in extras
                           else _crit_ratio(cfg, extras)))
    if kind == "bregman_prox":
        return certify_bregman_prox_eb(
            cfg.problem, _step_for(cfg, req), _default_region(cfg, req), n, seed,
            crit_dist=_crit_dist_for(cfg),
            prox_map=extras.get("prox_map") if req.get("use_prox_map") else None,
            witness_points=witness)
    if kind == "weak_metric_subreg":
        return certify_weak_metric_subreg(
            cfg.problem, _default_region(cfg, req), n, seed,
            crit_dist=_crit_dist_for(cfg), witness_points=witness)
    if kind == "kl":
        return certify_kl(cfg.problem, _default_region(cfg, req),
                          float(req.get("alpha", 0.5)), n, seed,
                          witness_points=witness)
    if kind == "bp_gap":
        return certify_bp_gap(cfg.problem, _step_for(cfg, req),
                              _default_region(cfg, req),
                              float(req.get("q", 1.0)), n, seed)
    if kind == "prox_pl":
        if cfg.entry is None:
            raise CapabilityError("prox_pl needs a problem with a known box")
        return certify_prox_pl(cfg.problem, float(req.get("nu", 0.5)),
                               float(req.get("mu", 0.0)), cfg.entry.box, n, seed)
    if kind == "sufficient_condition":
        region = _default_region(cfg, req)
        return check_sufficient_conditions(
            cfg.problem, region.x_bar, region.eta, req["which"],
            req.get("mu"), n, seed)
    if kind == "assumption_h":
        deltas = [float(d) for d in req["deltas"]]
        region = _default_region(cfg, req)
        return check_assumption_h(cfg.problem, region.x_bar, deltas,
                                  analytic=cfg.entry.analytic if cfg.entry
                                  else None)
    raise ConfigError(f"unknown diagnostics kind {kind!r}")


def _crit_dist_for(cfg):
    fn = _entry_extras(cfg).get("crit_dist")
    if fn is not None:
        return fn
    analytic = getattr(cfg.problem, "analytic", None) or (
        cfg.entry.analytic if cfg.entry else None)
    if analytic is not None and analytic.project_critical is not None:
        return lambda x: float(np.linalg.norm(x - analytic.project_critical(x)))
    raise CapabilityError("no critical-set distance oracle available")


def _crit_ratio(cfg, extras):
    crit = extras["crit_dist"]
    prox = extras.get("prox_map")
    if prox is None:
        return None

    def ratio(x):
        den = float(np.linalg.norm(x - prox(x)))
        return float("inf") if den == 0.0 else crit(x) / den

    return ratio


def _result_payload(result):
    if hasattr(result, "to_dict"):
        return result.to_dict()
    if hasattr(result, "ratios") and hasattr(result, "ns"):   # ScanReport
        return {
            "example": result.example_id,
            "monotone": result.monotone,
            "concluded": result.concluded,
            "passed": result.passed,
            "positive_certificate": (result.positive_certificate.to_dict()
                                     if result.positive_certificate else None),
        }
    out = dict(vars(result))
    for key, val in list(out.items()):
        if isinstance(val, np.ndarray):
            out[key] = [float(v) for v in val]
    return out


def cmd_certify(config_path, out_dir, seed_override=None, jobs=1) -> int:
    cfg = load_config(config_path)
    if not cfg.diagnostics:
        raise ConfigError("config has no 'diagnostics' requests")
    seed = cfg.seed if seed_override is None else int(seed_override)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    def run_one(item):
        i, req = item
        result = _dispatch_certify(cfg, req, seed + i)
        return i, req, result

    items = list(enumerate(cfg.diagnostics))
    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run_one, items))
    else:
        results = [run_one(item) for item in items]

    for i, req, result in results:
        kind = req["kind"]
        if kind == "scan":
            lines = ["n,ratio"]
            lines += [f"{int(n)},{_fmt(r)}"
                      for n, r in zip(result.ns, result.ratios)]
            write_text_atomic(out / f"scan_{result.example_id}.csv",
                              "\n".join(lines) + "\n")
        write_json_atomic(out / f"certificate_{i:02d}_{kind}.json",
                          _result_payload(result))
        verdict = getattr(result, "verdict", None) or (
            "PASS" if getattr(result, "passed", True) else "FAIL")
        log.info("diagnostics[%d] %s: %s", i, kind, verdict)
    return EXIT_OK


def cmd_paper_checks(out_dir) -> int:
    from .paper_checks import run_all
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write_probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise ConfigError(f"output directory not writable: {exc}") from exc
    results = run_all(out)
    manifest = {
        "schema_version": 1,
        "checks": [{"id": r["id"], "name": r["name"], "passed": r["passed"],
                    "details": r["details"]} for r in results],
        "all_passed": all(r["passed"] for r in results),
    }
    write_json_atomic(out / "manifest.json", manifest)
    for r in results:
        status = "PASS" if r["passed"] else "FAIL"
        print(f"[{r['id']}] {status} {r['name']}")
    if not manifest["all_passed"]:
        failing = [r["id"] for r in results if not r["passed"]]
        print(f"failed checks: {', '.join(failing)}", file=sys.stderr)
        return EXIT_CHECK_FAILED
    return EXIT_OK


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="vbpg",
        description="Variable-kernel Bregman proximal gradient solver and "
                    "error-bound diagnostics")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the solver and write a trace")
    run.add_argument("--config", required=True)
    run.add_argument("--out", required=True)
    run.add_argument("--seed", type=int, default=None)

    cert = sub.add_parser("certify", help="run diagnostics requests")
    cert.add_argument("--config", required=True)
    cert.add_argument("--out", required=True)
    cert.add_argument("--seed", type=int, default=None)
    cert.add_argument("--jobs", type=int, default=1)

    checks = sub.add_parser("paper-checks",
                            help="run the full acceptance suite")
    checks.add_argument("--out", required=True)
    return ap


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("VBPG_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(args.config, args.out, args.seed)
        if args.command == "certify":
            return cmd_certify(args.config, args.out, args.seed, args.jobs)
        return cmd_paper_checks(args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CapabilityError as exc:
        print(f"capability error: {exc}", file=sys.stderr)
        return EXIT_CAPABILITY
    except (InnerSolverError, NumericError, RegimeError,
            InsufficientSamplesError, VbpgError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
