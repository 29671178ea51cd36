import json

import pytest

from vbpg.cli import (EXIT_CAPABILITY, EXIT_CONFIG, EXIT_OK, TRACE_HEADER,
                      main)


def _write(tmp_path, name, doc):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def _run_cfg(tmp_path, **over):
    doc = {
        "problem": {"f": {"kind": "quadratic", "Q": [[1.0]]},
                    "g": {"kind": "zero"}},
        "eps": 0.5,
        "x0": [1.0],
        "max_iters": 20,
    }
    doc.update(over)
    return _write(tmp_path, "cfg.json", doc)


def test_run_writes_trace_and_summary(tmp_path):
    cfg = _run_cfg(tmp_path)
    out = tmp_path / "out"
    assert main(["run", "--config", cfg, "--out", str(out)]) == EXIT_OK
    lines = (out / "trace.csv").read_text().splitlines()
    assert lines[0] == TRACE_HEADER
    assert len(lines) == 21
    first = lines[1].split(",")
    assert first[0] == "0" and float(first[1]) == 0.5
    summary = json.loads((out / "summary.json").read_text())
    assert summary["stop_reason"] == "max_iters"
    assert summary["iters"] == 20


def test_run_deterministic_bytes(tmp_path):
    cfg = _run_cfg(tmp_path)
    bodies = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert main(["run", "--config", cfg, "--out", str(out)]) == EXIT_OK
        bodies.append((out / "trace.csv").read_bytes())
    assert bodies[0] == bodies[1]


def test_malformed_json_exit_2(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text('{"problem": \n  {"corpus": }\n}')
    code = main(["run", "--config", str(path), "--out", str(tmp_path / "o")])
    assert code == EXIT_CONFIG
    err = capsys.readouterr().err
    assert "line 2" in err and "column" in err


def test_missing_config_exit_2(tmp_path, capsys):
    code = main(["run", "--config", str(tmp_path / "nope.json"),
                 "--out", str(tmp_path / "o")])
    assert code == EXIT_CONFIG
    assert "not found" in capsys.readouterr().err


def test_regime_violation_exit_2(tmp_path, capsys):
    cfg = _run_cfg(tmp_path, eps=2.0)
    code = main(["run", "--config", cfg, "--out", str(tmp_path / "o")])
    assert code == EXIT_CONFIG
    assert "descent regime" in capsys.readouterr().err


def test_unknown_corpus_exit_2(tmp_path, capsys):
    cfg = _write(tmp_path, "cfg.json",
                 {"problem": {"corpus": "NOT_A_PROBLEM"}, "eps": 0.1,
                  "x0": [0.0]})
    code = main(["run", "--config", cfg, "--out", str(tmp_path / "o")])
    assert code == EXIT_CONFIG
    assert "valid ids" in capsys.readouterr().err


def test_run_rejects_diagnostics_only_problem(tmp_path, capsys):
    cfg = _write(tmp_path, "cfg.json",
                 {"problem": {"corpus": "EX_5_2"}, "eps": 0.1, "x0": [0.3]})
    code = main(["run", "--config", cfg, "--out", str(tmp_path / "o")])
    assert code == EXIT_CONFIG
    assert "diagnostics-only" in capsys.readouterr().err


def test_certify_kl_witness_refutation(tmp_path):
    cfg = _write(tmp_path, "cfg.json", {
        "problem": {"corpus": "EX_5_2"},
        "diagnostics": [{"kind": "kl", "alpha": 0.5, "use_witness": True}],
    })
    out = tmp_path / "out"
    assert main(["certify", "--config", cfg, "--out", str(out)]) == EXIT_OK
    cert = json.loads((out / "certificate_00_kl.json").read_text())
    assert cert["verdict"] == "REFUTED"
    assert cert["witness"]["mode"] == "vanishing"
    assert cert["params"]["alpha"] == 0.5


def test_certify_capability_missing_exit_4(tmp_path, capsys):
    # inline problem without analytic oracles: no sublevel-distance oracle
    cfg = _write(tmp_path, "cfg.json", {
        "problem": {"f": {"kind": "quadratic", "Q": [[1.0]]},
                    "g": {"kind": "zero"}},
        "diagnostics": [{"kind": "level_set_subdiff", "gamma": 1.0,
                         "region": {"x_bar": [0.0], "eta": 1.0, "nu": 0.5,
                                    "F_bar": 0.0}}],
    })
    code = main(["certify", "--config", cfg, "--out", str(tmp_path / "o")])
    assert code == EXIT_CAPABILITY
    assert "oracle" in capsys.readouterr().err


def test_certify_scan_writes_csv(tmp_path):
    cfg = _write(tmp_path, "cfg.json", {
        "problem": {"corpus": "EX_5_3"},
        "diagnostics": [{"kind": "scan", "example": "EX_5_3",
                         "n_lo": 2, "n_hi": 50}],
    })
    out = tmp_path / "out"
    assert main(["certify", "--config", cfg, "--out", str(out)]) == EXIT_OK
    lines = (out / "scan_EX_5_3.csv").read_text().splitlines()
    assert lines[0] == "n,ratio"
    assert len(lines) == 50
    assert lines[1].startswith("2,")
    payload = json.loads((out / "certificate_00_scan.json").read_text())
    assert payload["passed"] is True
    assert payload["positive_certificate"]["verdict"] == "CERTIFIED_ON_SAMPLES"


def test_certify_inline_with_analytic_solution(tmp_path):
    cfg = _write(tmp_path, "cfg.json", {
        "problem": {"f": {"kind": "quadratic", "Q": [[1.0, 0.0], [0.0, 1.0]]},
                    "g": {"kind": "zero"},
                    "analytic": {"x_star": [0.0, 0.0], "optimal_value": 0.0}},
        "seed": 5,
        "diagnostics": [{"kind": "level_set_subdiff", "gamma": 1.0,
                         "n_samples": 100,
                         "region": {"x_bar": [0.0, 0.0], "eta": 1.0,
                                    "nu": 0.5, "F_bar": 0.0}}],
    })
    out = tmp_path / "out"
    assert main(["certify", "--config", cfg, "--out", str(out)]) == EXIT_OK
    cert = json.loads(
        (out / "certificate_00_level_set_subdiff.json").read_text())
    assert cert["verdict"] == "CERTIFIED_ON_SAMPLES"
    assert cert["worst_ratio"] == pytest.approx(1.0, abs=1e-10)


def test_certify_requires_requests(tmp_path, capsys):
    cfg = _run_cfg(tmp_path)
    code = main(["certify", "--config", cfg, "--out", str(tmp_path / "o")])
    assert code == EXIT_CONFIG
    assert "diagnostics" in capsys.readouterr().err


def test_certify_parallel_matches_serial(tmp_path):
    doc = {
        "problem": {"corpus": "QUAD_SC"},
        "seed": 9,
        "diagnostics": [
            {"kind": "kl", "alpha": 0.5, "n_samples": 100},
            {"kind": "weak_metric_subreg", "n_samples": 100},
        ],
    }
    cfg = _write(tmp_path, "cfg.json", doc)
    out1, out2 = tmp_path / "serial", tmp_path / "parallel"
    assert main(["certify", "--config", cfg, "--out", str(out1)]) == EXIT_OK
    assert main(["certify", "--config", cfg, "--out", str(out2),
                 "--jobs", "2"]) == EXIT_OK
    for name in ("certificate_00_kl.json",
                 "certificate_01_weak_metric_subreg.json"):
        assert (out1 / name).read_text() == (out2 / name).read_text()
