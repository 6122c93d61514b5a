"""CLI and scenario-runner surfaces: config validation, results schema,
exit codes, determinism."""

import json
import subprocess
import sys

import pytest

from relfrac import scenarios
from relfrac.cli import main


def write_cfg(tmp_path, doc, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def constants_cfg(out):
    return {"scenario": "constants",
            "params": {"N": 1, "s": 0.5 if False else 0.25, "m": 0.0},
            "numerics": {"tolerances": {"kappa": 1e-6}},
            "output_dir": out}


def test_list_scenarios(capsys):
    assert main(["list-scenarios"]) == 0
    out = capsys.readouterr().out.split()
    assert "halfdisk_pipeline" in out and "constants" in out


def test_validate_ok(tmp_path, capsys):
    cfg = write_cfg(tmp_path, constants_cfg(str(tmp_path / "out")))
    assert main(["validate", "--config", cfg]) == 0


def test_validate_missing_chi(tmp_path):
    doc = constants_cfg(str(tmp_path / "out"))
    doc["params"]["potential"] = {"a_kind": "two_point", "a_minus": 0.1,
                                  "a_plus": 0.1, "h_kind": "power", "c_h": 0.1}
    cfg = write_cfg(tmp_path, doc)
    assert main(["validate", "--config", cfg]) == 1


def test_validate_inadmissible_amplitude(tmp_path):
    doc = {"scenario": "angular",
           "params": {"N": 3, "s": 0.5,
                      "potential": {"a_kind": "constant", "a0": 6.4}},
           "numerics": {"precheck_grid_n": 256},
           "output_dir": str(tmp_path / "out")}
    problems = scenarios.validate_dict(doc)
    assert any("inadmissible" in p for p in problems)


def test_validate_unknown_scenario(tmp_path):
    assert scenarios.validate_dict({"scenario": "wat"}) != []


def test_run_constants_and_determinism(tmp_path):
    out1 = tmp_path / "o1"
    out2 = tmp_path / "o2"
    doc = constants_cfg(str(out1))
    cfg = scenarios.ScenarioConfig.from_dict(doc)
    status, res = scenarios.run(cfg, plots=False)
    assert status == 0
    assert all(("tolerance" in c and "passed" in c) for c in res["checks"])
    status2, _ = scenarios.run(cfg, out_dir=str(out2), plots=False)
    b1 = (out1 / "results.json").read_bytes()
    b2 = (out2 / "results.json").read_bytes()
    assert b1 == b2
    doc_loaded = json.loads(b1)
    assert doc_loaded["scenario"] == "constants"
    assert doc_loaded["all_passed"] is True


def test_run_via_cli_with_plots(tmp_path, capsys):
    doc = {"scenario": "kernel_test",
           "params": {"N": 1, "s": 0.25, "m": 1.0},
           "numerics": {"t_values": [0.5], "tolerances": {"normalization": 1e-6}},
           "output_dir": str(tmp_path / "out")}
    cfg = write_cfg(tmp_path, doc)
    status = main(["run", "--config", cfg])
    assert status == 0
    printed = capsys.readouterr().out
    assert "[PASS]" in printed
    outdir = tmp_path / "out"
    assert (outdir / "results.json").exists()
    assert (outdir / "kernel.csv").exists()
    assert (outdir / "kernel_mass.png").exists()


def test_run_failing_check_exits_2(tmp_path):
    # absurdly tight tolerance forces a FAIL -> exit 2
    doc = {"scenario": "kernel_test",
           "params": {"N": 1, "s": 0.25, "m": 1.0},
           "numerics": {"t_values": [0.5],
                        "tolerances": {"normalization": 1e-18}},
           "output_dir": str(tmp_path / "out")}
    cfg = write_cfg(tmp_path, doc)
    assert main(["run", "--config", cfg, "--no-plots"]) == 2


def test_run_invalid_config_exits_1(tmp_path):
    cfg = write_cfg(tmp_path, {"scenario": "nope"})
    assert main(["run", "--config", cfg]) == 1


def test_console_script_entrypoint():
    proc = subprocess.run([sys.executable, "-m", "relfrac.cli", "list-scenarios"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "beta" in proc.stdout


def test_separable_frequency_scenario(tmp_path):
    doc = {"scenario": "separable_frequency",
           "params": {"N": 1, "s": 0.25, "m": 0.0,
                      "potential": {"a_kind": "two_point", "a_minus": 0.1,
                                    "a_plus": 0.1}},
           "numerics": {"radial_kind": "power", "grid_n": 512},
           "output_dir": str(tmp_path / "out")}
    cfg = scenarios.ScenarioConfig.from_dict(doc)
    status, res = scenarios.run(cfg, plots=True)
    assert status == 0
    assert (tmp_path / "out" / "trace.csv").exists()
    assert (tmp_path / "out" / "frequency_trace.png").exists()
    for chk in res["checks"]:
        assert chk["passed"], chk
