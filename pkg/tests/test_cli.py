import json

import pytest

from pfaffchain.cli import main


def test_moments_writes_reports(tmp_path):
    out = tmp_path / "r"
    assert main(["--out", str(out), "moments", "--n", "2"]) == 0
    report = json.loads((out / "tau_n2.json").read_text())
    assert report["selberg_ratio_check"] == pytest.approx(1.0, abs=1e-6)
    assert (out / "moments_n2.csv").exists()


def test_moments_guard_exit_code(tmp_path):
    assert main(["--out", str(tmp_path), "moments", "--n", "1",
                 "--t3", "0.1"]) == 2


def test_moments_with_valid_coupling(tmp_path):
    assert main(["--out", str(tmp_path), "moments", "--n", "1",
                 "--t2", "-0.05"]) == 0


def test_tau_table(tmp_path):
    out = tmp_path / "r"
    assert main(["--out", str(out), "tau", "--n-max", "2"]) == 0
    table = json.loads((out / "tau_table.json").read_text())["table"]
    assert [row["n"] for row in table] == [1, 2]


def test_lax_verify_passes(tmp_path):
    out = tmp_path / "r"
    assert main(["--out", str(out), "--seed", "1", "lax-verify",
                 "--trials", "3"]) == 0
    report = json.loads((out / "lax_verify.json").read_text())
    assert report["pass"] and report["max_mismatch"] <= 1e-12


def test_lax_verify_even_flow(tmp_path):
    assert main(["--out", str(tmp_path), "lax-verify", "--flows", "t2_even",
                 "--even", "--trials", "2"]) == 0


def test_lax_verify_truncation_too_tight(tmp_path):
    assert main(["--out", str(tmp_path), "lax-verify", "--sites", "4",
                 "--depth", "5", "--trials", "1"]) == 2


def test_continuum_check(tmp_path):
    out = tmp_path / "r"
    assert main(["--out", str(out), "continuum-check",
                 "--eps", "1/64,1/128,1/256"]) == 0
    report = json.loads((out / "continuum_check.json").read_text())
    assert len(report["reports"]) == 3


def test_continuum_check_single_epsilon(tmp_path):
    assert main(["--out", str(tmp_path), "continuum-check",
                 "--eps", "1/64"]) == 2


def test_haantjes_scan_passes(tmp_path):
    out = tmp_path / "r"
    assert main(["--out", str(out), "haantjes", "--window", "3",
                 "--points", "2"]) == 0
    report = json.loads((out / "haantjes_scan.json").read_text())
    assert report["haantjes_nonzero"] == []


def test_haantjes_mutated_spec_fails(tmp_path):
    spec = {"base": "paper", "overrides": {"0,1": [["1", [0]]]}}
    spec_path = tmp_path / "mutated.json"
    spec_path.write_text(json.dumps(spec))
    assert main(["--out", str(tmp_path), "haantjes", "--window", "2",
                 "--points", "1", "--spec", str(spec_path)]) == 1


def test_nijenhuis_oracle(tmp_path):
    assert main(["--out", str(tmp_path), "nijenhuis-oracle",
                 "--points", "1"]) == 0


def test_gt_pass_and_mutate(tmp_path):
    out = tmp_path / "r"
    assert main(["--out", str(out), "gt", "--jets", "5"]) == 0
    assert main(["--out", str(out), "gt", "--jets", "3", "--mutate"]) == 1


def test_chain_evolve(tmp_path):
    out = tmp_path / "r"
    assert main(["--out", str(out), "chain-evolve", "--steps", "3",
                 "--grid", "64"]) == 0
    assert (out / "chain_trajectory.csv").exists()


def test_reports_are_deterministic(tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    for out in (out1, out2):
        assert main(["--out", str(out), "--seed", "42", "gt", "--jets", "4"]) == 0
    assert (out1 / "gt_involutivity.json").read_bytes() == \
        (out2 / "gt_involutivity.json").read_bytes()


def test_config_file_defaults(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"gt": {"jets": 2}}))
    out = tmp_path / "r"
    assert main(["--out", str(out), "--config", str(cfg), "gt"]) == 0
    report = json.loads((out / "gt_involutivity.json").read_text())
    assert report["jets"] == 2
