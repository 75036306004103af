"""Config parsing, command outputs, CLI exit codes, determinism."""

import csv
import filecmp
import json
import math
import os

import numpy as np
import pytest

from entlab import ValidationError, berry_esseen_residual, min_dilution_dimension
from entlab.lab import (
    ExperimentConfig,
    cmd_communication,
    cmd_concentration,
    cmd_inefficiency,
    cmd_spectrum,
    find_min_budget,
    load_config,
    parse_config_file,
    with_updates,
)
from entlab.lab.cli import main
from entlab.spectrum import tensor_power_spectrum

P_QUARTER = np.array([0.75, 0.25])


def tiny_config(out, **kw):
    base = dict(
        p=(0.75, 0.25),
        n_grid=(8, 16),
        grid_cells=5,
        seed=3,
        out=str(out),
        threads=1,
    )
    base.update(kw)
    return ExperimentConfig(**base)


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_parse_config_file(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(
        "# comment line\n"
        "p = 0.6, 0.4\n"
        "n_grid = 16, 64\n"
        "\n"
        "delta = 0.9   # trailing comment\n"
        "threads = 2\n"
        "out = results\n"
    )
    raw = parse_config_file(str(cfg))
    assert raw["p"] == "0.6, 0.4"  # parse keeps strings, load coerces
    config = load_config(str(cfg))
    assert config.p == (0.6, 0.4)
    assert config.n_grid == (16, 64)
    assert config.delta == 0.9
    assert config.threads == 2
    assert config.out == "results"


def test_parse_config_rejects_unknown_keys(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("p = 0.5, 0.5\nmystery = 3\n")
    with pytest.raises(ValidationError) as err:
        parse_config_file(str(cfg))
    assert "bad.cfg:2" in str(err.value)


def test_load_config_rejects_malformed_values(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("threads = soon\n")
    with pytest.raises(ValidationError) as err:
        load_config(str(cfg))
    assert "threads" in str(err.value)


def test_parse_config_rejects_missing_equals(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("just some words\n")
    with pytest.raises(ValidationError) as err:
        parse_config_file(str(cfg))
    assert "bad.cfg:1" in str(err.value)


def test_load_config_override_precedence(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("delta = 0.9\nseed = 5\n")
    config = load_config(str(cfg), {"seed": 11, "epsilon": None})
    assert config.delta == 0.9  # file value kept
    assert config.seed == 11  # override wins
    assert config.epsilon == 0.1  # default, None override skipped


def test_config_validation():
    with pytest.raises(ValidationError):
        ExperimentConfig(p=(0.9, 0.2))
    with pytest.raises(ValidationError):
        ExperimentConfig(n_grid=(64, 32))
    with pytest.raises(ValidationError):
        ExperimentConfig(threads=0)
    with pytest.raises(ValidationError):
        ExperimentConfig(delta=0.0)
    with pytest.raises(ValidationError):
        ExperimentConfig(epsilon=2.0)
    cfg = ExperimentConfig()
    assert with_updates(cfg, seed=9).seed == 9


def test_cmd_spectrum_rows_rederive(tmp_path):
    config = tiny_config(tmp_path / "o")
    written = cmd_spectrum(config)
    names = {os.path.basename(w) for w in written}
    assert "residuals.csv" in names
    assert {"spectrum_n8.json", "spectrum_n16.json"} <= names

    doc = json.load(open(tmp_path / "o" / "spectrum_n8.json"))
    assert doc["n"] == 8

    rows = read_rows(tmp_path / "o" / "residuals.csv")
    assert len(rows) == 2 * config.grid_cells**2
    for row in rows[:: len(rows) // 7]:
        res = berry_esseen_residual(
            P_QUARTER, int(row["n"]), float(row["a"]), float(row["b"])
        )
        assert abs(res.residual - float(row["residual"])) < 1e-9
        # %.12g keeps 12 significant digits, so compare relatively
        assert abs(res.bound - float(row["bound"])) < 5e-12 * max(1.0, res.bound)
        assert row["pass"] == ("true" if res.passed else "false")


def test_cmd_inefficiency_rows_rederive(tmp_path):
    config = tiny_config(tmp_path / "o")
    written = cmd_inefficiency(config)
    names = {os.path.basename(w) for w in written}
    assert {"inefficiency.csv", "growth_fit.csv", "growth_summary.json"} <= names

    for row in read_rows(tmp_path / "o" / "inefficiency.csv"):
        n = int(row["n"])
        md = min_dilution_dimension(P_QUARTER, n, config.eps_reference)
        assert abs(float(row["lower_bits"]) - md.lower_log2) < 1e-9
        assert abs(float(row["upper_bits"]) - md.upper_log2) < 1e-9
        assert float(row["upper_bits"]) >= float(row["lower_bits"])

    summary = json.load(open(tmp_path / "o" / "growth_summary.json"))
    assert "fitted_sqrt_coeff" in summary and "gaussian_quantile_coeff" in summary


def test_cmd_communication_budget_table(tmp_path):
    config = tiny_config(tmp_path / "o", budget_grid=(0, 1, 2))
    written = cmd_communication(config)
    names = {os.path.basename(w) for w in written}
    assert "communication.csv" in names
    assert "communication_budgets.csv" in names
    assert {"cert_n8.json", "cert_n16.json"} <= names

    rows = read_rows(tmp_path / "o" / "communication.csv")
    spec8 = tensor_power_spectrum(P_QUARTER, 8)
    c8 = int([r for r in rows if r["n"] == "8"][0]["c_star"])
    c_star, _, report = find_min_budget(spec8, 8, config.epsilon)
    assert c8 == c_star
    assert report.epsilon <= config.epsilon

    cert = json.load(open(tmp_path / "o" / "certificates" / "cert_n8.json"))
    assert cert["n"] == 8
    assert cert["c_star"] == c8
    assert cert["consistent"] is True

    budget_rows = read_rows(tmp_path / "o" / "communication_budgets.csv")
    assert {int(r["budget"]) for r in budget_rows if r["n"] == "8"} == {0, 1, 2}
    # run error can only improve as budget grows
    errs = [float(r["run_epsilon"]) for r in sorted(budget_rows, key=lambda r: (int(r["n"]), int(r["budget"]))) if r["n"] == "8"]
    assert all(a >= b - 1e-12 for a, b in zip(errs, errs[1:]))


def test_cmd_concentration_rows_rederive(tmp_path):
    from entlab.locc import concentrate

    config = tiny_config(tmp_path / "o")
    cmd_concentration(config)
    for row in read_rows(tmp_path / "o" / "concentration.csv"):
        n = int(row["n"])
        res = concentrate(P_QUARTER, n)
        assert abs(float(row["expected_yield"]) - res.expected_yield) < 1e-9
        deficit = n * res.entropy_rate - res.expected_yield
        assert abs(float(row["deficit"]) - deficit) < 1e-9


def _run_everything(config):
    cmd_spectrum(config)
    cmd_inefficiency(config)
    cmd_communication(config)
    cmd_concentration(config)


def _tree(root):
    out = {}
    for base, _, files in os.walk(root):
        for f in files:
            p = os.path.join(base, f)
            out[os.path.relpath(p, root)] = p
    return out


def test_outputs_are_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    _run_everything(tiny_config(a))
    _run_everything(tiny_config(b))
    ta, tb = _tree(a), _tree(b)
    assert ta.keys() == tb.keys()
    for rel in ta:
        assert filecmp.cmp(ta[rel], tb[rel], shallow=False), rel


def test_thread_count_does_not_change_outputs(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    _run_everything(tiny_config(a, threads=1))
    _run_everything(tiny_config(b, threads=3))
    ta, tb = _tree(a), _tree(b)
    assert ta.keys() == tb.keys()
    for rel in ta:
        assert filecmp.cmp(ta[rel], tb[rel], shallow=False), rel


def test_cli_spectrum_roundtrip(tmp_path, capsys):
    code = main(
        [
            "spectrum",
            "--out",
            str(tmp_path / "cli"),
            "--n-grid",
            "8",
            "--p",
            "0.75,0.25",
        ]
    )
    assert code == 0
    printed = capsys.readouterr().out.strip().splitlines()
    assert any(line.endswith("residuals.csv") for line in printed)
    assert (tmp_path / "cli" / "spectrum_n8.json").exists()


def test_cli_exit_codes(tmp_path, capsys):
    bad_cfg = tmp_path / "bad.cfg"
    bad_cfg.write_text("mystery = 1\n")
    assert main(["spectrum", "--config", str(bad_cfg)]) == 2

    assert main(["spectrum", "--p", "0.9,0.2", "--out", str(tmp_path / "x")]) == 2

    blocker = tmp_path / "file_not_dir"
    blocker.write_text("x")
    code = main(["concentration", "--n-grid", "4", "--out", str(blocker)])
    assert code == 4

    with pytest.raises(SystemExit):
        main(["no-such-command"])
    capsys.readouterr()


def test_cli_selftest_passes(tmp_path, capsys):
    code = main(["selftest", "--out", str(tmp_path / "st")])
    out = capsys.readouterr().out
    assert code == 0
    assert "8/8 checks passed" in out
