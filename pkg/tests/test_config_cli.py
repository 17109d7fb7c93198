import json
import hashlib
from pathlib import Path

import numpy as np
import pytest

from relsens import cli
from relsens.config import load_config, validate_config
from relsens.errors import ConfigError

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


def _base_config(**overrides):
    raw = {
        "inputs": [
            {"name": "R", "dist": "lognormal", "mean": 100, "cov": 0.2},
            {"name": "S", "dist": "lognormal", "mean": 40, "cov": 0.25},
            {"name": "XR", "dist": "lognormal", "mean": 1, "cov": 0.1},
            {"name": "XS", "dist": "lognormal", "mean": 1, "cov": 0.2},
        ],
        "lsf": {"builtin": "example1_safety"},
        "decision": {"safety": {"c_f": 1e8, "c_r": 1e6}},
        "method": "analytic",
        "seed": 5,
        "outputs": "out",
    }
    raw.update(overrides)
    return raw


# -- validation -----------------------------------------------------------------

def test_shipped_configs_valid():
    for name in ("example1_safety.json", "example1_safety_dependent.json",
                 "example1_design.json", "example2_safety.json"):
        cfg = load_config(CONFIG_DIR / name)
        assert len(cfg.names) == 4


def test_undeclared_lsf_variable_named():
    raw = _base_config(lsf={"expression": "ln(R) - ln(Q)"})
    with pytest.raises(ConfigError, match="Q"):
        validate_config(raw)


def test_bad_correlation_diagonal():
    raw = _base_config(correlation=[[1.3, 0, 0, 0], [0, 1, 0, 0],
                                    [0, 0, 1, 0], [0, 0, 0, 1]])
    with pytest.raises(ConfigError, match="diagonal"):
        validate_config(raw)


def test_duplicate_names_rejected():
    raw = _base_config()
    raw["inputs"][1]["name"] = "R"
    with pytest.raises(ConfigError, match="unique"):
        validate_config(raw)


def test_method_requirements():
    with pytest.raises(ConfigError, match="requires n"):
        validate_config(_base_config(method="mc"))
    with pytest.raises(ConfigError, match="n_per_level"):
        validate_config(_base_config(method="subset"))


def test_analytic_accepts_product_difference():
    # a difference of input products shares its failure event with a
    # linear function of the logs, so the analytic route applies
    raw = _base_config(lsf={"expression": "R - S*XR"})
    cfg = validate_config(raw)
    assert cfg.method == "analytic"


def test_analytic_requires_linear_log_form():
    raw = _base_config(lsf={"expression": "R - S - XR"})
    with pytest.raises(ConfigError, match="analytic"):
        validate_config(raw)


def test_analytic_rejects_non_lognormal():
    raw = _base_config()
    raw["inputs"][0] = {"name": "R", "dist": "normal", "mean": 100, "cov": 0.2}
    with pytest.raises(ConfigError, match="lognormal"):
        validate_config(raw)


def test_safety_block_rejected_for_design_lsf():
    raw = _base_config(lsf={"builtin": "example1_design"})
    with pytest.raises(ConfigError, match="design parameter"):
        validate_config(raw)


def test_schema_violation_has_field_path():
    raw = _base_config(method="magic")
    with pytest.raises(ConfigError, match="method"):
        validate_config(raw)


def test_native_params_accepted():
    raw = _base_config()
    raw["inputs"][0] = {"name": "R", "dist": "lognormal",
                        "params": [4.5855598, 0.1980422]}
    cfg = validate_config(raw)
    assert cfg.marginals[0].mean == pytest.approx(100.0, rel=1e-4)


# -- CLI ------------------------------------------------------------------------

def test_cli_validate_exit_codes(tmp_path):
    assert cli.main(["validate", str(CONFIG_DIR / "example1_safety.json")]) == 0
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(_base_config(method="magic")))
    assert cli.main(["validate", str(bad)]) == 2
    assert cli.main(["validate", str(tmp_path / "missing.json")]) == 2


def test_cli_run_outputs(tmp_path):
    out = tmp_path / "run"
    code = cli.main(["run", str(CONFIG_DIR / "example1_safety.json"),
                     "--out", str(out)])
    assert code == 0
    table = (out / "evppi_table.csv").read_text().splitlines()
    assert table[0] == "input,absolute,normalized,relative"
    values = {row.split(",")[0]: float(row.split(",")[1]) for row in table[1:]}
    expect = {"R": 349.0, "S": 454.0, "XR": 131.0, "XS": 349.0}
    for name, v in expect.items():
        assert values[name] / 1e3 == pytest.approx(v, rel=1e-2)
    for name in ("R", "S", "XR", "XS"):
        assert (out / f"pf_curve_{name}.csv").exists()
        assert (out / f"cvppi_{name}.csv").exists()
    report = json.loads((out / "report.json").read_text())
    assert report["pf"] == pytest.approx(0.0073582, rel=1e-4)
    assert report["manifest"]["seed"] == 1


def test_cli_run_manifest_checksums(tmp_path):
    out = tmp_path / "run"
    assert cli.main(["run", str(CONFIG_DIR / "example1_safety.json"),
                     "--out", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    for fname, digest in report["manifest"]["outputs"].items():
        data = (out / fname).read_bytes()
        assert hashlib.sha256(data).hexdigest() == digest


def test_cli_run_deterministic_output(tmp_path):
    base = _base_config(method="mc", n=50_000, seed=11)
    cfg_path = tmp_path / "mc.json"
    cfg_path.write_text(json.dumps(base))
    outs = []
    for sub in ("a", "b"):
        out = tmp_path / sub
        assert cli.main(["run", str(cfg_path), "--out", str(out)]) == 0
        outs.append(out)
    for fname in ("evppi_table.csv", "pf_curve_R.csv", "cvppi_S.csv"):
        assert (outs[0] / fname).read_bytes() == (outs[1] / fname).read_bytes()


def test_cli_run_seed_override_changes_mc(tmp_path):
    base = _base_config(method="mc", n=50_000, seed=11)
    cfg_path = tmp_path / "mc.json"
    cfg_path.write_text(json.dumps(base))
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["run", str(cfg_path), "--out", str(a)]) == 0
    assert cli.main(["run", str(cfg_path), "--out", str(b), "--seed", "12"]) == 0
    assert (a / "evppi_table.csv").read_bytes() != (b / "evppi_table.csv").read_bytes()


def test_cli_run_threads_equivalent(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["run", str(CONFIG_DIR / "example1_safety.json"),
                     "--out", str(a)]) == 0
    assert cli.main(["run", str(CONFIG_DIR / "example1_safety.json"),
                     "--out", str(b), "--threads", "4"]) == 0
    assert (a / "evppi_table.csv").read_bytes() == (b / "evppi_table.csv").read_bytes()


def test_cli_design_run(tmp_path):
    out = tmp_path / "design"
    assert cli.main(["run", str(CONFIG_DIR / "example1_design.json"),
                     "--out", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["design"]["a_opt"] == pytest.approx(1.57, abs=0.01)
    table = (out / "evppi_table.csv").read_text().splitlines()
    assert table[0] == "input,absolute,normalized,relative"


def test_cli_sweep(tmp_path):
    out = tmp_path / "sweep"
    code = cli.main(["sweep", str(CONFIG_DIR / "example1_safety_dependent.json"),
                     "--out", str(out), "--ratio-min", "1e-4",
                     "--ratio-max", "0.1", "--ratio-count", "7"])
    assert code == 0
    rows = (out / "sweep.csv").read_text().splitlines()
    header = rows[0].split(",")
    assert header[0] == "ratio"
    assert "S_normalized" in header
    assert len(rows) == 8


def test_cli_sweep_requires_safety(tmp_path):
    assert cli.main(["sweep", str(CONFIG_DIR / "example1_design.json"),
                     "--out", str(tmp_path)]) == 2


def test_cli_sweep_bad_ratio_grid(tmp_path):
    assert cli.main(["sweep", str(CONFIG_DIR / "example1_safety.json"),
                     "--out", str(tmp_path), "--ratio-min", "0.5",
                     "--ratio-max", "1.5", "--ratio-count", "3"]) == 2


def test_cli_form_curves(tmp_path):
    code = cli.main(["form-curves", "--betas", "3.0902,2.3263",
                     "--cost-ratio", "1e-3", "--mode", "safety",
                     "--out", str(tmp_path)])
    assert code == 0
    rows = (tmp_path / "curves.csv").read_text().splitlines()
    assert rows[0] == "mode,beta,pf,alpha,alpha_sq,evppi"
    assert len(rows) == 1 + 2 * 99
    data = np.array([r.split(",")[1:] for r in rows[1:]], dtype=float)
    # curves for the pf nearest the ratio dominate at every alpha
    b1 = data[data[:, 0] == 3.0902]
    b2 = data[data[:, 0] == 2.3263]
    assert np.all(b1[:, 4] >= b2[:, 4])


def test_cli_form_curves_design_mode(tmp_path):
    code = cli.main(["form-curves", "--betas", "3,4,5", "--mode", "design",
                     "--out", str(tmp_path)])
    assert code == 0
    rows = (tmp_path / "curves.csv").read_text().splitlines()[1:]
    data = np.array([r.split(",")[1:] for r in rows], dtype=float)
    for beta in (3.0, 4.0, 5.0):
        curve = data[data[:, 0] == beta][:, 4]
        # normalized by the alpha = 1 closed-form value: strictly inside (0, 1)
        assert np.all((curve > 0.0) & (curve < 1.0))
        assert np.all(np.diff(curve) >= -1e-12)


def test_cli_form_curves_rejects_bad_beta(tmp_path):
    assert cli.main(["form-curves", "--betas", "-1.0",
                     "--out", str(tmp_path)]) == 2
