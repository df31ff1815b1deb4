import numpy as np
import pytest

from gammah.diagnostics import CSV_HEADER
from gammah.errors import ConfigError, InvalidArgumentError
from gammah.harness.cli import EXIT_CONFIG, EXIT_FAIL, EXIT_OK, main
from gammah.harness.config import (ExperimentConfig, load_config, parse_config, parse_float,
                                   parse_int_list)
from gammah.harness.experiments import (EXPERIMENTS, aitken_limit, compute_experiment,
                                        config_for, fit_loglog_slope, run_experiment)

INI = """
[problem]
kind = schrodinger_1d
potential = 0   ; free Laplacian
[mesh]
h = 2^-4, 2^-5
[lambda]
re = 25
[solver]
tol = 1e-10
[output]
id = tab3-laplacian
"""


def test_parse_float_power_notation():
    assert parse_float("2^-4") == 0.0625
    assert parse_float(" 1e-3 ") == 1e-3
    with pytest.raises(ConfigError):
        parse_float("abc")
    assert parse_int_list("20, 40 80") == [20, 40, 80]
    with pytest.raises(ConfigError):
        parse_int_list("2.5")


def test_parse_config():
    cfg = parse_config(INI)
    assert cfg.experiment_id == "tab3-laplacian"
    assert cfg.get("mesh", "h") == [2.0 ** -4, 2.0 ** -5]
    assert cfg.lam == 25
    assert cfg.solver.tol == 1e-10
    assert cfg.get("scheme", "m_max", 7) == 7
    assert cfg.get("solver", "start_vector") == "perturbed-ones"


@pytest.mark.parametrize("text", [
    "[mesh]\nwidth = 0.1\n",
    "[meshes]\nh = 0.1\n",
    "[mesh]\nh = 1.5\n",
    "[mesh]\nn = 0\n",
    "[solver]\nstart_vector = random\n",
    "no section header\n",
])
def test_bad_config_rejected(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_unknown_key_lookup_rejected():
    with pytest.raises(ConfigError):
        ExperimentConfig().get("mesh", "width")


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.ini")


def test_loglog_slope_examples():
    hs = [2.0 ** -k for k in range(3, 8)]
    assert abs(fit_loglog_slope([(h, h) for h in hs])[0] - 1) < 1e-12
    assert abs(fit_loglog_slope([(h, 3 * h * h) for h in hs])[0] - 2) < 1e-12
    col = [(2.0 ** -4, 2.29), (2.0 ** -5, 1.15), (2.0 ** -6, 0.57), (2.0 ** -7, 0.29)]
    assert abs(fit_loglog_slope(col)[0] - 1.0) <= 0.01


def test_loglog_slope_errors():
    with pytest.raises(InvalidArgumentError):
        fit_loglog_slope([(0.1, 1.0), (0.2, 2.0)])
    with pytest.raises(InvalidArgumentError):
        fit_loglog_slope([(0.1, 1.0), (0.2, 0.0), (0.3, 1.0)])


def test_aitken_limit_geometric():
    vals = [3 - 2.0 ** -k for k in range(1, 6)]
    assert abs(aitken_limit(vals) - 3) < 1e-12


def test_experiment_registry():
    assert set(EXPERIMENTS) == {
        "tab1-upwind-powers", "tab2-supg", "tab3-laplacian", "tab4-cd-numrange",
        "tab5-indicators", "tab6-transport-dichotomy", "tab7-square", "tab8-ascent",
        "tab9-lshape", "alg2-lshape", "oracle-check"}
    with pytest.raises(InvalidArgumentError):
        compute_experiment(config_for("tab99"))


def test_run_experiment_outputs_are_deterministic(tmp_path):
    outs = []
    for d in ("a", "b"):
        cfg = config_for("tab3-laplacian", {("output", "directory"): str(tmp_path / d),
                                            ("output", "svg"): True})
        res = run_experiment(cfg)
        assert res.passed
        outs.append(tmp_path / d)
    for name in ("tab3-laplacian.csv", "tab3-laplacian_plot.dat", "tab3-laplacian_plot.svg"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
    assert (outs[0] / "tab3-laplacian_report.txt").exists()
    header = (outs[0] / "tab3-laplacian.csv").read_text().splitlines()[0]
    assert header.startswith("h,")


def test_result_rows_carry_reported_values():
    res = compute_experiment(config_for("tab3-laplacian"))
    for row in res.rows:
        assert row["reported_gamma"] is not None
        assert row["rel_dev_gamma"] == pytest.approx((row["gamma_h"] - row["reported_gamma"])
                                                     / row["reported_gamma"])


# CLI ---------------------------------------------------------------------

def test_cli_gamma(capsys):
    assert main(["gamma", "--kind", "schrodinger_1d", "--h", "2^-4", "--lam", "25"]) == EXIT_OK
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "n,gamma_h,converged"
    assert abs(float(out[1].split(",")[1]) - 14.99) < 0.01


def test_cli_assemble_and_import(tmp_path, capsys):
    assert main(["assemble", "--kind", "convection_diffusion_1d", "--epsilon", "0.02",
                 "--beta", "8", "--n", "16", "--output", str(tmp_path)]) == EXIT_OK
    assert (tmp_path / "A.mtx").exists() and (tmp_path / "M.mtx").exists()
    capsys.readouterr()
    assert main(["import-mm", str(tmp_path / "A.mtx"), "--mass", str(tmp_path / "M.mtx"),
                 "--lam", "-1", "--m-max", "2"]) == EXIT_OK
    out = capsys.readouterr().out.splitlines()
    assert out[0] == CSV_HEADER
    assert [line.split(",")[0] for line in out[3:]] == ["1", "2"]


def test_cli_import_rejects_malformed_file(tmp_path, capsys):
    bad = tmp_path / "bad.mtx"
    bad.write_text("not a matrix\n")
    assert main(["import-mm", str(bad)]) == EXIT_CONFIG
    assert main(["import-mm", str(tmp_path / "missing.mtx")]) == EXIT_CONFIG


@pytest.mark.parametrize("argv", [
    ["gamma-powers", "--kind", "transport_fd", "--h", "2^-4", "--m-max", "2"],
    ["numrange", "--kind", "convection_diffusion_1d", "--epsilon", "0.02", "--beta", "8",
     "--lam", "-1", "--n", "16"],
    ["ascent", "--kind", "transport_fd", "--fd-scheme", "central", "--n", "8"],
    ["adapt-m", "--kind", "schrodinger_1d", "--lam", "-1", "--n", "8", "--m-max", "2"],
    ["adapt-mesh", "--n", "4", "--cycles", "1"],
])
def test_cli_subcommands_succeed(argv, capsys):
    assert main(argv) == EXIT_OK
    assert capsys.readouterr().out.strip()


def test_cli_experiment_writes_files(tmp_path, capsys):
    ini = tmp_path / "run.ini"
    ini.write_text("[mesh]\nh = 2^-4, 2^-5, 2^-6\n")
    rc = main(["experiment", "tab3-laplacian", "--config", str(ini), "--output", str(tmp_path)])
    assert rc == EXIT_OK
    assert (tmp_path / "tab3-laplacian.csv").read_text().count("\n") == 4
    assert "PASS" in capsys.readouterr().out


@pytest.mark.parametrize("argv", [
    ["experiment", "no-such-id"],
    ["gamma", "--kind", "heat_3d"],
    ["gamma", "--h", "2"],
    ["frobnicate"],
    ["gamma", "--kind", "schrodinger_1d", "--domain", "torus"],
])
def test_cli_configuration_errors(argv, capsys):
    assert main(argv) == EXIT_CONFIG


def test_cli_unknown_config_key(tmp_path, capsys):
    ini = tmp_path / "bad.ini"
    ini.write_text("[scheme]\nbogus = 1\n")
    assert main(["experiment", "tab3-laplacian", "--config", str(ini)]) == EXIT_CONFIG


def test_cli_failing_rule_exit_code(tmp_path, capsys):
    ini = tmp_path / "t.ini"
    ini.write_text("[mesh]\nh = 2^-4, 2^-5, 2^-6\n[scheme]\nweighting = mass\n")
    rc = main(["experiment", "tab1-upwind-powers", "--config", str(ini), "--output", str(tmp_path)])
    assert rc == EXIT_FAIL
    assert "FAIL" in capsys.readouterr().out
