import subprocess
import sys

import numpy as np
import pytest

from reinfection import data_io
from reinfection.cli import main

import synthetic


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def inputs(tmp_path_factory):
    return synthetic.write_smoke_inputs(tmp_path_factory.mktemp("inputs"), n_draws=120)


@pytest.fixture(scope="module")
def fitted(tmp_path_factory, inputs):
    obs, _, m2 = inputs
    out = tmp_path_factory.mktemp("fit")
    assert run("fit", "--config", m2, "--data", obs, "--seed", 7, "--out-dir", out,
               "--threads", 1, "--quiet") == 0
    assert run("scenario", "--config", m2, "--scenarios", "1,2,3,4,5,6",
               "--out-dir", out, "--seed", 7, "--threads", 1, "--quiet") == 0
    return out


def test_fit_outputs(fitted):
    for name in ("config.ini", "posterior.csv", "posterior.json", "trace.csv",
                 "parameters.csv"):
        assert (fitted / name).is_file()
    header, rows = data_io.read_table(fitted / "parameters.csv")
    r2 = [r for r in rows if r[0] == "pseudo_r2"]
    assert r2 and 0.9 < float(r2[0][1]) <= 1.0
    loaded = data_io.read_draws(fitted / "posterior.csv")
    assert len(loaded.draws) == 120 and loaded.draws.seed == 7
    # the echoed config reproduces the run settings
    echo = data_io.load_config(fitted / "config.ini")
    assert echo.sampler.seed == 7 and echo.model.value == "M2"


def test_fit_is_byte_identical_across_runs_and_threads(tmp_path, inputs, fitted):
    obs, _, m2 = inputs
    out = tmp_path / "again"
    assert run("--seed", 7, "fit", "--config", m2, "--data", obs, "--out-dir", out,
               "--threads", 3, "--quiet") == 0
    assert run("scenario", "--config", m2, "--scenarios", "1,2,3,4,5,6", "--out-dir", out,
               "--seed", 7, "--threads", 4, "--quiet") == 0
    for name in ("posterior.csv", "posterior.json", "trace.csv", "parameters.csv",
                 "overload_ranges.csv") + tuple(
                     f"predictive_scenario{i}.csv" for i in range(1, 7)):
        assert (out / name).read_bytes() == (fitted / name).read_bytes(), name


def test_scenario_outputs(fitted):
    header, rows = data_io.read_table(fitted / "overload_ranges.csv")
    assert [r[0] for r in rows] == ["1", "2", "3", "4", "5", "6"]
    assert header[:2] == ["scenario", "label"]
    table = data_io.read_predictive(fitted / "predictive_scenario1.csv")
    assert table["draw"].size == 40  # max_draws in the config
    assert np.all(table["day"] == 450)


def test_hellinger_of_identical_files_is_zero(fitted, tmp_path, capsys):
    a = fitted / "predictive_scenario1.csv"
    assert run("hellinger", a, a, "--out-dir", tmp_path) == 0
    for name in data_io.HELLINGER_SERIES:
        _, rows = data_io.read_table(tmp_path / f"hellinger_{name}.csv")
        assert [float(v) for r in rows for v in r[1:]] == [0.0] * 4
        assert (tmp_path / f"density_{name}_1_predictive_scenario1.csv").is_file()


def test_hellinger_matrix_across_scenarios(fitted, tmp_path):
    files = [fitted / f"predictive_scenario{i}.csv" for i in (1, 3, 4)]
    assert run("hellinger", *files, "--series", "cumulative_deaths",
               "--out-dir", tmp_path) == 0
    header, rows = data_io.read_table(tmp_path / "hellinger_cumulative_deaths.csv")
    m = np.array([[float(v) for v in r[1:]] for r in rows])
    assert header[1:] == ["predictive_scenario1", "predictive_scenario3",
                          "predictive_scenario4"]
    np.testing.assert_array_equal(m, m.T)
    assert np.all(np.diag(m) == 0) and np.all((m >= 0) & (m <= 1))


def test_compare_and_report(fitted, inputs, tmp_path, capsys):
    obs, m1, m2 = inputs
    out = tmp_path / "cmp"
    assert run("compare", m1, m2, "--data", obs, "--out-dir", out, "--seed", 3,
               "--prior-draws", 200, "--threads", 2) == 0
    text = capsys.readouterr().out
    assert "Bayes factor M1/M2" in text
    header, rows = data_io.read_table(out / "evidence.csv")
    assert [r[0] for r in rows] == ["M1", "M2"] and rows[0][2] == "200"
    assert "log Bayes factor" in (out / "evidence.txt").read_text()
    assert (out / "config_1.ini").is_file() and (out / "config_2.ini").is_file()

    # report gathers everything present in the run directory
    (fitted / "evidence.txt").write_text((out / "evidence.txt").read_text())
    assert run("report", "--config", m2, "--data", obs, "--out-dir", fitted,
               "--threads", 1) == 0
    report = (fitted / "report.txt").read_text()
    assert "pseudo-R2" in report and "Hospital overload" in report
    assert "Model comparison" in report
    header, rows = data_io.read_table(fitted / "fit_bands.csv")
    assert header == ["series", "day", "observed", "q0.025", "q0.5", "q0.975"]
    for r in rows[:50]:
        assert float(r[3]) <= float(r[4]) <= float(r[5])


@pytest.mark.parametrize("argv, category, code", [
    (["fit", "--config", "{missing}"], "config", 9),
    (["fit", "--config", "{m2}", "--data", "{missing}"], "schema", 6),
    (["fit", "--config", "{bad}", "--data", "{obs}"], "config", 9),
    (["scenario", "--config", "{m2}", "--draws", "{missing}"], "schema", 6),
    (["scenario", "--config", "{m2}", "--scenarios", "7", "--draws", "{draws}"],
     "validation", 8),
    (["hellinger", "{obs}", "{obs}"], "schema", 6),
    (["fit"], "input", 5),
])
def test_errors_map_to_exit_codes(argv, category, code, inputs, fitted, tmp_path, capsys):
    obs, _, m2 = inputs
    bad = tmp_path / "bad.cfg"
    bad.write_text("[model]\nflavour = M3\n")
    names = dict(missing=tmp_path / "nope", m2=m2, obs=obs, bad=bad,
                 draws=fitted / "posterior.csv")
    argv = [a.format(**names) for a in argv] + ["--out-dir", str(tmp_path / "o"), "--quiet"]
    assert main(argv) == code
    err = capsys.readouterr().err.strip().splitlines()
    assert err[-1].startswith(f"ERROR {category}: ")


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "reinfection", "fit", "--config",
                           str(tmp_path / "none.cfg")], capture_output=True, text=True)
    assert proc.returncode == 9
    assert proc.stderr.startswith("ERROR config: ")
    proc = subprocess.run([sys.executable, "-m", "reinfection", "--help"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "hellinger" in proc.stdout
