import json
import subprocess
import sys

import pytest

from edslab import cli


def run(args, tmp_path, name="out"):
    out = tmp_path / name
    code = cli.main([*args, "--out", str(out)])
    return code, out


def test_exponents_example(tmp_path, capsys):
    code, out = run(["exponents", "--n", "3", "--k", "0.6666667", "--mu", "2"], tmp_path)
    assert code == 0
    body = json.loads((out / "exponents.json").read_text())
    assert body["p1"] == pytest.approx(3.0, rel=1e-6)
    assert body["dominant"] == "P1"
    man = json.loads((out / "manifest.json").read_text())
    assert {"config_hash", "version", "wall_time_s", "suites", "calibrated_constants"} <= set(man)
    assert man["config_hash"] == cli.config_hash(man["config"])


def test_broken_configs_exit_2(tmp_path):
    bad_key = tmp_path / "a.yaml"
    bad_key.write_text("params:\n  n: 3\n  kk: 0.5\n")
    bad_type = tmp_path / "b.yaml"
    bad_type.write_text("params:\n  n: three\n")
    bad_yaml = tmp_path / "c.yaml"
    bad_yaml.write_text("params: [unclosed\n")
    for f in (bad_key, bad_type, bad_yaml):
        code, _ = run(["exponents", "--config", str(f)], tmp_path)
        assert code == cli.EXIT_CONFIG
    code, _ = run(["exponents", "--config", str(tmp_path / "missing.yaml")], tmp_path)
    assert code == cli.EXIT_CONFIG
    code, _ = run(["simulate", "--n", "3", "--p", "9"], tmp_path)
    assert code == cli.EXIT_CONFIG


def test_sweep_span_rejected(tmp_path):
    code, _ = run(["sweep", "--preset", "strauss-1d", "--eps", "0.1,0.2,0.3"], tmp_path)
    assert code == cli.EXIT_CONFIG


def test_runtime_fault_exit_3(tmp_path):
    cfg = tmp_path / "leak.yaml"
    cfg.write_text("preset: classical\nparams:\n  n: 1\n  p: 2.0\nsolver:\n  t_max: 3.0\n  leak_tol: 1.0e-300\n")
    code, _ = run(["simulate", "--config", str(cfg), "--no-envelope"], tmp_path)
    assert code == cli.EXIT_RUNTIME


def test_suite_failure_exit_1(tmp_path):
    args = ["sweep", "--n", "1", "--k", "0", "--mu", "0", "--p", "2", "--eps", "0.4:4:5log",
            "--t-max", "30", "--workers", "1", "--tolerance", "1e-9"]
    code, out = run(args, tmp_path)
    assert code == cli.EXIT_SUITE
    body = json.loads((out / "sweep.json").read_text())
    assert body["passed"] is False
    rows = (out / "sweep.csv").read_text().splitlines()
    assert rows[0] == "eps,T_lo,T_hi,blew_up" and len(rows) == 6
    dat = (out / "lifespan_loglog.dat").read_text().splitlines()
    eps = [float(line.split()[0]) for line in dat if not line.startswith("#")]
    assert eps == sorted(eps)


def test_simulate_and_plot_data(tmp_path):
    code, out = run(["simulate", "--n", "1", "--k", "0", "--mu", "0", "--p", "2", "--eps", "0.3",
                     "--t-max", "6", "--j-max", "10"], tmp_path)
    assert code == 0
    for name in ("trace.csv", "blowup.json", "envelope.json", "functionals.dat", "envelope_overlay.dat"):
        assert (out / name).exists()
    head = [x for x in (out / "functionals.dat").read_text().splitlines() if x.startswith("#")]
    assert "t" in head[-1] and "U0" in head[-1] and "calU" in head[-1]
    (out / "functionals.dat").unlink()
    assert cli.main(["plot-data", "--out", str(out)]) == 0
    assert (out / "functionals.dat").exists()


def test_plot_data_missing_artifacts(tmp_path):
    code, _ = run(["plot-data"], tmp_path, "empty")
    assert code == cli.EXIT_CONFIG


def test_parse_eps_spec():
    assert cli.parse_eps_spec("0.1,0.2") == [0.1, 0.2]
    v = cli.parse_eps_spec("0.02:0.3:8log")
    assert len(v) == 8 and v[0] == pytest.approx(0.02) and v[-1] == pytest.approx(0.3)
    assert cli.parse_eps_spec("1:2:3lin") == [1.0, 1.5, 2.0]
    with pytest.raises(cli.ConfigError):
        cli.parse_eps_spec("1:2")


def test_precedence_and_hash():
    a = cli.resolve_config("simulate", {"preset": "eds", "params": {"eps": 0.2}}, {"params": {"eps": 0.3}})
    assert a["params"]["eps"] == 0.3 and a["params"]["k"] == pytest.approx(2 / 3)
    b = cli.resolve_config("simulate", {"preset": "eds", "params": {"eps": 0.3}, "output": {"dir": "x"}})
    assert cli.config_hash(a) == cli.config_hash(b)


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "edslab", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "exponents" in res.stdout
    res = subprocess.run([sys.executable, "-m", "edslab", "nomode"], capture_output=True, text=True)
    assert res.returncode == 2
