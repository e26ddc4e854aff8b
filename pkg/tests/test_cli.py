import csv
import subprocess
import sys

import pytest

from bilevel_mi import cli

FIG2_FLAGS = ["--delta", "0.16666666666666666", "--phi", "3", "--sigma-beta", "50", "--lambda", "0.1"]


def data_rows(path):
    lines = [l for l in path.read_text().splitlines() if not l.startswith("#")]
    return list(csv.reader(lines))


def header(path):
    return [l for l in path.read_text().splitlines() if l.startswith("#")]


def test_solve_figure2(tmp_path, capsys):
    out = tmp_path / "solve.csv"
    assert cli.main(["solve", *FIG2_FLAGS, "--out", str(out)]) == cli.EXIT_OK
    rows = data_rows(out)
    assert rows[0] == ["alpha", "sigma", "gamma", "theta", "tau", "r", "residual", "iterations"]
    assert float(rows[1][6]) <= 1e-9
    assert float(rows[1][2]) == pytest.approx(103.853, rel=1e-4)
    assert "# phi=3.0" in header(out)
    assert capsys.readouterr().out.strip()


def test_solve_heavy_ridge_limit(tmp_path):
    out = tmp_path / "s.csv"
    assert cli.main(["solve", "--delta", "0.5", "--phi", "5", "--sigma-beta", "10",
                     "--lambda", "1e4", "--out", str(out)]) == 0
    row = dict(zip(*data_rows(out)))
    assert float(row["sigma"]) * float(row["tau"]) == pytest.approx(4.0, rel=0.02)


@pytest.mark.parametrize("argv", [
    ["solve", "--delta", "0.5", "--phi", "5", "--sigma-beta", "10", "--lambda", "-1"],
    ["solve", "--delta", "0.5", "--phi", "5", "--sigma-beta", "10"],
    ["solve", "--bogus"],
    ["tradeoff", "--delta", "0.5", "--phi", "2", "--sigma-beta", "1", "--grid", "1:2"],
    ["tradeoff", "--delta", "0.5", "--phi", "2", "--sigma-beta", "1", "--grid", "0:1:3:log"],
])
def test_usage_errors(argv):
    assert cli.main(argv) == cli.EXIT_USAGE


def test_unwritable_output_is_usage_error(tmp_path):
    bad = tmp_path / "missing" / "x.csv"
    assert cli.main(["solve", *FIG2_FLAGS, "--out", str(bad)]) == cli.EXIT_USAGE


def test_solver_failure_exit_code(monkeypatch):
    def boom(spec):
        raise cli.BilevelMIError("no")
    monkeypatch.setattr(cli, "solve", boom)
    assert cli.main(["solve", *FIG2_FLAGS]) == cli.EXIT_COMPUTE


def test_parse_grid():
    assert cli.parse_grid("0.5") == [0.5]
    assert cli.parse_grid("1:3:3") == [1.0, 2.0, 3.0]
    assert cli.parse_grid("1:100:3:log") == pytest.approx([1.0, 10.0, 100.0])
    with pytest.raises(cli.UsageError):
        cli.parse_grid("1:2:0")
    with pytest.raises(cli.UsageError):
        cli.parse_grid("1:2:3:cubic")


def test_config_file_and_flag_override(tmp_path):
    conf = tmp_path / "run.conf"
    conf.write_text("# Figure 2 settings\ndelta = 0.5\nphi=5\nsigma-beta=10\nlambda=1\n")
    out = tmp_path / "o.csv"
    assert cli.main(["solve", "--config", str(conf), "--lambda", "2", "--out", str(out)]) == 0
    assert "# lambda=2.0" in header(out)
    assert "# delta=0.5" in header(out)
    conf.write_text("nonsense=1\n")
    assert cli.main(["solve", "--config", str(conf)]) == cli.EXIT_USAGE


def test_tradeoff_single_point(tmp_path):
    out = tmp_path / "t.csv"
    assert cli.main(["tradeoff", "--delta", "0.5", "--phi", "2", "--sigma-beta", "1",
                     "--axis", "lambda", "--grid", "1", "--out", str(out)]) == 0
    rows = data_rows(out)
    assert rows[0] == cli.TRADEOFF_COLUMNS
    assert len(rows) == 2 and rows[1][-1] == ""


def test_tradeoff_lambda_sweep_monotone(tmp_path):
    out = tmp_path / "t.csv"
    assert cli.main(["tradeoff", "--delta", "0.2", "--phi", "5", "--sigma-beta", "10",
                     "--axis", "lambda", "--grid", "0.01:100:7:log", "--out", str(out)]) == 0
    rows = data_rows(out)[1:]
    lams = [float(r[2]) for r in rows]
    adv = [float(r[8]) for r in rows]
    assert lams == sorted(lams)
    assert all(b <= a + 1e-4 for a, b in zip(adv, adv[1:]))


def test_tradeoff_min_error_pareto(tmp_path):
    out = tmp_path / "t.csv"
    assert cli.main(["tradeoff", "--delta", "0.2", "--sigma-beta", "10", "--axis", "phi",
                     "--grid", "2:10:2", "--tune", "min-error", "--lambda-grid", "0.01:100:9:log",
                     "--out", str(out)]) == 0
    r2, r10 = data_rows(out)[1:]
    assert float(r10[7]) < float(r2[7]) and float(r10[8]) < float(r2[8])


def test_tradeoff_matched_error_reports_unreachable_targets(tmp_path):
    out = tmp_path / "t.csv"
    code = cli.main(["tradeoff", "--n-over-d", "5", "--phi", "2", "--sigma-beta", "10",
                     "--axis", "phi", "--grid", "2:10:2", "--tune", "matched-error",
                     "--error-targets", "0.175:0.21:2", "--lambda-grid", "0.001:10000:12:log",
                     "--out", str(out)])
    rows = data_rows(out)[1:]
    assert len(rows) == 4
    assert [float(r[1]) for r in rows] == [2.0, 10.0, 2.0, 10.0]
    for r, target in zip(rows, (0.175, 0.175, 0.21)):
        assert float(r[7]) == pytest.approx(target, abs=1e-5)
    assert rows[3][7] == "" and "outside" in rows[3][-1]
    # 3 of 4 rows solved is below the 90% bar
    assert code == cli.EXIT_PARTIAL


def test_validate_underpowered():
    assert cli.main(["validate", *FIG2_FLAGS, "--trials", "10"]) == cli.EXIT_UNDERPOWERED


def test_validate_heavy_ridge_passes(tmp_path, capsys):
    out = tmp_path / "v.csv"
    code = cli.main(["validate", "--delta", "0.16666666666666666", "--phi", "3",
                     "--sigma-beta", "50", "--lambda", "1000", "--n", "120", "--trials", "500",
                     "--probes", "2", "--out", str(out)])
    assert code == cli.EXIT_OK, capsys.readouterr().out
    dens = data_rows(tmp_path / "v_density.csv")
    assert dens[0] == ["probe", "z", "mu_train", "mu_test"]
    assert len(dens) == 1 + 2 * 2001
    assert len(data_rows(out)) == 1 + 500 * 2 * 2


def test_attack_null_and_reproducible(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    argv = ["attack", *FIG2_FLAGS, "--n", "60", "--models", "5", "--seed", "4", "--null"]
    assert cli.main([*argv, "--out", str(a)]) == 0
    summary = capsys.readouterr().out
    adv = float(summary.split("advantage=")[1].split()[0])
    assert abs(adv) <= 0.1
    assert cli.main([*argv, "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


@pytest.mark.parametrize("kind", ["global-threshold", "lrt-histogram", "sample-threshold"])
def test_attack_kinds_run(tmp_path, capsys, kind):
    out = tmp_path / "k.csv"
    assert cli.main(["attack", *FIG2_FLAGS, "--n", "60", "--models", "4",
                     "--attack-kind", kind, "--out", str(out)]) == 0
    assert f"kind={kind}" in capsys.readouterr().out
    assert data_rows(out)[0] == ["fpr", "tpr"]


def test_console_script_entry(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "bilevel_mi", "solve", "--delta", "0.5"],
                          capture_output=True, text=True)
    assert proc.returncode == cli.EXIT_USAGE
    assert "missing required parameters" in proc.stderr
