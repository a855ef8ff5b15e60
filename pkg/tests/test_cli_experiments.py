import csv
import io
import shutil
import subprocess

import pytest

from rkhs_qmc.cli_experiments import main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def table(text: str) -> list[dict]:
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(lines))))


def test_kernel_check_passes(capsys):
    code, out, err = run(capsys, "kernel-check", "--r", "1")
    assert code == 0, err
    assert out.startswith("# rkhs-qmc ")
    assert len(table(out)) == 8


def test_lambda_table_row(capsys):
    code, out, _ = run(capsys, "lambda-table", "--r", "1,2", "--decay", "1.5,3,6")
    assert code == 0
    rows = table(out)
    row = next(r for r in rows if (r["setting"], r["model"], r["r"], r["decay"]) == ("det", "std", "1", "3"))
    assert (float(row["lower"]), float(row["upper"])) == (1.0, 1.0)
    assert any(r["result"].startswith("not covered") for r in rows)


def test_counterexample_value(capsys):
    code, out, _ = run(capsys, "counterexample", "--s-max", "3")
    assert code == 0
    rows = table(out)
    assert float(rows[-1]["rhs"]) == pytest.approx(1456.0)
    assert all(float(r["lhs"]) == 1.0 for r in rows)


def test_cbc_reruns_are_byte_identical(capsys, tmp_path):
    args = ["cbc", "--m", "4:6", "--dims", "3"]
    run(capsys, *args, "--csv", str(tmp_path / "a.csv"))
    run(capsys, *args, "--csv", str(tmp_path / "b.csv"))
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_cbc_vector_round_trips_through_wce(capsys, tmp_path):
    vec = tmp_path / "v.txt"
    code, out, _ = run(capsys, "cbc", "--m", "6", "--dims", "2", "--out", str(vec))
    assert code == 0
    built = float(table(out)[0]["wce"])
    code, out, _ = run(capsys, "wce", "--vector", str(vec))
    assert code == 0
    assert float(table(out)[0]["wce"]) == pytest.approx(built, rel=1e-12)


def test_slope_expectation_failure_sets_exit_status(capsys):
    code, _, err = run(capsys, "cbc", "--m", "4:7", "--dims", "2", "--expect-slope", "3:4")
    assert code == 1
    assert "assertion failed" in err


def test_randomized_kind_needs_seed(capsys):
    code, _, err = run(capsys, "scramble-rate", "--m", "4:5")
    assert code == 2 and "--seed" in err


@pytest.mark.parametrize("argv", [["cbc", "--m", "9:4"], ["cbc", "--m", "x"], ["kernel-check", "--flavor", "sobolev"]])
def test_bad_arguments_exit_with_two(capsys, argv):
    assert run(capsys, *argv)[0] == 2


def test_unknown_subcommand_exits_with_two(capsys):
    assert run(capsys, "integrate-everything")[0] == 2


def test_thread_variable_is_validated(capsys, monkeypatch):
    monkeypatch.setenv("RKHS_QMC_THREADS", "zero")
    assert run(capsys, "scramble-rate", "--seed", "1", "--m", "4:5")[0] == 2


def test_config_file_and_flag_precedence(capsys, tmp_path):
    cfg = tmp_path / "run.ini"
    cfg.write_text("[counterexample]\ns_max = 2\nr = 3\n")
    code, out, _ = run(capsys, "counterexample", "--config", str(cfg))
    assert code == 0 and len(table(out)) == 2
    code, out, _ = run(capsys, "counterexample", "--config", str(cfg), "--s-max", "4")
    assert len(table(out)) == 4
    (tmp_path / "empty.ini").write_text("[cbc]\nm = 4\n")
    assert run(capsys, "counterexample", "--config", str(tmp_path / "empty.ini"))[0] == 2


def test_config_changes_hash(capsys):
    _, a, _ = run(capsys, "counterexample", "--s-max", "2")
    _, b, _ = run(capsys, "counterexample", "--s-max", "3")
    assert a.splitlines()[0] != b.splitlines()[0]


def test_plot_writes_svg(capsys, tmp_path):
    svg = tmp_path / "rate.svg"
    code, _, _ = run(capsys, "cbc", "--m", "4:7", "--dims", "2", "--plot", str(svg))
    assert code == 0
    text = svg.read_text()
    assert text.startswith("<svg") and "polyline" in text and "slope" in text
    assert run(capsys, "counterexample", "--plot", str(tmp_path / "none.svg"))[0] == 2


def test_idim_small_run(capsys):
    code, out, err = run(capsys, "idim", "--budget-grid", "6:9", "--weights", "poly(p=4)")
    assert code == 0, err
    rows = table(out)
    assert all(float(r["cost"]) <= float(r["budget"]) for r in rows)
    assert run(capsys, "idim", "--algo", "ml", "--cost", "unr")[0] == 2


@pytest.mark.skipif(shutil.which("rkhs-qmc") is None, reason="console script not installed")
def test_console_script():
    proc = subprocess.run(["rkhs-qmc", "counterexample", "--s-max", "1"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "lhs,rhs" in proc.stdout
