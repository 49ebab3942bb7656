import csv
import io
import json

import pytest

from mixdistill import cli
from mixdistill.cli import grid, main
from mixdistill.errors import InvariantError


def run_cli(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def csv_rows(text):
    return list(csv.DictReader(io.StringIO("".join(l for l in text.splitlines(True) if not l.startswith("#")))))


def test_distill_report(capsys):
    code, out, _ = run_cli(capsys, "distill", "bitflip", "--fidelity", "0.75", "--alpha2", "0.25")
    assert code == 0
    assert "fidelity_out: 0.9\n" in out
    assert "success_probability: 0.234375\n" in out


def test_distill_spdc_bare_weighting(capsys):
    code, out, _ = run_cli(capsys, "distill", "spdc", "--fidelity", "0.75", "--alpha2", "0.25", "--weighting", "paper")
    assert code == 0
    assert "fidelity_out: 0.97619047619" in out


def test_distill_json(capsys):
    code, out, _ = run_cli(capsys, "distill", "phaseflip", "--fidelity", "0.75", "--alpha2", "0.25", "--format", "json")
    doc = json.loads(out)
    assert doc["metadata"]["success_probability"] == 0.375
    assert len(doc["rows"]) == 16


@pytest.mark.parametrize(
    "argv, flag",
    [
        (["distill", "bitflip", "--fidelity", "1.5", "--alpha2", "0.25"], "--fidelity"),
        (["distill", "bitflip", "--fidelity", "0.8", "--alpha2", "0"], "--alpha2"),
        (["distill", "bitflip", "--alpha2", "0.3"], "--fidelity"),
        (["distill", "spdc", "--fidelity", "0.8", "--alpha2", "0.3", "--spdc-p", "2"], "--spdc-p"),
        (["sweep", "bitflip", "--param", "fidelity", "--start", "0.5", "--stop", "0.4", "--step", "0.1", "--alpha2", "0.3"], "--stop"),
        (["validate", "--trials", "10"], "--trials"),
    ],
)
def test_usage_errors_exit_two(capsys, argv, flag):
    code, _, err = run_cli(capsys, *argv)
    assert code == 2
    assert flag in err
    assert len(err.strip().splitlines()) == 1


def test_argparse_errors_exit_two(capsys):
    code, _, _ = run_cli(capsys, "distill", "nonsense")
    assert code == 2


def test_grid():
    assert len(grid(0.5, 1.0, 0.01)) == 51
    assert grid(0.5, 0.6, 1.0) == [0.5]
    assert grid(0.2, 0.2, 0.1) == [0.2]


def test_sweep_csv(capsys, tmp_path):
    path = tmp_path / "s.csv"
    code, _, _ = run_cli(
        capsys, "sweep", "bitflip", "--param", "fidelity", "--start", "0.5", "--stop", "1.0", "--step", "0.01",
        "--alpha2", "0.25", "--out", str(path),
    )
    assert code == 0
    text = path.read_text()
    assert "# mode_ordering:" in text and "# measure_kind: concurrence" in text
    rows = csv_rows(text)
    assert len(rows) == 51
    assert max(float(r["abs_diff_fidelity"]) for r in rows) < 1e-9
    assert max(float(r["abs_diff_probability"]) for r in rows) < 1e-9


def test_sweep_csv_json_parity(capsys, tmp_path):
    args = ["sweep", "phaseflip", "--param", "alpha2", "--start", "0.1", "--stop", "0.5", "--step", "0.1", "--fidelity", "0.7"]
    run_cli(capsys, *args, "--out", str(tmp_path / "a.csv"))
    run_cli(capsys, *args, "--format", "json", "--out", str(tmp_path / "a.json"))
    rows_csv = csv_rows((tmp_path / "a.csv").read_text())
    rows_json = json.loads((tmp_path / "a.json").read_text())["rows"]
    assert len(rows_csv) == len(rows_json) == 5
    for rc, rj in zip(rows_csv, rows_json):
        assert set(rc) == set(rj)
        for k, v in rj.items():
            assert (rc[k] == "" and v is None) or float(rc[k]) == v


def test_sweep_is_byte_deterministic(capsys):
    args = ["sweep", "spdc", "--param", "fidelity", "--start", "0.5", "--stop", "1", "--step", "0.05", "--alpha2", "0.3"]
    _, a, _ = run_cli(capsys, *args)
    _, b, _ = run_cli(capsys, *args)
    assert a == b


def test_sweep_unwritable(capsys, tmp_path):
    code, _, err = run_cli(
        capsys, "sweep", "bitflip", "--param", "fidelity", "--start", "0.5", "--stop", "0.6", "--step", "0.1",
        "--alpha2", "0.3", "--out", str(tmp_path / "missing" / "x.csv"),
    )
    assert code == 2 and "cannot write" in err


def test_config_file_and_override(capsys, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# defaults\nfidelity = 0.75\nalpha2 = 0.5\n")
    code, out, _ = run_cli(capsys, "distill", "bitflip", "--config", str(cfg), "--alpha2", "0.25")
    assert code == 0
    assert "success_probability: 0.234375\n" in out
    cfg.write_text("colour = blue\n")
    code, _, err = run_cli(capsys, "distill", "bitflip", "--config", str(cfg))
    assert code == 2 and "colour" in err


def test_figures(capsys, tmp_path):
    code, _, _ = run_cli(capsys, "figures", "all", "--out-dir", str(tmp_path))
    assert code == 0
    fig4 = csv_rows((tmp_path / "fig4.csv").read_text())
    assert float(fig4[0]["curveA"]) == pytest.approx(0.5)
    assert float(fig4[0]["curveB"]) == pytest.approx(0.9)
    fig5 = csv_rows((tmp_path / "fig5.csv").read_text())
    assert float(fig5[-1]["concurrence"]) == pytest.approx(0.4841229182759271, abs=1e-9)
    fig7 = csv_rows((tmp_path / "fig7.csv").read_text())
    assert max(float(r["eta_spread"]) for r in fig7) < 1e-9
    assert "# figure: fig6:" in (tmp_path / "fig6.csv").read_text()


def test_figures_bad_dir(capsys, tmp_path):
    code, _, err = run_cli(capsys, "figures", "fig4", "--out-dir", str(tmp_path / "nope"))
    assert code == 2 and "--out-dir" in err


def test_figures_entropy_needs_pure_output(capsys, tmp_path):
    assert run_cli(capsys, "figures", "fig6", "--measure", "entropy", "--out-dir", str(tmp_path))[0] == 0
    code, _, err = run_cli(capsys, "figures", "fig7", "--measure", "entropy", "--out-dir", str(tmp_path))
    assert code == 2 and "--measure" in err


def test_validate_small_and_repeatable(capsys):
    code, a, _ = run_cli(capsys, "validate", "--trials", "1000", "--seed", "42")
    assert code == 0
    _, b, _ = run_cli(capsys, "validate", "--trials", "1000", "--seed", "42")
    assert a == b
    assert a.count("PASS") == 15


def test_invariant_violation_exits_three(capsys, monkeypatch):
    def broken(*_):
        raise InvariantError("weights do not sum to one")

    monkeypatch.setitem(cli.COMMANDS, "distill", broken)
    code, _, err = run_cli(capsys, "distill", "bitflip", "--fidelity", "0.8", "--alpha2", "0.3")
    assert code == 3 and "invariant" in err
