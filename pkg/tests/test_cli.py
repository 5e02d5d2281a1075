import csv
import io
import json
import math

import pytest

from cvqkd import __version__
from cvqkd import cli

# fixed-seed session, frozen from a reference run
SIMULATE_GOLDEN = {
    "T_hat": 0.500599357936,
    "chi_C_hat": 1.09832545837,
    "I_hat": 1.89332970254,
    "K_hat": 0.335868079304,
}


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def read_csv(text):
    return list(csv.DictReader(io.StringIO(text)))


# ---------------------------------------------------------------- keyrate

def test_keyrate_noiseless_json(capsys):
    code, out, _ = run(capsys, "keyrate", "--preset", "squeezed-homodyne", "--V", "40",
                       "--loss-db", "0", "--epsilon", "0")
    assert code == 0
    doc = json.loads(out)
    (pt,) = doc["points"]
    assert pt["K"] == pytest.approx(5.321928095, abs=1e-9)
    assert doc["meta"]["version"] == __version__
    assert doc["meta"]["command"] == "keyrate"


def test_keyrate_twelve_significant_digits(capsys):
    _, out, _ = run(capsys, "keyrate", "--preset", "new", "--T", "0.5", "--chi-c", "1.5", "--format", "csv")
    (row,) = read_csv(out)
    assert row["I_ab"] == f"{0.5 * math.log2(43.5 / 3.525):.12g}"
    digits = row["K"].lstrip("-0.").replace(".", "")
    assert len(digits) <= 12


@pytest.mark.parametrize("argv", [
    ["keyrate", "--preset", "squeezed-homodyne", "--loss-db", "3"],
    ["keyrate", "--T", "0.5", "--loss-db", "3", "--epsilon", "0.1"],
    ["keyrate", "--preset", "nope", "--T", "0.5", "--epsilon", "0.1"],
    ["keyrate", "--T", "abc", "--epsilon", "0.1"],
    ["frobnicate"],
    [],
])
def test_usage_errors_exit_2(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 2
    assert "usage" in err


@pytest.mark.parametrize("argv", [
    ["keyrate", "--T", "1.5", "--epsilon", "0.1"],
    ["keyrate", "--T", "0.5", "--chi-c", "0.1"],
    ["keyrate", "--preset", "new", "--chi-d", "2", "--T", "0.5", "--epsilon", "0.1"],
    ["simulate", "--n", "10", "--T", "0.5", "--epsilon", "0.1"],
])
def test_domain_errors_exit_1(capsys, argv):
    code, out, err = run(capsys, *argv)
    assert code == 1
    assert out == ""
    assert err.startswith("cvqkd: error:")


def test_unwritable_path_exits_1(capsys, tmp_path):
    code, _, err = run(capsys, "keyrate", "--T", "0.5", "--epsilon", "0.1",
                       "--output", str(tmp_path / "missing" / "out.json"))
    assert code == 1 and "error" in err


def test_keyrate_optimal_and_dr(capsys):
    code, out, _ = run(capsys, "keyrate", "--preset", "optimal", "--loss-db", "5", "--epsilon", "0.5")
    assert code == 0
    pt = json.loads(out)["points"][0]
    assert pt["chi_D"] == pytest.approx(0.4914, abs=2e-3)
    code, out, _ = run(capsys, "keyrate", "--preset", "coherent-homodyne", "--reconciliation", "DR",
                       "--V", "1e5", "--loss-db", "3.2", "--epsilon", "0")
    assert code == 0
    assert json.loads(out)["points"][0]["K"] < 0.0


# ---------------------------------------------------------------- sweeps

@pytest.mark.parametrize("fig", sorted(cli.FIGURE_COLUMNS))
def test_figure_columns(capsys, fig):
    code, out, _ = run(capsys, "sweep", "--fig", fig)
    assert code == 0
    header = out.splitlines()[0]
    assert header == ",".join(cli.FIGURE_COLUMNS[fig])
    rows = read_csv(out)
    assert len(rows) == (26 if fig == "2a" else 51)
    assert rows[0]["loss_db"] == "0" and rows[-1]["loss_db"] == "25"


def test_figure_2b_header_matches_contract(capsys):
    _, out, _ = run(capsys, "sweep", "--fig", "2b")
    assert out.splitlines()[0] == "loss_db,K_chiD0,K_chiD1,K_opt"
    _, out, _ = run(capsys, "sweep", "--fig", "4b")
    assert out.splitlines()[0] == "loss_db,chi_d_opt,K_opt"


def test_sweep_round_trip(capsys):
    _, out, _ = run(capsys, "sweep", "--fig", "2b")
    rows = read_csv(out)
    for row in rows[::10]:
        for preset, col in (("squeezed-homodyne", "K_chiD0"), ("new", "K_chiD1"), ("optimal", "K_opt")):
            _, kout, _ = run(capsys, "keyrate", "--preset", preset, "--V", "40",
                             "--loss-db", row["loss_db"], "--epsilon", "0.5", "--format", "csv")
            (krow,) = read_csv(kout)
            assert krow["K"] == row[col]


def test_custom_sweep_and_json(capsys):
    code, out, _ = run(capsys, "sweep", "--loss-min", "1", "--loss-max", "2", "--loss-step", "0.5",
                       "--presets", "squeezed-homodyne", "chiD=3", "--format", "json")
    assert code == 0
    doc = json.loads(out)
    assert [p["loss_db"] for p in doc["points"]] == [1.0, 1.5, 2.0]
    assert set(doc["points"][0]) == {"loss_db", "K_chiD0", "K_chiD3"}
    meta = doc["meta"]
    assert meta["epsilon"] == 0.5 and meta["V"] == 40.0
    assert meta["tolerances"]["epsilon"] == 1e-6
    assert meta["version"] == __version__


def test_sweep_bad_grid(capsys):
    code, _, _ = run(capsys, "sweep", "--loss-min", "3", "--loss-max", "1")
    assert code == 1


def test_tolerance_and_optimize_commands(capsys):
    code, out, _ = run(capsys, "tolerance", "--preset", "squeezed-homodyne", "--loss-db", "5", "--V", "1e5")
    assert code == 0
    assert json.loads(out)["points"][0]["epsilon_max"] == pytest.approx(0.516561707, abs=2e-6)
    code, out, _ = run(capsys, "optimize", "--loss-db", "0", "--epsilon", "0.5")
    assert code == 0
    pt = json.loads(out)["points"][0]
    assert pt["K_opt"] >= max(pt["K_chiD0"], pt["K_chiD1"])


# ---------------------------------------------------------------- simulate

def test_simulate_golden(capsys):
    code, out, _ = run(capsys, "simulate", "--n", "1000000", "--T", "0.5", "--epsilon", "0.1",
                       "--V", "40", "--seed", "7")
    assert code == 0
    pt = json.loads(out)["points"][0]
    for key, value in SIMULATE_GOLDEN.items():
        assert pt[key] == pytest.approx(value, rel=1e-9)


def test_simulate_records(capsys, tmp_path):
    path = tmp_path / "rec.csv"
    code, _, _ = run(capsys, "simulate", "--n", "2000", "--T", "0.5", "--epsilon", "0.1", "--seed", "1",
                     "--records", str(path))
    assert code == 0
    lines = path.read_text().splitlines()
    assert lines[0] == "r,a,b_x,b_p,b" and len(lines) == 2001


# ---------------------------------------------------------------- emit

def test_emit_empty_table_is_header_only(tmp_path):
    path = tmp_path / "empty.csv"
    cli.emit(cli.Table(["loss_db", "K_opt"]), "csv", path)
    assert path.read_bytes() == b"loss_db,K_opt\n"


def test_emit_one_row(tmp_path):
    path = tmp_path / "one.csv"
    cli.emit(cli.Table(["loss_db", "chi_d_opt", "K_opt"],
                       [{"K_opt": 0.1, "loss_db": 2.0, "chi_d_opt": 1.0 / 3.0}]), "csv", path)
    assert path.read_text(encoding="utf-8") == "loss_db,chi_d_opt,K_opt\n2,0.333333333333,0.1\n"


def test_emit_json_structure_and_non_finite(tmp_path):
    path = tmp_path / "t.json"
    cli.emit(cli.Table(["a"], [{"a": math.inf}], {"note": "x"}), "json", path)
    doc = json.loads(path.read_text())
    assert doc == {"meta": {"note": "x", "version": __version__}, "points": [{"a": "inf"}]}


def test_output_dir_environment(monkeypatch, tmp_path, capsys):
    monkeypatch.setenv(cli.OUTPUT_DIR_ENV, str(tmp_path))
    code, out, _ = run(capsys, "keyrate", "--T", "0.5", "--epsilon", "0.1", "--output", "k.json")
    assert code == 0 and out == ""
    assert json.loads((tmp_path / "k.json").read_text())["points"][0]["T"] == 0.5
    assert [p.name for p in tmp_path.iterdir()] == ["k.json"]


def test_deterministic_output_files(tmp_path, capsys):
    outs = []
    for i in range(2):
        path = tmp_path / f"run{i}.json"
        run(capsys, "simulate", "--n", "5000", "--T", "0.4", "--chi-c", "2", "--seed", "3", "--output", str(path))
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]
    for i in range(2):
        path = tmp_path / f"sweep{i}.csv"
        run(capsys, "sweep", "--fig", "4a", "--output", str(path))
        outs.append(path.read_bytes())
    assert outs[2] == outs[3]


def test_module_entry_point():
    import subprocess
    import sys
    proc = subprocess.run([sys.executable, "-m", "cvqkd", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.strip() == __version__
