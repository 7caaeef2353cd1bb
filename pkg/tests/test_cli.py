import csv
import json
import os

import pytest

from uscqec import __version__
from uscqec.cli import DEFAULTS, main


def _rows(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def _manifest(out, name):
    with open(os.path.join(out, f"{name}.manifest.json")) as fh:
        return json.load(fh)


def test_print_config(capsys):
    assert main(["montecarlo", "--print-config", "--set", "trials=7"]) == 0
    cfg = json.loads(capsys.readouterr().out)
    assert cfg["trials"] == 7 and cfg["code"] == DEFAULTS["montecarlo"]["code"]


def test_qubit_sweep_deterministic(tmp_path):
    args = ["qubit-sweep", "--out", str(tmp_path), "--set", "alpha_grid=[0.7,0.8]", "--set", 'f1_grid={"start":0.49,"stop":0.51,"num":3}', "--set", "n_max=6"]
    assert main(args) == 0
    path = tmp_path / "qubit-sweep.csv"
    first = path.read_bytes()
    rows = _rows(path)
    assert rows[0] == ["alpha", "f1", "omega_q_GHz", "c0", "cx", "cy", "cz"]
    assert len(rows) == 1 + 6
    assert main(args) == 0
    assert path.read_bytes() == first
    m = _manifest(tmp_path, "qubit-sweep")
    assert m["subcommand"] == "qubit-sweep" and m["version"] == __version__
    assert m["outputs"] == [str(path)]
    assert not [f for f in os.listdir(tmp_path) if f.startswith(".tmp-")]


def test_gate_fidelity_exact_column(tmp_path):
    assert main(["gate-fidelity", "--out", str(tmp_path), "--set", "cx=[0]"]) == 0
    rows = _rows(tmp_path / "gate-fidelity.csv")
    assert rows[0] == ["cx", "cavity_kind", "fidelity"]
    assert len(rows) == 6
    assert all(float(r[2]) >= 1 - 1e-3 for r in rows[1:])


@pytest.mark.parametrize(
    "argv",
    [
        ["gate-fidelity", "--set", "cx=[]"],
        ["gate-fidelity", "--set", 'cavity=[{"kind":"squeezed"}]'],
        ["montecarlo", "--set", "nonsense=1"],
        ["montecarlo", "--set", "p1_grid=[0.02,0.01]"],
        ["montecarlo", "--set", "mode=exact"],
        ["code", "toric"],
        ["qubit-sweep", "--set", "alpha=3"],
        ["nosuchcommand"],
    ],
)
def test_config_errors(tmp_path, argv):
    assert main(argv + ["--out", str(tmp_path)] if argv[0] != "nosuchcommand" else argv) == 2


def test_config_file(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"montecarlo": {"code": "pair", "trials": 50, "p1_grid": [0.0, 0.1], "p2_grid": [0.0]}}))
    assert main(["montecarlo", "--config", str(cfg), "--out", str(tmp_path), "--seed", "4"]) == 0
    rows = _rows(tmp_path / "montecarlo.csv")
    assert len(rows) == 3 and rows[1][2] == "1.0"
    assert _manifest(tmp_path, "montecarlo")["seed"] == 4
    (tmp_path / "broken.json").write_text("{not json")
    assert main(["montecarlo", "--config", str(tmp_path / "broken.json"), "--out", str(tmp_path)]) == 2


def test_numeric_failure(tmp_path):
    # a coherent field with amplitude 1 does not fit into 10 photons
    assert main(["gate-fidelity", "--out", str(tmp_path), "--set", "cx=[0]", "--set", "cutoff=10"]) == 3


def test_code_five_qubit_verify(tmp_path):
    assert main(["code", "five-qubit", "--verify", "--out", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "code-five-qubit.json").read_text())
    assert report["stabilizer_expectations"] == pytest.approx([1.0] * 5, abs=1e-9)
    assert report["distance"] == 3 and report["lu_group_equal"]


def test_code_steane_verify(tmp_path):
    assert main(["code", "steane", "--verify", "--out", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "code-steane.json").read_text())
    assert report["lc_equivalent"] and report["distance"] == 3 and report["post_measurement_rank"] == 7


def test_code_verification_failure(tmp_path):
    graph = tmp_path / "path.txt"
    graph.write_text("vertices: 10\n" + "".join(f"{v} {v + 1}\n" for v in range(1, 10)) + "measure: 8 9 10\n")
    assert main(["code", "steane", "--graph", str(graph), "--verify", "--out", str(tmp_path)]) == 4
    assert main(["code", "steane", "--graph", str(graph), "--out", str(tmp_path)]) == 0


def test_montecarlo_surface(tmp_path):
    assert main(["montecarlo", "--code", "steane", "--trials", "200", "--pm", "0.01", "--out", str(tmp_path)]) == 0
    rows = _rows(tmp_path / "montecarlo.csv")
    assert rows[0] == ["p1", "p2", "mean", "std_error", "trials"]
    assert len(rows) == 1 + 36
    assert all(r[4] == "200" for r in rows[1:])


def test_montecarlo_channel_mode(tmp_path):
    argv = ["montecarlo", "--code", "line3", "--set", "mode=channel", "--set", "p1_grid=[0.0,0.1]", "--set", "p2_grid=[0.1]", "--out", str(tmp_path)]
    assert main(argv) == 0
    rows = _rows(tmp_path / "montecarlo.csv")
    assert [r[3] for r in rows[1:]] == ["0.0", "0.0"]


def test_adiabatic_short(tmp_path):
    argv = ["adiabatic", "--T", "40", "--set", "cutoff=5", "--set", "ramp.steps=500", "--set", "check_halving=false", "--out", str(tmp_path)]
    assert main(argv) == 0
    rows = _rows(tmp_path / "adiabatic.csv")
    assert rows[0] == ["t_over_T", "fidelity"] and len(rows) == 502
    assert float(rows[-1][0]) == 1.0


def test_modes(tmp_path):
    assert main(["modes", "--set", "N=2", "--set", "max_freq_GHz=6", "--out", str(tmp_path)]) == 0
    rows = _rows(tmp_path / "modes.csv")
    assert rows[0] == ["index", "freq_GHz", "mass", "flux_drop_j1", "flux_drop_j2"]
    assert sum(abs(float(r[1]) - 5.0) < 1e-6 for r in rows[1:]) == 3
