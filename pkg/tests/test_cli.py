import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from quasilinear_mp import cli
from quasilinear_mp.mesh import RadialMesh

from .conftest import CONFIGS, write_config

SMALL = """
[problem]
N = 3
V = "r^-2"
K = "min(r^3, 1)"

[envelope.zero]
alpha = 3
beta = 0

[envelope.infinity]
alpha = 0
beta = 0

[nonlinearity]
kind = single_power
q1 = {q1}

[mesh]
nodes = 600
"""


@pytest.fixture
def small(tmp_path):
    return write_config(tmp_path / "small.ini", SMALL.format(q1=8))


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    d = tmp_path_factory.mktemp("small")
    cfg = write_config(d / "small.ini", SMALL.format(q1=8))
    out = d / "out"
    code = cli.main(["solve", "--config", str(cfg), "--out", str(out)])
    return cfg, out, code


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.ini")), ids=lambda p: p.stem)
def test_check_shipped_configs(path, tmp_path):
    assert cli.main(["check", "--config", str(path), "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "check.json").read_text())
    assert rep["admissibility"]["existence_ok"] is True
    assert "timestamp" in rep


def test_check_inadmissible_reason(tmp_path, capsys):
    text = SMALL.replace('K = "min(r^3, 1)"', 'K = "max(r^-0.5, r^(-1/3))"') \
        .replace("alpha = 3", "alpha = -1/2", 1).replace("alpha = 0", "alpha = -1/3")
    cfg = write_config(tmp_path / "neg.ini", text.format(q1=5))
    assert cli.main(["check", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    assert "q1 must be < 5 strictly" in capsys.readouterr().out


def test_check_table_strings(small, tmp_path, capsys):
    assert cli.main(["check", "--config", str(small), "--out", str(tmp_path)]) == 0
    text = capsys.readouterr().out
    assert "q0*" in text and "admissible" in text
    adm = json.loads((tmp_path / "check.json").read_text())["admissibility"]
    assert adm["q0_star"] == "12" and adm["q_inf_star"] == "6"


def test_bad_configs_exit_1(tmp_path, capsys):
    empty = write_config(tmp_path / "empty.ini", " ")
    assert cli.main(["check", "--config", str(empty), "--out", str(tmp_path)]) == 1
    assert "config error" in capsys.readouterr().err
    unknown = write_config(tmp_path / "u.ini", SMALL.format(q1=8).replace("N = 3", "N = 3\nfoo = 1"))
    assert cli.main(["check", "--config", str(unknown), "--out", str(tmp_path)]) == 1
    assert "line 3, column 1" in capsys.readouterr().err
    assert cli.main(["check", "--config", str(tmp_path / "missing.ini")]) == 1


def test_seed_and_threads_validation(small):
    for extra in (["--seed", "-1"], ["--seed", str(2 ** 64)], ["--threads", "0"]):
        with pytest.raises(SystemExit) as info:
            cli.main(["solve", "--config", str(small), *extra])
        assert info.value.code == 2


def test_solve_outputs(small_run):
    cfg, out, code = small_run
    assert code == 0
    for name in ("u.csv", "w.csv", "history.csv", "solve.json"):
        assert (out / name).exists()
    rep = json.loads((out / "solve.json").read_text())
    assert rep["report"]["converged"] is True
    assert rep["report"]["grad_norm"] <= 1e-10
    assert rep["config"]["mesh"]["nodes"] == 600
    assert rep["mesh"]["n"] == 600
    rows = list(csv.reader(open(out / "history.csv")))
    assert rows[0] == ["iter", "max_energy", "grad_norm"]
    # keys are written sorted
    text = (out / "solve.json").read_text()
    assert json.dumps(json.loads(text), sort_keys=True, indent=2) + "\n" == text


def test_solve_creates_missing_out_dir(small_run):
    _, out, _ = small_run
    assert out.is_dir()


def test_unwritable_out_dir(small, tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert cli.main(["solve", "--config", str(small), "--out", str(blocker / "sub")]) == 1


def test_solve_refuses_inadmissible_without_force(tmp_path, capsys):
    cfg = write_config(tmp_path / "q13.ini", SMALL.format(q1=13))
    out = tmp_path / "o"
    assert cli.main(["solve", "--config", str(cfg), "--out", str(out)]) == 2
    assert "--force" in capsys.readouterr().err
    assert cli.main(["solve", "--config", str(cfg), "--out", str(out), "--force"]) == 0
    rep = json.loads((out / "solve.json").read_text())["report"]
    assert rep["outside_theorem_hypotheses"] is True
    assert "outside theorem hypotheses" in rep["notes"]


def test_verify_trivial_profile(small, tmp_path, capsys):
    mesh = RadialMesh(3, 1e-6, 1e3, 600)
    path = tmp_path / "zero.csv"
    from quasilinear_mp.mesh import RadialFunction
    RadialFunction.zeros(mesh).to_csv(path)
    code = cli.main(["verify", "--config", str(small), "--out", str(tmp_path), "--solution", str(path)])
    assert code == 2
    assert "trivial solution" in capsys.readouterr().out


def test_verify_rejects_bad_csv(small_run, tmp_path, capsys):
    cfg, out, _ = small_run
    lines = (out / "u.csv").read_text().splitlines()
    lines[10] = lines[10].split(",")[0] + ",oops"
    bad = tmp_path / "bad.csv"
    bad.write_text("\n".join(lines) + "\n")
    assert cli.main(["verify", "--config", str(cfg), "--out", str(tmp_path), "--solution", str(bad)]) == 1
    assert "row 11" in capsys.readouterr().err


def test_verify_mesh_mismatch(small_run, tmp_path):
    cfg, out, _ = small_run
    other = write_config(tmp_path / "other.ini", SMALL.format(q1=8).replace("nodes = 600", "nodes = 700"))
    code = cli.main(["verify", "--config", str(other), "--out", str(tmp_path),
                     "--solution", str(out / "u.csv")])
    assert code == 1


def test_verify_coarse_threshold_fails(small_run, capsys):
    cfg, out, _ = small_run
    assert cli.main(["verify", "--config", str(cfg), "--out", str(out)]) == 2
    text = capsys.readouterr().out
    assert "weak_defect" in text and "FAIL" in text
    rep = json.loads((out / "verify.json").read_text())["report"]
    assert rep["passed"]["order"] is True


def test_verify_fine_run_passes(fine_run):
    assert fine_run["solve_exit"] == 0
    assert fine_run["verify_exit"] == 0


def test_jsonable_non_finite():
    assert cli.dump_json({"b": float("nan"), "a": np.float64("inf")}) == '{\n  "a": "inf",\n  "b": "nan"\n}\n'


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "quasilinear_mp.cli", "--help"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    for name in ("check", "solve", "verify", "rates"):
        assert name in proc.stdout
