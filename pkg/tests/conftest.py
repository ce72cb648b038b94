import time
from pathlib import Path

import numpy as np
import pytest

from quasilinear_mp import cli
from quasilinear_mp.estimator import GroundStateSolver

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"

# acceptance verdicts, printed once at the end of the session
AC_LINES = {}


def record(name, ok, detail):
    AC_LINES[name] = f"{name} {'PASS' if ok else 'FAIL'}  {detail}"
    print(AC_LINES[name])
    return ok


def pytest_terminal_summary(terminalreporter):
    if not AC_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(AC_LINES):
        terminalreporter.write_line(AC_LINES[name])


def write_config(path, text):
    path.write_text(text.strip() + "\n", encoding="utf-8")
    return path


@pytest.fixture(scope="session")
def inverse_square_solver():
    """Default-mesh solve of V = r^-2, K = min(r^3, 1), q = 8."""
    return GroundStateSolver().fit()


@pytest.fixture(scope="session")
def fine_run(tmp_path_factory):
    """CLI solve + verify on the 20000-node mesh; shared by the end-to-end
    and determinism checks."""
    out = tmp_path_factory.mktemp("fine")
    cfg = str(CONFIGS / "inverse_square_V_fine.ini")
    t0 = time.perf_counter()
    code_solve = cli.main(["solve", "--config", cfg, "--out", str(out), "--seed", "0"])
    t1 = time.perf_counter()
    code_verify = cli.main(["verify", "--config", cfg, "--out", str(out)])
    t2 = time.perf_counter()
    return {
        "out": out,
        "config": cfg,
        "solve_exit": code_solve,
        "verify_exit": code_verify,
        "solve_seconds": t1 - t0,
        "verify_seconds": t2 - t1,
    }


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
