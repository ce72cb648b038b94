import csv
import json

import numpy as np
import pytest

from quasilinear_mp import verify as vf
from quasilinear_mp.dual_transform import DEFAULT_TRANSFORM as ft
from quasilinear_mp.exceptions import DomainError
from quasilinear_mp.exponents import Envelope
from quasilinear_mp.mesh import RadialFunction, RadialMesh
from quasilinear_mp.nonlinearity import NonlinearitySpec
from quasilinear_mp.potentials import PotentialSpec

G8 = NonlinearitySpec.single_power(8)


# Manufactured problem: u = exp(-r^2/2) solves the dual ODE in N = 3 with
# V = 1 + r^2 once K is chosen to balance it.  Lap u = (r^2 - 3) u.
def V_mf(r):
    return 1.0 + np.asarray(r, dtype=float) ** 2


def K_mf(r):
    r = np.asarray(r, dtype=float)
    u = np.exp(-r * r / 2)
    f, fp = ft.evaluate(u)
    return ((1 + r * r) * f * fp - (r * r - 3) * u) / (G8.g(f) * fp)


def manufactured(n):
    mesh = RadialMesh(3, 0.1, 5.0, n)
    u = RadialFunction(mesh, np.exp(-mesh.r ** 2 / 2))
    return u, RadialFunction(mesh, ft.f(u.values))


def test_manufactured_K_is_positive():
    r = np.geomspace(1e-3, 5, 500)
    assert np.all(K_mf(r) > 0)


def test_manufactured_residuals_converge_at_second_order():
    dual, orig, weak = [], [], []
    for n in (1000, 2000, 4000):
        u, w = manufactured(n)
        dual.append(vf.dual_ode_residual(u, V_mf, K_mf, G8))
        orig.append(vf.original_equation_residual(w, u, V_mf, K_mf, G8))
        weak.append(vf.weak_form_defect(w, u, V_mf, K_mf, G8))
    assert dual[-1] < 5e-5 and orig[-1] < 5e-5 and weak[-1] < 1e-6
    # the maximum sits near the trimmed outer edge, which moves with n, so
    # the ratio only approaches 4 from below
    assert 3.5 < dual[1] / dual[2] < 4.5
    assert 3.5 < orig[1] / orig[2] < 4.5
    for a, b in zip(weak, weak[1:]):
        assert a / b == pytest.approx(4.0, rel=0.03)


def test_wrong_solution_is_detected():
    u, w = manufactured(2000)
    bad = RadialFunction(u.mesh, 1.1 * u.values)
    assert vf.dual_ode_residual(bad, V_mf, K_mf, G8) > 1e-2
    assert vf.weak_form_defect(None, bad, V_mf, K_mf, G8) > 1e-2


def test_identity_discrepancy_on_smooth_profile():
    errs = [vf.identity_discrepancy(manufactured(n)[0]) for n in (1000, 2000)]
    assert errs[1] < 1e-5
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.1)


def test_zero_profile():
    mesh = RadialMesh(3, 1e-6, 1e3, 500)
    z = RadialFunction.zeros(mesh)
    V, K = PotentialSpec("r^-2"), PotentialSpec("min(r^3, 1)")
    assert vf.dual_ode_residual(z, V, K, G8) == 0.0
    assert vf.original_equation_residual(z, z, V, K, G8) == 0.0
    assert vf.weak_form_defect(z, z, V, K, G8) == 0.0
    rep = vf.verify_solution(z, V, K, G8)
    assert rep.trivial and not rep.ok


def test_w_must_match_u():
    u, w = manufactured(500)
    with pytest.raises(DomainError):
        vf.original_equation_residual(RadialFunction(u.mesh, u.values), u, V_mf, K_mf, G8)


def test_bump_is_smooth_and_compact():
    b = vf.Bump(2.0, 0.5)
    r = np.geomspace(0.1, 20, 4001)
    h, dh = b(r)
    assert np.all(h[(r < 2 * np.exp(-0.5)) | (r > 2 * np.exp(0.5))] == 0)
    assert h.max() == pytest.approx(np.exp(-1), rel=1e-6)
    eps = 1e-7
    fd = (b(r + eps)[0] - b(r - eps)[0]) / (2 * eps)
    assert np.allclose(dh, fd, atol=1e-6)
    with pytest.raises(DomainError):
        u, w = manufactured(300)
        vf.weak_form_defect(w, u, V_mf, K_mf, G8, tests=[])


def test_kink_mask_drops_only_stencils_at_the_kink():
    mesh = RadialMesh(3, 1e-6, 1e3, 2000)
    keep = vf.kink_mask(mesh, PotentialSpec("r^-2"), PotentialSpec("min(r^3, 1)"))
    dropped = mesh.r[1:-1][~keep]
    assert 1 <= dropped.size <= 4
    assert np.all(np.abs(np.log(dropped)) < 3 * np.log(mesh.r[1] / mesh.r[0]) + 1e-12)


def test_solution_convergence_study(inverse_square_solver):
    est = inverse_square_solver
    e = est.energy_model_
    study = vf.convergence_study(est.u_, e.V, e.K, e.g)
    assert study["n_fine"] == 2 * est.mesh_.n - 1
    assert study["fine_grad_norm"] <= 1e-10
    assert 1.7 <= study["order"] <= 2.3


def test_fine_run_weak_defect(fine_run):
    rep = json.loads((fine_run["out"] / "verify.json").read_text())["report"]
    assert rep["weak_defect"] <= 1e-6
    assert rep["passed"]["decay"] and rep["ok"]


def test_rate_fit_is_invariant_under_K_scaling():
    mesh = RadialMesh(3, 1e-12, 1e4, 800)
    V = PotentialSpec("1")
    radii = [2.0, 4.0, 8.0, 16.0]
    env = Envelope(9, 0)
    a = vf.embedding_rate_fit(25, env, "infinity", V, PotentialSpec("r^9"), samples=8, mesh=mesh, radii=radii)
    b = vf.embedding_rate_fit(25, env, "infinity", V, PotentialSpec("3*r^9"), samples=8, mesh=mesh, radii=radii)
    assert np.allclose(b.S, 3 * a.S, rtol=1e-12)
    assert b.delta_hat == pytest.approx(a.delta_hat, abs=1e-10)
    assert a.monotone


def test_rate_fit_csv(tmp_path):
    mesh = RadialMesh(3, 1e-12, 1e4, 600)
    fit = vf.embedding_rate_fit(11, Envelope(6, 0), "zero", PotentialSpec("1"), PotentialSpec("r^6"),
                                samples=4, mesh=mesh, radii=[1 / 16, 1 / 8, 1 / 4])
    fit.to_csv(tmp_path / "r.csv")
    rows = list(csv.reader(open(tmp_path / "r.csv")))
    assert rows[0] == ["R", "S_estimate"] and len(rows) == 4
    assert [float(x[0]) for x in rows[1:]] == [1 / 16, 1 / 8, 1 / 4]
    d = fit.to_dict()
    assert d["side"] == "zero" and d["q"] == "11"
    with pytest.raises(DomainError):
        vf.embedding_rate_fit(11, Envelope(6, 0), "middle", PotentialSpec("1"), PotentialSpec("r^6"))


def test_ladders():
    assert list(vf.default_ladder("infinity", 3)) == [2.0, 4.0, 8.0]
    assert list(vf.default_ladder("zero", 3)) == [0.125, 0.25, 0.5]
