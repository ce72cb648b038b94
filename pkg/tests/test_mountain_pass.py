import math

import numpy as np
import pytest

from quasilinear_mp import mountain_pass as mp
from quasilinear_mp.energy import DiscreteEnergy
from quasilinear_mp.exceptions import DomainError, EndpointSearchError
from quasilinear_mp.mesh import RadialFunction, RadialMesh
from quasilinear_mp.nonlinearity import NonlinearitySpec
from quasilinear_mp.potentials import PotentialSpec

V = PotentialSpec("r^-2")
K = PotentialSpec("min(r^3, 1)", "K", positive=True)


def make_energy(n=2000, g=None, K_expr=None):
    mesh = RadialMesh(3, 1e-6, 1e3, n)
    k = K if K_expr is None else PotentialSpec(K_expr, "K", positive=True)
    return DiscreteEnergy(mesh, V, k, g or NonlinearitySpec.single_power(8))


@pytest.fixture(scope="module")
def energy():
    return make_energy()


def test_endpoint_search(energy):
    lam, v = mp.find_endpoint(energy, mp.default_u0(energy.mesh))
    assert lam <= 2.0 ** 40
    assert energy.I(v) < 0
    assert lam == 4.0  # regression value for the height-3 tent on [1, 2]


def test_endpoint_immediate(energy):
    u0 = mp.default_u0(energy.mesh, height=30.0)
    lam, _ = mp.find_endpoint(energy, u0)
    assert lam == 1.0


def test_endpoint_impossible_without_nonlinearity():
    e = make_energy(400, NonlinearitySpec.zero())
    with pytest.raises(EndpointSearchError):
        mp.find_endpoint(e, mp.default_u0(e.mesh))


def test_endpoint_rejects_bad_u0(energy):
    with pytest.raises(DomainError):
        mp.find_endpoint(energy, np.zeros(energy.mesh.n))


def test_certificate_without_nonlinearity_is_exact():
    e = make_energy(400, NonlinearitySpec.zero())
    cert = mp.rho_certificate(e, 0.7, samples=16)
    assert cert.alpha_hat == pytest.approx(0.7, rel=1e-10)
    assert cert.positive


def test_certificate_small_and_large_rho(energy):
    v = mp.find_endpoint(energy, mp.default_u0(energy.mesh))[1]
    rho = 1e-3 * energy.J(v) / 2
    cert = mp.rho_certificate(energy, rho, samples=64, seed=0)
    assert cert.alpha_hat > 0 and cert.used == 64
    big = mp.rho_certificate(energy, 1e3, samples=64, seed=0)
    assert big.alpha_hat <= 0 and not big.positive
    with pytest.raises(DomainError, match="certificate refused"):
        mp.solve(energy, rho=1e3, samples=16)


def test_certificate_threads_match_serial(energy):
    a = mp.rho_certificate(energy, 1.0, samples=12, seed=5, threads=1)
    b = mp.rho_certificate(energy, 1.0, samples=12, seed=5, threads=4)
    assert a.to_dict() == b.to_dict()


def test_deform_monotone_without_remax(monkeypatch):
    e = make_energy(600)
    v = mp.find_endpoint(e, mp.default_u0(e.mesh))[1]
    state = mp.PathState.straight(e, v, P=11)
    monkeypatch.setattr(mp, "remax", lambda s, en, xatol=1e-3: s.imax)
    state = mp.deform_path(state, e, tol=1e-3, max_iter=300)
    maxima = [row[1] for row in state.history]
    assert all(b <= a + 1e-12 * abs(a) for a, b in zip(maxima, maxima[1:]))


def test_deform_returns_converged_state_unchanged():
    e = make_energy(600)
    v = mp.find_endpoint(e, mp.default_u0(e.mesh))[1]
    state = mp.PathState.straight(e, v, P=11)
    before = state.points.copy()
    state = mp.deform_path(state, e, tol=1e6)
    assert state.converged and state.iterations == 0 and len(state.history) == 1
    # no descent step was taken: the endpoints are untouched
    assert np.array_equal(state.points[0], before[0])
    assert np.array_equal(state.points[-1], before[-1])


def test_path_check():
    e = make_energy(400)
    v = mp.find_endpoint(e, mp.default_u0(e.mesh))[1]
    state = mp.PathState.straight(e, v, P=5)
    state.points[0, 3] = 1.0
    with pytest.raises(DomainError):
        state.check()


def test_refine_keeps_critical_point(inverse_square_solver):
    est = inverse_square_solver
    u, hist = mp.refine(est.u_, est.energy_model_, tol=1e-10)
    assert np.array_equal(u.values, est.u_.values)
    assert len(hist) == 1


def test_refine_rejects_far_points(energy):
    with pytest.raises(DomainError):
        mp.refine(mp.default_u0(energy.mesh), energy)


def test_full_solve(inverse_square_solver):
    est = inverse_square_solver
    rep = est.report_
    assert rep.converged and rep.status == "converged"
    assert rep.grad_norm <= 1e-10
    assert rep.energy > 0
    assert rep.min_u >= -1e-12
    assert rep.energy >= rep.certificate.alpha_hat
    # the run ends at its smallest recorded gradient norm
    gns = [row[2] for row in rep.history]
    assert gns[-1] == min(gns)
    d = rep.to_dict()
    assert d["outside_theorem_hypotheses"] is False
    assert d["certificate"]["kind"] == "empirical"


def test_scaled_K_still_solves():
    e10 = make_energy(1000, K_expr="10*min(r^3, 1)")
    e1 = make_energy(1000)
    r10 = mp.solve(e10)
    r1 = mp.solve(e1)
    assert r10.converged and r1.converged
    assert r10.certificate.positive
    # a larger K lowers the mountain-pass level and the solution changes
    assert 0 < r10.energy < r1.energy
    assert not np.allclose(r10.u.values, r1.u.values)


def test_random_profile_is_nonnegative(rng):
    mesh = RadialMesh(3, 1e-6, 1e3, 500)
    vals = mp.random_profile(mesh, rng)
    assert np.all(vals >= 0) and vals[-1] == 0 and vals.max() > 0


def test_scale_to_level(energy):
    u = mp.default_u0(energy.mesh).values
    lam = mp.scale_to_level(energy.J, 2.5, u)
    assert energy.J(lam * u) == pytest.approx(2.5, rel=1e-10)
    assert mp.scale_to_level(lambda x: -1.0, 1.0, u) is None
    assert math.isfinite(lam)


def test_respace_keeps_maximum():
    e = make_energy(600)
    v = mp.find_endpoint(e, mp.default_u0(e.mesh))[1]
    state = mp.PathState.straight(e, v, P=11)
    new = mp.respace(state, e, 15)
    assert new is None or (len(new.points) == 15 and new.max_energy <= state.max_energy)
    assert isinstance(RadialFunction(e.mesh, state.points[state.imax]), RadialFunction)
