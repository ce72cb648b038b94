"""Post-hoc checks of a computed critical point.

Residuals are evaluated by second-order central differences in ``s = log r``
on the nodal values, which is natural on the geometric mesh:
``u'' + (N-1) u' / r = r^-2 (u_ss + (N-2) u_s)``.  Each residual is reported
raw and relative to the sum of the magnitudes of its terms at the node.

Stencils that straddle a branch switch of ``min``/``max`` in ``V`` or ``K``
are left out of the interior maximum and reported on their own: at such a
point the third derivative of the solution jumps and the central difference
drops to first order, which would otherwise hide the order of the scheme.
"""

import csv
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .dual_transform import DEFAULT_TRANSFORM
from .exceptions import DomainError
from .exponents import Envelope, delta_rate_infinity, delta_rate_zero, fmt
from .mesh import RadialFunction, RadialMesh, e_norm, grad_seminorm_sq, quad_weight, sup_decay_check
from .mountain_pass import _map, refine

TRIM = 5
N_BUMPS = 12


def _vals(u):
    return u.values if isinstance(u, RadialFunction) else np.asarray(u, dtype=float)


def _coef(weight, r):
    if weight is None:
        return np.zeros_like(r)
    return np.asarray(weight(r), dtype=float) * np.ones_like(r)


def _log_derivs(mesh, v):
    """Central ``v_s`` and ``v_ss`` at the interior nodes."""
    hs = mesh.log_step
    v = np.asarray(v, dtype=float)
    vs = (v[2:] - v[:-2]) / (2.0 * hs)
    vss = (v[2:] - 2.0 * v[1:-1] + v[:-2]) / hs ** 2
    return vs, vss


def kink_mask(mesh, *weights):
    """Interior-node mask (length ``n - 2``) of stencils free of branch switches."""
    r = mesh.r
    keep = np.ones(mesh.n - 2, dtype=bool)
    for wgt in weights:
        if not hasattr(wgt, "kinks"):
            continue
        for x in wgt.kinks(r):
            keep &= ~((r[:-2] <= x) & (x <= r[2:]))
    return keep


@dataclass
class ResidualProfile:
    """Interior residual of one equation.

    ``raw`` is in the units of the equation in ``r``; ``rel`` divides by the
    sum of term magnitudes; ``keep`` marks the nodes used for the maxima.
    """

    r: np.ndarray
    raw: np.ndarray
    rel: np.ndarray
    keep: np.ndarray

    def _max(self, arr, mask):
        arr = np.abs(arr[mask])
        return float(arr.max()) if arr.size else 0.0

    @property
    def max_rel(self):
        return self._max(self.rel, self.keep)

    @property
    def max_raw(self):
        return self._max(self.raw, self.keep)

    @property
    def kink_rel(self):
        return self._max(self.rel, ~self.keep)

    @property
    def argmax_r(self):
        rel = np.where(self.keep, np.abs(self.rel), -1.0)
        return float(self.r[int(np.argmax(rel))]) if rel.size else math.nan


def _profile(mesh, terms, trim, keep):
    res = sum(terms)
    mag = sum(np.abs(t) for t in terms)
    r = mesh.r[1:-1]
    rel = np.divide(res, mag, out=np.zeros_like(res), where=mag > 0)
    raw = res / r ** 2
    sl = slice(trim, len(r) - trim)
    return ResidualProfile(r[sl], raw[sl], rel[sl], keep[sl])


def dual_ode_profile(u, V, K, g, transform=DEFAULT_TRANSFORM, trim=TRIM, skip_kinks=True):
    """Residual of ``u'' + (N-1) u'/r - V f(u) f'(u) + K g(f(u)) f'(u)``."""
    mesh = u.mesh
    uv = u.values
    vs, vss = _log_derivs(mesh, uv)
    r = mesh.r[1:-1]
    fv, fp = transform.evaluate(uv[1:-1])
    terms = [
        vss,
        (mesh.N - 2) * vs,
        -r ** 2 * _coef(V, r) * fv * fp,
        r ** 2 * _coef(K, r) * g.g(fv) * fp,
    ]
    keep = kink_mask(mesh, V, K) if skip_kinks else np.ones(mesh.n - 2, dtype=bool)
    return _profile(mesh, terms, trim, keep)


def dual_ode_residual(u, V, K, g, transform=DEFAULT_TRANSFORM, trim=TRIM):
    """Max relative interior residual of the dual ODE (0 for ``u = 0``)."""
    return dual_ode_profile(u, V, K, g, transform, trim).max_rel


def original_equation_profile(w, V, K, g, trim=TRIM, skip_kinks=True):
    """Residual of ``-(1 + 2w^2)(w'' + (N-1) w'/r) - 2 w w'^2 + V w - K g(w)``."""
    mesh = w.mesh
    wv = w.values
    ws, wss = _log_derivs(mesh, wv)
    r = mesh.r[1:-1]
    wi = wv[1:-1]
    lap = wss + (mesh.N - 2) * ws  # r^2 * Laplacian
    terms = [
        -(1.0 + 2.0 * wi ** 2) * lap,
        -2.0 * wi * ws ** 2,
        r ** 2 * _coef(V, r) * wi,
        -r ** 2 * _coef(K, r) * g.g(wi),
    ]
    keep = kink_mask(mesh, V, K) if skip_kinks else np.ones(mesh.n - 2, dtype=bool)
    return _profile(mesh, terms, trim, keep)


def original_equation_residual(w, u, V, K, g, transform=DEFAULT_TRANSFORM, trim=TRIM):
    """Max relative interior residual of the quasilinear equation for ``w``.

    ``u`` is only used to check that ``w = f(u)`` nodewise.
    """
    if u is not None:
        expect = transform.f(u.values)
        if not np.allclose(w.values, expect, rtol=1e-10, atol=1e-12):
            raise DomainError("w must equal f(u) nodewise")
    return original_equation_profile(w, V, K, g, trim).max_rel


def identity_discrepancy(u, transform=DEFAULT_TRANSFORM, trim=TRIM, keep=None):
    """Max relative gap between ``Lap w + w Lap(w^2)`` and ``Lap u / f'(u)``
    for ``w = f(u)``, both sides by central differences."""
    mesh = u.mesh
    uv = u.values
    wv = transform.f(uv)
    ws, wss = _log_derivs(mesh, wv)
    qs, qss = _log_derivs(mesh, wv * wv)
    us, uss = _log_derivs(mesh, uv)
    N = mesh.N
    wi = wv[1:-1]
    a = wss + (N - 2) * ws
    b = wi * (qss + (N - 2) * qs)
    fp = 1.0 / np.sqrt(1.0 + 2.0 * wi * wi)
    c = (uss + (N - 2) * us) / fp
    gap = a + b - c
    mag = np.abs(a) + np.abs(b) + np.abs(c)
    rel = np.divide(gap, mag, out=np.zeros_like(gap), where=mag > 0)
    if keep is not None:
        rel = np.where(keep, rel, 0.0)
    rel = rel[trim: len(rel) - trim]
    return float(np.max(np.abs(rel))) if rel.size else 0.0


@dataclass(frozen=True)
class Bump:
    """Smooth compactly supported test profile ``exp(-1/(1-x^2))`` with
    ``x = log(r/center)/width``."""

    center: float
    width: float = 1.0

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        x = np.log(r / self.center) / self.width
        inside = np.abs(x) < 1.0
        d = np.where(inside, 1.0 - x * x, 1.0)
        h = np.where(inside, np.exp(-1.0 / d), 0.0)
        dh = np.where(inside, h * (-2.0 * x / d ** 2), 0.0) / (self.width * r)
        return h, dh


def default_battery(mesh, count=N_BUMPS):
    """``count`` bumps centred at dyadic radii around 1, kept inside the mesh."""
    ks = np.arange(count) - count // 2
    out = []
    for k in ks:
        c = 2.0 ** float(k)
        if mesh.r[0] * math.e < c < mesh.r[-1] / math.e:
            out.append(Bump(c))
    return out


def weak_form_defects(w, u, V, K, g, transform=DEFAULT_TRANSFORM, tests=None):
    """Normalized defects of the weak identity, one per test function.

    With ``u`` given, ``w = f(u)`` and ``w' = f'(u) u'`` are taken at the
    quadrature points from the piecewise-linear ``u``; otherwise ``w`` itself
    is used piecewise-linearly.
    """
    src = u if u is not None else w
    mesh = src.mesh
    tests = default_battery(mesh) if tests is None else list(tests)
    if not tests:
        raise DomainError("the test battery must not be empty")
    vq = src.values
    slope = (np.diff(vq) / mesh.h)[:, None]
    at = mesh.at_quad(vq)
    if u is not None:
        wq, fp = transform.evaluate(at)
        dw = fp * slope
    else:
        wq, dw = at, slope * np.ones_like(at)
    Vq = quad_weight(V, mesh)
    Kq = quad_weight(K, mesh)
    out = []
    for test in tests:
        h, dh = test(mesh.qr)
        parts = [
            (1.0 + 2.0 * wq * wq) * dw * dh,
            2.0 * wq * dw * dw * h,
            Vq * wq * h,
            -Kq * g.g(wq) * h,
        ]
        vals = [float(np.sum(mesh.qw * p)) for p in parts]
        scale = sum(abs(x) for x in vals)
        out.append(sum(vals) / scale if scale > 0 else 0.0)
    return out


def weak_form_defect(w, u, V, K, g, transform=DEFAULT_TRANSFORM, tests=None):
    """Max absolute normalized defect over the battery."""
    return float(max(abs(x) for x in weak_form_defects(w, u, V, K, g, transform, tests)))


# decay constant


def capped_profile(mesh, c, power, cut=None):
    """``max(r, c)^power - (cut c)^power``, clipped at 0.

    ``power < 0``.  Without ``cut`` the shift is ``r_max^power`` so the
    profile just vanishes at ``r_max``; with ``cut`` it is supported in
    ``r < cut * c`` and the family is exactly self-similar in ``c``.
    """
    edge = mesh.r_max if cut is None else min(cut * c, mesh.r_max)
    vals = np.maximum(mesh.r, c) ** power - edge ** power
    return RadialFunction(mesh, np.maximum(vals, 0.0))


def newton_profile(mesh, c, cut=None):
    """Capped Newtonian profile ``max(r, c)^(2-N)``."""
    return capped_profile(mesh, c, 2.0 - mesh.N, cut)


def power_profile(mesh, c, cut=None):
    """Capped ``max(r, c)^(-(N-2)/2)``."""
    return capped_profile(mesh, c, -(mesh.N - 2) / 2.0, cut)


def decay_library(mesh, V, transform=DEFAULT_TRANSFORM, n_random=16, seed=0):
    """Largest empirical decay constant over capped Newtonian and power
    profiles at dyadic radii and random bump profiles."""
    from .mountain_pass import random_profile

    funcs = []
    for k in range(-12, 9, 2):
        c = 2.0 ** k
        if mesh.r[0] < c < mesh.r[-1] / 4:
            funcs += [newton_profile(mesh, c), power_profile(mesh, c)]
    for idx in range(n_random):
        rng = np.random.default_rng([seed, idx])
        funcs.append(RadialFunction(mesh, random_profile(mesh, rng)))
    return float(max(sup_decay_check(f, V, transform) for f in funcs))


# embedding rates


@dataclass
class RateFit:
    side: str
    q: object
    radii: np.ndarray
    S: np.ndarray
    delta_hat: float
    delta_predicted: object
    monotone: bool
    samples: int

    def to_dict(self):
        return {
            "side": self.side,
            "q": fmt(self.q),
            "radii": [float(x) for x in self.radii],
            "S_estimate": [float(x) for x in self.S],
            "delta_hat": self.delta_hat,
            "delta_predicted": fmt(self.delta_predicted),
            "delta_predicted_float": float(self.delta_predicted),
            "monotone": self.monotone,
            "samples": self.samples,
        }

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["R", "S_estimate"])
            for R, S in zip(self.radii, self.S):
                writer.writerow([repr(float(R)), repr(float(S))])


PROFILE_CUT = 2.0
ORLICZ_SHARE_LIMIT = 0.5


def default_rate_mesh(N=3):
    return RadialMesh(N, 1e-12, 1e4, 3200)


def orlicz_share(mesh, R, V, transform=DEFAULT_TRANSFORM):
    """Orlicz part of the E-norm of the cut Newtonian profile at scale ``R``,
    as a fraction of the whole norm."""
    u = newton_profile(mesh, R, PROFILE_CUT)
    norm = e_norm(u, V, transform)
    return 1.0 - math.sqrt(grad_seminorm_sq(u)) / norm


def default_ladder(side, count=8, q=None, V=None, transform=DEFAULT_TRANSFORM, mesh=None):
    """Dyadic radii for the rate fit.

    At infinity: ``2, 4, ..., 2^count``.  At the origin the rates are
    asymptotic and the E-norm is not homogeneous: a unit profile at scale
    ``R`` spends a share of its norm on the Orlicz part, and that share
    enters ``S`` roughly ``q`` times.  The ladder therefore ends at the
    largest ``2^-k <= 1/2`` with ``q * share <= 1/2`` and extends ``count``
    octaves below it.  Without ``q`` and ``V`` it is ``2^-count .. 1/2``.
    """
    k = np.arange(count, dtype=float)
    if side != "zero":
        return 2.0 ** (1.0 + k)
    top = 1
    if q is not None and V is not None:
        mesh = default_rate_mesh() if mesh is None else mesh
        while float(q) * orlicz_share(mesh, 2.0 ** -top, V, transform) > ORLICZ_SHARE_LIMIT:
            top += 1
            if 2.0 ** -(top + count) < 64 * mesh.r[0]:
                raise DomainError("the rate ladder would leave the mesh; lower r_min")
    return 2.0 ** (-top - k[::-1])


def _rate_profile(mesh, rng, lo, hi):
    x = np.log(mesh.r)
    vals = np.zeros(mesh.n)
    for _ in range(int(rng.integers(1, 5))):
        c = rng.uniform(lo, hi)
        wdt = rng.uniform(0.1, 2.0)
        vals += rng.uniform(0.2, 1.0) * np.exp(-0.5 * ((x - c) / wdt) ** 2)
    return vals


def embedding_rate_fit(q, env, side, V, K, transform=DEFAULT_TRANSFORM, samples=256, seed=0,
                       mesh=None, radii=None, threads=1, N=3):
    """Sampled ``S0(q, R)`` (``side="zero"``) or ``S_inf(q, R)`` on a dyadic
    ladder, and the least-squares slope of ``log S`` against ``log R``.

    The sample set is shared by all radii: ``samples`` random bump profiles
    plus capped Newtonian and ``r^(-(N-2)/2)`` profiles cut off at twice
    every ladder radius, each scaled to unit E-norm.  Sharing makes the sampled ``S``
    monotone in ``R`` exactly.  Returns a :class:`RateFit`; the sampled sup
    only bounds ``S`` from below.
    """
    if side not in ("zero", "infinity"):
        raise DomainError(f"side must be 'zero' or 'infinity', got {side!r}")
    if mesh is None:
        mesh = default_rate_mesh(N)
    N = mesh.N
    if not isinstance(env, Envelope):
        env = Envelope(*env)
    predicted = delta_rate_zero(q, env, N) if side == "zero" else delta_rate_infinity(q, env, N)
    if radii is None:
        radii = default_ladder(side, q=q, V=V, transform=transform, mesh=mesh)
    radii = np.sort(np.asarray(radii, dtype=float))
    if np.any(radii <= mesh.r[0]) or np.any(radii >= mesh.r[-1]):
        raise DomainError("ladder radii must lie inside the mesh")
    lo = max(math.log(radii[0] / 8), math.log(mesh.r[0]))
    hi = min(math.log(radii[-1] * 8), math.log(mesh.r[-1]) - 1.0)
    qf = float(q)
    Kq = mesh.qw * quad_weight(K, mesh)
    inside = mesh.qr[None, :, :] < radii[:, None, None]
    if side == "infinity":
        inside = ~inside

    def score(vals):
        u = RadialFunction(mesh, vals)
        norm = e_norm(u, V, transform)
        if not norm > 0:
            return np.zeros(len(radii))
        uq = np.abs(mesh.at_quad(u.values / norm)) ** qf
        return np.sum(np.where(inside, (Kq * uq)[None], 0.0), axis=(1, 2))

    def one(idx):
        rng = np.random.default_rng([seed, idx])
        return score(_rate_profile(mesh, rng, lo, hi))

    rows = _map(one, range(samples), threads)
    for R in radii:
        rows.append(score(newton_profile(mesh, R, PROFILE_CUT).values))
        rows.append(score(power_profile(mesh, R, PROFILE_CUT).values))
    S = np.max(np.array(rows), axis=0)
    with np.errstate(divide="ignore"):
        slope = float(np.polyfit(np.log(radii), np.log(S), 1)[0]) if np.all(S > 0) else math.nan
    dS = np.diff(S)
    monotone = bool(np.all(dS >= 0) if side == "zero" else np.all(dS <= 0))
    return RateFit(side, q, radii, S, slope, predicted, monotone, samples)


# report


@dataclass
class ResidualReport:
    dual_residual: float
    dual_residual_raw: float
    dual_residual_at: float
    original_residual: float
    original_residual_raw: float
    identity_discrepancy: float
    weak_defect: float
    weak_defects: list
    kink_radii: list
    kink_dual_residual: float
    decay_ratio: float
    decay_library_max: float
    trivial: bool
    convergence: dict = None
    rates: list = field(default_factory=list)
    thresholds: dict = field(default_factory=dict)
    passed: dict = field(default_factory=dict)

    @property
    def ok(self):
        return not self.trivial and all(self.passed.values())

    def to_dict(self):
        out = asdict(self)
        out["rates"] = [r.to_dict() if isinstance(r, RateFit) else r for r in self.rates]
        out["ok"] = self.ok
        return out


DEFAULT_THRESHOLDS = {
    "weak_defect": 1e-6,
    "order_min": 1.7,
    "order_max": 2.3,
    "decay_slack": 0.05,
}


def convergence_study(u, V, K, g, transform=DEFAULT_TRANSFORM, tol=1e-10):
    """Dual-ODE residual on the mesh of ``u`` and on the refined mesh.

    The refined solution is obtained by Newton from the interpolant of ``u``.
    Returns a dict with both residuals, their ratio and the observed order.
    """
    from .energy import DiscreteEnergy

    fine_mesh = u.mesh.refine()
    energy = DiscreteEnergy(fine_mesh, V, K, g, transform)
    start = RadialFunction(fine_mesh, np.interp(fine_mesh.r, u.mesh.r, u.values))
    fine, hist = refine(start, energy, tol, loose=math.inf)
    coarse_res = dual_ode_residual(u, V, K, g, transform)
    fine_res = dual_ode_residual(fine, V, K, g, transform)
    ratio = coarse_res / fine_res if fine_res > 0 else math.inf
    order = math.log2(ratio) if 0 < ratio < math.inf else math.nan
    return {
        "n_coarse": u.mesh.n,
        "n_fine": fine_mesh.n,
        "residual_coarse": coarse_res,
        "residual_fine": fine_res,
        "ratio": ratio,
        "order": order,
        "fine_grad_norm": hist[-1][2],
    }


def verify_solution(u, V, K, g, transform=DEFAULT_TRANSFORM, tests=None, thresholds=None,
                    study=True, rate_specs=(), seed=0, threads=1):
    """Run the residual suite on ``u`` and collect a :class:`ResidualReport`.

    ``rate_specs`` is a sequence of ``(q, envelope, side)`` triples for
    :func:`embedding_rate_fit`.
    """
    th = dict(DEFAULT_THRESHOLDS)
    th.update(thresholds or {})
    mesh = u.mesh
    w = RadialFunction(mesh, transform.f(u.values))
    trivial = not np.any(u.values != 0)
    dual = dual_ode_profile(u, V, K, g, transform)
    orig = original_equation_profile(w, V, K, g)
    keep = kink_mask(mesh, V, K)
    ident = identity_discrepancy(u, transform, keep=keep)
    defects = weak_form_defects(w, u, V, K, g, transform, tests)
    weak = float(max(abs(x) for x in defects))
    kinks = sorted(set(np.concatenate([
        V.kinks(mesh.r) if hasattr(V, "kinks") else np.empty(0),
        K.kinks(mesh.r) if hasattr(K, "kinks") else np.empty(0),
    ]).tolist()))
    if trivial:
        ratio, lib = 0.0, decay_library(mesh, V, transform, seed=seed)
    else:
        ratio = sup_decay_check(u, V, transform)
        lib = decay_library(mesh, V, transform, seed=seed)
    passed = {
        "weak_defect": weak <= th["weak_defect"],
        "decay": ratio <= (1.0 + th["decay_slack"]) * lib,
    }
    conv = None
    if study and not trivial:
        conv = convergence_study(u, V, K, g, transform)
        passed["order"] = th["order_min"] <= conv["order"] <= th["order_max"]
    rates = []
    for q, env, side in rate_specs:
        fit = embedding_rate_fit(q, env, side, V, K, transform, seed=seed, threads=threads)
        rates.append(fit)
        passed[f"rate_{side}_monotone"] = fit.monotone
    return ResidualReport(
        dual_residual=dual.max_rel,
        dual_residual_raw=dual.max_raw,
        dual_residual_at=dual.argmax_r,
        original_residual=orig.max_rel,
        original_residual_raw=orig.max_raw,
        identity_discrepancy=ident,
        weak_defect=weak,
        weak_defects=[float(x) for x in defects],
        kink_radii=kinks,
        kink_dual_residual=dual.kink_rel,
        decay_ratio=float(ratio),
        decay_library_max=float(lib),
        trivial=bool(trivial),
        convergence=conv,
        rates=rates,
        thresholds=th,
        passed=passed,
    )
