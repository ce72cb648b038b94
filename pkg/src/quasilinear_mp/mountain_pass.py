"""Numerical mountain pass for the discrete dual functional.

Pipeline: find an endpoint ``v = lambda u0`` with ``I(v) < 0``; certify a
positive barrier on ``S_rho = {J = rho}`` by sampling; deform the straight
path ``[0, v]`` by moving its highest point downhill (Sobolev gradient,
Armijo backtracking) and re-spacing the path in the E-norm; polish the
highest point with damped Newton on the gradient norm.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .exceptions import DomainError, EndpointSearchError, SolverDivergenceError
from .mesh import RadialFunction, e_norm

ARMIJO_C = 1e-4
MAX_HALVINGS = 60
LAMBDA_MAX_EXP = 40


def _vals(u):
    return u.values if isinstance(u, RadialFunction) else np.asarray(u, dtype=float)


def default_u0(mesh, lo=1.0, hi=2.0, height=3.0):
    """Tent of the given height supported on ``[lo, hi]``."""
    mid = 0.5 * (lo + hi)
    r = mesh.r
    vals = height * np.clip(1.0 - np.abs(r - mid) / (mid - lo), 0.0, None)
    if not np.any(vals > 0):
        raise DomainError(f"tent on [{lo}, {hi}] misses every node of {mesh!r}")
    return RadialFunction(mesh, vals)


def find_endpoint(energy, u0, rho=None, max_exp=LAMBDA_MAX_EXP):
    """Double ``lambda`` from 1 until ``I(lambda u0) < 0`` (and ``J > rho`` if given).

    Returns ``(lambda, v)``.
    """
    u0 = _vals(u0)
    if np.any(u0 < 0) or not np.any(u0 > 0):
        raise DomainError("u0 must be nonnegative and not identically zero")
    lam = 1.0
    for _ in range(max_exp + 1):
        v = lam * u0
        if energy.I(v) < 0 and (rho is None or energy.J(v) > rho):
            return lam, RadialFunction(energy.mesh, v)
        lam *= 2.0
    raise EndpointSearchError(
        f"endpoint search failed: I(lambda u0) >= 0 up to lambda = 2^{max_exp}; "
        "check (g2)/theta>2 or mesh truncation"
    )


def random_profile(mesh, rng, n_bumps=None):
    """Nonnegative sum of 1-4 Gaussian bumps in ``log r`` with log-uniform
    centres in ``[1e-3, 1e2]`` and widths in ``[0.1, 2]`` (log units)."""
    k = int(rng.integers(1, 5)) if n_bumps is None else n_bumps
    x = np.log(mesh.r)
    lo, hi = max(math.log(1e-3), x[0]), min(math.log(1e2), x[-1])
    vals = np.zeros(mesh.n)
    for _ in range(k):
        c = rng.uniform(lo, hi)
        w = rng.uniform(0.1, 2.0)
        a = rng.uniform(0.2, 1.0)
        vals += a * np.exp(-0.5 * ((x - c) / w) ** 2)
    vals[-1] = 0.0
    return vals


def scale_to_level(func, target, u, lo=-60.0, hi=60.0):
    """``lambda > 0`` with ``func(lambda u) = target`` for ``func`` increasing
    along the ray, found by ``brentq`` in ``log lambda``.  ``None`` on failure."""
    def h(s):
        return func(math.exp(s) * u) - target

    a, b = -1.0, 1.0
    try:
        while h(a) > 0:
            a -= 4.0
            if a < lo:
                return None
        while h(b) < 0:
            b += 4.0
            if b > hi:
                return None
        s = optimize.brentq(h, a, b, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=200)
    except (ValueError, FloatingPointError, OverflowError):
        return None
    return math.exp(s)


def _map(fn, items, threads):
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(fn, items))
    return [fn(x) for x in items]


@dataclass
class RhoCertificate:
    rho: float
    alpha_hat: float
    samples: int
    used: int
    skipped: list
    empirical_C: float
    positive: bool

    def to_dict(self):
        return {
            "rho": self.rho,
            "alpha_hat": self.alpha_hat,
            "samples": self.samples,
            "used": self.used,
            "skipped": list(self.skipped),
            "empirical_C": self.empirical_C,
            "certified": self.positive,
            "kind": "empirical",
        }


def rho_certificate(energy, rho, samples=64, seed=0, threads=1):
    """Sampled minimum of ``I`` on ``S_rho = {J = rho}``.

    Each random profile is rescaled onto ``S_rho``; samples whose ray never
    reaches the level are skipped and listed.  Also reports the smallest
    ``C`` with ``I >= rho - C (rho^(q1/2) + rho^(q2/2))`` on the sample.
    """
    if not rho > 0:
        raise DomainError("rho must be positive")
    mesh = energy.mesh

    def one(idx):
        rng = np.random.default_rng([seed, idx])
        u = random_profile(mesh, rng)
        lam = scale_to_level(energy.J, rho, u)
        if lam is None:
            return idx, None
        return idx, energy.I(lam * u)

    results = _map(one, range(samples), threads)
    values = [val for _, val in results if val is not None]
    skipped = [idx for idx, val in results if val is None]
    if not values:
        return RhoCertificate(rho, -math.inf, samples, 0, skipped, math.inf, False)
    alpha_hat = float(min(values))
    g = energy.g
    if g.kind == "zero":
        C = 0.0
    else:
        denom = rho ** (float(g.q1) / 2) + rho ** (float(g.q2) / 2)
        C = float(max(0.0, max((rho - v) / denom for v in values)))
    return RhoCertificate(float(rho), alpha_hat, samples, len(values), skipped, C, alpha_hat > 0)


@dataclass
class PathState:
    """Points ``p_0 = 0, ..., p_P = v`` of a discrete path with their energies."""

    points: np.ndarray
    energies: np.ndarray
    iterations: int = 0
    converged: bool = False
    status: str = "initial"
    history: list = field(default_factory=list)
    grad_norm: float = math.inf

    @classmethod
    def straight(cls, energy, v, P=21):
        """Straight path from 0 to ``v`` with ``P`` segments (``P + 1`` points)."""
        v = _vals(v)
        t = np.linspace(0.0, 1.0, P + 1)
        points = t[:, None] * v[None, :]
        energies = np.array([energy.I(p) for p in points])
        return cls(points, energies)

    @property
    def imax(self):
        return int(1 + np.argmax(self.energies[1:-1]))

    @property
    def max_energy(self):
        return float(self.energies[self.imax])

    def check(self):
        if np.any(self.points[0] != 0):
            raise DomainError("first path point must be 0")
        if not self.energies[-1] < 0:
            raise DomainError("last path point must have negative energy")
        if not np.all(np.isfinite(self.energies)):
            raise DomainError("path energies must be finite")


def _e_dist(energy, a, b):
    d = RadialFunction(energy.mesh, b - a)
    return e_norm(d, energy.V, energy.transform)


def respace(state, energy, n_points=None):
    """Re-parametrize each side of the highest point by E-norm arc length.

    The highest point stays fixed and the path gets ``n_points`` points
    (default: unchanged), split between the two sides in proportion to their
    lengths.  Returns a new :class:`PathState`, or ``None`` when the re-spaced
    path would raise the maximal energy.
    """
    pts = state.points
    i = state.imax
    P = len(pts) - 1
    n_points = len(pts) if n_points is None else n_points
    seg = np.array([_e_dist(energy, pts[k], pts[k + 1]) for k in range(P)])
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    total = cum[-1]
    if not total > 0:
        return None
    # interior points left and right of the max, at least one segment per side
    left = int(round((n_points - 1) * cum[i] / total))
    left = min(max(left, 1), n_points - 2)
    right = n_points - 1 - left
    new = [pts[0]]
    for lo, hi, count in ((0, i, left), (i, P, right)):
        targets = np.linspace(cum[lo], cum[hi], count + 1)[1:]
        for s in targets[:-1]:
            k = int(np.clip(np.searchsorted(cum, s, side="right") - 1, lo, hi - 1))
            w = 0.0 if seg[k] == 0 else (s - cum[k]) / seg[k]
            new.append((1.0 - w) * pts[k] + w * pts[k + 1])
        new.append(pts[hi])
    new = np.array(new)
    energies = np.array([state.energies[0]] + [energy.I(p) for p in new[1:-1]] + [state.energies[-1]])
    energies[left] = state.energies[i]
    if np.max(energies[1:-1]) > state.max_energy:
        return None
    return PathState(new, energies, state.iterations, state.converged, state.status,
                     state.history, state.grad_norm)


def remax(state, energy, xatol=1e-3):
    """Maximize ``I`` on the two segments next to the highest point.

    When a segment peaks strictly between its end points, the peak is inserted
    into the path.  Returns the index of the highest point.
    """
    i = state.imax
    best = (state.energies[i], None, None)
    for a, b in ((i - 1, i), (i, i + 1)):
        pa, pb = state.points[a], state.points[b]
        res = optimize.minimize_scalar(
            lambda s: -energy.I((1.0 - s) * pa + s * pb),
            bounds=(0.0, 1.0), method="bounded", options={"xatol": xatol},
        )
        if -res.fun > best[0] and 0.0 < res.x < 1.0:
            best = (-res.fun, b, (1.0 - res.x) * pa + res.x * pb)
    if best[1] is None:
        return i
    j = best[1]
    state.points = np.insert(state.points, j, best[2], axis=0)
    state.energies = np.insert(state.energies, j, best[0])
    return j


def _newton_try(energy, u, grad, gn, e0, halvings=20):
    """Damped Newton step from ``u`` that lowers the gradient norm without
    raising ``I`` above ``e0``; ``None`` if no such step is found."""
    try:
        d = energy.newton_step(u, grad)
    except (np.linalg.LinAlgError, ValueError):
        return None
    if not np.all(np.isfinite(d)):
        return None
    t = 1.0
    for _ in range(halvings):
        cand = u + t * d
        cand[-1] = 0.0
        e1 = energy.I(cand)
        if e1 <= e0 and energy.grad_norm(cand) < gn:
            return cand, e1
        t *= 0.5
    return None


def deform_path(state, energy, tol=1e-3, max_iter=2000, respace_every=10, n_points=None,
                newton_switch=0.5):
    """Move the highest path point by Armijo-damped Sobolev gradient steps.

    Before each step the two segments next to the highest point are searched
    for a higher interior point (see :func:`remax`).  The step direction is
    ``A^{-1} grad I`` with ``A`` the stiffness matrix; steps are halved from 1
    until ``I`` drops by ``c t |grad|^2`` (``c = 1e-4``).  Every
    ``respace_every`` steps the path is re-spaced back to ``n_points`` points.
    Stops when the dual gradient norm at the highest point is ``<= tol``.

    Plain descent only converges linearly at a saddle.  Once the gradient norm
    is below ``newton_switch`` a damped Newton step is tried first and kept
    only if it lowers both the gradient norm and the energy of the highest
    point, so the path maximum still never rises.  ``newton_switch=0``
    disables this.
    """
    state.check()
    n_points = len(state.points) if n_points is None else n_points
    history = state.history
    for it in range(max_iter + 1):
        i = remax(state, energy)
        u = state.points[i]
        grad = energy.gradient(u)
        d = energy.sobolev_gradient(grad)
        gn2 = max(float(np.dot(grad, d)), 0.0)
        gn = math.sqrt(gn2)
        state.grad_norm = gn
        history.append((state.iterations, float(state.energies[i]), gn))
        if gn <= tol:
            state.converged = True
            state.status = "converged"
            return state
        if it == max_iter:
            break
        e0 = state.energies[i]
        step = _newton_try(energy, u, grad, gn, e0) if gn <= newton_switch else None
        if step is not None:
            state.points[i], state.energies[i] = step
            state.iterations += 1
            continue
        t = 1.0
        for _ in range(MAX_HALVINGS):
            cand = u - t * d
            cand[-1] = 0.0
            e1 = energy.I(cand)
            if e1 <= e0 - ARMIJO_C * t * gn2:
                break
            t *= 0.5
        else:
            state.status = "line search failed"
            return state
        state.points[i] = cand
        state.energies[i] = e1
        state.iterations += 1
        if respace_every and state.iterations % respace_every == 0:
            new = respace(state, energy, n_points)
            if new is not None:
                new.history = history
                state = new
    state.status = "not converged"
    return state


def refine(u, energy, tol=1e-10, max_iter=100, loose=1e-3, neg_tol=1e-12):
    """Damped Newton polish of a near-critical point.

    The merit is the dual gradient norm; a step is halved until the merit
    drops.  Raises :class:`SolverDivergenceError` after 10 consecutive steps
    without a decrease.  Returns ``(u, history)`` with history rows
    ``(iteration, energy, grad_norm)``.
    """
    mesh = energy.mesh
    u = _vals(u).copy()
    grad = energy.gradient(u)
    gn = energy.grad_norm(u, grad)
    if gn > loose:
        raise DomainError(f"refine needs a gradient norm <= {loose:g}, got {gn:.3g}")
    history = [(0, energy.I(u), gn)]
    bad = 0
    it = 0
    while gn > tol and it < max_iter:
        it += 1
        d = energy.newton_step(u, grad)
        t = 1.0
        improved = False
        for _ in range(30):
            cand = u + t * d
            cand[-1] = 0.0
            g_c = energy.gradient(cand)
            gn_c = energy.grad_norm(cand, g_c)
            if gn_c < gn:
                improved = True
                break
            t *= 0.5
        if improved:
            u, grad, gn = cand, g_c, gn_c
            bad = 0
        else:
            bad += 1
            if bad >= 10:
                raise SolverDivergenceError(
                    "refine diverged: no decrease of the gradient norm in 10 consecutive steps",
                    iterate=RadialFunction(mesh, u), history=history,
                )
            # roundoff floor: a full step that does not help is still taken
            # only if it keeps the merit within a factor 2
            if gn_c < 2 * gn:
                u, grad, gn = cand, g_c, gn_c
        history.append((it, energy.I(u), gn))
    small = (u < 0) & (u >= -neg_tol)
    u[small] = 0.0
    return RadialFunction(mesh, u), history


@dataclass
class SolveReport:
    u: RadialFunction
    w: RadialFunction
    energy: float
    J: float
    grad_norm: float
    rho: float
    certificate: RhoCertificate
    lam: float
    initial_max_energy: float
    history: list
    converged: bool
    status: str
    min_u: float
    negative_nodes: int
    outside_hypotheses: bool = False
    residuals: dict = None
    notes: list = field(default_factory=list)

    def to_dict(self):
        return {
            "status": self.status,
            "converged": self.converged,
            "energy": self.energy,
            "J": self.J,
            "grad_norm": self.grad_norm,
            "rho": self.rho,
            "alpha_hat": self.certificate.alpha_hat,
            "certificate": self.certificate.to_dict(),
            "lambda": self.lam,
            "initial_max_energy": self.initial_max_energy,
            "min_u": self.min_u,
            "negative_nodes": self.negative_nodes,
            "outside_theorem_hypotheses": self.outside_hypotheses,
            "iterations": len(self.history) - 1,
            "residuals": self.residuals,
            "notes": list(self.notes),
        }


def solve(energy, u0=None, P=21, rho=None, samples=64, seed=0, deform_tol=1e-3,
          deform_max_iter=5000, tol=1e-10, newton_max_iter=100, threads=1):
    """Full mountain-pass pipeline; see the module docstring.

    Raises on endpoint failure, on a non-positive barrier certificate and on
    Newton divergence; returns a report with ``converged=False`` when the
    tolerances are not met.
    """
    mesh = energy.mesh
    if u0 is None:
        u0 = default_u0(mesh)
    lam, v = find_endpoint(energy, u0)
    if rho is None:
        rho = 1e-3 * energy.J(v) / 2.0
    if not energy.J(v) > rho:
        raise DomainError("rho must be below J(v)")
    cert = rho_certificate(energy, rho, samples, seed, threads)
    if not cert.positive:
        raise DomainError(f"barrier certificate refused: alpha_hat = {cert.alpha_hat:.3g} <= 0")

    state = PathState.straight(energy, v, P)
    initial_max = state.max_energy
    state = deform_path(state, energy, deform_tol, deform_max_iter)
    history = [(k, e, g) for k, e, g in state.history]
    notes = []
    u_star = RadialFunction(mesh, state.points[state.imax])
    status = state.status
    if state.converged:
        u_star, newton_hist = refine(u_star, energy, tol, newton_max_iter)
        base = history[-1][0]
        history += [(base + k, e, g) for k, e, g in newton_hist[1:]]
        gn = newton_hist[-1][2]
        status = "converged" if gn <= tol else "newton not converged"
    else:
        gn = state.grad_norm
        notes.append("deformation did not reach the Newton threshold")
    u_vals = u_star.values
    w = RadialFunction(mesh, energy.transform.f(u_vals))
    return SolveReport(
        u=u_star, w=w, energy=energy.I(u_vals), J=energy.J(u_vals), grad_norm=gn,
        rho=float(rho), certificate=cert, lam=lam, initial_max_energy=initial_max,
        history=history, converged=status == "converged", status=status,
        min_u=float(np.min(u_vals)), negative_nodes=int(np.sum(u_vals < -1e-12)),
        notes=notes,
    )
