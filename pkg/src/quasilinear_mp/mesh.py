"""Geometric radial mesh, piecewise-linear radial functions and their norms.

Integrals are taken against ``omega * r^(N-1) dr`` on ``[r_min, r_max]`` where
``omega`` is the area of the unit sphere in R^N, so they equal integrals over
the annulus in R^N.  Gradient terms are exact for piecewise-linear functions;
terms of the form ``W(r) F(u)`` use 3-point Gauss-Legendre on every cell
applied to the piecewise-linear ``u``.
"""

import csv
import math

import numpy as np
from scipy import linalg, optimize

from .dual_transform import DEFAULT_TRANSFORM
from .exceptions import DomainError, NotInSpaceError


QUAD_ORDER = 3


def sphere_area(N):
    """Surface area of the unit sphere in R^N."""
    return 2.0 * math.pi ** (N / 2.0) / math.gamma(N / 2.0)


class RadialMesh:
    """Geometric grid ``r_k = r_min * ratio**k`` from ``r_min`` to ``r_max``.

    Immutable after construction.
    """

    def __init__(self, N=3, r_min=1e-6, r_max=1e3, n=2000):
        if int(N) != N or N < 3:
            raise DomainError(f"N must be an integer >= 3, got {N!r}")
        if not (0 < r_min < r_max) or not math.isfinite(r_max):
            raise DomainError("need 0 < r_min < r_max < inf")
        if int(n) != n or n < 4:
            raise DomainError("need at least 4 nodes")
        self.N = int(N)
        self.r_min = float(r_min)
        self.r_max = float(r_max)
        self.n = int(n)
        self.omega = sphere_area(self.N)
        self.log_step = math.log(self.r_max / self.r_min) / (self.n - 1)
        self.ratio = math.exp(self.log_step)

        r = self.r_min * np.exp(self.log_step * np.arange(self.n))
        r[-1] = self.r_max
        self.r = r
        self.h = np.diff(r)
        # omega * int_cell r^(N-1) dr, written to avoid cancellation on thin cells
        N_ = self.N
        self.cell_moment = self.omega * r[:-1] ** N_ * np.expm1(N_ * np.log1p(self.h / r[:-1])) / N_

        # lumped weights m_k = omega * int phi_k r^(N-1) dr, exact by Gauss-Legendre
        x, w = np.polynomial.legendre.leggauss(N_ // 2 + 2)
        s = 0.5 * (x + 1.0)
        w = 0.5 * w
        pts = r[:-1, None] + self.h[:, None] * s[None, :]
        dens = self.omega * self.h[:, None] * pts ** (N_ - 1) * w[None, :]
        left = np.sum(dens * (1.0 - s)[None, :], axis=1)
        right = np.sum(dens * s[None, :], axis=1)
        m = np.zeros(self.n)
        m[:-1] += left
        m[1:] += right
        self.lumped = m
        self.lumped.setflags(write=False)
        self.r.setflags(write=False)

        self._stiff_cell = self.cell_moment / self.h ** 2

        # per-cell Gauss-Legendre rule: points (n-1, 3), weights incl. omega r^(N-1)
        qr, qw, qs = self.gauss_points(QUAD_ORDER)
        self.qr, self.qw, self.qs = qr, qw, qs
        for arr in (qr, qw, qs):
            arr.setflags(write=False)

    def __repr__(self):
        return f"RadialMesh(N={self.N}, r_min={self.r_min:g}, r_max={self.r_max:g}, n={self.n})"

    def __eq__(self, other):
        return isinstance(other, RadialMesh) and self.params() == other.params()

    def __hash__(self):
        return hash(tuple(self.params().items()))

    def params(self):
        return {"N": self.N, "r_min": self.r_min, "r_max": self.r_max, "n": self.n}

    def refine(self):
        """Mesh with the log step halved; contains every node of ``self``."""
        return RadialMesh(self.N, self.r_min, self.r_max, 2 * self.n - 1)

    def volume(self):
        """``omega * int r^(N-1) dr`` over the mesh interval."""
        return float(np.sum(self.lumped))

    # linear algebra of the stiffness form a(u, v) = omega int u' v' r^(N-1) dr

    def stiffness_apply(self, u):
        u = np.asarray(u, dtype=float)
        flux = self._stiff_cell * np.diff(u)
        out = np.zeros(self.n)
        out[:-1] -= flux
        out[1:] += flux
        return out

    def stiffness_banded(self, extra_diag=None):
        """Upper banded form (for ``solveh_banded``) of the stiffness matrix on
        the free nodes ``0..n-2``, optionally plus a diagonal."""
        k = self._stiff_cell
        diag = np.zeros(self.n)
        diag[:-1] += k
        diag[1:] += k
        diag = diag[:-1].copy()
        if extra_diag is not None:
            diag += np.asarray(extra_diag)[: self.n - 1]
        ab = np.zeros((2, self.n - 1))
        ab[0, 1:] = -k[:-1]
        ab[1] = diag
        return ab

    def solve_stiffness(self, rhs):
        """Solve ``A x = rhs`` on the free nodes; the Dirichlet node gets 0."""
        rhs = np.asarray(rhs, dtype=float)
        x = np.zeros(self.n)
        x[:-1] = linalg.solveh_banded(self.stiffness_banded(), rhs[:-1])
        return x

    def dual_norm(self, g):
        """``sqrt(g^T A^{-1} g)``: norm of a nodal co-vector in the dual of the
        gradient seminorm."""
        x = self.solve_stiffness(g)
        return math.sqrt(max(float(np.dot(g[:-1], x[:-1])), 0.0))

    # quadrature

    def integrate_nodal(self, values):
        """Lumped rule ``sum_k m_k values_k``."""
        return float(np.dot(self.lumped, values))

    def at_quad(self, values):
        """Piecewise-linear interpolant of nodal ``values`` at the quadrature points."""
        v = np.asarray(values, dtype=float)
        return v[:-1, None] * (1.0 - self.qs)[None, :] + v[1:, None] * self.qs[None, :]

    def integrate_quad(self, q_values):
        """``sum`` of quadrature weights times values given at the quadrature points."""
        return float(np.sum(self.qw * q_values))

    def quad_to_nodes(self, q_values):
        """Transpose of :meth:`at_quad`: scatter point values onto the nodes."""
        left = np.sum(q_values * (1.0 - self.qs)[None, :], axis=1)
        right = np.sum(q_values * self.qs[None, :], axis=1)
        out = np.zeros(self.n)
        out[:-1] += left
        out[1:] += right
        return out

    def gauss_points(self, order=3):
        """Per-cell Gauss-Legendre points, weights (with ``omega r^(N-1)``) and
        the local coordinate in ``[0, 1]``."""
        x, w = np.polynomial.legendre.leggauss(order)
        s = 0.5 * (x + 1.0)
        pts = self.r[:-1, None] + self.h[:, None] * s[None, :]
        wts = 0.5 * w[None, :] * self.h[:, None] * self.omega * pts ** (self.N - 1)
        return pts, wts, s


class RadialFunction:
    """Nodal values of a piecewise-linear radial function on a mesh.

    The last node carries the Dirichlet datum and is always 0.
    """

    def __init__(self, mesh, values):
        values = np.array(values, dtype=float)
        if values.shape != (mesh.n,):
            raise DomainError(f"expected {mesh.n} nodal values, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise DomainError("nodal values must be finite")
        values[-1] = 0.0
        self.mesh = mesh
        self.values = values

    @classmethod
    def from_callable(cls, mesh, func):
        return cls(mesh, func(mesh.r))

    @classmethod
    def zeros(cls, mesh):
        return cls(mesh, np.zeros(mesh.n))

    def copy(self):
        return RadialFunction(self.mesh, self.values.copy())

    def __mul__(self, c):
        return RadialFunction(self.mesh, self.values * float(c))

    __rmul__ = __mul__

    def __add__(self, other):
        return RadialFunction(self.mesh, self.values + other.values)

    def __sub__(self, other):
        return RadialFunction(self.mesh, self.values - other.values)

    def __neg__(self):
        return RadialFunction(self.mesh, -self.values)

    def __call__(self, r):
        """Piecewise-linear interpolant; 0 outside the mesh on the right,
        constant continuation on the left."""
        r = np.asarray(r, dtype=float)
        return np.interp(r, self.mesh.r, self.values, left=self.values[0], right=0.0)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["r", "value"])
            for r, v in zip(self.mesh.r, self.values):
                writer.writerow([repr(float(r)), repr(float(v))])

    @classmethod
    def from_csv(cls, path, mesh):
        """Read a ``r,value`` CSV; the radii must match ``mesh`` to 1e-9 relative."""
        rs, vs = [], []
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != ["r", "value"]:
                raise ValueError(f"{path}: row 1: expected header 'r,value', got {header!r}")
            for row_no, row in enumerate(reader, start=2):
                try:
                    if len(row) != 2:
                        raise ValueError("expected 2 columns")
                    r, v = float(row[0]), float(row[1])
                    if not (math.isfinite(r) and math.isfinite(v)):
                        raise ValueError("non-finite entry")
                except ValueError as exc:
                    raise ValueError(f"{path}: row {row_no}: {exc}") from None
                rs.append(r)
                vs.append(v)
        rs = np.asarray(rs)
        if rs.shape != mesh.r.shape or not np.allclose(rs, mesh.r, rtol=1e-9, atol=0):
            raise MeshMismatchError(f"{path}: radii do not match {mesh!r}")
        return cls(mesh, vs)


class MeshMismatchError(ValueError):
    pass


def quad_weight(weight, mesh):
    """Values of a weight (PotentialSpec, callable, array at quadrature points
    or scalar) at the quadrature points of ``mesh``."""
    if weight is None:
        return np.ones_like(mesh.qr)
    if hasattr(weight, "on_quad"):
        return weight.on_quad(mesh)
    if callable(weight):
        return np.asarray(weight(mesh.qr), dtype=float)
    arr = np.asarray(weight, dtype=float)
    if arr.shape == ():
        return np.full_like(mesh.qr, float(arr))
    return arr


def grad_seminorm_sq(u):
    mesh = u.mesh
    du = np.diff(u.values)
    return float(np.sum(mesh._stiff_cell * du * du))


def weighted_l2(u, weight, transform=None):
    """``int weight(r) * f(u)^2`` (``u^2`` without transform)."""
    mesh = u.mesh
    wv = quad_weight(weight, mesh)
    uq = mesh.at_quad(u.values)
    vals = uq if transform is None else transform.f(uq)
    return mesh.integrate_quad(wv * vals * vals)


LOG_K_BOUND = 60.0 * math.log(2.0)


def orlicz_modular(u, V, transform=DEFAULT_TRANSFORM, k=1.0):
    """``int V f(k u)^2``."""
    return weighted_l2(u * k, V, transform)


def orlicz_norm(u, V, transform=DEFAULT_TRANSFORM, xatol=1e-10):
    """``inf_k (1 + int V f(k u)^2) / k`` over ``k in [2^-60, 2^60]``.

    The minimization runs in ``log k`` with bounded Brent.  Returns 0 when the
    modular vanishes identically (``u = 0`` or ``V = 0`` on the support).
    """
    mesh = u.mesh
    wv = quad_weight(V, mesh)
    uq = mesh.at_quad(u.values)
    wq = mesh.qw * wv
    if not np.any(wq * uq):
        return 0.0

    def modular(k):
        fv = transform.f(k * uq)
        return float(np.sum(wq * fv * fv))

    if not math.isfinite(modular(1.0)):
        raise NotInSpaceError("not in E: the Orlicz modular is infinite")

    def phi(s):
        return math.exp(-s) * (1.0 + modular(math.exp(s)))

    res = optimize.minimize_scalar(
        phi, bounds=(-LOG_K_BOUND, LOG_K_BOUND), method="bounded",
        options={"xatol": xatol, "maxiter": 500},
    )
    # guard against a local minimum of the bounded search at the right end
    return min(float(res.fun), phi(LOG_K_BOUND))


def e_norm(u, V, transform=DEFAULT_TRANSFORM):
    """``||u|| = ||grad u||_2 + ||u||_o``."""
    return math.sqrt(grad_seminorm_sq(u)) + orlicz_norm(u, V, transform)


def sup_decay_check(u, V=None, transform=DEFAULT_TRANSFORM):
    """Empirical constant ``max_k |u(r_k)| r_k^((N-2)/2) / ||u||``.

    With ``V`` the E-norm is used, otherwise the gradient seminorm (which is
    smaller, so the returned ratio is an upper bound for the E-norm one).
    """
    mesh = u.mesh
    norm = e_norm(u, V, transform) if V is not None else math.sqrt(grad_seminorm_sq(u))
    if not norm > 0:
        raise DomainError("sup_decay_check needs a function of positive norm")
    ratio = np.abs(u.values) * mesh.r ** ((mesh.N - 2) / 2.0)
    return float(np.max(ratio) / norm)
