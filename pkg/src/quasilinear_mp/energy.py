"""Discrete dual functional

    I(u) = 1/2 int |grad u|^2 + 1/2 int V f(u)^2 - int K G(f(u))

and its split ``J = I + int K G(f(u))``.  Gradient terms are exact for
piecewise-linear ``u``; the potential terms use the per-cell Gauss rule of the
mesh.  The gradient is the exact derivative of this discrete functional and
the Hessian is tridiagonal.
"""

import math

import numpy as np
from scipy import linalg

from .dual_transform import DEFAULT_TRANSFORM
from .mesh import RadialFunction, grad_seminorm_sq, quad_weight


def _values(u):
    return u.values if isinstance(u, RadialFunction) else np.asarray(u, dtype=float)


class DiscreteEnergy:
    """``I``, ``J``, gradient and Hessian on a fixed mesh.

    Parameters
    ----------
    mesh : RadialMesh
    V, K : PotentialSpec or callable
    g : NonlinearitySpec
    transform : DualTransform
    """

    def __init__(self, mesh, V, K, g, transform=DEFAULT_TRANSFORM):
        self.mesh = mesh
        self.V = V
        self.K = K
        self.g = g
        self.transform = transform
        self.Vq = mesh.qw * quad_weight(V, mesh)
        self.Kq = mesh.qw * quad_weight(K, mesh)

    def function(self, values):
        return RadialFunction(self.mesh, values)

    def parts(self, u):
        """Return ``(grad_term, V_term, K_term)`` with ``I = grad + V - K``."""
        u = _values(u)
        fv = self.transform.f(self.mesh.at_quad(u))
        grad = 0.5 * grad_seminorm_sq(RadialFunction(self.mesh, u))
        vterm = 0.5 * float(np.sum(self.Vq * fv * fv))
        kterm = float(np.sum(self.Kq * self.g.G(fv)))
        return grad, vterm, kterm

    def I(self, u):
        grad, vterm, kterm = self.parts(u)
        return grad + vterm - kterm

    def J(self, u):
        grad, vterm, _ = self.parts(u)
        return grad + vterm

    def gradient(self, u):
        """Nodal co-vector ``dI/du_k``; zero at the Dirichlet node."""
        u = _values(u)
        fv, fp = self.transform.evaluate(self.mesh.at_quad(u))
        dens = self.Vq * fv * fp - self.Kq * self.g.g(fv) * fp
        out = self.mesh.stiffness_apply(u) + self.mesh.quad_to_nodes(dens)
        out[-1] = 0.0
        return out

    def gradient_J(self, u):
        u = _values(u)
        fv, fp = self.transform.evaluate(self.mesh.at_quad(u))
        out = self.mesh.stiffness_apply(u) + self.mesh.quad_to_nodes(self.Vq * fv * fp)
        out[-1] = 0.0
        return out

    def grad_norm(self, u, grad=None):
        """Dual norm ``sqrt(g^T A^{-1} g)`` of the gradient."""
        if grad is None:
            grad = self.gradient(u)
        return self.mesh.dual_norm(grad)

    def hessian_banded(self, u):
        """Tridiagonal Hessian on the free nodes as ``(upper, diag, lower)`` rows
        for :func:`scipy.linalg.solve_banded`."""
        u = _values(u)
        mesh = self.mesh
        fv, fp = self.transform.evaluate(mesh.at_quad(u))
        fp2 = fp * fp
        fp4 = fp2 * fp2
        gv = self.g.g(fv)
        dg = self.g.g_prime(fv)
        # (f f')' = f'^4 and (g(f) f')' = g'(f) f'^2 - 2 g(f) f f'^4
        hq = self.Vq * fp4 - self.Kq * (dg * fp2 - 2.0 * gv * fv * fp4)
        s = mesh.qs
        left = np.sum(hq * (1.0 - s) ** 2, axis=1)
        right = np.sum(hq * s ** 2, axis=1)
        off = np.sum(hq * s * (1.0 - s), axis=1) - mesh._stiff_cell
        diag = np.zeros(mesh.n)
        diag[:-1] += left + mesh._stiff_cell
        diag[1:] += right + mesh._stiff_cell
        n = mesh.n - 1
        ab = np.zeros((3, n))
        ab[0, 1:] = off[: n - 1]
        ab[1] = diag[:n]
        ab[2, :-1] = off[: n - 1]
        return ab

    def hessian_dense(self, u):
        """Dense Hessian on the free nodes; for tests only."""
        ab = self.hessian_banded(u)
        return np.diag(ab[1]) + np.diag(ab[0, 1:], 1) + np.diag(ab[2, :-1], -1)

    def newton_step(self, u, grad=None):
        """Solve ``H d = -grad`` on the free nodes."""
        if grad is None:
            grad = self.gradient(u)
        d = np.zeros(self.mesh.n)
        d[:-1] = linalg.solve_banded((1, 1), self.hessian_banded(u), -grad[:-1])
        return d

    def sobolev_gradient(self, grad):
        """Riesz representative ``A^{-1} grad`` of the gradient."""
        return self.mesh.solve_stiffness(grad)



def energy_norm(mesh, u):
    """Gradient seminorm of nodal values."""
    return math.sqrt(grad_seminorm_sq(RadialFunction(mesh, _values(u))))
