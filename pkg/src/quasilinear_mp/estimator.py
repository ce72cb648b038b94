"""scikit-learn style wrapper around the mountain-pass solver.

``fit`` ignores ``X`` and ``y``: the problem is fully specified by the
hyperparameters.  ``predict`` maps radii to the fitted dual profile ``u``
and ``transform`` to the physical profile ``w = f(u)``.
"""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .dual_transform import DualTransform
from .energy import DiscreteEnergy
from .mesh import RadialMesh
from .mountain_pass import solve
from .nonlinearity import NonlinearitySpec
from .potentials import PotentialSpec


class GroundStateSolver(BaseEstimator):
    """Nonnegative nontrivial radial solution by the mountain-pass method.

    Parameters
    ----------
    V, K : str
        Potentials in the expression grammar of :mod:`.potentials`.
    kind : str
        Nonlinearity kind (``single_power``, ``min_power``, ``ratio_power``).
    q1, q2 : float, str or Fraction
        Exponents; ``q2`` defaults to ``q1``.
    theta : optional
    N, r_min, r_max, n_nodes : mesh parameters.
    P, rho, samples, seed, deform_tol, deform_max_iter, tol, threads :
        solver parameters, see :func:`.mountain_pass.solve`.

    Attributes
    ----------
    u_, w_ : RadialFunction
    energy_ : float
    grad_norm_ : float
    report_ : SolveReport
    mesh_ : RadialMesh
    """

    def __init__(self, V="r^-2", K="min(r^3, 1)", kind="single_power", q1=8, q2=None, theta=None,
                 N=3, r_min=1e-6, r_max=1e3, n_nodes=2000, P=21, rho=None, samples=64, seed=0,
                 deform_tol=1e-3, deform_max_iter=5000, tol=1e-10, threads=1):
        self.V = V
        self.K = K
        self.kind = kind
        self.q1 = q1
        self.q2 = q2
        self.theta = theta
        self.N = N
        self.r_min = r_min
        self.r_max = r_max
        self.n_nodes = n_nodes
        self.P = P
        self.rho = rho
        self.samples = samples
        self.seed = seed
        self.deform_tol = deform_tol
        self.deform_max_iter = deform_max_iter
        self.tol = tol
        self.threads = threads

    def _energy(self):
        mesh = RadialMesh(self.N, self.r_min, self.r_max, self.n_nodes)
        V = PotentialSpec(self.V, "V")
        K = PotentialSpec(self.K, "K", positive=True)
        q2 = self.q1 if self.q2 is None else self.q2
        g = NonlinearitySpec(self.kind, self.q1, q2, self.theta)
        return DiscreteEnergy(mesh, V, K, g, DualTransform())

    def fit(self, X=None, y=None):
        energy = self._energy()
        report = solve(
            energy, P=self.P, rho=self.rho, samples=self.samples, seed=self.seed,
            deform_tol=self.deform_tol, deform_max_iter=self.deform_max_iter,
            tol=self.tol, threads=self.threads,
        )
        self.mesh_ = energy.mesh
        self.energy_model_ = energy
        self.report_ = report
        self.u_ = report.u
        self.w_ = report.w
        self.energy_ = report.energy
        self.grad_norm_ = report.grad_norm
        self.converged_ = report.converged
        return self

    def _radii(self, X):
        X = check_array(X, ensure_2d=False, dtype=float)
        if X.ndim == 2:
            if X.shape[1] != 1:
                raise ValueError(f"expected a single column of radii, got shape {X.shape}")
            X = X[:, 0]
        if np.any(X <= 0):
            raise ValueError("radii must be positive")
        return X

    def predict(self, X):
        """``u`` at the radii ``X`` (shape ``(n,)`` or ``(n, 1)``)."""
        check_is_fitted(self, "u_")
        return self.u_(self._radii(X))

    def transform(self, X):
        """``w = f(u)`` at the radii ``X``."""
        check_is_fitted(self, "u_")
        return self.energy_model_.transform.f(self.predict(X))

    def score(self, X=None, y=None):
        """Negative gradient norm of the fitted critical point (higher is better)."""
        check_is_fitted(self, "u_")
        return -float(self.grad_norm_)
