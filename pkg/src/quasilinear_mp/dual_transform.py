"""Change of variables ``w = f(u)`` with ``f' = 1/sqrt(1 + 2 f^2)``, ``f(0) = 0``.

The inverse of ``f`` has the closed form

    F(s) = s sqrt(1 + 2 s^2) / 2 + asinh(sqrt(2) s) / (2 sqrt(2)),

so ``f`` is evaluated by Newton's method on ``F(s) = t``.  ``F`` is odd,
increasing and convex on ``s >= 0``; starting from the upper bound
``min(|t|, 2**0.25 * sqrt(|t|))`` the iterates decrease monotonically to the
root, so no line search is needed.  A bracket is kept anyway and the iterate is
clipped into it.
"""

import math

import numpy as np

from .exceptions import DomainError

SQRT2 = math.sqrt(2.0)
FOURTH_ROOT_2 = 2.0 ** 0.25


def _checked(t, name="t"):
    arr = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} must be finite")
    return arr


def _out(arr, like):
    if np.ndim(like) == 0:
        return float(arr)
    return arr


def sweep_points(n=10_000, t_max=1e6, t_min=1e-6):
    """Log-spaced positive sample points used to estimate the constants of ``f``."""
    return np.geomspace(t_min, t_max, n)


class DualTransform:
    """Evaluator for ``f``, its derivatives and its inverse.

    Parameters
    ----------
    tol : float
        Mixed absolute/relative tolerance of the Newton inversion,
        ``|f_computed - f| <= tol * (1 + |t|)``.
    max_iter : int
        Cap on Newton iterations.

    The object holds no mutable state, so one instance can be shared freely
    between threads.
    """

    def __init__(self, tol=1e-12, max_iter=100):
        self.tol = float(tol)
        self.max_iter = int(max_iter)

    def __repr__(self):
        return f"DualTransform(tol={self.tol!r})"

    @staticmethod
    def _F(s):
        return 0.5 * s * np.hypot(1.0, SQRT2 * s) + np.arcsinh(SQRT2 * s) / (2.0 * SQRT2)

    def f_inverse(self, w):
        """Closed-form ``f^{-1}(w)``."""
        w_arr = _checked(w, "w")
        return _out(self._F(w_arr), w)

    def f(self, t):
        t_arr = _checked(t)
        a = np.abs(t_arr)
        hi = np.minimum(a, FOURTH_ROOT_2 * np.sqrt(a))
        lo = np.zeros_like(a)
        s = hi.copy()
        for _ in range(self.max_iter):
            resid = self._F(s) - a
            # F convex on s >= 0: the sign of the residual tightens the bracket
            above = resid > 0
            hi = np.where(above, s, hi)
            lo = np.where(above, lo, s)
            step = resid / np.hypot(1.0, SQRT2 * s)
            s_new = s - step
            bad = (s_new < lo) | (s_new > hi)
            s_new = np.where(bad, 0.5 * (lo + hi), s_new)
            done = np.abs(s_new - s) <= 0.01 * self.tol * (1.0 + a)
            s = s_new
            if np.all(done):
                break
        return _out(np.copysign(s, t_arr), t)

    def f_prime(self, t):
        fv = np.asarray(self.f(t))
        return _out(1.0 / np.hypot(1.0, SQRT2 * fv), t)

    def f_second(self, t):
        """``f''(t) = -2 f f'^4``."""
        fv = np.asarray(self.f(t))
        fp = 1.0 / np.hypot(1.0, SQRT2 * fv)
        return _out(-2.0 * fv * fp ** 4, t)

    def evaluate(self, t):
        """Return ``(f, f')`` in one inversion."""
        fv = np.asarray(self.f(t))
        fp = 1.0 / np.hypot(1.0, SQRT2 * fv)
        return fv, fp

    # constants of the growth estimates; computed on a sweep, not proven optimal

    def lower_bound_constant(self, n=10_000, t_max=1e6):
        """Largest ``C1`` with ``|f(t)| >= C1 |t|`` on ``|t| <= 1`` and
        ``|f(t)| >= C1 sqrt|t|`` on ``|t| >= 1``, over a log sweep."""
        t = sweep_points(n, t_max)
        small = t[t <= 1.0]
        large = t[t >= 1.0]
        c_small = np.min(self.f(small) / small)
        c_large = np.min(self.f(large) / np.sqrt(large))
        return float(min(self.f(1.0), c_small, c_large))

    def linear_quadratic_constants(self, n=10_000, t_max=1e6):
        """Constants ``(c1, c2)`` with ``|t| <= c1 |f(t)| + c2 f(t)^2``.

        ``c1`` is fixed to 1 and ``c2`` is the sweep supremum of
        ``(|t| - |f(t)|) / f(t)^2``.
        """
        t = sweep_points(n, t_max)
        fv = self.f(t)
        c2 = np.max((t - fv) / fv ** 2)
        return 1.0, float(max(c2, 0.0))

    def doubling_constant(self, n=10_000, t_max=1e6):
        """Sweep supremum of ``f(2t)^2 / f(t)^2``."""
        t = sweep_points(n, t_max)
        return float(np.max((self.f(2.0 * t) / self.f(t)) ** 2))


DEFAULT_TRANSFORM = DualTransform()
