"""Model nonlinearities ``g`` and their primitives ``G(t) = int_0^t g``.

Kinds (for ``t >= 0``, with ``q1 <= q2``):

* ``min_power``:   ``min(t^(q1-1), t^(q2-1))``
* ``ratio_power``: ``t^(q2-1) / (1 + t^(q2-q1))``
* ``single_power``: ``t^(q-1)``
* ``zero``: ``g = 0``, a degenerate kind used to probe the solver.

Negative arguments give 0 when ``truncated_negative`` is set (the default),
otherwise the odd extension.
"""

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .exceptions import DomainError
from .exponents import as_rational, fmt

KINDS = ("min_power", "ratio_power", "single_power", "zero")

# knots 2^(j/4) for the cumulative table of the ratio_power primitive
_KNOT_LO, _KNOT_HI, _KNOT_PER_OCTAVE = -60, 60, 4
_GL_X, _GL_W = np.polynomial.legendre.leggauss(20)


@dataclass(frozen=True)
class NonlinearitySpec:
    kind: str
    q1: Fraction = Fraction(0)
    q2: Fraction = Fraction(0)
    theta: Fraction = None
    truncated_negative: bool = True
    strict: bool = True
    notes: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown nonlinearity kind {self.kind!r}; expected one of {KINDS}")
        q1, q2 = as_rational(self.q1), as_rational(self.q2)
        notes = list(self.notes)
        if self.kind == "single_power":
            q2 = q1
        if q1 > q2:
            q1, q2 = q2, q1
            notes.append("q1 > q2 given; swapped so that q1 <= q2")
        theta = self.theta
        if theta is None and self.kind != "zero":
            theta = q1 / 2 if self.kind == "ratio_power" else min(q1, q2) / 2
        theta = None if theta is None else as_rational(theta)
        object.__setattr__(self, "q1", q1)
        object.__setattr__(self, "q2", q2)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "notes", tuple(notes))
        if self.kind != "zero":
            if self.strict:
                if not q1 > 2:
                    raise DomainError(f"q1 must exceed 2, got {fmt(q1)}")
                if not theta > 2:
                    raise DomainError(f"theta must exceed 2, got {fmt(theta)}")
                if not 2 * theta <= q1:
                    raise DomainError(f"need 2*theta <= q1, got theta={fmt(theta)}, q1={fmt(q1)}")
            elif not q1 > 1:
                raise DomainError(f"q1 must exceed 1, got {fmt(q1)}")
        object.__setattr__(self, "_p1", float(q1))
        object.__setattr__(self, "_p2", float(q2))
        if self.kind == "ratio_power":
            object.__setattr__(self, "_table", self._build_table())

    @classmethod
    def min_power(cls, q1, q2, theta=None, **kw):
        return cls("min_power", q1, q2, theta, **kw)

    @classmethod
    def ratio_power(cls, q1, q2, theta=None, **kw):
        return cls("ratio_power", q1, q2, theta, **kw)

    @classmethod
    def single_power(cls, q, theta=None, **kw):
        return cls("single_power", q, q, theta, **kw)

    @classmethod
    def zero(cls):
        return cls("zero")

    def to_dict(self):
        out = {"kind": self.kind}
        if self.kind != "zero":
            out.update(q1=fmt(self.q1), q2=fmt(self.q2), theta=fmt(self.theta))
        out["truncated_negative"] = self.truncated_negative
        return out

    # evaluation on t >= 0; the sign handling is shared

    def _g_pos(self, a):
        p1, p2 = self._p1, self._p2
        if self.kind == "zero":
            return np.zeros_like(a)
        if self.kind == "single_power":
            return a ** (p1 - 1)
        if self.kind == "min_power":
            return np.where(a <= 1.0, a ** (p2 - 1), a ** (p1 - 1))
        return a ** (p2 - 1) / (1.0 + a ** (p2 - p1))

    def _dg_pos(self, a):
        p1, p2 = self._p1, self._p2
        if self.kind == "zero":
            return np.zeros_like(a)
        if self.kind == "single_power":
            return (p1 - 1) * a ** (p1 - 2)
        if self.kind == "min_power":
            return np.where(a <= 1.0, (p2 - 1) * a ** (p2 - 2), (p1 - 1) * a ** (p1 - 2))
        d = p2 - p1
        ad = a ** d
        return a ** (p2 - 2) * ((p2 - 1) + (p1 - 1) * ad) / (1.0 + ad) ** 2

    def _G_pos(self, a):
        p1, p2 = self._p1, self._p2
        if self.kind == "zero":
            return np.zeros_like(a)
        if self.kind == "single_power":
            return a ** p1 / p1
        if self.kind == "min_power":
            return np.where(a <= 1.0, a ** p2 / p2, 1.0 / p2 + (a ** p1 - 1.0) / p1)
        return self._ratio_primitive(a)

    def _signed(self, t, pos_fn, odd):
        t = np.asarray(t, dtype=float)
        a = np.abs(t)
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            val = pos_fn(a)
        if self.truncated_negative:
            val = np.where(t < 0, 0.0, val)
        elif odd:
            val = np.where(t < 0, -val, val)
        return float(val) if np.ndim(t) == 0 else val

    def g(self, t):
        return self._signed(t, self._g_pos, odd=True)

    def G(self, t):
        return self._signed(t, self._G_pos, odd=False)

    def g_prime(self, t):
        """Derivative of ``g`` (one-sided at the kink of ``min_power``)."""
        t = np.asarray(t, dtype=float)
        a = np.abs(t)
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            val = np.where(a == 0, 0.0, self._dg_pos(np.where(a == 0, 1.0, a)))
        if self.truncated_negative:
            val = np.where(t < 0, 0.0, val)
        return float(val) if np.ndim(t) == 0 else val

    # ratio_power primitive: cumulative Gauss-Legendre table on log knots

    def _gl_segment(self, lo, hi):
        """Integral of ``g`` over ``[lo, hi]`` by 20-point Gauss-Legendre in ``log s``."""
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        llo, lhi = np.log(lo), np.log(hi)
        half = 0.5 * (lhi - llo)
        mid = 0.5 * (lhi + llo)
        s = np.exp(mid[..., None] + half[..., None] * _GL_X)
        return np.sum(_GL_W * self._g_pos(s) * s, axis=-1) * half

    def _build_table(self):
        j = np.arange(_KNOT_LO * _KNOT_PER_OCTAVE, _KNOT_HI * _KNOT_PER_OCTAVE + 1)
        knots = 2.0 ** (j / _KNOT_PER_OCTAVE)
        p2 = self._p2
        seg = self._gl_segment(knots[:-1], knots[1:])
        # below the first knot g(s) = s^(q2-1) (1 + O(s^(q2-q1)))
        base = knots[0] ** p2 / p2
        cum = np.concatenate([[base], base + np.cumsum(seg)])
        knots.setflags(write=False)
        cum.setflags(write=False)
        return knots, cum

    def _ratio_primitive(self, a):
        knots, cum = self._table
        shape = np.shape(a)
        a = np.atleast_1d(np.asarray(a, dtype=float))
        out = np.empty_like(a)
        small = a <= knots[0]
        out[small] = a[small] ** self._p2 / self._p2
        big = ~small
        if np.any(big):
            ab = a[big]
            idx = np.clip(np.searchsorted(knots, ab, side="right") - 1, 0, len(knots) - 1)
            lo = knots[idx]
            extra = np.where(ab > lo, self._gl_segment(lo, np.maximum(ab, lo)), 0.0)
            out[big] = cum[idx] + extra
        return out.reshape(shape)

    # sampled hypothesis checks

    def g1_margin(self, t):
        """``min_t (g(t) t - 2 theta G(t))`` and ``min_t G(t)``: both must be >= 0."""
        t = np.asarray(t, dtype=float)
        th = float(self.theta) if self.theta is not None else 0.0
        gt = self.g(t) * t
        G = self.G(t)
        scale = np.maximum(np.abs(gt), 1e-300)
        return float(np.min((gt - 2 * th * G) / scale)), float(np.min(G))

    def growth_constant(self, t):
        """Sampled ``sup |g(t)| / min(|t|^(q1-1), |t|^(q2-1))`` over ``t != 0``."""
        a = np.abs(np.asarray(t, dtype=float))
        a = a[a > 0]
        bound = np.minimum(a ** (self._p1 - 1), a ** (self._p2 - 1))
        return float(np.max(np.abs(self._g_pos(a)) / bound))
