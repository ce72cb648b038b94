"""Exact exponent arithmetic for the compact-embedding and existence criteria.

Every quantity here is a :class:`fractions.Fraction`, except that an envelope
exponent ``alpha`` may be ``math.inf`` (``K`` vanishes faster than any power,
e.g. ``exp(-1/r)`` at the origin); the derived ``q0*`` is then ``inf`` too.
"""

from dataclasses import dataclass, field
from fractions import Fraction
import math

from .exceptions import DomainError

INF = math.inf


def as_rational(value):
    """Coerce ints, floats, ``Fraction`` and strings like ``"-1/2"`` or ``"inf"``."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("booleans are not exponents")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        if math.isinf(value):
            return value
        if math.isnan(value):
            raise DomainError("exponent is NaN")
        return Fraction(value).limit_denominator(10**6)
    if isinstance(value, str):
        text = value.strip().lower()
        if text in ("inf", "+inf", "infinity", "+infinity"):
            return INF
        if text in ("-inf", "-infinity"):
            return -INF
        return Fraction(text)
    raise TypeError(f"cannot interpret {value!r} as a rational exponent")


def _check_dimension(N):
    if int(N) != N or N < 3:
        raise DomainError(f"dimension N must be an integer >= 3, got {N!r}")
    return int(N)


def _check_beta(beta):
    beta = as_rational(beta)
    if not (0 <= beta <= 1) or isinstance(beta, float):
        raise DomainError(f"beta must lie in [0, 1], got {beta}")
    return beta


def fmt(value):
    """Render a rational (or infinity) as ``"p/q"``, ``"p"`` or ``"inf"``."""
    if isinstance(value, float):
        return "inf" if value > 0 else "-inf"
    return str(value)


@dataclass(frozen=True)
class Envelope:
    """Power bound ``sup K / (r^alpha V^beta) < inf`` near one end of ``(0, inf)``.

    ``radius`` is ``R1`` (bound on ``(0, R1)``) for the origin and ``R2``
    (bound on ``(R2, inf)``) for infinity.
    """

    alpha: Fraction
    beta: Fraction
    radius: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "alpha", as_rational(self.alpha))
        object.__setattr__(self, "beta", _check_beta(self.beta))
        if not self.radius > 0:
            raise DomainError("envelope radius must be positive")

    def to_dict(self):
        return {"alpha": fmt(self.alpha), "beta": fmt(self.beta), "radius": self.radius}


def alpha_star(beta, N):
    beta = _check_beta(beta)
    N = _check_dimension(N)
    first = beta * Fraction(N + 2, 2) - 1 - Fraction(N, 2)
    second = beta * Fraction(3 * N - 2, 2) - N
    return max(first, second)


def q0_star(alpha, beta, N):
    alpha = as_rational(alpha)
    beta = as_rational(beta)
    N = _check_dimension(N)
    if alpha == INF:
        return INF
    return (2 * alpha + 2 * N - beta * (N + 2)) / Fraction(N - 2)


def q_inf_star(alpha, beta, N):
    alpha = as_rational(alpha)
    beta = as_rational(beta)
    N = _check_dimension(N)
    if alpha == INF:
        return INF
    return 2 * (alpha + N - 2 * beta) / Fraction(N - 2)


@dataclass(frozen=True)
class OpenInterval:
    lower: object
    upper: object

    @property
    def empty(self):
        return not self.lower < self.upper

    def __contains__(self, q):
        return self.lower < q < self.upper

    def width(self):
        return 0 if self.empty else self.upper - self.lower

    def to_list(self):
        return None if self.empty else [fmt(self.lower), fmt(self.upper)]

    def __str__(self):
        return "empty" if self.empty else f"({fmt(self.lower)}, {fmt(self.upper)})"


EMPTY = OpenInterval(Fraction(0), Fraction(0))


def _q1_range_single(env, N):
    if not env.alpha > alpha_star(env.beta, N):
        return EMPTY
    return OpenInterval(max(Fraction(1), 2 * env.beta), q0_star(env.alpha, env.beta, N))


def q1_range(env0, N):
    """Open range of ``q1`` with ``S0(q1, R) -> 0`` as ``R -> 0``.

    ``env0`` may be one :class:`Envelope` or a sequence of candidates; with
    several, the widest range wins (ties keep the first).
    """
    envs = [env0] if isinstance(env0, Envelope) else list(env0)
    best = EMPTY
    for env in envs:
        cand = _q1_range_single(env, N)
        if cand.empty:
            continue
        if best.empty or cand.upper - cand.lower > best.upper - best.lower:
            best = cand
    return best


def _best_envelope_zero(env0, N):
    envs = [env0] if isinstance(env0, Envelope) else list(env0)
    best, best_range = envs[0], _q1_range_single(envs[0], N)
    for env in envs[1:]:
        cand = _q1_range_single(env, N)
        if not cand.empty and (best_range.empty or cand.width() > best_range.width()):
            best, best_range = env, cand
    return best


def _q2_bound_single(env, N):
    return max(Fraction(1), 2 * env.beta, q_inf_star(env.alpha, env.beta, N))


def q2_lower_bound(env_inf, N):
    """Strict lower bound for ``q2`` with ``S_inf(q2, R) -> 0`` as ``R -> inf``.

    With several candidate envelopes the smallest bound wins.
    """
    envs = [env_inf] if isinstance(env_inf, Envelope) else list(env_inf)
    return min(_q2_bound_single(env, N) for env in envs)


def _best_envelope_infinity(env_inf, N):
    envs = [env_inf] if isinstance(env_inf, Envelope) else list(env_inf)
    return min(envs, key=lambda env: _q2_bound_single(env, N))


def delta_rate_zero(q1, env0, N, strict=True):
    """Exponent ``delta > 0`` in ``S0(q1, R) <= C R^delta`` for small ``R``.

    ``strict=False`` skips the range check and evaluates the formula anyway.
    """
    q1 = as_rational(q1)
    N = _check_dimension(N)
    if strict and q1 not in q1_range(env0, N):
        raise DomainError(f"q1={fmt(q1)} outside the admissible range {q1_range(env0, N)}")
    a, b = env0.alpha, env0.beta
    if a == INF:
        return INF
    half = Fraction(N - 2, 2)
    if b == 0:
        return half * (q0_star(a, 0, N) - q1)
    if b == 1:
        return a - half * (q1 - 1)
    # 0 < beta < 1, including beta = 1/2 where the second term is a + N/2
    return min(half * (q0_star(a, b, N) - q1), a + N * (1 - b))


def delta_rate_infinity(q2, env_inf, N, strict=True):
    """Exponent ``delta < 0`` in ``S_inf(q2, R) <= C R^delta`` for large ``R``."""
    q2 = as_rational(q2)
    N = _check_dimension(N)
    if strict and not q2 > q2_lower_bound(env_inf, N):
        raise DomainError(
            f"q2={fmt(q2)} must exceed {fmt(q2_lower_bound(env_inf, N))}"
        )
    a, b = env_inf.alpha, env_inf.beta
    qs = q_inf_star(a, b, N)
    if b <= Fraction(1, 2):
        # Holder with 2N/(N+2(1-2b)); the outer power cancels the denominator
        inner = Fraction(N) * (N - 2) * (qs - q2) / (N + 2 * (1 - 2 * b))
        return inner * (N + 2 * (1 - 2 * b)) / (2 * N)
    if b < 1:
        inner = Fraction(N - 2) * (qs - q2) / (2 * (1 - b))
        return inner * (1 - b)
    return (2 * a - (N - 2) * (q2 - 2)) / 2


@dataclass
class Reason:
    code: str
    message: str

    def to_dict(self):
        return {"code": self.code, "message": self.message}


@dataclass
class AdmissibilityReport:
    N: int
    env0: Envelope
    env_inf: Envelope
    q1: Fraction
    q2: Fraction
    theta: Fraction
    alpha_star_0: Fraction
    q0_star: object
    q_inf_star: Fraction
    q1_interval: OpenInterval
    q2_lower: Fraction
    delta_zero: object = None
    delta_infinity: object = None
    reasons: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    @property
    def existence_ok(self):
        return not self.reasons

    @property
    def existence_interval_q1(self):
        """``q1`` range intersected with ``q1 > 4`` (so that some theta > 2 fits)."""
        if self.q1_interval.empty:
            return EMPTY
        return OpenInterval(max(Fraction(4), self.q1_interval.lower), self.q1_interval.upper)

    @property
    def single_power_interval(self):
        """Exponents ``q = q1 = q2`` admissible at both ends with ``q > 4``."""
        if self.q1_interval.empty:
            return EMPTY
        lower = max(Fraction(4), self.q1_interval.lower, self.q2_lower)
        return OpenInterval(lower, self.q1_interval.upper)

    def to_dict(self):
        return {
            "N": self.N,
            "envelope_zero": self.env0.to_dict(),
            "envelope_infinity": self.env_inf.to_dict(),
            "q1": fmt(self.q1),
            "q2": fmt(self.q2),
            "theta": fmt(self.theta),
            "alpha_star_0": fmt(self.alpha_star_0),
            "q0_star": fmt(self.q0_star),
            "q_inf_star": fmt(self.q_inf_star),
            "q1_interval": self.q1_interval.to_list(),
            "q2_lower": fmt(self.q2_lower),
            "q1_existence_interval": self.existence_interval_q1.to_list(),
            "single_power_interval": self.single_power_interval.to_list(),
            "delta_zero": None if self.delta_zero is None else fmt(self.delta_zero),
            "delta_infinity": None if self.delta_infinity is None else fmt(self.delta_infinity),
            "existence_ok": self.existence_ok,
            "reasons": [r.to_dict() for r in self.reasons],
            "notes": list(self.notes),
        }


def existence_check(env0, env_inf, q1, q2, theta=None, N=3):
    """Check the hypotheses of the existence theorem for ``g ~ min(t^(q1-1), t^(q2-1))``.

    ``theta`` defaults to ``min(q1, q2) / 2``, the largest value compatible
    with ``q1, q2 >= 2 theta``.  Failures are collected as reasons; the first
    reason is the first failed hypothesis.
    """
    N = _check_dimension(N)
    q1, q2 = as_rational(q1), as_rational(q2)
    notes = []
    if q1 > q2:
        q1, q2 = q2, q1
        notes.append("q1 > q2 given; swapped so that q1 <= q2")
    theta = Fraction(min(q1, q2), 2) if theta is None else as_rational(theta)
    e0 = _best_envelope_zero(env0, N)
    ei = _best_envelope_infinity(env_inf, N)
    interval = q1_range(e0, N)
    bound = q2_lower_bound(ei, N)
    report = AdmissibilityReport(
        N=N, env0=e0, env_inf=ei, q1=q1, q2=q2, theta=theta,
        alpha_star_0=alpha_star(e0.beta, N),
        q0_star=q0_star(e0.alpha, e0.beta, N),
        q_inf_star=q_inf_star(ei.alpha, ei.beta, N),
        q1_interval=interval, q2_lower=bound, notes=notes,
    )
    reasons = report.reasons
    if interval.empty:
        reasons.append(Reason(
            "alpha0_not_above_alpha_star",
            f"alpha0={fmt(e0.alpha)} must exceed alpha*(beta0)={fmt(report.alpha_star_0)}",
        ))
    elif not q1 > interval.lower:
        reasons.append(Reason("q1_below_range", f"q1 must be > {fmt(interval.lower)} strictly"))
    elif not q1 < interval.upper:
        reasons.append(Reason("q1_above_range", f"q1 must be < {fmt(interval.upper)} strictly"))
    else:
        report.delta_zero = delta_rate_zero(q1, e0, N)
    if not q2 > bound:
        reasons.append(Reason("q2_below_bound", f"q2 must be > {fmt(bound)} strictly"))
    else:
        report.delta_infinity = delta_rate_infinity(q2, ei, N)
    if not theta > 2:
        reasons.append(Reason("theta_not_above_2", "q1 must exceed 4 (theta > 2 with q1 >= 2 theta)"))
    elif not (q1 >= 2 * theta and q2 >= 2 * theta):
        reasons.append(Reason(
            "q_below_2theta", f"q1 and q2 must be >= 2*theta = {fmt(2 * theta)}"
        ))
    return report
