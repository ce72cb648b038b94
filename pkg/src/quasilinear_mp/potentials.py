"""Radial potentials given as small expressions in ``r``.

Grammar: numbers, ``r``, ``+ - * /``, powers ``^`` or ``**``, and the
functions ``exp``, ``min``, ``max``.  Examples: ``"r^-2"``, ``"min(r^3, 1)"``,
``"r^3 * exp(r)"``, ``"exp(-1/r)"``.  Expressions are parsed with :mod:`ast`
into a whitelisted tree, never passed to ``eval``.
"""

import ast
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy import optimize

from .exceptions import DomainError, PotentialOverflowError
from .exponents import INF, Envelope

_BINOPS = {
    ast.Add: np.add,
    ast.Sub: np.subtract,
    ast.Mult: np.multiply,
    ast.Div: np.divide,
    ast.Pow: np.power,
}
_FUNCS = {"exp": (1, np.exp), "min": (2, np.minimum), "max": (2, np.maximum)}


class ExpressionError(ValueError):
    def __init__(self, message, text=None, col=None):
        self.message = message
        self.text = text
        self.col = col
        where = f" at column {col}" if col is not None else ""
        super().__init__(f"{message}{where}" + (f" in {text!r}" if text else ""))


def _compile(node, text):
    col = getattr(node, "col_offset", None)
    col = None if col is None else col + 1
    if isinstance(node, ast.Expression):
        return _compile(node.body, text)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
        return ("const", float(node.value))
    if isinstance(node, ast.Name):
        if node.id == "r":
            return ("r",)
        raise ExpressionError(f"unknown name {node.id!r}", text, col)
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        inner = _compile(node.operand, text)
        return ("neg", inner) if isinstance(node.op, ast.USub) else inner
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        return ("bin", type(node.op).__name__, _compile(node.left, text), _compile(node.right, text))
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _FUNCS:
        arity, _ = _FUNCS[node.func.id]
        if len(node.args) != arity or node.keywords:
            raise ExpressionError(f"{node.func.id} takes {arity} argument(s)", text, col)
        return ("call", node.func.id, *[_compile(a, text) for a in node.args])
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name):
        raise ExpressionError(f"unknown function {node.func.id!r}", text, col)
    raise ExpressionError(f"unsupported syntax {type(node).__name__}", text, col)


def parse_expression(text):
    """Parse ``text`` into an expression tree (nested tuples)."""
    if not isinstance(text, str) or not text.strip():
        raise ExpressionError("empty expression")
    lead = len(text) - len(text.lstrip())
    body = text.strip()
    src = body.replace("^", "**")
    # column in src (1-based) -> column in text
    back = [lead + i + 1 for i, ch in enumerate(body) for _ in range(2 if ch == "^" else 1)]
    back.append(lead + len(body) + 1)

    def orig(col):
        return None if col is None else back[min(max(col, 1), len(back)) - 1]

    try:
        tree = ast.parse(src, mode="eval")
    except SyntaxError as exc:
        raise ExpressionError("syntax error", text, orig(exc.offset)) from None
    try:
        return _compile(tree, text)
    except ExpressionError as exc:
        raise ExpressionError(exc.message, text, orig(exc.col)) from None


_BIN_BY_NAME = {"Add": np.add, "Sub": np.subtract, "Mult": np.multiply, "Div": np.divide, "Pow": np.power}


def evaluate_tree(tree, r):
    kind = tree[0]
    if kind == "r":
        return r
    if kind == "const":
        return np.full_like(r, tree[1])
    if kind == "neg":
        return -evaluate_tree(tree[1], r)
    if kind == "bin":
        return _BIN_BY_NAME[tree[1]](evaluate_tree(tree[2], r), evaluate_tree(tree[3], r))
    if kind == "call":
        _, fn = _FUNCS[tree[1]]
        return fn(*[evaluate_tree(t, r) for t in tree[2:]])
    raise ExpressionError(f"bad tree node {kind!r}")


def _minmax_nodes(tree):
    if tree[0] == "call" and tree[1] in ("min", "max"):
        yield tree
    if tree[0] == "neg":
        yield from _minmax_nodes(tree[1])
    elif tree[0] == "bin":
        yield from _minmax_nodes(tree[2])
        yield from _minmax_nodes(tree[3])
    elif tree[0] == "call":
        for sub in tree[2:]:
            yield from _minmax_nodes(sub)


@dataclass(frozen=True)
class PotentialSpec:
    """A named radial potential with optional declared envelopes.

    ``positive=True`` (for ``K``) requires strictly positive values, otherwise
    values must be nonnegative (``V``).
    """

    expr: str
    name: str = "V"
    positive: bool = False
    envelopes_zero: tuple = field(default_factory=tuple)
    envelopes_infinity: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "_tree", parse_expression(self.expr))
        object.__setattr__(self, "envelopes_zero", tuple(self.envelopes_zero))
        object.__setattr__(self, "envelopes_infinity", tuple(self.envelopes_infinity))

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        with np.errstate(all="ignore"):
            out = evaluate_tree(self._tree, np.atleast_1d(r).astype(float))
        out = np.asarray(out, dtype=float)
        return out.reshape(r.shape) if r.ndim else float(out[0])

    def evaluate(self, r):
        """Evaluate on ``r`` and raise on non-finite or sign-violating values."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        vals = self(r)
        bad = np.flatnonzero(~np.isfinite(vals))
        if bad.size:
            k = int(bad[0])
            raise PotentialOverflowError(self.name, k, float(r[k]), float(vals[k]))
        neg = np.flatnonzero(vals <= 0) if self.positive else np.flatnonzero(vals < 0)
        if neg.size:
            k = int(neg[0])
            need = "positive" if self.positive else "nonnegative"
            raise DomainError(f"{self.name} must be {need}; {self.name}({r[k]:.6g}) = {vals[k]:.6g}")
        return vals

    def on_mesh(self, mesh):
        cache = self.__dict__.setdefault("_mesh_cache", {})
        key = (mesh.N, mesh.r_min, mesh.r_max, mesh.n)
        if key not in cache:
            vals = self.evaluate(mesh.r)
            vals.setflags(write=False)
            cache[key] = vals
        return cache[key]

    def on_quad(self, mesh):
        """Values at the per-cell quadrature points of ``mesh``."""
        cache = self.__dict__.setdefault("_quad_cache", {})
        key = (mesh.N, mesh.r_min, mesh.r_max, mesh.n)
        if key not in cache:
            vals = self.evaluate(mesh.qr.ravel()).reshape(mesh.qr.shape)
            vals.setflags(write=False)
            cache[key] = vals
        return cache[key]

    def is_zero(self):
        return self._tree == ("const", 0.0)

    def kinks(self, r):
        """Radii in ``[r[0], r[-1]]`` where a ``min``/``max`` switches branch.

        These are the only places where an expression of the grammar can fail
        to be smooth on ``r > 0``.  ``r`` is an increasing sample grid; each
        sign change of the branch difference is refined by ``brentq``.
        """
        r = np.asarray(r, dtype=float)
        found = []
        for node in _minmax_nodes(self._tree):
            a, b = node[2], node[3]

            def diff(x, a=a, b=b):
                with np.errstate(all="ignore"):
                    x = np.atleast_1d(np.asarray(x, dtype=float))
                    return evaluate_tree(a, x) - evaluate_tree(b, x)

            d = diff(r)
            ok = np.isfinite(d)
            sign = np.sign(d)
            for k in np.flatnonzero(ok[:-1] & ok[1:] & (sign[:-1] * sign[1:] < 0)):
                found.append(optimize.brentq(lambda x: float(diff(x)[0]), r[k], r[k + 1], xtol=1e-14))
            found.extend(r[ok & (d == 0)].tolist())
        return np.unique(np.array(found, dtype=float))

    def to_dict(self):
        return {
            "expr": self.expr,
            "envelopes_zero": [e.to_dict() for e in self.envelopes_zero],
            "envelopes_infinity": [e.to_dict() for e in self.envelopes_infinity],
        }


def hypothesis_H_check(V, r_low=1e-12, n=2001):
    """Sampled ``sup V(r) r^2`` on ``(0, 1)``.

    Returns ``(sup, ok)`` where ``ok`` means the sampled product does not keep
    growing toward the origin (innermost decade within 10x of the rest).
    """
    r = np.geomspace(r_low, 1.0, n)
    with np.errstate(all="ignore"):
        prod = V(r) * r * r
    if not np.all(np.isfinite(prod)):
        return math.inf, False
    inner = prod[r < 10 * r_low]
    rest = prod[r >= 10 * r_low]
    sup = float(np.max(prod))
    ok = float(np.max(inner)) <= 10.0 * max(float(np.max(rest)), 1e-300) or float(np.max(inner)) == 0.0
    return sup, bool(ok)


def envelope_ratio(K, V, env, side, n=401):
    """Sampled ``K / (r^alpha V^beta)`` on ``(0, R1)`` or ``(R2, 1e6 R2)``.

    Computed in logs so that ``r^50`` or ``exp(2 r)`` do not over- or
    underflow; samples where ``K`` or ``V`` is not representable are dropped.
    """
    if side == "zero":
        r = np.geomspace(env.radius * 1e-8, env.radius, n)
    else:
        r = np.geomspace(env.radius, env.radius * 1e6, n)
    alpha = env.alpha
    with np.errstate(all="ignore"):
        kv = K(r)
        vv = V(r)
        keep = np.isfinite(kv) & np.isfinite(vv)
        # alpha = inf claims decay faster than every power; probe with r^50
        a = 50.0 if alpha == INF else float(alpha)
        b = float(env.beta)
        log_ratio = np.log(kv) - a * np.log(r) - (b * np.log(vv) if b else 0.0)
        ratio = np.exp(log_ratio)
    return r[keep], ratio[keep]


def envelope_check(K, V, env, side, n=401):
    """Sampled check that ``K <= C r^alpha V^beta`` near the given end.

    Returns ``(sup_ratio, ok)``; ``ok`` needs a finite sup that does not keep
    growing toward the end point (outer decade within 10x of the rest).
    """
    r, ratio = envelope_ratio(K, V, env, side, n)
    m = r.size
    if m < 16:
        return math.nan, False
    ratio = np.where(np.isnan(ratio), np.inf, ratio)
    if not np.all(np.isfinite(ratio)):
        return math.inf, False
    cut = m // 8
    tail = ratio[:cut] if side == "zero" else ratio[-cut:]
    body = ratio[cut:] if side == "zero" else ratio[:-cut]
    sup = float(np.max(ratio))
    ok = float(np.max(tail)) <= 10.0 * max(float(np.max(body)), 1e-300) or float(np.max(tail)) == 0.0
    return sup, bool(ok)


def suggest_envelopes(K, V, side, betas=(0, Fraction(1, 2), 1), radius=1.0, max_den=12):
    """Propose ``(alpha, beta)`` envelopes from the log-log slope of ``K / V^beta``.

    The slope is measured over two decades next to the end point and rounded
    to a fraction with denominator at most ``max_den``.  A slope steeper than
    50 at the origin means ``K`` vanishes faster than any power and yields
    ``alpha = inf``; such slopes at infinity are skipped.  Suggestions are
    candidates for the user to confirm, not proofs.
    """
    if side == "zero":
        r = np.array([radius * 1e-6, radius * 1e-4])
    else:
        r = np.array([radius * 10.0, radius * 1e3])
    out = []
    for beta in betas:
        beta = Fraction(beta)
        with np.errstate(all="ignore"):
            vals = K(r) / V(r) ** float(beta)
            slope = float(np.diff(np.log(vals))[0] / np.diff(np.log(r))[0])
        if np.isnan(slope):
            if side == "zero" and np.all(K(r) >= 0) and K(r)[0] == 0:
                out.append(Envelope(INF, beta, radius))
            continue
        if abs(slope) > 50:
            if side == "zero" and slope > 0:
                out.append(Envelope(INF, beta, radius))
            continue
        alpha = Fraction(slope).limit_denominator(max_den)
        out.append(Envelope(alpha, beta, radius))
    return out
