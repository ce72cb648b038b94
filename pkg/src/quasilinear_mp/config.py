"""Run configuration: an INI file read with :mod:`configparser`.

Example::

    [problem]
    N = 3
    V = "r^-2"
    K = "min(r^3, 1)"

    [envelope.zero]
    alpha = 3
    beta = 0

    [envelope.infinity]
    alpha = 0
    beta = 0

    [nonlinearity]
    kind = single_power
    q1 = 8

Several envelopes for one end go in sections ``[envelope.zero.<tag>]``.
Unknown sections and keys are rejected.  Errors carry the line and column
of the offending text.
"""

import configparser
import math
import re
from dataclasses import dataclass, field
from fractions import Fraction

from .dual_transform import DualTransform
from .energy import DiscreteEnergy
from .exponents import INF, Envelope, as_rational, fmt
from .mesh import RadialMesh
from .nonlinearity import NonlinearitySpec
from .potentials import ExpressionError, PotentialSpec


class ConfigError(ValueError):
    def __init__(self, message, path=None, line=None, col=None):
        self.path = path
        self.line = line
        self.col = col
        where = ""
        if line is not None:
            where = f"line {line}" + (f", column {col}" if col is not None else "") + ": "
        prefix = f"{path}: " if path else ""
        super().__init__(f"{prefix}{where}{message}")


# key -> (parser, default); parser names are resolved in _convert
SCHEMA = {
    "problem": {"N": ("int", 3), "V": ("expr", None), "K": ("expr", None)},
    "envelope": {"alpha": ("rational_inf", None), "beta": ("rational", None), "radius": ("float", 1.0)},
    "nonlinearity": {
        "kind": ("str", "single_power"),
        "q1": ("rational", None),
        "q2": ("rational", None),
        "theta": ("rational", None),
        "truncated_negative": ("bool", True),
    },
    "mesh": {"r_min": ("float", 1e-6), "r_max": ("float", 1e3), "nodes": ("int", 2000)},
    "solver": {
        "P": ("int", 21),
        "rho": ("float_auto", None),
        "samples": ("int", 64),
        "seed": ("int", 0),
        "deform_tol": ("float", 1e-3),
        "deform_max_iter": ("int", 5000),
        "tol": ("float", 1e-10),
        "newton_max_iter": ("int", 100),
        "threads": ("int", 1),
    },
    "output": {"dir": ("str", "out")},
    "verify": {
        "weak_defect_tol": ("float", 1e-6),
        "order_min": ("float", 1.7),
        "order_max": ("float", 2.3),
        "decay_slack": ("float", 0.05),
        "convergence_study": ("bool", True),
    },
    "rates": {
        "samples": ("int", 256),
        "q_zero": ("rational", None),
        "q_infinity": ("rational", None),
    },
}

_ENVELOPE_SECTION = re.compile(r"^envelope\.(zero|infinity)(\.[A-Za-z0-9_-]+)?$")
_SECTION_LINE = re.compile(r"^\s*\[([^\]]*)\]")
_KEY_LINE = re.compile(r"^(\s*)([^=:\s][^=:]*?)\s*[=:]\s*(.*?)\s*$")


def _locate(text):
    """``{(section, key): (line, value_col)}`` from a light scan of the text."""
    where = {}
    section = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped[0] in "#;":
            continue
        m = _SECTION_LINE.match(line)
        if m:
            section = m.group(1).strip()
            where[(section, None)] = (lineno, line.index("[") + 1)
            continue
        m = _KEY_LINE.match(line)
        if m and section is not None:
            key = m.group(2).strip()
            col = len(line) - len(line.lstrip()) + 1
            value_col = line.index(m.group(3), len(m.group(1)) + len(m.group(2))) + 1 if m.group(3) else col
            where[(section, key)] = (lineno, value_col)
    return where


def _unquote(value):
    v = value.strip()
    if len(v) >= 2 and v[0] == v[-1] and v[0] in "\"'":
        return v[1:-1], 1
    return v, 0


def _convert(kind, raw):
    value, _ = _unquote(raw)
    if kind == "str":
        return value
    if kind == "expr":
        PotentialSpec(value)  # validate now
        return value
    if kind == "int":
        out = int(value)
        return out
    if kind == "float":
        out = float(value)
        if not math.isfinite(out):
            raise ValueError("must be finite")
        return out
    if kind == "float_auto":
        return None if value.lower() in ("auto", "") else float(value)
    if kind == "bool":
        low = value.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"expected a boolean, got {value!r}")
    if kind == "rational":
        out = as_rational(value)
        if out == INF:
            raise ValueError("must be finite")
        return out
    if kind == "rational_inf":
        return as_rational(value)
    raise AssertionError(kind)


@dataclass
class RunConfig:
    N: int = 3
    V: str = None
    K: str = None
    envelopes_zero: list = field(default_factory=list)
    envelopes_infinity: list = field(default_factory=list)
    nonlinearity: dict = field(default_factory=dict)
    mesh: dict = field(default_factory=dict)
    solver: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)
    verify: dict = field(default_factory=dict)
    rates: dict = field(default_factory=dict)
    path: str = None

    def to_dict(self):
        """Full effective configuration, defaults included."""
        def clean(d):
            return {k: (fmt(v) if isinstance(v, Fraction) else v) for k, v in d.items()}

        return {
            "problem": {"N": self.N, "V": self.V, "K": self.K},
            "envelopes_zero": [e.to_dict() for e in self.envelopes_zero],
            "envelopes_infinity": [e.to_dict() for e in self.envelopes_infinity],
            "nonlinearity": clean(self.nonlinearity),
            "mesh": clean(self.mesh),
            "solver": clean(self.solver),
            "output": clean(self.output),
            "verify": clean(self.verify),
            "rates": clean(self.rates),
        }

    # builders

    def build_mesh(self):
        m = self.mesh
        return RadialMesh(self.N, m["r_min"], m["r_max"], m["nodes"])

    def build_potentials(self):
        V = PotentialSpec(self.V, "V", envelopes_zero=(), envelopes_infinity=())
        K = PotentialSpec(self.K, "K", positive=True,
                          envelopes_zero=tuple(self.envelopes_zero),
                          envelopes_infinity=tuple(self.envelopes_infinity))
        return V, K

    def nonlinearity_args(self):
        nl = self.nonlinearity
        q1 = nl["q1"]
        q2 = q1 if nl["q2"] is None else nl["q2"]
        return nl["kind"], q1, q2, nl["theta"]

    def build_nonlinearity(self, strict=True):
        kind, q1, q2, theta = self.nonlinearity_args()
        return NonlinearitySpec(kind, q1, q2, theta, self.nonlinearity["truncated_negative"], strict)

    def build_energy(self, strict=True):
        V, K = self.build_potentials()
        return DiscreteEnergy(self.build_mesh(), V, K, self.build_nonlinearity(strict), DualTransform())


def parse_config(text, path=None):
    """Parse config text into a :class:`RunConfig`; raises :class:`ConfigError`."""
    if not text.strip():
        raise ConfigError("config is empty", path, 1, 1)
    where = _locate(text)
    parser = configparser.ConfigParser(interpolation=None, strict=True, delimiters=("=",),
                                       comment_prefixes=("#", ";"), inline_comment_prefixes=None)
    parser.optionxform = str
    try:
        parser.read_string(text, source=path or "<config>")
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError("expected a [section] header before the first key", path, exc.lineno, 1) from None
    except (configparser.DuplicateSectionError, configparser.DuplicateOptionError) as exc:
        raise ConfigError(exc.message.split(": ", 1)[-1], path, exc.lineno, 1) from None
    except configparser.ParsingError as exc:
        lineno = exc.errors[0][0] if exc.errors else None
        raise ConfigError("cannot parse line", path, lineno, 1) from None

    cfg = RunConfig(path=path)
    seen = {}
    for section in parser.sections():
        line, col = where.get((section, None), (None, None))
        m = _ENVELOPE_SECTION.match(section)
        schema_name = "envelope" if m else section
        if schema_name not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]", path, line, col)
        schema = SCHEMA[schema_name]
        values = {}
        for key, raw in parser.items(section):
            kline, kcol = where.get((section, key), (line, None))
            if key not in schema:
                allowed = ", ".join(schema)
                raise ConfigError(f"unknown key {key!r} in [{section}] (allowed: {allowed})", path, kline, 1)
            kind, _ = schema[key]
            try:
                values[key] = _convert(kind, raw)
            except ExpressionError as exc:
                _, shift = _unquote(raw)
                offset = (exc.col or 1) - 1 + shift
                raise ConfigError(f"{key}: {exc}", path, kline, (kcol or 1) + offset) from None
            except (ValueError, ZeroDivisionError) as exc:
                raise ConfigError(f"{key}: bad value {raw!r} ({exc})", path, kline, kcol) from None
        if m:
            for req in ("alpha", "beta"):
                if req not in values:
                    raise ConfigError(f"[{section}] needs {req!r}", path, line, col)
            try:
                env = Envelope(values["alpha"], values["beta"], values.get("radius", 1.0))
            except ValueError as exc:
                raise ConfigError(f"[{section}]: {exc}", path, line, col) from None
            (cfg.envelopes_zero if m.group(1) == "zero" else cfg.envelopes_infinity).append(env)
        else:
            seen[section] = values

    problem = seen.get("problem", {})
    cfg.N = problem.get("N", 3)
    cfg.V = problem.get("V")
    cfg.K = problem.get("K")
    for name in ("nonlinearity", "mesh", "solver", "output", "verify", "rates"):
        merged = {k: default for k, (_, default) in SCHEMA[name].items()}
        merged.update(seen.get(name, {}))
        setattr(cfg, name, merged)
    if cfg.N < 3:
        line, col = where.get(("problem", "N"), (None, None))
        raise ConfigError(f"N must be >= 3, got {cfg.N}", path, line, col)
    return cfg


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", str(path)) from None
    return parse_config(text, str(path))


def require(cfg, *keys):
    """Raise :class:`ConfigError` unless the named settings are present."""
    missing = []
    for key in keys:
        if key in ("V", "K") and getattr(cfg, key) is None:
            missing.append(f"[problem] {key}")
        if key == "q1" and cfg.nonlinearity.get("q1") is None:
            missing.append("[nonlinearity] q1")
        if key == "envelopes":
            if not cfg.envelopes_zero:
                missing.append("[envelope.zero]")
            if not cfg.envelopes_infinity:
                missing.append("[envelope.infinity]")
    if missing:
        raise ConfigError("missing " + ", ".join(missing), cfg.path)
