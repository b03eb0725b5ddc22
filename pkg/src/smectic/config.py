"""Flat ``key = value`` run configuration.

One assignment per line; ``#`` starts a comment; blank lines are ignored.
An empty document yields the default experiment (OD2, 32 cells per side,
dt = 1e-5 up to t = 0.086 on (-1, 1)^2).
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

from .model import Params
from .timestepping import INITIAL_FIELDS


class ConfigError(ValueError):
    """Configuration rejected; ``errors`` lists one message per problem."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("\n".join(self.errors))


@dataclass(frozen=True)
class RunConfig:
    params: Params = field(default_factory=Params)
    out_dir: str = "output"
    snapshots: bool = True
    override_solvability: bool = False
    initial_phi: str = "paper"


def _float(text):
    v = float(text)
    if not math.isfinite(v):
        raise ValueError("not a finite number")
    return v


def _int(text):
    try:
        return int(text)
    except ValueError:
        v = float(text)
        if not v.is_integer():
            raise ValueError("not an integer") from None
        return int(v)


_TRUE = {"true", "yes", "on", "1"}
_FALSE = {"false", "no", "off", "0"}


def _bool(text):
    t = text.lower()
    if t in _TRUE:
        return True
    if t in _FALSE:
        return False
    raise ValueError("expected true or false")


def _bounds(text):
    parts = [p for p in text.replace(",", " ").split()]
    if len(parts) != 4:
        raise ValueError("expected four numbers x_min, x_max, y_min, y_max")
    return tuple(_float(p) for p in parts)


def _choice(options):
    def parse(text):
        t = text.lower()
        if t not in options:
            raise ValueError(f"expected one of {', '.join(sorted(options))}")
        return t
    return parse


# config key -> (target, attribute, parser); target "params" or "run".
KEYS = {
    "mu1": ("params", "mu1", _float),
    "mu4": ("params", "mu4", _float),
    "mu5": ("params", "mu5", _float),
    "lambda": ("params", "lam", _float),
    "gamma": ("params", "gamma", _float),
    "epsilon": ("params", "epsilon", _float),
    "dt": ("params", "dt", _float),
    "t_end": ("params", "t_end", _float),
    "nx": ("params", "nx", _int),
    "bounds": ("params", "bounds", _bounds),
    "scheme": ("params", "scheme", _choice({"od2", "mp"})),
    "tol_picard": ("params", "tol_picard", _float),
    "max_picard": ("params", "max_picard", _int),
    "tol_lin": ("params", "tol_lin", _float),
    "out_every": ("params", "out_every", _int),
    "quad_degree": ("params", "quad_degree", _int),
    "out_dir": ("run", "out_dir", str),
    "snapshots": ("run", "snapshots", _bool),
    "override_solvability": ("run", "override_solvability", _bool),
    "initial_phi": ("run", "initial_phi", _choice(set(INITIAL_FIELDS))),
}

# Params attribute -> config key, for naming keys in validation messages.
_PARAM_KEY = {attr: key for key, (tgt, attr, _) in KEYS.items() if tgt == "params"}


def _read_assignments(text: str):
    """Yield ``(line_no, key, raw_value)``; syntax errors go to the error list."""
    out, errors, seen = [], [], {}
    for no, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            errors.append(f"line {no}: expected 'key = value', got {body!r}")
            continue
        key, value = (s.strip() for s in body.split("=", 1))
        if not key:
            errors.append(f"line {no}: missing key before '='")
            continue
        if key in seen:
            errors.append(f"line {no}: key '{key}' repeated (first set on line {seen[key]})")
            continue
        seen[key] = no
        out.append((no, key, value))
    return out, errors


def parse_config(text: str, overrides: dict | None = None) -> RunConfig:
    """Parse and validate a configuration document.

    ``overrides`` maps config keys to raw string values applied after the
    document (command-line flags).  Raises ``ConfigError`` listing every
    problem, each naming its line or key.
    """
    items, errors = _read_assignments(text)
    items = [(f"line {no}", k, v) for no, k, v in items]
    for k, v in (overrides or {}).items():
        items.append(("command line", k, v))

    values = {"params": {}, "run": {}}
    for where, key, raw in items:
        if key not in KEYS:
            errors.append(f"{where}: unknown key '{key}'")
            continue
        target, attr, parse = KEYS[key]
        if raw == "":
            errors.append(f"{where}: key '{key}' has no value")
            continue
        try:
            values[target][attr] = parse(raw)
        except ValueError as exc:
            errors.append(f"{where}: invalid value {raw!r} for key '{key}': {exc}")
    if errors:
        raise ConfigError(errors)

    params = dataclasses.replace(Params(), **values["params"])
    cfg = RunConfig(params=params, **values["run"])
    for msg in params.errors(check_solvability=False):
        attr = msg.split(" ", 1)[0]
        errors.append(f"key '{_PARAM_KEY.get(attr, attr)}': {msg}")
    if not errors and params.solvability_violated and not cfg.override_solvability:
        errors.append(f"key 'dt': {params.solvability_message}; "
                      f"set override_solvability = true to run anyway")
    if not cfg.out_dir.strip():
        errors.append("key 'out_dir': must not be empty")
    if errors:
        raise ConfigError(errors)
    return cfg
