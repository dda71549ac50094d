"""
Run configuration.

Grammar: one ``key = value`` per line; ``#`` starts a comment; blank lines
are ignored; keys are case-sensitive; lists are comma separated.  Either
``eps`` and ``delta`` or ``mu`` and ``delta`` must be given (``eps = delta/mu``).
See README for the list of keys and their defaults.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass, fields, asdict

from .errors import ConfigError

SUITES = ("verify-operators", "verify-kernel", "simulate", "average", "limit", "blowup", "project", "all")
# suites that monitor the uniform bound and therefore need delta <= C eps
BOUNDED_SUITES = ("simulate", "all")


def _floats(text: str) -> tuple:
    return tuple(float(x) for x in text.split(",") if x.strip())


@dataclass
class RunConfig:
    surface: str = "sphere"
    coriolis: str = "exact"
    eps: float | None = None
    delta: float | None = None
    mu: float | None = None
    N1: int = 64
    N2: int = 48
    k: int = 3
    scheme: str = "RK4"
    dt: float | None = None
    t_end: float = 0.5
    stride: int = 10
    safety: float = 0.9
    ceiling: float = 1e6
    init: str = "random"
    amplitude: float = 1.0
    degree: int = 8
    seed: int = 0
    bound_C: float = 1.0
    eps_scan: tuple = (1e-1, 1e-2, 1e-3)
    perturb_eps: float = 0.1
    n_fields: int = 5
    n_states: int = 20
    coarse_N1: int = 12
    coarse_N2: int = 10
    delta_scan: tuple = (1e-1, 3e-2, 1e-2)
    ell: float = 200.0
    n_samples: int = 4000
    limit_dt: float = 0.05
    limit_t: float = 0.25
    average_T: float | None = None
    trajectory_dir: str | None = None
    snapshot: str | None = None
    blowup_eps: tuple = (1e-2, 1e-3, 1e-4)
    blowup_pde: bool = False
    blowup_N: int = 384
    blowup_dt: float = 2e-4
    output_dir: str = "out"

    @property
    def mu_value(self) -> float:
        return self.delta / self.eps

    def canonical(self) -> str:
        d = asdict(self)
        d.pop("output_dir")
        return "\n".join(f"{k}={d[k]!r}" for k in sorted(d))

    def hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]


_TYPES = {f.name: f.type for f in fields(RunConfig)}
_REQUIRED = ("surface",)


def _convert(key: str, text: str):
    t = _TYPES[key]
    if "tuple" in t:
        return _floats(text)
    if "bool" in t:
        low = text.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {text!r}")
    if t.startswith("int"):
        return int(text)
    if t.startswith("float"):
        return float(text)
    return text


def parse_text(text: str, suite: str | None = None) -> RunConfig:
    """Parse config text; every violation is collected before raising."""
    bad = []
    values = {}
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            bad.append(f"line {n}: expected 'key = value'")
            continue
        key, val = (p.strip() for p in line.split("=", 1))
        if key not in _TYPES:
            bad.append(f"line {n}: unknown key '{key}'")
            continue
        try:
            values[key] = _convert(key, val)
        except ValueError as exc:
            bad.append(f"line {n}: bad value for '{key}': {exc}")
    for key in _REQUIRED:
        if key not in values:
            bad.append(f"missing required key '{key}'")
    if "ZONALSIM_OUTPUT_DIR" in os.environ:
        values["output_dir"] = os.environ["ZONALSIM_OUTPUT_DIR"]
    cfg = RunConfig(**values)
    bad.extend(_validate(cfg, values, suite))
    if bad:
        raise ConfigError(bad)
    return cfg


def _validate(cfg: RunConfig, given: dict, suite: str | None) -> list:
    bad = []
    has_eps, has_mu = "eps" in given, "mu" in given
    if "delta" not in given:
        bad.append("missing required key 'delta'")
    if not has_eps and not has_mu:
        bad.append("missing required key 'eps' (or 'mu')")
    if has_eps and has_mu:
        bad.append("give either 'eps' or 'mu', not both")
    for key in ("eps", "delta", "mu"):
        if key in given and not given[key] > 0:
            bad.append(f"'{key}' must be positive (got {given[key]})")
    if has_mu and not has_eps and "delta" in given and given["delta"] > 0 and given["mu"] > 0:
        cfg.eps = cfg.delta / cfg.mu
    for key in ("N1", "N2", "k", "stride", "degree", "coarse_N1", "coarse_N2", "n_samples",
                "n_fields", "n_states", "blowup_N"):
        if getattr(cfg, key) <= 0:
            bad.append(f"'{key}' must be positive (got {getattr(cfg, key)})")
    for key in ("t_end", "amplitude", "ell", "limit_dt", "limit_t", "bound_C", "safety", "blowup_dt"):
        if not getattr(cfg, key) > 0:
            bad.append(f"'{key}' must be positive (got {getattr(cfg, key)})")
    if cfg.dt is not None and not cfg.dt > 0:
        bad.append(f"'dt' must be positive (got {cfg.dt})")
    if cfg.scheme not in ("RK4", "IMEX"):
        bad.append(f"'scheme' must be RK4 or IMEX (got {cfg.scheme!r})")
    if cfg.init not in ("random", "kernel", "zero"):
        bad.append(f"'init' must be random, kernel or zero (got {cfg.init!r})")
    for key in ("eps_scan", "delta_scan", "blowup_eps"):
        if any(not v > 0 for v in getattr(cfg, key)):
            bad.append(f"'{key}' entries must be positive")
    if suite is not None and suite not in SUITES:
        bad.append(f"unknown suite '{suite}'")
    if (suite in BOUNDED_SUITES and cfg.eps is not None and cfg.delta is not None
            and cfg.eps > 0 and cfg.delta > cfg.bound_C * cfg.eps):
        bad.append(f"delta={cfg.delta:g} exceeds bound_C*eps={cfg.bound_C * cfg.eps:g}")
    return bad


def parse_config(path, suite: str | None = None) -> RunConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError([f"cannot read config {path}: {exc}"]) from exc
    return parse_text(text, suite)
