"""Experiment configuration: a sectioned key-value file.

Schema (INI syntax, parsed with :mod:`configparser`)::

    [experiment]
    servers = 2            ; number of servers, >= 1
    seed = 2024            ; 64-bit integer master seed

    [model]
    kind = iid             ; iid | deterministic | lattice | markov_modulated
    alpha = 1.0            ; lattice kind only: the lattice step
    burn_in = 10000        ; markov_modulated only: chain warm-up length

    [tau]                  ; inter-arrival law (iid/deterministic/lattice kinds)
    dist = exponential
    rate = 1.0

    [sigma]                ; service law
    dist = exponential
    rate = 1.0

    [patience]             ; patience law ("value = inf" disables impatience)
    dist = deterministic
    value = 0.5

    [modulation]           ; markov_modulated kind only
    transition = 0.9 0.1 / 0.2 0.8
    ; plus one dist section per coordinate and state:
    ; [state0.tau], [state0.sigma], [state0.patience], [state1.tau], ...

    [run]                  ; command parameters, all optional
    n_arrivals = 100000
    n_samples = 100000
    warmup = 10000
    tol = 1e-9
    z_depth = 4096
    z_window = 1000
    cftp_initial_horizon = 0     ; 0 means automatic
    cftp_max_horizon = 1048576
    cftp_interior_points = 8
    renovation_start = 0
    renovation_end = 9999
    hset_depth = 0               ; 0 means 10 * servers
    hset_cap = 1000000
    batches = 30
    replications = 1

Distribution sections: ``dist = exponential`` (rate), ``deterministic``
(value), ``uniform`` (low, high), ``shifted_exponential`` (shift, rate),
``lattice`` (alpha, multipliers, probs).
"""

from __future__ import annotations

import configparser
import hashlib
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .errors import ConfigurationError
from .sequences import (
    Deterministic,
    Distribution,
    Exponential,
    LatticeDiscrete,
    ModulationSpec,
    SequenceSpec,
    ShiftedExponential,
    Uniform,
)


@dataclass(frozen=True)
class RunParams:
    n_arrivals: int = 100_000
    n_samples: int = 100_000
    warmup: int = 10_000
    tol: float = 1e-9
    z_depth: int = 4096
    z_window: int = 1000
    cftp_initial_horizon: int = 0
    cftp_max_horizon: int = 1 << 20
    cftp_interior_points: int = 8
    renovation_start: int = 0
    renovation_end: int = 9_999
    hset_depth: int = 0
    hset_cap: int = 1_000_000
    batches: int = 30
    replications: int = 1

    def __post_init__(self):
        for name in ("n_arrivals", "n_samples", "warmup", "z_depth", "z_window",
                     "cftp_max_horizon", "hset_cap", "batches", "replications"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"run.{name} must be >= 1")
        if self.tol <= 0.0:
            raise ConfigurationError("run.tol must be positive")
        if self.renovation_end < self.renovation_start:
            raise ConfigurationError("run renovation window is empty")
        if self.cftp_initial_horizon < 0 or self.hset_depth < 0:
            raise ConfigurationError("horizons and depths must be non-negative")


@dataclass(frozen=True)
class ExperimentConfig:
    servers: int
    spec: SequenceSpec
    run: RunParams
    sha256: str
    source: Optional[str] = field(default=None, compare=False)

    def __post_init__(self):
        if self.servers < 1:
            raise ConfigurationError("experiment.servers must be >= 1")


def load_config(path: str | Path, seed_override: Optional[int] = None) -> ExperimentConfig:
    text = Path(path).read_text()
    return parse_config(text, seed_override=seed_override, source=str(path))


def parse_config(text: str, seed_override: Optional[int] = None,
                 source: Optional[str] = None) -> ExperimentConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigurationError(f"cannot parse config: {exc}") from exc

    try:
        servers = cp.getint("experiment", "servers")
        seed = cp.getint("experiment", "seed")
    except (configparser.Error, ValueError) as exc:
        raise ConfigurationError(f"[experiment] needs integer servers and seed: {exc}") from exc
    if seed_override is not None:
        seed = seed_override

    kind = _get(cp, "model", "kind", "iid").strip()
    if kind == "markov_modulated":
        burn_in = int(_get(cp, "model", "burn_in", "10000"))
        spec = SequenceSpec(model=kind, seed=seed, burn_in=burn_in,
                            modulation=_parse_modulation(cp))
    else:
        alpha = _get(cp, "model", "alpha", None)
        spec = SequenceSpec(
            model=kind,
            seed=seed,
            tau=_parse_dist(cp, "tau"),
            sigma=_parse_dist(cp, "sigma"),
            patience=_parse_dist(cp, "patience"),
            alpha=float(alpha) if alpha is not None else None,
        )

    run_kwargs = {}
    if cp.has_section("run"):
        valid = set(RunParams.__dataclass_fields__)
        for key, raw in cp.items("run"):
            if key not in valid:
                raise ConfigurationError(f"unknown run parameter {key!r}")
            caster = float if key == "tol" else int
            try:
                run_kwargs[key] = caster(raw)
            except ValueError as exc:
                raise ConfigurationError(f"run.{key}: {exc}") from exc

    digest = hashlib.sha256(text.encode()).hexdigest()
    return ExperimentConfig(servers=servers, spec=spec, run=RunParams(**run_kwargs),
                            sha256=digest, source=source)


def _get(cp: configparser.ConfigParser, section: str, key: str, default):
    if cp.has_option(section, key):
        return cp.get(section, key)
    return default


def _parse_dist(cp: configparser.ConfigParser, section: str) -> Distribution:
    if not cp.has_section(section):
        raise ConfigurationError(f"missing [{section}] distribution section")
    kind = _get(cp, section, "dist", None)
    if kind is None:
        raise ConfigurationError(f"[{section}] needs a 'dist' key")
    kind = kind.strip()
    try:
        if kind == "exponential":
            return Exponential(rate=cp.getfloat(section, "rate"))
        if kind == "deterministic":
            raw = cp.get(section, "value").strip()
            return Deterministic(value=math.inf if raw == "inf" else float(raw))
        if kind == "uniform":
            return Uniform(low=cp.getfloat(section, "low"), high=cp.getfloat(section, "high"))
        if kind == "shifted_exponential":
            return ShiftedExponential(shift=cp.getfloat(section, "shift"),
                                      rate=cp.getfloat(section, "rate"))
        if kind == "lattice":
            mults = tuple(int(v) for v in cp.get(section, "multipliers").split())
            probs = tuple(float(v) for v in cp.get(section, "probs").split())
            return LatticeDiscrete(alpha=cp.getfloat(section, "alpha"),
                                   multipliers=mults, probs=probs)
    except (configparser.Error, ValueError) as exc:
        raise ConfigurationError(f"[{section}]: {exc}") from exc
    raise ConfigurationError(f"[{section}] has unknown dist {kind!r}")


def _parse_modulation(cp: configparser.ConfigParser) -> ModulationSpec:
    if not cp.has_section("modulation"):
        raise ConfigurationError("markov_modulated model needs a [modulation] section")
    raw = _get(cp, "modulation", "transition", None)
    if raw is None:
        raise ConfigurationError("[modulation] needs a 'transition' key")
    rows = []
    for part in raw.split("/"):
        rows.append(tuple(float(v) for v in part.split()))
    states = []
    for s in range(len(rows)):
        states.append(tuple(_parse_dist(cp, f"state{s}.{name}")
                            for name in ("tau", "sigma", "patience")))
    return ModulationSpec(transition=tuple(rows), states=tuple(states))
