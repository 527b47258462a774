"""Flat ``key = value`` scan configuration files.

Keys are dotted (``scan.sigma``), ``#`` starts a comment, and numeric grids
accept comma lists and inclusive ``start:step:stop`` ranges.  Scalars accept
plain numbers and multiples of ``pi`` (``pi/2``, ``0.5*pi``).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

from .protocols import FAMILIES, KINDS

EXPERIMENTS = (
    "sensitivity-vs-chit",
    "sensitivity-vs-sigma",
    "maxcfi-vs-sigma",
    "histograms",
    "fixed-T",
    "verify-theorem",
)
FORMATS = ("csv", "json")


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None, source: str = "<config>"):
        self.line = line
        self.source = source
        where = f"{source}:{line}: " if line is not None else f"{source}: "
        super().__init__(where + message)


@dataclass(frozen=True)
class ScanConfig:
    experiment: str
    n_particles: int = 100
    protocols: tuple = ("trivial", "echo", "pseudo-echo")
    chit_grid: tuple = tuple(round(0.005 * i, 12) for i in range(0, 61))
    sigma_grid: tuple = tuple(float(s) for s in range(0, 13))
    T_grid: tuple = (0.01, 0.1, math.pi / 2, math.pi)
    phase_points: int = 721
    chit: float | None = None
    chit2: float = 0.2
    sigma: float | None = None
    dphi: float | None = None
    families: tuple = FAMILIES
    t1_points: int = 101
    output_path: str | None = None
    output_format: str = "csv"
    seed: int = 0
    verify_cases: int = 200
    verify_max_n: int = 12

    def to_mapping(self) -> dict[str, str]:
        """Canonical key/value strings; ``from_mapping`` inverts this exactly."""
        out = {}
        for key, name in _KEYS.items():
            value = getattr(self, name)
            if value is None:
                continue
            if isinstance(value, tuple):
                out[key] = ", ".join(repr(v) if isinstance(v, float) else str(v) for v in value)
            else:
                out[key] = repr(value) if isinstance(value, float) else str(value)
        return out

    def resolved_chit(self) -> float:
        """Twisting strength; histograms default to the GHZ point pi/2, scans to 0.1."""
        if self.chit is not None:
            return self.chit
        return math.pi / 2 if self.experiment == "histograms" else 0.1

    def resolved_sigma(self) -> float:
        if self.sigma is not None:
            return self.sigma
        return math.sqrt(self.n_particles / 4) if self.experiment == "histograms" else 0.0

    def resolved_dphi(self) -> float:
        return self.dphi if self.dphi is not None else self.n_particles ** -0.5

    @classmethod
    def from_mapping(cls, mapping: dict[str, str], source: str = "<mapping>") -> ScanConfig:
        return _build({k: (v, None) for k, v in mapping.items()}, source)


# config key -> field name
_KEYS = {
    "experiment": "experiment",
    "n": "n_particles",
    "protocols": "protocols",
    "scan.chit": "chit_grid",
    "scan.sigma": "sigma_grid",
    "scan.T": "T_grid",
    "scan.phi.points": "phase_points",
    "chit": "chit",
    "chit2": "chit2",
    "sigma": "sigma",
    "dphi": "dphi",
    "fixed_t.families": "families",
    "fixed_t.t1_points": "t1_points",
    "output.path": "output_path",
    "output.format": "output_format",
    "seed": "seed",
    "verify.cases": "verify_cases",
    "verify.max_n": "verify_max_n",
}

_KEY_OF = {v: k for k, v in _KEYS.items()}

_PI = re.compile(r"^\s*(?:([-+]?[0-9.]+(?:[eE][-+]?\d+)?)\s*\*?\s*)?pi(?:\s*/\s*([0-9.]+))?\s*$")


def parse_number(text: str) -> float:
    text = text.strip()
    m = _PI.match(text)
    if m:
        coef = float(m.group(1)) if m.group(1) else 1.0
        div = float(m.group(2)) if m.group(2) else 1.0
        return coef * math.pi / div
    value = float(text)
    if not math.isfinite(value):
        raise ValueError(f"non-finite value {text!r}")
    return value


def parse_grid(text: str) -> tuple[float, ...]:
    """Comma list and/or inclusive ``start:step:stop`` ranges."""
    values = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if ":" in part:
            bits = part.split(":")
            if len(bits) != 3:
                raise ValueError(f"range {part!r} must be start:step:stop")
            start, step, stop = (parse_number(b) for b in bits)
            if step <= 0 or stop < start:
                raise ValueError(f"range {part!r} needs step > 0 and stop >= start")
            count = int(math.floor((stop - start) / step + 1e-9)) + 1
            values.extend(round(start + i * step, 12) for i in range(count))
        else:
            values.append(parse_number(part))
    if not values:
        raise ValueError("grid is empty")
    return tuple(values)


def _parse_list(text: str) -> tuple[str, ...]:
    items = tuple(s.strip() for s in text.split(",") if s.strip())
    if not items:
        raise ValueError("list is empty")
    return items


def _int(text: str) -> int:
    value = parse_number(text)
    if value != int(value):
        raise ValueError(f"expected an integer, got {text!r}")
    return int(value)


_PARSERS = {
    "experiment": str.strip,
    "n_particles": _int,
    "protocols": _parse_list,
    "chit_grid": parse_grid,
    "sigma_grid": parse_grid,
    "T_grid": parse_grid,
    "phase_points": _int,
    "chit": parse_number,
    "chit2": parse_number,
    "sigma": parse_number,
    "dphi": parse_number,
    "families": _parse_list,
    "t1_points": _int,
    "output_path": str.strip,
    "output_format": lambda s: s.strip().lower(),
    "seed": _int,
    "verify_cases": _int,
    "verify_max_n": _int,
}


def parse_config_text(text: str, source: str = "<config>", experiment=None) -> ScanConfig:
    """Parse config text.

    ``experiment`` may be a name or a tuple of allowed names (the first is the
    default when the text does not set one).
    """
    entries: dict[str, tuple[str, int]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno, source)
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _KEYS:
            raise ConfigError(f"unknown key {key!r}", lineno, source)
        if key in entries:
            raise ConfigError(f"duplicate key {key!r} (first set on line {entries[key][1]})", lineno, source)
        entries[key] = (value, lineno)
    if experiment is not None:
        allowed = (experiment,) if isinstance(experiment, str) else tuple(experiment)
        given = entries.get("experiment")
        if given is None:
            entries["experiment"] = (allowed[0], None)
        elif given[0] not in allowed:
            raise ConfigError(f"experiment {given[0]!r} does not match this command "
                              f"(expected {' or '.join(allowed)})", given[1], source)
    return _build(entries, source)


def load_config(path: str, experiment=None) -> ScanConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config_text(fh.read(), source=str(path), experiment=experiment)


def _build(entries: dict[str, tuple[str, int | None]], source: str) -> ScanConfig:
    kwargs = {}
    lines = {}
    for key, (value, lineno) in entries.items():
        if key not in _KEYS:
            raise ConfigError(f"unknown key {key!r}", lineno, source)
        name = _KEYS[key]
        try:
            kwargs[name] = _PARSERS[name](value)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key!r}: {exc}", lineno, source) from None
        lines[name] = lineno
    if "experiment" not in kwargs:
        raise ConfigError("missing 'experiment'", None, source)
    if kwargs["experiment"] == "histograms" and "protocols" not in kwargs:
        kwargs["protocols"] = ("trivial", "echo")
    cfg = ScanConfig(**kwargs)
    _validate(cfg, lines, source)
    return cfg


def _validate(cfg: ScanConfig, lines: dict, source: str):
    def fail(name, message):
        raise ConfigError(message, lines.get(name), source)

    if cfg.experiment not in EXPERIMENTS:
        fail("experiment", f"unknown experiment {cfg.experiment!r}; expected one of {', '.join(EXPERIMENTS)}")
    if cfg.n_particles < 2:
        fail("n_particles", "n must be >= 2")
    for kind in cfg.protocols:
        if kind not in KINDS:
            fail("protocols", f"unknown protocol {kind!r}; expected one of {', '.join(KINDS)}")
    if cfg.experiment == "histograms" and not set(cfg.protocols) <= {"trivial", "echo"}:
        fail("protocols", "histograms support only the trivial and echo protocols")
    for fam in cfg.families:
        if fam not in FAMILIES:
            fail("families", f"unknown family {fam!r}; expected one of {', '.join(FAMILIES)}")
    for name in ("chit_grid", "sigma_grid", "T_grid"):
        if any(v < 0 for v in getattr(cfg, name)):
            fail(name, f"{_KEY_OF[name]} values must be >= 0")
    for name in ("chit", "chit2", "sigma"):
        value = getattr(cfg, name)
        if value is not None and value < 0:
            fail(name, f"{_KEY_OF[name]} must be >= 0")
    if cfg.dphi is not None and cfg.dphi <= 0:
        fail("dphi", "dphi must be > 0")
    for name, low in (("phase_points", 2), ("t1_points", 2), ("verify_cases", 1), ("verify_max_n", 2)):
        if getattr(cfg, name) < low:
            fail(name, f"{_KEY_OF[name]} must be >= {low}")
    if cfg.output_format not in FORMATS:
        fail("output_format", f"output.format must be one of {', '.join(FORMATS)}")
    if cfg.seed < 0:
        fail("seed", "seed must be a non-negative integer")

