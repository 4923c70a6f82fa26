"""Experiment configuration: sectioned ``key = value`` files or JSON.

Schema (every key optional; defaults shown)::

    [experiment]
    seed = 0

    [operator]
    kind = laplacian        ; laplacian | higher | schrodinger | random
    alpha = 1               ; complex literals such as 1j are accepted
    s = 1
    m = 1
    window = -64, 64
    v_seed = 0              ; potential for kind = schrodinger
    v_amplitude = 1.0

    [time]
    t0 = 0
    T = 1
    steps = 2               ; sampling times linspace(t0, t0 + T, steps)

    [lambda]
    radius = 2
    rings = 4
    angles = 6
    value = 0.5             ; single eigenvalue for the eigen subcommand

    [probe]
    experiment = sharpness  ; entire | growth | indicator | decay | sharpness
    eps = 0
    delta = 1

    [favard]
    n_max = 15

    [tolerance]
    scale = 1

Malformed files raise :class:`ConfigError` carrying the offending line.
"""

from __future__ import annotations

import configparser
import hashlib
import json
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path


class ConfigError(ValueError):
    def __init__(self, path, line: int | None, message: str):
        self.path = str(path)
        self.line = line
        where = f"{self.path}:{line}" if line is not None else self.path
        super().__init__(f"{where}: {message}")


@dataclass
class OperatorSpec:
    kind: str = "laplacian"
    alpha: complex = 1.0
    s: int = 1
    m: int = 1
    window: tuple = (-64, 64)
    v_seed: int = 0
    v_amplitude: float = 1.0


@dataclass
class ExperimentConfig:
    seed: int = 0
    operator: OperatorSpec = field(default_factory=OperatorSpec)
    t0: float = 0.0
    T: float = 1.0
    steps: int = 2
    lambda_radius: float = 2.0
    lambda_rings: int = 4
    lambda_angles: int = 6
    lambda_value: complex = 0.5
    probe_experiment: str = "sharpness"
    eps: float = 0.0
    delta: float = 1.0
    n_max: int = 15
    tolerance_scale: float = 1.0
    source_text: str = field(default="", repr=False)

    def digest(self) -> str:
        return hashlib.sha256(self.source_text.encode()).hexdigest()

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc.pop("source_text")
        return json.loads(json.dumps(doc, default=str))


_OPERATOR_KINDS = ("laplacian", "higher", "schrodinger", "random")
_PROBES = ("entire", "growth", "indicator", "decay", "sharpness")

# (section, key) -> (attribute path, parser)
_SCHEMA = {
    ("experiment", "seed"): ("seed", int),
    ("operator", "kind"): ("operator.kind", str),
    ("operator", "alpha"): ("operator.alpha", complex),
    ("operator", "s"): ("operator.s", int),
    ("operator", "m"): ("operator.m", int),
    ("operator", "window"): ("operator.window", "window"),
    ("operator", "v_seed"): ("operator.v_seed", int),
    ("operator", "v_amplitude"): ("operator.v_amplitude", float),
    ("time", "t0"): ("t0", float),
    ("time", "t"): ("T", float),
    ("time", "steps"): ("steps", int),
    ("lambda", "radius"): ("lambda_radius", float),
    ("lambda", "rings"): ("lambda_rings", int),
    ("lambda", "angles"): ("lambda_angles", int),
    ("lambda", "value"): ("lambda_value", complex),
    ("probe", "experiment"): ("probe_experiment", str),
    ("probe", "eps"): ("eps", float),
    ("probe", "delta"): ("delta", float),
    ("favard", "n_max"): ("n_max", int),
    ("tolerance", "scale"): ("tolerance_scale", float),
}


def _parse_window(text: str) -> tuple:
    parts = [p for p in re.split(r"[,\s]+", text.strip().strip("[]()")) if p]
    if len(parts) != 2:
        raise ValueError("window needs two integers")
    lo, hi = int(parts[0]), int(parts[1])
    if hi < lo:
        raise ValueError("window upper end below lower end")
    return lo, hi


def _convert(raw, kind):
    if kind == "window":
        if isinstance(raw, (list, tuple)):
            return _parse_window(",".join(str(v) for v in raw))
        return _parse_window(str(raw))
    if kind is complex:
        return complex(str(raw).replace(" ", ""))
    if kind is int and isinstance(raw, float) and not raw.is_integer():
        raise ValueError("expected an integer")
    return kind(raw)


def _assign(cfg: ExperimentConfig, attr: str, value) -> None:
    target = cfg
    *head, last = attr.split(".")
    for name in head:
        target = getattr(target, name)
    setattr(target, last, value)


def _line_of(lines, section: str, key: str | None) -> int | None:
    current = None
    for i, line in enumerate(lines, 1):
        stripped = line.strip()
        m = re.match(r"\[(.+)\]$", stripped)
        if m:
            current = m.group(1).strip().lower()
            if key is None and current == section:
                return i
            continue
        if current == section and key is not None:
            if re.match(rf"{re.escape(key)}\s*[=:]", stripped, re.IGNORECASE):
                return i
    return None


def _validate(cfg: ExperimentConfig, path, locate) -> None:
    checks = [
        (cfg.operator.kind in _OPERATOR_KINDS, "operator", "kind",
         f"kind must be one of {', '.join(_OPERATOR_KINDS)}"),
        (cfg.probe_experiment in _PROBES, "probe", "experiment",
         f"experiment must be one of {', '.join(_PROBES)}"),
        (cfg.operator.s >= 1, "operator", "s", "s must be >= 1"),
        (cfg.operator.m >= 1, "operator", "m", "m must be >= 1"),
        (cfg.steps >= 1, "time", "steps", "steps must be >= 1"),
        (cfg.T > 0, "time", "T", "T must be positive"),
        (cfg.eps >= 0, "probe", "eps", "eps must be >= 0"),
        (cfg.delta > 0, "probe", "delta", "delta must be positive"),
        (cfg.tolerance_scale > 0, "tolerance", "scale", "scale must be positive"),
    ]
    for ok, section, key, msg in checks:
        if not ok:
            raise ConfigError(path, locate(section, key), msg)


def load_config(path) -> ExperimentConfig:
    """Read an INI-style or JSON experiment file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(path, None, f"cannot read config: {exc.strerror}") from exc
    if path.suffix.lower() == ".json":
        return _load_json(path, text)
    return _load_ini(path, text)


def _load_ini(path, text: str) -> ExperimentConfig:
    lines = text.splitlines()
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        parser.read_string(text, source=str(path))
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError(path, exc.lineno, "key outside of any [section]") from exc
    except configparser.ParsingError as exc:
        lineno, line = exc.errors[0]
        raise ConfigError(path, lineno, f"cannot parse line {line.strip()!r}") from exc
    except (configparser.DuplicateOptionError, configparser.DuplicateSectionError) as exc:
        raise ConfigError(path, exc.lineno, exc.message.split(": ", 1)[-1]) from exc
    cfg = ExperimentConfig(source_text=text)
    for section in parser.sections():
        sec = section.lower()
        for key, raw in parser.items(section):
            if (sec, key) not in _SCHEMA:
                raise ConfigError(path, _line_of(lines, sec, key), f"unknown key {key!r} in [{section}]")
            attr, kind = _SCHEMA[(sec, key)]
            try:
                _assign(cfg, attr, _convert(raw, kind))
            except ValueError as exc:
                raise ConfigError(path, _line_of(lines, sec, key), f"bad value for {key}: {exc}") from exc
    _validate(cfg, path, lambda sec, key: _line_of(lines, sec, key.lower()))
    return cfg


def _load_json(path, text: str) -> ExperimentConfig:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(path, exc.lineno, exc.msg) from exc
    if not isinstance(doc, dict):
        raise ConfigError(path, 1, "top level must be an object of sections")
    lines = text.splitlines()
    cfg = ExperimentConfig(source_text=text)
    for section, body in doc.items():
        sec = section.lower()
        if not isinstance(body, dict):
            raise ConfigError(path, _json_line(lines, section), f"section {section!r} must be an object")
        for key, raw in body.items():
            k = key.lower()
            if (sec, k) not in _SCHEMA:
                raise ConfigError(path, _json_line(lines, key), f"unknown key {key!r} in {section!r}")
            attr, kind = _SCHEMA[(sec, k)]
            try:
                _assign(cfg, attr, _convert(raw, kind))
            except (TypeError, ValueError) as exc:
                raise ConfigError(path, _json_line(lines, key), f"bad value for {key}: {exc}") from exc
    _validate(cfg, path, lambda sec, key: _json_line(lines, key))
    return cfg


def _json_line(lines, key: str) -> int | None:
    for i, line in enumerate(lines, 1):
        if f'"{key.lower()}"' in line.lower():
            return i
    return None
