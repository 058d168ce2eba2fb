"""Run configuration: an INI file with [model], [solve], [sim], [grid] and [output] sections.

    # comments start with '#' or ';'
    [model]
    beta = 2.0
    gamma = 1.0

    [solve]
    tol = 1e-8
    accel = anderson

    [grid]          # optional; default grid is derived from the parameters
    xi_min = -60
    xi_max = 120
    h = 0.02

    [output]
    dir = out
    emit = profile, trace, report, snapshots, fronts

Every key is optional. ``none`` clears an optional value. Unknown sections or
keys are errors, reported with their line number.
"""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

from .model import ModelParams
from .pdesim import SimConfig
from .solver import SolveConfig

EMIT_CHOICES = ("profile", "trace", "report", "snapshots", "fronts")

GRID_KEYS = {"xi_min": float, "xi_max": float, "h": float, "n": int}
OUTPUT_KEYS = {"dir": str, "emit": str}


class ConfigError(ValueError):
    def __init__(self, message: str, line: Optional[int] = None, key: Optional[str] = None,
                 source: str = "<config>"):
        where = source if line is None else f"{source}:{line}"
        super().__init__(f"{where}: {message}" + (f" (key '{key}')" if key else ""))
        self.line = line
        self.key = key
        self.source = source


@dataclass
class GridSpec:
    xi_min: Optional[float] = None
    xi_max: Optional[float] = None
    h: Optional[float] = None
    n: Optional[int] = None

    def is_default(self) -> bool:
        return all(v is None for v in (self.xi_min, self.xi_max, self.h, self.n))


@dataclass
class RunConfig:
    model: ModelParams = field(default_factory=ModelParams)
    solve: SolveConfig = field(default_factory=SolveConfig)
    sim: SimConfig = field(default_factory=SimConfig)
    grid: GridSpec = field(default_factory=GridSpec)
    output_dir: Path = Path("out")
    emit: tuple = EMIT_CHOICES

    def to_dict(self) -> dict:
        return {
            "model": self.model.to_dict(),
            "solve": self.solve.to_dict(),
            "sim": self.sim.to_dict(),
            "grid": self.grid.__dict__.copy(),
            "output": {"dir": str(self.output_dir), "emit": list(self.emit)},
        }


def _field_kinds(cls) -> dict:
    out = {}
    for f in fields(cls):
        t = str(f.type)
        optional = "Optional" in t or f.default is None
        base = t.replace("Optional[", "").rstrip("]")
        conv = {"float": float, "int": int, "bool": _bool, "str": str}.get(base, float)
        out[f.name] = (conv, optional)
    return out


def _bool(raw: str) -> bool:
    v = raw.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {raw!r}")


SECTIONS = {
    "model": {k: (v[0], False) for k, v in _field_kinds(ModelParams).items()},
    "solve": _field_kinds(SolveConfig),
    "sim": _field_kinds(SimConfig),
    "grid": {k: (v, True) for k, v in GRID_KEYS.items()},
    "output": {k: (v, False) for k, v in OUTPUT_KEYS.items()},
}


def _convert(section: str, key: str, raw: str, line, source):
    table = SECTIONS.get(section)
    if table is None:
        raise ConfigError(f"unknown section [{section}]", line, None, source)
    if key not in table:
        raise ConfigError(f"unknown key in [{section}]", line, key, source)
    conv, optional = table[key]
    raw = raw.strip()
    if raw.lower() == "none":
        if not optional:
            raise ConfigError("value is required", line, key, source)
        return None
    try:
        return conv(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value {raw!r}: {exc}", line, key, source) from None


def _key_lines(text: str) -> dict:
    """Map (section, key) -> line number by a light scan of the file."""
    lines = {}
    section = None
    for n, ln in enumerate(text.splitlines(), 1):
        s = ln.strip()
        m = re.match(r"^\[([^\]]+)\]", s)
        if m:
            section = m.group(1).strip().lower()
            lines.setdefault((section, None), n)
        elif s and not s.startswith(("#", ";")) and "=" in s:
            lines[(section, s.split("=", 1)[0].strip().lower())] = n
    return lines


def parse_config(text: str, source: str = "<config>", overrides=()) -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"),
                                       default_section="__none__")
    try:
        parser.read_string(text, source=source)
    except configparser.DuplicateOptionError as exc:
        raise ConfigError(f"duplicate key in [{exc.section}]", exc.lineno, exc.option, source) from None
    except configparser.DuplicateSectionError as exc:
        raise ConfigError(f"duplicate section [{exc.section}]", exc.lineno, None, source) from None
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError("key outside any [section]", exc.lineno, None, source) from None
    except configparser.ParsingError as exc:
        line = exc.errors[0][0] if exc.errors else None
        raise ConfigError("malformed line (expected 'key = value')", line, None, source) from None

    where = _key_lines(text)
    values: dict = {name: {} for name in SECTIONS}
    origin: dict = {}
    for section in parser.sections():
        sec = section.strip().lower()
        if sec not in SECTIONS:
            raise ConfigError(f"unknown section [{section}]", where.get((sec, None)), None, source)
        for key, raw in parser.items(section):
            line = where.get((sec, key))
            values[sec][key] = _convert(sec, key, raw, line, source)
            origin[(sec, key)] = (line, source)

    for n, item in enumerate(overrides, 1):
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"override must look like section.key=value, got {item!r}", None, None,
                              f"--override #{n}")
        path, raw = item.split("=", 1)
        sec, key = (part.strip().lower() for part in path.split(".", 1))
        values.setdefault(sec, {})
        values[sec][key] = _convert(sec, key, raw, None, f"--override #{n}")
        origin[(sec, key)] = (None, f"--override #{n}")

    return _build(values, origin, source)


def _build(values: dict, origin: dict, source: str) -> RunConfig:
    def make(cls, sec):
        try:
            return cls(**values[sec]) if values[sec] else cls()
        except ValueError as exc:
            key = next((k for k in values[sec] if k in str(exc)), None)
            line, src = origin.get((sec, key), (None, source))
            raise ConfigError(f"[{sec}] {exc}", line, key, src) from None

    model = make(ModelParams, "model")
    solve = make(SolveConfig, "solve")
    sim = make(SimConfig, "sim")
    grid = GridSpec(**values["grid"])
    out = values["output"]
    emit = EMIT_CHOICES
    if "emit" in out:
        emit = tuple(e.strip() for e in out["emit"].split(",") if e.strip())
        bad = [e for e in emit if e not in EMIT_CHOICES]
        if bad:
            line, src = origin.get(("output", "emit"), (None, source))
            raise ConfigError(f"unknown artifact(s) {bad}; choose from {list(EMIT_CHOICES)}", line, "emit", src)
    return RunConfig(model, solve, sim, grid, Path(out.get("dir", "out")), emit)


def load_config(path: Optional[Path], overrides=()) -> RunConfig:
    if path is None:
        return parse_config("", "<defaults>", overrides)
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", None, None, str(path)) from None
    return parse_config(text, str(path), overrides)


def with_output(cfg: RunConfig, out_dir: Optional[Path]) -> RunConfig:
    return cfg if out_dir is None else replace(cfg, output_dir=Path(out_dir))
