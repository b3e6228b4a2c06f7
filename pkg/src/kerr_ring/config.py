"""INI-style run configuration with command-line overrides.

A config file holds a ``[model]`` section whose keys are :class:`ModelParams`
fields (plus the shorthands ``u`` and ``f_in``), a ``[run]`` section with
``seed``/``n_starts``, and one section per subcommand.  Overrides have the
form ``section.key=value``; a bare ``key=value`` targets ``[model]``.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .exceptions import ConfigError
from .model import ModelParams, validate

SECTIONS = ("model", "run", "dynamics", "sweep", "map", "quantum", "snr", "spectrum")


@dataclass
class RunConfig:
    model: ModelParams
    sections: dict[str, dict[str, str]] = field(default_factory=dict)
    seed: int = 0

    def section(self, name: str) -> "Section":
        return Section(name, self.sections.get(name, {}))

    def resolved(self) -> dict:
        out = {"model": self.model.as_dict(), "seed": self.seed}
        out.update({k: dict(v) for k, v in self.sections.items() if k != "model"})
        return out


@dataclass
class Section:
    """Typed accessors over one config section; missing keys fall back to defaults."""

    name: str
    values: Mapping[str, str]

    def _raw(self, key, default):
        if key in self.values:
            return self.values[key]
        if default is _REQUIRED:
            raise ConfigError(f"[{self.name}] is missing required key '{key}'")
        return default

    def get(self, key: str, default=None) -> str | None:
        return self._raw(key, default)

    def float(self, key: str, default=None) -> float:
        raw = self._raw(key, _REQUIRED if default is None else default)
        try:
            return float(raw)
        except ValueError as exc:
            raise ConfigError(f"[{self.name}] {key}: expected a number, got {raw!r}") from exc

    def int(self, key: str, default=None) -> int:
        raw = self._raw(key, _REQUIRED if default is None else default)
        try:
            return int(raw)
        except ValueError as exc:
            raise ConfigError(f"[{self.name}] {key}: expected an integer, got {raw!r}") from exc

    def floats(self, key: str, default: Iterable[float] | None = None) -> list[float]:
        raw = self._raw(key, _REQUIRED if default is None else default)
        if not isinstance(raw, str):
            return [float(x) for x in raw]
        try:
            return [float(x) for x in raw.replace(",", " ").split()]
        except ValueError as exc:
            raise ConfigError(f"[{self.name}] {key}: expected a list of numbers, got {raw!r}") from exc

    def grid(self, prefix: str, log: bool = False) -> np.ndarray:
        """``<prefix>_start``, ``<prefix>_stop``, ``<prefix>_num`` as an evenly spaced grid,
        or an explicit ``<prefix>_values`` list."""
        if f"{prefix}_values" in self.values:
            return np.asarray(self.floats(f"{prefix}_values"))
        start = self.float(f"{prefix}_start")
        stop = self.float(f"{prefix}_stop")
        num = self.int(f"{prefix}_num")
        if num < 1:
            raise ConfigError(f"[{self.name}] {prefix}_num must be >= 1")
        if log:
            if start <= 0 or stop <= 0:
                raise ConfigError(f"[{self.name}] log-spaced {prefix} needs positive bounds")
            return np.geomspace(start, stop, num)
        return np.linspace(start, stop, num)


_REQUIRED = object()


def parse_override(text: str) -> tuple[str, str, str]:
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not of the form key=value")
    key, value = (s.strip() for s in text.split("=", 1))
    section, _, name = key.rpartition(".")
    section = section or "model"
    if section not in SECTIONS:
        raise ConfigError(f"unknown config section {section!r}")
    if not name:
        raise ConfigError(f"override {text!r} has an empty key")
    return section, name, value


def load_config(path: str | Path | None = None, overrides: Iterable[str] = (), seed: int | None = None) -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file {str(path)!r} not found")
        try:
            parser.read(path, encoding="utf-8")
        except configparser.Error as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from exc
    sections = {s: dict(parser[s]) for s in parser.sections()}
    unknown = set(sections) - set(SECTIONS)
    if unknown:
        raise ConfigError(f"unknown config section(s): {', '.join(sorted(unknown))}")
    for text in overrides:
        section, key, value = parse_override(text)
        sections.setdefault(section, {})[key] = value

    try:
        model = ModelParams.from_mapping(sections.get("model", {}))
    except KeyError as exc:
        raise ConfigError(exc.args[0]) from exc
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    result = validate(model)
    if not result.ok:
        raise ConfigError("invalid model parameters: " + "; ".join(result.violations))

    run = Section("run", sections.get("run", {}))
    return RunConfig(model, sections, seed if seed is not None else run.int("seed", 0))
