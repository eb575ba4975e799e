"""Experiment configuration files.

The format is a strict subset of INI::

    # comment
    [experiment]
    name = quantize-scan
    seed = 0

    [parameters]
    d = 50
    levels = 32, 48, 64

``[experiment]`` must name the experiment.  Every parameter is checked
against the experiment's schema: unknown keys, duplicates and values of
the wrong type are rejected with line numbers.  A hand-rolled reader is
used because configparser cannot report where the first copy of a
duplicate key was.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Mapping


class ConfigError(ValueError):
    """Invalid configuration; the message names the key and line."""


REQUIRED = object()


@dataclass(frozen=True)
class Param:
    kind: str  # float, int, complex, str, bool, floats, ints
    default: Any = REQUIRED
    help: str = ""
    choices: tuple | None = None


def _parse_bool(text: str) -> bool:
    t = text.lower()
    if t in ("true", "yes", "on", "1"):
        return True
    if t in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_int(text: str) -> int:
    value = float(text)
    if value != int(value):
        raise ValueError(f"not an integer: {text!r}")
    return int(value)


def _list(parse: Callable[[str], Any]) -> Callable[[str], tuple]:
    def run(text: str) -> tuple:
        items = [s.strip() for s in text.split(",")]
        if not all(items):
            raise ValueError(f"empty item in list {text!r}")
        return tuple(parse(s) for s in items)
    return run


_PARSERS: dict[str, Callable[[str], Any]] = {
    "float": float,
    "int": _parse_int,
    "complex": lambda s: complex(s.replace(" ", "")),
    "str": str,
    "bool": _parse_bool,
    "floats": _list(float),
    "ints": _list(_parse_int),
}


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    parameters: dict[str, Any]
    seed: int = 0
    defaulted: frozenset[str] = field(default_factory=frozenset)

    def echo(self) -> dict:
        """JSON-friendly view of every parameter, marking filled-in defaults."""
        def plain(v):
            if isinstance(v, complex):
                return {"re": v.real, "im": v.imag}
            if isinstance(v, tuple):
                return [plain(x) for x in v]
            return v
        return {
            "experiment": self.experiment,
            "seed": self.seed,
            "parameters": {k: plain(v) for k, v in sorted(self.parameters.items())},
            "defaults_applied": sorted(self.defaulted),
        }


def _read_sections(text: str) -> dict[str, dict[str, tuple[str, int]]]:
    sections: dict[str, dict[str, tuple[str, int]]] = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith(("#", ";")):
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"line {lineno}: malformed section header {line!r}")
            current = line[1:-1].strip()
            if current in sections:
                raise ConfigError(f"line {lineno}: section [{current}] repeated")
            sections[current] = {}
            continue
        if current is None:
            raise ConfigError(f"line {lineno}: key outside any section")
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in sections[current]:
            first = sections[current][key][1]
            raise ConfigError(f"duplicate key {key!r} in [{current}] on lines {first} and {lineno}")
        sections[current][key] = (value, lineno)
    return sections


def parse_config(
    text: str,
    schemas: Mapping[str, Mapping[str, Param]],
    experiment: str | None = None,
) -> ExperimentConfig:
    """Parse and validate ``text`` against the schema of its experiment.

    When ``experiment`` is given (from the command line) the file must
    name the same one.
    """
    sections = _read_sections(text)
    unknown_sections = set(sections) - {"experiment", "parameters"}
    if unknown_sections:
        raise ConfigError(f"unknown section(s): {sorted(unknown_sections)}")
    head = sections.get("experiment")
    if not head:
        raise ConfigError("missing or empty [experiment] section")
    for key in head:
        if key not in ("name", "seed"):
            raise ConfigError(f"line {head[key][1]}: unknown key {key!r} in [experiment]")
    if "name" not in head:
        raise ConfigError("[experiment] must set 'name'")
    name, line = head["name"]
    if name not in schemas:
        raise ConfigError(f"line {line}: unknown experiment {name!r}; choose from {sorted(schemas)}")
    if experiment is not None and experiment != name:
        raise ConfigError(f"line {line}: config is for {name!r} but {experiment!r} was requested")
    seed = 0
    if "seed" in head:
        text_seed, line = head["seed"]
        try:
            seed = _parse_int(text_seed)
        except ValueError:
            raise ConfigError(f"line {line}: seed must be an integer, got {text_seed!r}") from None

    schema = schemas[name]
    given = sections.get("parameters", {})
    values: dict[str, Any] = {}
    for key, (raw, line) in given.items():
        if key not in schema:
            raise ConfigError(f"line {line}: unknown parameter {key!r} for {name!r}")
        spec = schema[key]
        try:
            value = _PARSERS[spec.kind](raw)
        except ValueError:
            raise ConfigError(f"line {line}: parameter {key!r} expects {spec.kind}, got {raw!r}") from None
        if spec.choices is not None and value not in spec.choices:
            raise ConfigError(f"line {line}: parameter {key!r} must be one of {spec.choices}, got {value!r}")
        values[key] = value
    defaulted = set()
    for key, spec in schema.items():
        if key in values:
            continue
        if spec.default is REQUIRED:
            raise ConfigError(f"missing required parameter {key!r} for {name!r}")
        values[key] = spec.default
        defaulted.add(key)
    return ExperimentConfig(name, values, seed, frozenset(defaulted))
