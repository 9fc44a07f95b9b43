"""Line-oriented scenario and table files.

Both formats share one grammar: ``[section]`` headers, ``key = value``
entries, ``#`` comments, comma-separated lists, angles suffixed ``deg`` or
``rad`` and spacetime points written ``(t, x)``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Iterator, Mapping

from .bell import CHSH_PAIRING, BellError, CorrelationTable, _pair
from .relativity import Frame, RelativityError, SpacetimePoint
from .scenarios import (
    FOUR_PARTY_GEOMETRY,
    GAO_GEOMETRY,
    Scenario,
    ScenarioError,
    build_four_party,
    build_gao,
)

__all__ = [
    "ConfigError",
    "RunConfig",
    "TableQuery",
    "SCENARIOS",
    "parse_config",
    "emit_config",
    "load_config",
    "parse_table",
    "build_scenario",
]

SCENARIOS = ("gao-single", "gao-many", "gao-repeated", "four-party")
FORMATS = ("csv", "text")
_SEED_LIMIT = 2**64


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None) -> None:
        self.line, self.column, self.message = line, column, message
        where = "" if line is None else f"line {line}, column {column}: "
        super().__init__(where + message)


@dataclass(frozen=True)
class _Entry:
    section: str
    key: str
    value: str
    line: int
    column: int  # 1-based column of the value

    def error(self, message: str) -> ConfigError:
        return ConfigError(message, self.line, self.column)


_HEADER = re.compile(r"\[\s*([A-Za-z_][\w-]*)\s*\]$")
_KEY = re.compile(r"[A-Za-z_][\w-]*$")


def _entries(text: str, sections: Mapping[str, frozenset[str] | None]) -> Iterator[_Entry]:
    """Yield entries; ``sections`` maps allowed section names to allowed keys (None = any key)."""
    current = None
    seen: set[tuple[str, str]] = set()
    seen_sections: set[str] = set()
    for n, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].rstrip()
        stripped = body.lstrip()
        if not stripped:
            continue
        indent = len(body) - len(stripped) + 1
        if stripped.startswith("["):
            m = _HEADER.match(stripped)
            if not m:
                raise ConfigError(f"malformed section header {stripped!r}", n, indent)
            current = m.group(1)
            if current not in sections:
                raise ConfigError(f"unknown section [{current}]; expected one of {sorted(sections)}", n, indent)
            if current in seen_sections:
                raise ConfigError(f"section [{current}] appears twice", n, indent)
            seen_sections.add(current)
            continue
        if "=" not in stripped:
            raise ConfigError("expected 'key = value'", n, indent)
        if current is None:
            raise ConfigError("entry before any [section] header", n, indent)
        key_part, value_part = stripped.split("=", 1)
        key = key_part.strip()
        if not _KEY.match(key):
            raise ConfigError(f"invalid key {key!r}", n, indent)
        allowed = sections[current]
        if allowed is not None and key not in allowed:
            raise ConfigError(f"unknown key {key!r} in [{current}]; allowed: {', '.join(sorted(allowed))}", n, indent)
        if (current, key) in seen:
            raise ConfigError(f"duplicate key {key!r} in [{current}]", n, indent)
        seen.add((current, key))
        value = value_part.strip()
        column = indent + len(key_part) + 1 + (len(value_part) - len(value_part.lstrip()))
        if not value:
            raise ConfigError(f"empty value for {key!r}", n, column)
        yield _Entry(current, key, value, n, column)


def _float(e: _Entry, text: str | None = None) -> float:
    text = e.value if text is None else text
    try:
        v = float(text)
    except ValueError:
        raise e.error(f"expected a number for {e.key!r}, got {text!r}") from None
    if not math.isfinite(v):
        raise e.error(f"{e.key!r} must be finite")
    return v


def _int(e: _Entry) -> int:
    if not re.fullmatch(r"[+-]?\d+", e.value.replace("_", "")):
        raise e.error(f"expected an integer for {e.key!r}, got {e.value!r}")
    return int(e.value.replace("_", ""))


def _angle(e: _Entry) -> float:
    m = re.fullmatch(r"(.+?)\s*(deg|rad)", e.value)
    if not m:
        raise e.error(f"angle {e.key!r} needs a 'deg' or 'rad' suffix, got {e.value!r}")
    v = _float(e, m.group(1))
    return math.radians(v) if m.group(2) == "deg" else v


def _point(e: _Entry) -> SpacetimePoint:
    m = re.fullmatch(r"\(\s*([^,()]+?)\s*,\s*([^,()]+?)\s*\)", e.value)
    if not m:
        raise e.error(f"spacetime point {e.key!r} must look like '(t, x)', got {e.value!r}")
    return SpacetimePoint(_float(e, m.group(1)), _float(e, m.group(2)))


def _list(e: _Entry) -> list[str]:
    items = [s.strip() for s in e.value.split(",")]
    if any(not s for s in items):
        raise e.error(f"empty item in list {e.key!r}")
    return items


# ---------------------------------------------------------------- run configs

@dataclass(frozen=True)
class RunConfig:
    """Everything needed to reproduce a run: scenario choice, overrides, frames, execution."""

    scenario: str = "four-party"
    repeats: int | None = None
    pairs: int | None = None
    geometry: Mapping[str, SpacetimePoint] = field(default_factory=dict)
    angles: Mapping[str, float] = field(default_factory=dict)  # radians
    betas: tuple[float, ...] | None = None
    runs: int | None = None
    seed: int = 0
    format: str = "text"
    out: str | None = None

    def __post_init__(self) -> None:
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}; built-ins: {', '.join(SCENARIOS)}")
        if self.repeats is not None and (self.scenario != "gao-repeated" or self.repeats < 1):
            raise ConfigError("repeats must be >= 1 and is only valid for gao-repeated")
        if self.pairs is not None and (self.scenario != "gao-many" or self.pairs < 1):
            raise ConfigError("pairs must be >= 1 and is only valid for gao-many")
        allowed = FOUR_PARTY_GEOMETRY if self.scenario == "four-party" else GAO_GEOMETRY
        for k in self.geometry:
            if k not in allowed:
                raise ConfigError(f"unknown geometry key {k!r} for {self.scenario}; allowed: {', '.join(allowed)}")
        if self.angles and self.scenario != "four-party":
            raise ConfigError("[angles] applies to four-party only")
        for k in self.angles:
            if k not in "abcd" or len(k) != 1:
                raise ConfigError(f"unknown angle {k!r}; expected a, b, c, d")
        if self.runs is not None and self.runs < 1:
            raise ConfigError(f"runs must be >= 1 (got {self.runs})")
        if not 0 <= self.seed < _SEED_LIMIT:
            raise ConfigError(f"seed must be an unsigned 64-bit value (got {self.seed})")
        if self.format not in FORMATS:
            raise ConfigError(f"format must be one of {FORMATS} (got {self.format!r})")
        if self.betas is not None:
            if not self.betas:
                raise ConfigError("frame list is empty")
            for b in self.betas:
                try:
                    Frame(b)
                except RelativityError as exc:
                    raise ConfigError(str(exc)) from None
        object.__setattr__(self, "geometry", dict(self.geometry))
        object.__setattr__(self, "angles", dict(self.angles))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RunConfig):
            return NotImplemented
        return emit_config(self) == emit_config(other)

    def __hash__(self) -> int:
        return hash(emit_config(self))

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "repeats": self.repeats,
            "pairs": self.pairs,
            "geometry": {k: [p.t, p.x] for k, p in self.geometry.items()},
            "angles": dict(self.angles),
            "betas": None if self.betas is None else list(self.betas),
            "runs": self.runs,
            "seed": self.seed,
            "format": self.format,
            "out": self.out,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "RunConfig":
        return cls(
            scenario=d["scenario"],
            repeats=d.get("repeats"),
            pairs=d.get("pairs"),
            geometry={k: SpacetimePoint(*v) for k, v in d.get("geometry", {}).items()},
            angles=d.get("angles", {}),
            betas=None if d.get("betas") is None else tuple(d["betas"]),
            runs=d.get("runs"),
            seed=d.get("seed", 0),
            format=d.get("format", "text"),
            out=d.get("out"),
        )


_RUN_SECTIONS = {
    "scenario": frozenset({"name", "repeats", "pairs"}),
    "geometry": frozenset(GAO_GEOMETRY) | frozenset(FOUR_PARTY_GEOMETRY),
    "angles": frozenset("abcd"),
    "frames": frozenset({"betas"}),
    "execution": frozenset({"runs", "seed", "format", "out"}),
}


def parse_config(text: str) -> RunConfig:
    """Parse a run configuration; unknown sections and keys are errors."""
    kw: dict = {"geometry": {}, "angles": {}}
    for e in _entries(text, _RUN_SECTIONS):
        s, k = e.section, e.key
        if s == "scenario":
            kw["scenario" if k == "name" else k] = e.value if k == "name" else _int(e)
        elif s == "geometry":
            kw["geometry"][k] = _point(e)
        elif s == "angles":
            kw["angles"][k] = _angle(e)
        elif s == "frames":
            kw["betas"] = tuple(_float(e, b) for b in _list(e))
            for b in kw["betas"]:  # checked here so the error carries a position
                try:
                    Frame(b)
                except RelativityError as exc:
                    raise e.error(str(exc)) from None
        elif k in ("runs", "seed"):
            kw[k] = _int(e)
        else:
            kw[k] = e.value
    return RunConfig(**kw)


def emit_config(c: RunConfig) -> str:
    """Canonical text form; ``parse_config(emit_config(c)) == c``."""
    lines = ["[scenario]", f"name = {c.scenario}"]
    if c.repeats is not None:
        lines.append(f"repeats = {c.repeats}")
    if c.pairs is not None:
        lines.append(f"pairs = {c.pairs}")
    if c.geometry:
        lines += ["", "[geometry]"]
        lines += [f"{k} = ({p.t!r}, {p.x!r})" for k, p in sorted(c.geometry.items())]
    if c.angles:
        lines += ["", "[angles]"]
        lines += [f"{k} = {v!r} rad" for k, v in sorted(c.angles.items())]
    if c.betas is not None:
        lines += ["", "[frames]", "betas = " + ", ".join(repr(float(b)) for b in c.betas)]
    lines += ["", "[execution]"]
    if c.runs is not None:
        lines.append(f"runs = {c.runs}")
    lines.append(f"seed = {c.seed}")
    lines.append(f"format = {c.format}")
    if c.out is not None:
        lines.append(f"out = {c.out}")
    return "\n".join(lines) + "\n"


def load_config(path: str) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def build_scenario(c: RunConfig) -> Scenario:
    """Scenario for a config, with the frame list replaced when ``betas`` is given."""
    if c.angles and set(c.angles) != set("abcd"):
        raise ConfigError("four-party needs all four angles a, b, c, d when [angles] is given")
    try:
        if c.scenario == "four-party":
            s = build_four_party(c.angles or None, c.geometry)
        elif c.scenario == "gao-repeated":
            s = build_gao("repeated", k=c.repeats or 10, geometry=c.geometry)
        elif c.scenario == "gao-many":
            s = build_gao("many_pairs", geometry=c.geometry, n=c.pairs)
        else:
            s = build_gao("single", geometry=c.geometry)
        if c.betas is not None:
            s = s.with_frames([Frame(b) for b in c.betas])
    except (ScenarioError, RelativityError, KeyError) as exc:
        raise ConfigError(f"{c.scenario}: {exc}") from None
    return s


# ---------------------------------------------------------------- table files

@dataclass(frozen=True)
class TableQuery:
    table: CorrelationTable
    target: tuple[str, str] | None = None
    pairing: tuple[tuple[str, str], ...] = CHSH_PAIRING


_TABLE_SECTIONS = {
    "expectations": None,
    "joints": None,
    "marginals": frozenset("abcd"),
    "angles": frozenset("abcd"),
    "table": frozenset({"pairs"}),
    "query": frozenset({"target"}),
}


def _pair_key(e: _Entry, text: str | None = None) -> tuple[str, str]:
    text = e.key if text is None else text
    try:
        if len(text) != 2:
            raise BellError(text)
        _pair(text)
    except BellError:
        raise e.error(f"invalid pair {text!r}; use two of a, b, c, d such as 'ab'") from None
    return (text[0], text[1])  # written order is kept; CorrelationTable canonicalises


def parse_table(text: str) -> TableQuery:
    """Parse a correlation-table file into a table plus optional range query.

    ``[angles]`` generates singlet correlations for the pairs listed in
    ``[table] pairs`` (default: the CHSH pairs).
    """
    exps: dict = {}
    joints: dict = {}
    marginals: dict | None = None
    angles: dict = {}
    pairing = CHSH_PAIRING
    target = None
    for e in _entries(text, _TABLE_SECTIONS):
        if e.section == "expectations":
            exps[_pair_key(e)] = _float(e)
        elif e.section == "joints":
            cells = [_float(e, v) for v in _list(e)]
            if len(cells) != 4:
                raise e.error("a joint needs four probabilities: ++, +-, -+, --")
            joints[_pair_key(e)] = tuple(cells)
        elif e.section == "marginals":
            marginals = {} if marginals is None else marginals
            marginals[e.key] = _float(e)
        elif e.section == "angles":
            angles[e.key] = _angle(e)
        elif e.section == "table":
            pairing = tuple(_pair_key(e, p) for p in _list(e))
        else:
            target = _pair_key(e, e.value)
    if angles:
        needed = {p for pair in pairing for p in pair}
        if not needed <= set(angles):
            raise ConfigError(f"[angles] must define {', '.join(sorted(needed))}")
        gen = CorrelationTable.from_angles(angles, pairing).expectations
        for p, v in gen.items():
            if any(_pair(q)[0] == p for q in exps):
                raise ConfigError(f"pair {''.join(p)} given both by [angles] and [expectations]")
            exps[p] = v
    try:
        table = CorrelationTable(exps, joints, marginals)
    except BellError as exc:
        raise ConfigError(str(exc)) from None
    return TableQuery(table, target, pairing)
