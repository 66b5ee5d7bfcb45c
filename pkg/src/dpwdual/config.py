"""Pipeline configuration: a strict TOML schema with documented defaults.

Complex numbers may be written as numbers, as [re, im] pairs or as strings
such as "1-2j".  Polynomials are coefficient lists, lowest degree first.
"""
from __future__ import annotations

import dataclasses
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib as toml
else:
    import tomli as toml


class ConfigError(ValueError):
    pass


TARGETS = ("compact", "noncompact")


def parse_complex(v: Any, where: str) -> complex:
    if isinstance(v, bool):
        raise ConfigError(f"{where}: expected a number, got {v!r}")
    if isinstance(v, (int, float)):
        return complex(v)
    if isinstance(v, str):
        try:
            return complex(v.replace(" ", "").replace("i", "j"))
        except ValueError:
            raise ConfigError(f"{where}: cannot read {v!r} as a complex number") from None
    if isinstance(v, list) and len(v) == 2 and all(isinstance(t, (int, float)) for t in v):
        return complex(v[0], v[1])
    raise ConfigError(f"{where}: expected a number, [re, im] or a string, got {v!r}")


def _coeffs(v: Any, where: str) -> tuple[complex, ...]:
    if not isinstance(v, list) or not v:
        raise ConfigError(f"{where}: expected a non-empty coefficient list")
    return tuple(parse_complex(c, f"{where}[{i}]") for i, c in enumerate(v))


def _encode(c: complex):
    return [c.real, c.imag]


@dataclass(frozen=True)
class CustomEntry:
    row: int
    col: int
    num: tuple[complex, ...]
    den: tuple[complex, ...] = (1.0,)


@dataclass(frozen=True)
class PotentialConfig:
    kind: str = "example"
    f2: tuple[complex, ...] = (0.0, 1.0)
    f4: tuple[complex, ...] = (0.0, 0.0, 1.0)
    f2_den: tuple[complex, ...] = (1.0,)
    f4_den: tuple[complex, ...] = (1.0,)
    entries: tuple[CustomEntry, ...] = ()

    def to_dict(self) -> dict:
        enc = lambda t: [_encode(c) for c in t]  # noqa: E731
        if self.kind == "example":
            return {"kind": "example", "f2": enc(self.f2), "f4": enc(self.f4),
                    "f2_den": enc(self.f2_den), "f4_den": enc(self.f4_den)}
        return {"kind": "custom", "entries": [
            {"row": e.row, "col": e.col, "num": enc(e.num), "den": enc(e.den)} for e in self.entries]}


@dataclass(frozen=True)
class SpaceConfig:
    n: int = 8
    n_neg: int = 1
    k_dim: int = 4


@dataclass(frozen=True)
class GridConfig:
    center: complex = 0.1 + 0.1j
    h: float = 0.02
    nx: int = 50
    ny: int = 50
    base: complex = 0.0


@dataclass(frozen=True)
class LoopConfig:
    window: int = 8
    samples: int = 32


@dataclass(frozen=True)
class Tolerances:
    embedding: float = 1e-6
    potential: float = 1e-6
    roundtrip: float = 1e-6
    structure: float = 1e-7
    reality: float = 1e-8
    twist: float = 1e-8
    tail: float = 1e-8
    flatness: float = 1e-5
    uhlenbeck: float = 1e-5
    order_ratio_min: float = 3.2
    harmonic: float = 1e-6
    conformal: float = 1e-8


@dataclass(frozen=True)
class PipelineConfig:
    potential: PotentialConfig = field(default_factory=PotentialConfig)
    space: SpaceConfig = field(default_factory=SpaceConfig)
    grid: GridConfig = field(default_factory=GridConfig)
    loop: LoopConfig = field(default_factory=LoopConfig)
    targets: tuple[str, ...] = TARGETS
    lambdas: tuple[complex, ...] = (1.0, 1j, -1.0)
    tolerances: Tolerances = field(default_factory=Tolerances)
    out: str = "out"

    def __post_init__(self):
        g, lp = self.grid, self.loop
        if not g.h > 0:
            raise ConfigError("grid.h must be positive")
        if g.nx < 1 or g.ny < 1:
            raise ConfigError("grid.nx and grid.ny must be positive")
        if lp.window < 1:
            raise ConfigError("loop.window must be at least 1")
        if lp.samples < 2 * lp.window + 1:
            raise ConfigError(f"loop.samples = {lp.samples} aliases the degree window "
                              f"[-{lp.window}, {lp.window}]: need samples >= 2*window+1 = "
                              f"{2 * lp.window + 1}")
        bad = [t for t in self.targets if t not in TARGETS]
        if bad or not self.targets:
            raise ConfigError(f"targets must be a non-empty subset of {TARGETS}, got {self.targets}")
        for lam in self.lambdas:
            if abs(abs(lam) - 1) > 1e-12:
                raise ConfigError(f"surface lambda {lam} is not on the unit circle")

    def with_overrides(self, **kw) -> PipelineConfig:
        """Replace nested fields: grid_nx=..., loop_window=..., targets=..., out=..."""
        parts: dict[str, dict] = {}
        top = {}
        for k, v in kw.items():
            if v is None:
                continue
            sect, _, name = k.partition("_")
            if sect in ("grid", "loop") and name:
                parts.setdefault(sect, {})[name] = v
            else:
                top[k] = v
        for sect, vals in parts.items():
            top[sect] = dataclasses.replace(getattr(self, sect), **vals)
        return dataclasses.replace(self, **top)

    def to_dict(self) -> dict:
        g = self.grid
        return {
            "potential": self.potential.to_dict(),
            "space": dataclasses.asdict(self.space),
            "grid": {"center": _encode(g.center), "h": g.h, "nx": g.nx, "ny": g.ny,
                     "base": _encode(g.base)},
            "loop": dataclasses.asdict(self.loop),
            "targets": list(self.targets),
            "lambdas": [_encode(c) for c in self.lambdas],
            "tolerances": dataclasses.asdict(self.tolerances),
            "out": self.out,
        }


def _check_keys(d: dict, allowed: set[str], where: str) -> None:
    extra = sorted(set(d) - allowed)
    if extra:
        raise ConfigError(f"unknown key {where + '.' if where else ''}{extra[0]}"
                          f" (allowed: {', '.join(sorted(allowed))})")


def _table(d: dict, key: str) -> dict:
    v = d.get(key, {})
    if not isinstance(v, dict):
        raise ConfigError(f"[{key}] must be a table")
    return v


def _typed(v, typ, where):
    if typ is int:
        if isinstance(v, bool) or not isinstance(v, int):
            raise ConfigError(f"{where}: expected an integer, got {v!r}")
        return v
    if typ is float:
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"{where}: expected a number, got {v!r}")
        return float(v)
    if typ is str:
        if not isinstance(v, str):
            raise ConfigError(f"{where}: expected a string, got {v!r}")
        return v
    raise TypeError(typ)


def _potential(d: dict) -> PotentialConfig:
    _check_keys(d, {"kind", "f2", "f4", "f2_den", "f4_den", "entries"}, "potential")
    kind = _typed(d.get("kind", "example"), str, "potential.kind")
    if kind == "example":
        if "entries" in d:
            raise ConfigError("potential.entries belongs to kind = \"custom\"")
        kw = {k: _coeffs(d[k], f"potential.{k}") for k in ("f2", "f4", "f2_den", "f4_den") if k in d}
        return PotentialConfig("example", **kw)
    if kind == "custom":
        extra = {"f2", "f4", "f2_den", "f4_den"} & set(d)
        if extra:
            raise ConfigError(f"potential.{sorted(extra)[0]} belongs to kind = \"example\"")
        raw = d.get("entries", [])
        if not isinstance(raw, list):
            raise ConfigError("potential.entries must be an array of tables")
        entries = []
        for i, e in enumerate(raw):
            where = f"potential.entries[{i}]"
            if not isinstance(e, dict):
                raise ConfigError(f"{where} must be a table")
            _check_keys(e, {"row", "col", "num", "den"}, where)
            for k in ("row", "col", "num"):
                if k not in e:
                    raise ConfigError(f"{where}: missing key {k}")
            entries.append(CustomEntry(_typed(e["row"], int, f"{where}.row"),
                                       _typed(e["col"], int, f"{where}.col"),
                                       _coeffs(e["num"], f"{where}.num"),
                                       _coeffs(e.get("den", [1.0]), f"{where}.den")))
        return PotentialConfig("custom", entries=tuple(entries))
    raise ConfigError(f"potential.kind must be \"example\" or \"custom\", got {kind!r}")


def _simple(cls, d: dict, where: str, complex_keys=()):
    names = {f.name: f for f in dataclasses.fields(cls)}
    _check_keys(d, set(names), where)
    kw = {}
    for k, v in d.items():
        if k in complex_keys:
            kw[k] = parse_complex(v, f"{where}.{k}")
        else:
            default = names[k].default
            kw[k] = _typed(v, type(default), f"{where}.{k}")
    return cls(**kw)


def config_from_dict(d: dict) -> PipelineConfig:
    _check_keys(d, {"potential", "space", "grid", "loop", "run", "tolerances", "output"}, "")
    if "potential" not in d:
        raise ConfigError("missing [potential] table")
    pot = _potential(_table(d, "potential"))
    space = _simple(SpaceConfig, _table(d, "space"), "space")
    grid = _simple(GridConfig, _table(d, "grid"), "grid", complex_keys=("center", "base"))
    loop = _simple(LoopConfig, _table(d, "loop"), "loop")
    tol = _simple(Tolerances, _table(d, "tolerances"), "tolerances")
    run = _table(d, "run")
    _check_keys(run, {"target", "lambdas"}, "run")
    targets = TARGETS
    if "target" in run:
        targets = parse_target(_typed(run["target"], str, "run.target"))
    lambdas = (1.0, 1j, -1.0)
    if "lambdas" in run:
        if not isinstance(run["lambdas"], list) or not run["lambdas"]:
            raise ConfigError("run.lambdas must be a non-empty list")
        lambdas = tuple(parse_complex(v, f"run.lambdas[{i}]") for i, v in enumerate(run["lambdas"]))
    output = _table(d, "output")
    _check_keys(output, {"dir"}, "output")
    out = _typed(output.get("dir", "out"), str, "output.dir")
    return PipelineConfig(pot, space, grid, loop, targets, lambdas, tol, out)


def parse_target(t: str) -> tuple[str, ...]:
    if t == "both":
        return TARGETS
    if t in TARGETS:
        return (t,)
    raise ConfigError(f"target must be compact, noncompact or both, got {t!r}")


_LINE = re.compile(r"line (\d+)")


def _duplicate_key(text: str, msg: str) -> str | None:
    m = _LINE.search(msg)
    if not m:
        return None
    lines = text.splitlines()
    ln = int(m.group(1))
    if not 1 <= ln <= len(lines):
        return None
    line = lines[ln - 1].strip()
    if line.startswith("["):
        return line.strip("[] ")
    return line.split("=", 1)[0].strip() or None


def parse_config(path) -> PipelineConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        data = toml.loads(text)
    except toml.TOMLDecodeError as exc:
        msg = str(exc)
        if any(w in msg.lower() for w in ("overwrite", "duplicate", "twice")):
            key = _duplicate_key(text, msg)
            raise ConfigError(f"{path}: duplicate key {key!r} ({msg})") from None
        raise ConfigError(f"{path}: {msg}") from None
    return config_from_dict(data)
