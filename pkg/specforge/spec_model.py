"""Specialization points, the specialization space and configurations."""

import hashlib
import itertools
import re
from collections.abc import Iterable, Iterator, Mapping
from dataclasses import dataclass, field, replace
from types import MappingProxyType
from typing import Any, TypeAlias

from .errors import ConfigError
from .instrument import ValueProfile
from .mini_ir import (
    HandlerModule,
    Path,
    SpecAssume,
    SpecCustom,
    SpecEnum,
    SpecGeneric,
    SpecRange,
    SpecValue,
    stmt_exprs,
    walk_expr,
    walk_stmts,
)

# -- point kinds ----------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class EnumKind:
    values: tuple[int, ...]


@dataclass(frozen=True, slots=True)
class RangeKind:
    lo: int
    hi: int


@dataclass(frozen=True, slots=True)
class GenericKind:
    pass


@dataclass(frozen=True, slots=True)
class AssumeKind:
    pass


@dataclass(frozen=True, slots=True)
class CustomKind:
    name: str


PointKind: TypeAlias = EnumKind | RangeKind | GenericKind | AssumeKind | CustomKind


def kind_name(kind: PointKind) -> str:
    return {
        EnumKind: "enum",
        RangeKind: "range",
        GenericKind: "generic",
        AssumeKind: "assume",
        CustomKind: "custom",
    }[type(kind)]


@dataclass(frozen=True, slots=True)
class SpecPoint:
    label: str
    kind: PointKind
    function: str
    path: Path

    def __post_init__(self):
        match self.kind:
            case EnumKind(values=values):
                if not values or len(set(values)) != len(values):
                    message = f"enum point '{self.label}' needs distinct values"
                    raise ConfigError(message)
            case RangeKind(lo=lo, hi=hi) if lo > hi:
                raise ConfigError(f"range point '{self.label}' has lo > hi")

    @property
    def is_value_point(self) -> bool:
        return isinstance(self.kind, (EnumKind, RangeKind, GenericKind))


# -- decisions --------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class Const:
    value: int


@dataclass(frozen=True, slots=True)
class EnableAssume:
    pass


@dataclass(frozen=True, slots=True)
class Custom:
    params: tuple[tuple[str, Any], ...] = ()

    @classmethod
    def of(cls, **params) -> "Custom":
        return cls(tuple(sorted(params.items())))

    def get(self, key: str, default=None):
        return dict(self.params).get(key, default)

    def as_dict(self) -> dict[str, Any]:
        return dict(self.params)


@dataclass(frozen=True, slots=True)
class Disabled:
    pass


Decision: TypeAlias = Const | EnableAssume | Custom | Disabled

DISABLED = Disabled()
ENABLE_ASSUME = EnableAssume()


def format_decision(d: Decision) -> str:
    match d:
        case Const(value=v):
            return str(v)
        case EnableAssume():
            return "assume"
        case Custom(params=()):
            return "on"
        case Custom(params=params):
            return "custom(" + ",".join(f"{k}={v}" for k, v in params) + ")"
    return "off"


# -- configurations ---------------------------------------------------------------


@dataclass(frozen=True)
class SpecConfig:
    """Decisions per point label plus per-label guard and instrumentation flags.

    Labels without a decision are Disabled. Guards default to on; instrument
    maps a label to its sampling interval k.
    """

    decisions: Mapping[str, Decision] = field(default_factory=dict)
    guards: Mapping[str, bool] = field(default_factory=dict)
    instrument: Mapping[str, int] = field(default_factory=dict)
    default_guard: bool = True

    def __post_init__(self):
        decisions = {
            label: d
            for label, d in self.decisions.items()
            if not isinstance(d, Disabled)
        }
        object.__setattr__(self, "decisions", MappingProxyType(decisions))
        object.__setattr__(self, "guards", MappingProxyType(dict(self.guards)))
        object.__setattr__(self, "instrument", MappingProxyType(dict(self.instrument)))
        for label, k in self.instrument.items():
            if k < 1:
                raise ConfigError(f"instrumentation of '{label}' needs every_k >= 1")

    def __eq__(self, other):
        if not isinstance(other, SpecConfig):
            return NotImplemented
        return self.identity == other.identity

    def __hash__(self):
        return hash(self.config_id)

    def decision(self, label: str) -> Decision:
        return self.decisions.get(label, DISABLED)

    def guard_enabled(self, label: str) -> bool:
        return self.guards.get(label, self.default_guard)

    @property
    def text(self) -> str:
        """Canonical one-line form, e.g. ``B=8;NmB=assume;fp=custom(n=8)``."""
        items = sorted(self.decisions.items())
        return ";".join(f"{label}={format_decision(d)}" for label, d in items)

    @property
    def identity(self) -> str:
        """`text` plus the guard and tap flags that change the built code."""
        parts = [self.text]
        unguarded = sorted(
            label
            for label, d in self.decisions.items()
            if isinstance(d, (Const, EnableAssume)) and not self.guard_enabled(label)
        )
        if unguarded:
            parts.append("unguarded=" + ",".join(unguarded))
        if self.instrument:
            items = sorted(self.instrument.items())
            taps = ",".join(f"{label}/{k}" for label, k in items)
            parts.append("instrument=" + taps)
        return "|".join(parts)

    @property
    def config_id(self) -> str:
        return hashlib.sha256(self.identity.encode()).hexdigest()[:12]

    def merged(self, other: "SpecConfig") -> "SpecConfig":
        clash = sorted(set(self.decisions) & set(other.decisions))
        if clash:
            raise ConfigError(
                f"label collision: '{clash[0]}' decided by both configurations"
            )
        return SpecConfig(
            {**self.decisions, **other.decisions},
            {**self.guards, **other.guards},
            {**self.instrument, **other.instrument},
            self.default_guard and other.default_guard,
        )

    def with_decisions(self, **decisions: Decision) -> "SpecConfig":
        return replace(self, decisions={**self.decisions, **decisions})

    def with_guards(
        self, enabled: bool, labels: Iterable[str] | None = None
    ) -> "SpecConfig":
        if labels is None:
            return replace(self, guards={}, default_guard=enabled)
        guards = {**self.guards, **dict.fromkeys(labels, enabled)}
        return replace(self, guards=guards)

    def with_instrument(self, labels: Iterable[str], every_k: int) -> "SpecConfig":
        instrument = {**self.instrument, **dict.fromkeys(labels, every_k)}
        return replace(self, instrument=instrument)

    def __repr__(self):
        return f"SpecConfig({self.text or '<generic>'})"


EMPTY_CONFIG = SpecConfig()


# -- space ------------------------------------------------------------------------


@dataclass(frozen=True)
class SpecSpace:
    points: tuple[SpecPoint, ...] = ()
    profiles: Mapping[str, ValueProfile] = field(default_factory=dict)

    def __post_init__(self):
        labels = [p.label for p in self.points]
        if len(set(labels)) != len(labels):
            raise ConfigError("specialization point labels must be unique")

    def __iter__(self) -> Iterator[SpecPoint]:
        return iter(self.points)

    def __len__(self) -> int:
        return len(self.points)

    def __contains__(self, label: str) -> bool:
        return any(p.label == label for p in self.points)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(p.label for p in self.points)

    def point(self, label: str) -> SpecPoint:
        for p in self.points:
            if p.label == label:
                return p
        raise ConfigError(f"unknown specialization point '{label}'")

    def subset(self, labels: Iterable[str]) -> "SpecSpace":
        wanted = set(labels)
        for label in wanted:
            self.point(label)
        return SpecSpace(
            tuple(p for p in self.points if p.label in wanted),
            {k: v for k, v in self.profiles.items() if k in wanted},
        )

    def with_profiles(self, profiles: Mapping[str, ValueProfile]) -> "SpecSpace":
        return replace(self, profiles={k: v for k, v in profiles.items() if k in self})

    def validate(self, config: SpecConfig) -> SpecConfig:
        for label, d in config.decisions.items():
            check_decision(self.point(label), d)
        for label in list(config.guards) + list(config.instrument):
            self.point(label)
        return config

    def config(self, **decisions: Decision | int | str) -> SpecConfig:
        """Build and validate a config; ints become Const, strings are parsed."""
        built = {}
        for label, value in decisions.items():
            if isinstance(value, int) and not isinstance(value, bool):
                built[label] = Const(value)
            elif isinstance(value, str):
                built[label] = parse_decision(self.point(label), value)
            else:
                built[label] = value
        return self.validate(SpecConfig(built))


def check_decision(point: SpecPoint, d: Decision):
    label = point.label
    match point.kind, d:
        case _, Disabled():
            return
        case EnumKind(values=values), Const(value=v):
            if v not in values:
                raise ConfigError(f"'{label}': {v} is not one of {list(values)}")
        case RangeKind(lo=lo, hi=hi), Const(value=v):
            if not lo <= v <= hi:
                raise ConfigError(f"'{label}': {v} is outside [{lo}, {hi}]")
        case GenericKind(), Const():
            return
        case AssumeKind(), EnableAssume():
            return
        case CustomKind(), Custom():
            return
        case _:
            kind = kind_name(point.kind)
            raise ConfigError(
                f"'{label}': {format_decision(d)} is not valid for a {kind} point"
            )


_CUSTOM = re.compile(r"custom\((?P<params>[^)]*)\)$")


def _param_value(text: str):
    try:
        return int(text)
    except ValueError:
        return text


def parse_decision(point: SpecPoint, text: str) -> Decision:
    text = text.strip()
    if text in ("off", "disabled"):
        return DISABLED
    match point.kind:
        case AssumeKind() if text in ("assume", "on"):
            return ENABLE_ASSUME
        case CustomKind() if text == "on":
            return Custom()
        case CustomKind() if m := _CUSTOM.match(text):
            params = {}
            for item in filter(None, (p.strip() for p in m.group("params").split(","))):
                key, sep, value = item.partition("=")
                if not sep or not key:
                    raise ConfigError(
                        f"'{point.label}': invalid custom parameter '{item}'"
                    )
                params[key.strip()] = _param_value(value.strip())
            return Custom.of(**params)
        case EnumKind() | RangeKind() | GenericKind():
            try:
                d = Const(int(text))
            except ValueError:
                raise ConfigError(f"'{point.label}': expected an integer, got '{text}'")
            check_decision(point, d)
            return d
    kind = kind_name(point.kind)
    raise ConfigError(
        f"'{point.label}': invalid decision '{text}' for a {kind} point"
    )


def split_config_text(text: str) -> dict[str, str]:
    """Split ``label=value;label2=value2`` into a mapping of uninterpreted values."""
    pairs: dict[str, str] = {}
    for item in filter(None, (p.strip() for p in text.split(";"))):
        label, sep, value = item.partition("=")
        label = label.strip()
        if not sep or not label or not value.strip():
            raise ConfigError(f"invalid decision '{item}', expected label=value")
        if label in pairs:
            raise ConfigError(f"label '{label}' decided twice")
        pairs[label] = value.strip()
    return pairs


def parse_config(text: str, space: SpecSpace, default_guard: bool = True) -> SpecConfig:
    decisions = {
        label: parse_decision(space.point(label), value)
        for label, value in split_config_text(text).items()
    }
    return space.validate(SpecConfig(decisions, default_guard=default_guard))


# -- operations -------------------------------------------------------------------


def _point_kind(node) -> PointKind:
    match node:
        case SpecEnum(values=values):
            return EnumKind(values)
        case SpecRange(lo=lo, hi=hi):
            return RangeKind(lo, hi)
        case SpecGeneric():
            return GenericKind()
        case SpecAssume():
            return AssumeKind()
        case SpecCustom(kind=kind):
            return CustomKind(kind)
    raise TypeError(node)


def collect_spec_points(m: HandlerModule) -> SpecSpace:
    """One point per annotation, in source order."""
    points = []
    for fn in m.functions:
        for path, s in walk_stmts(fn.body):
            if isinstance(s, (SpecAssume, SpecCustom)):
                points.append(SpecPoint(s.label, _point_kind(s), fn.name, path))
            for e in stmt_exprs(s):
                for node in walk_expr(e):
                    if isinstance(node, SpecValue):
                        point = SpecPoint(node.label, _point_kind(node), fn.name, path)
                        points.append(point)
    return SpecSpace(tuple(points))


def range_samples_of(lo: int, hi: int, n: int) -> list[int]:
    """`n` evenly spaced values across [lo, hi], endpoints included, deduplicated."""
    if n == 1:
        return [lo]
    values = [lo + (hi - lo) * i // (n - 1) for i in range(n)]
    return list(dict.fromkeys(values))


def enumerate_configs(
    space: SpecSpace,
    generic_values: Mapping[str, Iterable[int]] | None = None,
    range_samples: int = 1,
) -> list[SpecConfig]:
    """Cartesian product of per-point choices; the first point varies slowest."""
    if range_samples < 1:
        raise ConfigError("range_samples must be >= 1")
    generic_values = dict(generic_values or {})
    for label, values in generic_values.items():
        point = space.point(label)
        if not isinstance(point.kind, (GenericKind, RangeKind)):
            kind = kind_name(point.kind)
            raise ConfigError(f"generic values given for '{label}', a {kind} point")
        for v in values:
            check_decision(point, Const(v))

    labels, choices = [], []
    for p in space:
        match p.kind:
            case EnumKind(values=values):
                options = [Const(v) for v in values]
            case RangeKind(lo=lo, hi=hi):
                sampled = generic_values.get(p.label) or range_samples_of(
                    lo, hi, range_samples
                )
                options = [Const(v) for v in sampled]
            case GenericKind():
                options = [Const(v) for v in generic_values.get(p.label, ())]
            case AssumeKind():
                options = [ENABLE_ASSUME]
            case _:
                continue
        labels.append(p.label)
        choices.append(options + [DISABLED])

    configs = []
    for combo in itertools.product(*choices):
        configs.append(SpecConfig(dict(zip(labels, combo))))
    return configs


def cartesian(a: list[SpecConfig], b: list[SpecConfig]) -> list[SpecConfig]:
    return [x.merged(y) for x in a for y in b]
