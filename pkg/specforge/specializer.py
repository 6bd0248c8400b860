"""Rewrites a module for a configuration: constants, guards, facts, custom code."""

import logging
from collections.abc import Callable, Iterable, Mapping
from dataclasses import dataclass, replace
from typing import Any

from .errors import ConfigError, IRValidationError, SpecializationError
from .instrument import ValueProfile
from .mini_ir import (
    Block,
    Cmp,
    Expr,
    ExprStmt,
    Fact,
    For,
    Function,
    Guard,
    HandlerModule,
    Lit,
    Path,
    Tap,
    SpecAssume,
    SpecCustom,
    SpecRange,
    SpecValue,
    Stmt,
    Var,
    While,
    check_module,
    child_blocks,
    expr_children,
    expr_vars,
    map_stmt_exprs,
    stmt_exprs,
    walk_stmts,
    with_blocks,
    with_children,
)
from .spec_model import (
    AssumeKind,
    Const,
    Custom,
    CustomKind,
    Disabled,
    EnableAssume,
    SpecConfig,
    collect_spec_points,
)

logger = logging.getLogger(__name__)

Generator = Callable[[Function, Mapping[str, Any], ValueProfile | None], Function]


class CustomGeneratorRegistry:
    """Generators keyed by custom kind-name; register once, read many."""

    def __init__(self, generators: Mapping[str, Generator] | None = None):
        self._generators: dict[str, Generator] = {}
        for kind, gen in (generators or {}).items():
            self.register(kind, gen)

    def register(self, kind: str, gen: Generator):
        if kind in self._generators:
            raise SpecializationError(f"custom kind '{kind}' is already registered")
        self._generators[kind] = gen

    def get(self, kind: str) -> Generator:
        try:
            return self._generators[kind]
        except KeyError:
            raise SpecializationError(
                f"no generator registered for custom kind '{kind}'"
            ) from None

    def __contains__(self, kind: str) -> bool:
        return kind in self._generators

    @property
    def kinds(self) -> tuple[str, ...]:
        return tuple(self._generators)


@dataclass(frozen=True, slots=True)
class GuardSite:
    label: str
    function: str
    path: Path


@dataclass(frozen=True)
class SpecializedModule:
    module: HandlerModule
    config: SpecConfig
    guards: tuple[GuardSite, ...] = ()
    assume_facts: tuple[tuple[str, Expr], ...] = ()
    diagnostics: tuple[str, ...] = ()

    @property
    def fact_labels(self) -> frozenset[str]:
        return frozenset(label for label, _ in self.assume_facts)


def collect_guard_sites(m: HandlerModule) -> tuple[GuardSite, ...]:
    """First guard per label, in source order."""
    seen: dict[str, GuardSite] = {}
    for fn in m.functions:
        for path, s in walk_stmts(fn.body):
            if isinstance(s, Guard) and s.label not in seen:
                seen[s.label] = GuardSite(s.label, fn.name, path)
    return tuple(seen.values())


def guard_labels(m: HandlerModule) -> frozenset[str]:
    return frozenset(
        s.label
        for fn in m.functions
        for _, s in walk_stmts(fn.body)
        if isinstance(s, Guard)
    )


def _stmt_vars(s: Stmt) -> set[str]:
    return {v for e in stmt_exprs(s) for v in expr_vars(e)}


def _tap_for(node: SpecValue, inner: Expr, every_k: int) -> Tap:
    if isinstance(node, SpecRange):
        return Tap(node.label, every_k, "hist", node.lo, node.hi, inner)
    return Tap(node.label, every_k, "freq", 0, 0, inner)


class _Rewriter:
    """Rewrites the annotations whose labels are in `touched`; leaves the rest."""

    def __init__(self, config: SpecConfig, touched: frozenset[str]):
        self.config = config
        self.touched = touched
        self.facts: list[tuple[str, Expr]] = []

    def function(self, fn: Function) -> Function:
        return replace(fn, body=self.block(fn.body, fn))

    def block(self, block: Block, fn: Function) -> Block:
        out: list[Stmt] = []
        for s in block:
            out.extend(self.stmt(s, fn))
        return tuple(out)

    def stmt(self, s: Stmt, fn: Function) -> list[Stmt]:
        match s:
            case SpecAssume(label=label, pred=pred) if label in self.touched:
                pre: list[Stmt] = []
                pred = self.expr(pred, pre)
                d = self.config.decision(label)
                if isinstance(d, EnableAssume):
                    self.facts.append((label, pred))
                    cls = Guard if self.config.guard_enabled(label) else Fact
                    return [*pre, cls(label, pred)]
                return pre
            case SpecCustom(label=label) if label in self.touched:
                every_k = self.config.instrument.get(label)
                if every_k and fn.params:
                    key = Var(fn.params[0].name)
                    return [ExprStmt(Tap(label, every_k, "freq", 0, 0, key))]
                return []
            case While(cond=cond, body=body):
                pre = []
                cond = self.expr(cond, pre)
                body = self.block(body, fn) + tuple(pre)
                return [*pre, While(cond, body)]
            case For(var=var, lo=lo, hi=hi, step=step, body=body):
                # hi is re-evaluated per test, so its checks repeat after each iteration
                pre, hi_pre = [], []
                lo = self.expr(lo, pre)
                step = self.expr(step, pre)
                hi = self.expr(hi, hi_pre)
                if any(var in _stmt_vars(p) for p in hi_pre):
                    raise SpecializationError(
                        f"guarded point in the bound of loop '{var}' "
                        "depends on the loop variable"
                    )
                body = self.block(body, fn) + tuple(hi_pre)
                return [*pre, *hi_pre, For(var, lo, hi, step, body)]
        pre = []
        s = map_stmt_exprs(s, lambda e: self.expr(e, pre))
        blocks = child_blocks(s)
        if blocks:
            s = with_blocks(s, tuple(self.block(b, fn) for _, b in blocks))
        return [*pre, s]

    def expr(self, e: Expr, pre: list[Stmt]) -> Expr:
        children = expr_children(e)
        if children:
            e = with_children(e, tuple(self.expr(c, pre) for c in children))
        if not isinstance(e, SpecValue) or e.label not in self.touched:
            return e
        inner = e.expr
        every_k = self.config.instrument.get(e.label)
        match self.config.decision(e.label):
            case Const(value=v):
                if every_k:
                    pre.append(ExprStmt(_tap_for(e, inner, every_k)))
                if self.config.guard_enabled(e.label):
                    pre.append(Guard(e.label, Cmp("eq", inner, Lit(v))))
                return Lit(v)
            case Disabled():
                return _tap_for(e, inner, every_k) if every_k else inner
        raise ConfigError(f"'{e.label}': invalid decision for a value point")


def _apply_customs(
    fn: Function,
    config: SpecConfig,
    registry: CustomGeneratorRegistry,
    profiles: Mapping[str, ValueProfile],
) -> Function:
    applied: set[str] = set()
    while True:
        pending = [
            s
            for s in fn.body
            if isinstance(s, SpecCustom)
            and s.label not in applied
            and isinstance(config.decision(s.label), Custom)
        ]
        if not pending:
            return fn
        point = pending[0]
        applied.add(point.label)
        generator = registry.get(point.kind)
        target = replace(fn, body=tuple(s for s in fn.body if s is not point))
        params = config.decision(point.label).as_dict()
        result = generator(target, params, profiles.get(point.label))
        if (result.name, result.params, result.ret) != (fn.name, fn.params, fn.ret):
            raise SpecializationError(
                f"generator '{point.kind}' changed the signature of '{fn.name}'"
            )
        kept = [
            s for s in target.body if isinstance(s, SpecCustom) and s not in result.body
        ]
        fn = replace(result, body=tuple(kept) + result.body)
        logger.debug(
            "custom point '%s' expanded by '%s' in %s", point.label, point.kind, fn.name
        )


def _assume_instrument_error(label: str) -> SpecializationError:
    return SpecializationError(f"instrumenting assume point '{label}' is not supported")


def specialize(
    m: HandlerModule,
    c: SpecConfig,
    reg: CustomGeneratorRegistry | None = None,
    profiles: Mapping[str, ValueProfile] | None = None,
) -> SpecializedModule:
    """Rewrite `m` for `c`. Labels without a decision are treated as Disabled."""
    space = collect_spec_points(m)
    space.validate(c)
    reg = reg or CustomGeneratorRegistry()
    profiles = profiles or {}
    for label in c.instrument:
        if isinstance(space.point(label).kind, AssumeKind):
            raise _assume_instrument_error(label)
    for point in space:
        decided = isinstance(c.decision(point.label), Custom)
        if isinstance(point.kind, CustomKind) and decided:
            reg.get(point.kind.name)

    functions = []
    for fn in m.functions:
        functions.append(_apply_customs(fn, c, reg, profiles))
    customized = m.with_functions(tuple(functions))

    # generators may introduce annotations of their own; every one is decided
    touched = frozenset(collect_spec_points(customized).labels)
    rewriter = _Rewriter(c, touched)
    module = customized.with_functions(
        tuple(rewriter.function(f) for f in customized.functions)
    )
    try:
        check_module(module)
    except IRValidationError as err:
        raise SpecializationError(f"specialized module is invalid: {err}") from err
    sites = collect_guard_sites(module)
    return SpecializedModule(module, c, sites, tuple(rewriter.facts))


def instrument(
    m: HandlerModule, labels: Iterable[str], every_k: int | Mapping[str, int]
) -> HandlerModule:
    """Inject taps at the listed points, leaving every other annotation untouched."""
    labels = list(labels)
    space = collect_spec_points(m)
    ks = every_k if isinstance(every_k, Mapping) else dict.fromkeys(labels, every_k)
    for label in labels:
        point = space.point(label)
        if isinstance(point.kind, AssumeKind):
            raise _assume_instrument_error(label)
        if ks.get(label, 0) < 1:
            raise ConfigError(f"instrumentation of '{label}' needs every_k >= 1")
    config = SpecConfig(instrument={label: ks[label] for label in labels})
    rewriter = _Rewriter(config, frozenset(labels))
    return m.with_functions(tuple(rewriter.function(f) for f in m.functions))

