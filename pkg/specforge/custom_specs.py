"""Developer-defined generators: memoized fast paths and nested-if prefix lookup."""

import logging
from collections.abc import Callable, Iterable, Mapping, Sequence
from dataclasses import replace
from typing import Any, NamedTuple

from .constants import LPM_KEY_BITS, LPM_NO_MATCH
from .errors import RuleError, SpecializationError
from .instrument import ValueProfile
from .mini_ir import (
    Assign,
    BinOp,
    Cmp,
    Function,
    If,
    Let,
    Lit,
    Param,
    Return,
    Stmt,
    Value,
    Var,
)
from .specializer import Generator

logger = logging.getLogger(__name__)

FASTPATH_KIND = "fastpath"
KEY_MASK = (1 << LPM_KEY_BITS) - 1


# -- fast path -----------------------------------------------------------------------


def _fastpath_key(target: Function) -> str:
    name, params = target.name, target.params
    if len(params) != 1 or params[0].type != "int":
        raise SpecializationError(
            f"fast path needs a single int parameter; '{name}' has {len(params)}"
        )
    if target.ret not in ("int", "float"):
        raise SpecializationError(
            f"fast path needs a scalar result; '{name}' returns {target.ret}"
        )
    return target.params[0].name


def gen_fastpath(
    pairs: Sequence[tuple[int, Value]], n: int, target: Function
) -> Function:
    """Prefix `target` with checks returning memoized outputs of the first `n` pairs.

    Each check returns on a hit; inputs outside the chain fall through to the
    original body and behave exactly as before.
    """
    if n < 0:
        raise SpecializationError("fast path size must be >= 0")
    if n == 0:
        return target
    key = _fastpath_key(target)
    outputs: dict[int, Value] = {}
    for k, v in pairs:
        if k in outputs and outputs[k] != v:
            raise SpecializationError(
                f"conflicting outputs for key {k}: {outputs[k]} and {v}; "
                "target is not pure"
            )
        outputs.setdefault(k, v)
    arms = list(outputs.items())[:n]
    if not arms:
        return target
    checks = tuple(If(Cmp("eq", Var(key), Lit(k)), (Return(Lit(v)),)) for k, v in arms)
    logger.debug("fast path for %s: %d arms", target.name, len(arms))
    return replace(target, body=checks + target.body)


def fastpath_generator(
    evaluate: Callable[[Function, Sequence[Value]], Value],
) -> Generator:
    """Generator memoizing the top-n profiled keys; `evaluate` computes true outputs."""

    def generate(
        target: Function, params: Mapping[str, Any], profile: ValueProfile | None
    ) -> Function:
        n = int(params.get("n", 0))
        if n <= 0 or profile is None or profile.is_histogram:
            return target
        _fastpath_key(target)
        keys = [k for k, _ in profile.top_n(n)]
        pairs = [(k, evaluate(target, [k])) for k in keys]
        return gen_fastpath(pairs, n, target)

    return generate


# -- nested-if longest prefix match ----------------------------------------------------


class LpmRule(NamedTuple):
    prefix: int
    length: int
    value: int

    @property
    def mask(self) -> int:
        return prefix_mask(self.length)

    def matches(self, addr: int) -> bool:
        return addr & self.mask == self.prefix


def prefix_mask(length: int) -> int:
    return KEY_MASK ^ ((1 << (LPM_KEY_BITS - length)) - 1)


def check_rules(rules: Iterable[LpmRule]) -> list[LpmRule]:
    seen = set()
    checked = []
    for r in rules:
        if not 0 <= r.length <= LPM_KEY_BITS:
            raise RuleError(f"prefix length {r.length} outside [0, {LPM_KEY_BITS}]")
        if not 0 <= r.prefix <= KEY_MASK:
            raise RuleError(f"prefix {r.prefix} is not a {LPM_KEY_BITS}-bit value")
        if r.prefix & ~prefix_mask(r.length):
            raise RuleError(
                f"prefix {r.prefix:#010x}/{r.length} has bits set beyond its length"
            )
        if (r.prefix, r.length) in seen:
            raise RuleError(f"duplicate rule {r.prefix:#010x}/{r.length}")
        seen.add((r.prefix, r.length))
        checked.append(LpmRule(*r))
    return checked


def _contains(outer: LpmRule, inner: LpmRule) -> bool:
    return outer.length < inner.length and inner.prefix & outer.mask == outer.prefix


def rule_tree(rules: Sequence[LpmRule]) -> dict[LpmRule | None, list[LpmRule]]:
    """Children of each rule under its nearest enclosing rule; None keys the roots."""
    ordered = sorted(rules, key=lambda r: (r.length, r.prefix))
    children: dict[LpmRule | None, list[LpmRule]] = {None: []}
    placed: list[LpmRule] = []
    for r in ordered:
        parent = None
        # longest enclosing rule placed so far; shorter rules come first
        for candidate in reversed(placed):
            if _contains(candidate, r):
                parent = candidate
                break
        children.setdefault(parent, []).append(r)
        children[r] = []
        placed.append(r)
    return children


def gen_lpm_nested_if(
    rules: Iterable[LpmRule], name: str = "lookup", param: str = "addr"
) -> Function:
    """Lookup function with every rule embedded as a prefix check.

    Checks start at the least specific rules; a match records its value and
    descends into the more specific rules it encloses, so the deepest match
    wins. Siblings never overlap, so at most one of them matches.
    """
    rules = check_rules(rules)
    tree = rule_tree(rules)
    result = "best"

    def chain(siblings: list[LpmRule]) -> tuple[Stmt, ...]:
        checks = []
        for r in siblings:
            cond = Cmp("eq", BinOp("and", Var(param), Lit(r.mask)), Lit(r.prefix))
            checks.append(If(cond, (Assign(result, Lit(r.value)), *chain(tree[r]))))
        return tuple(checks)

    body = (Let(result, Lit(LPM_NO_MATCH)), *chain(tree[None]), Return(Var(result)))
    return Function(name, (Param(param, "int"),), "int", body)
