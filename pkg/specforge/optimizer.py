"""Semantics-preserving pass pipeline over specialized modules.

No pass ever removes a guard: folds and unrolls that would discard one are
skipped, and dead-code elimination keeps guards even when unreachable.
"""

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass, field, replace

from .constants import DEFAULT_MAX_GROWTH, DEFAULT_UNROLL_MAX_FACTOR, INT_MAX, INT_MIN
from .errors import ConfigError, IRValidationError, SpecializationError, Trap
from .mini_ir import (
    Assign,
    BinOp,
    Block,
    Call,
    Cmp,
    Do,
    Expr,
    ExprStmt,
    Fact,
    For,
    Function,
    Guard,
    If,
    Let,
    Lit,
    Load,
    Tap,
    Return,
    Stmt,
    Var,
    While,
    assigned_names,
    block_exprs,
    bound_names,
    check_module,
    child_blocks,
    contains_guard,
    count_statements,
    eval_binop,
    eval_cmp,
    expr_vars,
    is_pure,
    map_block_exprs,
    map_expr,
    map_stmt_exprs,
    walk_expr,
    walk_stmts,
    with_blocks,
    wrap,
)
from .specializer import SpecializedModule

logger = logging.getLogger(__name__)

PASS_NAMES = ("const_prop", "branch_fold", "loop_unroll", "dce", "algebraic")
DEFAULT_PASSES = (
    "const_prop",
    "branch_fold",
    "loop_unroll",
    "const_prop",
    "algebraic",
    "dce",
)


@dataclass(frozen=True)
class PassPipeline:
    passes: tuple[str, ...] = ()
    unroll_max_factor: int = DEFAULT_UNROLL_MAX_FACTOR
    max_growth: int = DEFAULT_MAX_GROWTH

    def __post_init__(self):
        object.__setattr__(self, "passes", tuple(self.passes))
        unknown = [p for p in self.passes if p not in PASS_NAMES]
        if unknown:
            choices = ", ".join(PASS_NAMES)
            raise ConfigError(f"unknown pass '{unknown[0]}' (choose from {choices})")
        if self.unroll_max_factor < 0 or self.max_growth < 1:
            raise ConfigError("unroll_max_factor must be >= 0 and max_growth >= 1")

    @classmethod
    def parse(cls, text: str, **options) -> "PassPipeline":
        """``default``, ``none`` or a comma separated list of pass names."""
        text = text.strip()
        if text == "default":
            return cls(DEFAULT_PASSES, **options)
        if text in ("", "none"):
            return cls((), **options)
        return cls(tuple(p.strip() for p in text.split(",") if p.strip()), **options)

    @property
    def text(self) -> str:
        return ",".join(self.passes) or "none"


def default_pipeline(**options) -> PassPipeline:
    return PassPipeline(DEFAULT_PASSES, **options)


@dataclass
class _PassContext:
    scalar_externs: frozenset[str]
    fact_labels: frozenset[str]
    pipeline: PassPipeline
    baseline_size: int
    diagnostics: list[str] = field(default_factory=list)


# -- constant propagation and folding ----------------------------------------------


def fold_binop(op: str, a, b) -> Lit | None:
    try:
        value = eval_binop(op, a, b)
    except Trap:
        return None
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return Lit(value)


def fold_expr(e: Expr, env: dict) -> Expr:
    def fold(n: Expr) -> Expr:
        match n:
            case Var(name=name) if name in env:
                return Lit(env[name])
            case BinOp(op=op, lhs=Lit(value=a), rhs=Lit(value=b)):
                return fold_binop(op, a, b) or n
            case Cmp(op=op, lhs=Lit(value=a), rhs=Lit(value=b)):
                return Lit(eval_cmp(op, a, b))
        return n

    return map_expr(e, fold)


class _ConstProp:
    def __init__(self, ctx: _PassContext):
        self.scalar_externs = ctx.scalar_externs

    def run(self, fn: Function) -> Function:
        return replace(fn, body=self.block(fn.body, {}))

    def block(self, block: Block, env: dict) -> Block:
        return tuple(self.stmt(s, env) for s in block)

    def bind(self, name: str, e: Expr, env: dict):
        if isinstance(e, Lit) and name not in self.scalar_externs:
            env[name] = e.value
        else:
            env.pop(name, None)

    def stmt(self, s: Stmt, env: dict) -> Stmt:
        match s:
            case Let(name=name, expr=e) | Assign(name=name, expr=e):
                e = fold_expr(e, env)
                self.bind(name, e, env)
                return replace(s, expr=e)
            case If(cond=c, then=then, orelse=orelse):
                c = fold_expr(c, env)
                then_env, else_env = dict(env), dict(env)
                then = self.block(then, then_env)
                orelse = self.block(orelse, else_env)
                merged = {
                    k: v
                    for k, v in then_env.items()
                    if k in else_env and _same(else_env[k], v)
                }
                env.clear()
                env.update(merged)
                return If(c, then, orelse)
            case For(var=var, lo=lo, hi=hi, step=step, body=body):
                lo = fold_expr(lo, env)
                step = fold_expr(step, env)
                for name in bound_names(body) | {var}:
                    env.pop(name, None)
                hi = fold_expr(hi, env)
                body = self.block(body, dict(env))
                return For(var, lo, hi, step, body)
            case While(cond=c, body=body):
                for name in bound_names(body):
                    env.pop(name, None)
                c = fold_expr(c, env)
                body = self.block(body, dict(env))
                return While(c, body)
            case Do(body=body):
                return Do(self.block(body, env))
        return map_stmt_exprs(s, lambda e: fold_expr(e, env))


def _same(a, b) -> bool:
    return type(a) is type(b) and a == b


def const_prop(fn: Function, ctx: _PassContext) -> Function:
    return _ConstProp(ctx).run(fn)


# -- algebraic simplification --------------------------------------------------------


def _int_lit(e: Expr, value: int | None = None) -> bool:
    if not isinstance(e, Lit) or type(e.value) is not int:
        return False
    return value is None or e.value == value


def _is_add(e: Expr) -> bool:
    return isinstance(e, BinOp) and e.op == "add"


def simplify(e: Expr) -> Expr:
    if not isinstance(e, BinOp):
        return e
    op, x, y = e.op, e.lhs, e.rhs
    match op:
        case "add" | "or" | "xor":
            if _int_lit(y, 0):
                return x
            if _int_lit(x, 0):
                return y
            if op == "add" and _int_lit(y) and _is_add(x) and _int_lit(x.rhs):
                return BinOp("add", x.lhs, Lit(wrap(x.rhs.value + y.value)))
        case "sub" | "shl" | "shr":
            if _int_lit(y, 0):
                return x
        case "mul":
            if _int_lit(y, 1):
                return x
            if _int_lit(x, 1):
                return y
            if (_int_lit(y, 0) and is_pure(x)) or (_int_lit(x, 0) and is_pure(y)):
                return Lit(0)
        case "div":
            if _int_lit(y, 1):
                return x
        case "mod":
            if _int_lit(y, 1) and is_pure(x):
                return Lit(0)
        case "and":
            if (_int_lit(y, 0) and is_pure(x)) or (_int_lit(x, 0) and is_pure(y)):
                return Lit(0)
            if _int_lit(y, -1):
                return x
            if _int_lit(x, -1):
                return y
    return e


def algebraic(fn: Function, ctx: _PassContext) -> Function:
    return replace(fn, body=map_block_exprs(fn.body, simplify))


# -- branch folding ------------------------------------------------------------------

_NEGATED = {"eq": "ne", "ne": "eq"}


def _negate(e: Expr) -> Expr | None:
    if isinstance(e, Cmp) and e.op in _NEGATED:
        return Cmp(_NEGATED[e.op], e.lhs, e.rhs)
    return None


class _BranchFold:
    def __init__(self, fn: Function, ctx: _PassContext):
        self.fact_labels = ctx.fact_labels
        lets: dict[str, int] = {}
        for _, s in walk_stmts(fn.body):
            if isinstance(s, Let):
                lets[s.name] = lets.get(s.name, 0) + 1
        rebound = {name for name, n in lets.items() if n > 1}
        self.unstable = assigned_names(fn.body) | rebound | set(ctx.scalar_externs)

    def stable(self, cond: Expr) -> bool:
        if any(isinstance(n, (Load, Call, Tap)) for n in walk_expr(cond)):
            return False
        return not (expr_vars(cond) & self.unstable)

    def decide(self, cond: Expr, facts: list[Expr]) -> bool | None:
        if isinstance(cond, Lit):
            return cond.value != 0
        negated = _negate(cond)
        for fact in facts:
            if cond == fact:
                return True
            if negated is not None and negated == fact:
                return False
        return None

    def run(self, fn: Function) -> Function:
        return replace(fn, body=self.block(fn.body, []))

    def block(self, block: Block, facts: list[Expr]) -> Block:
        active = list(facts)
        out: list[Stmt] = []
        for s in block:
            match s:
                case Guard(label=label, cond=c) | Fact(label=label, cond=c):
                    out.append(s)
                    if label in self.fact_labels and self.stable(c):
                        active.append(c)
                case If(cond=c, then=then, orelse=orelse):
                    then = self.block(then, active)
                    orelse = self.block(orelse, active)
                    taken = self.decide(c, active)
                    if taken is True and not contains_guard(orelse):
                        if then:
                            out.append(Do(then))
                    elif taken is False and not contains_guard(then):
                        if orelse:
                            out.append(Do(orelse))
                    else:
                        out.append(If(c, then, orelse))
                case While(cond=c, body=body):
                    body = self.block(body, active)
                    if self.decide(c, []) is False and not contains_guard(body):
                        continue
                    out.append(While(c, body))
                case _:
                    blocks = child_blocks(s)
                    if blocks:
                        s = with_blocks(
                            s, tuple(self.block(b, active) for _, b in blocks)
                        )
                    out.append(s)
        return tuple(out)


def branch_fold(fn: Function, ctx: _PassContext) -> Function:
    return _BranchFold(fn, ctx).run(fn)


# -- loop unrolling ------------------------------------------------------------------


def _bound_expr_ok(e: Expr, written: set[str], scalar_externs: frozenset[str]) -> bool:
    if not is_pure(e):
        return False
    for n in walk_expr(e):
        if isinstance(n, BinOp) and n.op in ("div", "mod"):
            return False
    names = expr_vars(e)
    return not (names & written) and not (names & scalar_externs)


def trip_count(s: For, scalar_externs: frozenset[str] = frozenset()) -> int | None:
    """Iterations of `s` when they are known statically, else None."""
    if not _int_lit(s.step) or s.step.value == 0:
        return None
    written = assigned_names(s.body)
    if s.var in written:
        return None
    if not all(_bound_expr_ok(e, written, scalar_externs) for e in (s.lo, s.hi)):
        return None
    step = s.step.value
    if _int_lit(s.lo) and _int_lit(s.hi):
        span = s.hi.value - s.lo.value
    elif _is_add(s.hi) and s.hi.lhs == s.lo and _int_lit(s.hi.rhs):
        # assumes lo + k does not wrap
        span = s.hi.rhs.value
    elif _is_add(s.hi) and s.hi.rhs == s.lo and _int_lit(s.hi.lhs):
        span = s.hi.lhs.value
    else:
        return None
    trips = max(0, -(-span // step))
    # the final increment must not wrap past the bound
    if _int_lit(s.lo) and not INT_MIN <= s.lo.value + trips * step <= INT_MAX:
        return None
    return trips


class _Unroller:
    def __init__(self, fn: Function, ctx: _PassContext):
        self.ctx = ctx
        self.fn_name = fn.name
        self.size = count_statements(fn.body)
        self.limit = ctx.pipeline.max_growth * max(ctx.baseline_size, 1)

    def run(self, fn: Function) -> Function:
        return replace(fn, body=self.block(fn.body))

    def block(self, block: Block) -> Block:
        out: list[Stmt] = []
        for s in block:
            out.extend(self.stmt(s))
        return tuple(out)

    def stmt(self, s: Stmt) -> list[Stmt]:
        blocks = child_blocks(s)
        if blocks:
            s = with_blocks(s, tuple(self.block(b) for _, b in blocks))
        if not isinstance(s, For):
            return [s]
        trips = trip_count(s, self.ctx.scalar_externs)
        if trips is None or trips > self.ctx.pipeline.unroll_max_factor:
            return [s]
        if trips == 0 and contains_guard(s.body):
            return [s]
        old = count_statements((s,))
        body_size = count_statements(s.body)
        new = trips * (body_size + 2)
        if self.size - old + new > self.limit:
            cap = self.ctx.pipeline.max_growth
            msg = (
                f"{self.fn_name}: unroll of '{s.var}' ({trips} trips) skipped, "
                f"growth cap {cap}x"
            )
            self.ctx.diagnostics.append(msg)
            logger.info(msg)
            return [s]
        self.size += new - old
        step = s.step.value
        copies = []
        for i in range(trips):
            if _int_lit(s.lo):
                value = Lit(wrap(s.lo.value + i * step))
            elif i == 0:
                value = s.lo
            else:
                value = BinOp("add", s.lo, Lit(wrap(i * step)))
            copies.append(Do((Let(s.var, value), *s.body)))
        return copies


def loop_unroll(fn: Function, ctx: _PassContext) -> Function:
    return _Unroller(fn, ctx).run(fn)


# -- dead code elimination -----------------------------------------------------------


class _Dce:
    def __init__(self, fn: Function, ctx: _PassContext):
        self.scalar_externs = ctx.scalar_externs
        self.reads = {n.name for n in block_exprs(fn.body) if isinstance(n, Var)}
        # a let goes only after every assignment to its name has gone
        self.assigned = assigned_names(fn.body)
        self.changed = False

    def drop(self) -> list[Stmt]:
        self.changed = True
        return []

    def block(self, block: Block) -> Block:
        out: list[Stmt] = []
        returned = False
        for s in block:
            if returned:
                # unreachable, but guard sites are kept
                if isinstance(s, Guard):
                    out.append(s)
                else:
                    self.changed = True
                continue
            out.extend(self.stmt(s))
            returned = isinstance(s, Return)
        return tuple(out)

    def stmt(self, s: Stmt) -> list[Stmt]:
        match s:
            case Let(name=name, expr=e) if (
                name not in self.reads and name not in self.assigned and is_pure(e)
            ):
                return self.drop()
            case Assign(name=name, expr=e) if (
                name not in self.reads
                and name not in self.scalar_externs
                and is_pure(e)
            ):
                return self.drop()
            case ExprStmt(expr=e) if is_pure(e):
                return self.drop()
        blocks = child_blocks(s)
        if blocks:
            s = with_blocks(s, tuple(self.block(b) for _, b in blocks))
        match s:
            case If(cond=c, then=(), orelse=()) if is_pure(c):
                return self.drop()
            case For(lo=Lit(), hi=Lit(), step=Lit(value=step), body=()) if step != 0:
                return self.drop()
            case Do(body=()):
                return self.drop()
            case Do(body=body) if not any(isinstance(x, Let) for x in body):
                self.changed = True
                return list(body)
        return [s]


def dce(fn: Function, ctx: _PassContext) -> Function:
    while True:
        pass_ = _Dce(fn, ctx)
        fn = replace(fn, body=pass_.block(fn.body))
        if not pass_.changed:
            return fn


PASSES: dict[str, Callable[[Function, _PassContext], Function]] = {
    "const_prop": const_prop,
    "branch_fold": branch_fold,
    "loop_unroll": loop_unroll,
    "dce": dce,
    "algebraic": algebraic,
}


def run_pipeline(sm: SpecializedModule, p: PassPipeline) -> SpecializedModule:
    """Apply the passes of `p` in order to every function of `sm`."""
    module = sm.module
    scalar_externs = module.scalar_externs()
    facts = sm.fact_labels
    diagnostics = list(sm.diagnostics)
    functions = []
    for fn in module.functions:
        ctx = _PassContext(scalar_externs, facts, p, count_statements(fn.body))
        for name in p.passes:
            fn = PASSES[name](fn, ctx)
        diagnostics.extend(ctx.diagnostics)
        functions.append(fn)
    optimized = module.with_functions(tuple(functions))
    try:
        check_module(optimized)
    except IRValidationError as err:
        raise SpecializationError(f"optimized module is invalid: {err}") from err
    return replace(sm, module=optimized, diagnostics=tuple(diagnostics))


__all__ = [
    "DEFAULT_PASSES",
    "PASS_NAMES",
    "PassPipeline",
    "default_pipeline",
    "run_pipeline",
    "trip_count",
]
