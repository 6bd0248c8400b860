"""Counting reference interpreter: the semantics oracle and the `interp` backend."""

import copy
import logging
from dataclasses import dataclass, field
from typing import NamedTuple

from .constants import FOR_INCREMENT_OPS, FOR_TEST_BASE_OPS, GUARD_OPS
from .errors import (
    GuardFailure,
    InvocationError,
    Trap,
    UnboundExternalError,
    UnknownHandlerError,
)
from .instrument import ProfileStore
from .mini_ir import (
    Assign,
    ArrayRef,
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
    HandlerModule,
    If,
    Let,
    Lit,
    Load,
    Tap,
    Return,
    SpecAssume,
    SpecCustom,
    SpecEnum,
    SpecGeneric,
    SpecRange,
    Store,
    Value,
    Var,
    While,
    eval_binop,
    eval_cmp,
    wrap,
)

logger = logging.getLogger(__name__)


@dataclass
class HostState:
    """External state registered by the fixed code: named arrays and scalars."""

    arrays: dict[str, list] = field(default_factory=dict)
    scalars: dict[str, int | float] = field(default_factory=dict)

    def snapshot(self) -> "HostState":
        return copy.deepcopy(self)

    def ref(self, name: str) -> ArrayRef:
        if name not in self.arrays:
            raise UnboundExternalError([name])
        return ArrayRef(name)


def check_bindings(m: HandlerModule, host: HostState):
    """Raise UnboundExternalError unless every declared external is bound."""
    missing = []
    for e in m.externs:
        if e.is_array:
            arr = host.arrays.get(e.name)
            if arr is None or (e.length is not None and len(arr) != e.length):
                missing.append(e.name)
        elif e.name not in host.scalars:
            missing.append(e.name)
    if missing:
        raise UnboundExternalError(missing)


def check_args(fn: Function, args, host: HostState):
    if len(args) != len(fn.params):
        expected, got = len(fn.params), len(args)
        raise InvocationError(f"'{fn.name}' expects {expected} arguments, got {got}")
    for p, a in zip(fn.params, args):
        match p.type:
            case "int":
                ok = isinstance(a, int) and not isinstance(a, bool)
            case "float":
                ok = isinstance(a, float)
            case _:
                ok = isinstance(a, ArrayRef)
                if ok and a.name not in host.arrays:
                    raise UnboundExternalError([a.name])
        if not ok:
            message = f"'{p.name}' expects {p.type}, got {a!r}"
            raise InvocationError(f"'{fn.name}': {message}")


class ExecContext:
    """Per-invocation execution state shared by every frame of one call."""

    __slots__ = ("host", "profiles", "ops")

    def __init__(self, host: HostState, profiles: ProfileStore | None = None):
        self.host = host
        self.profiles = profiles if profiles is not None else ProfileStore()
        self.ops = 0


class InterpretResult(NamedTuple):
    value: Value
    ops_executed: int


class _ReturnSignal(Exception):
    def __init__(self, value: Value):
        self.value = value


class Interpreter:
    """Tree-walking evaluator; ops are accumulated on the ExecContext."""

    def __init__(self, module: HandlerModule, ctx: ExecContext):
        self.functions = {f.name: f for f in module.functions}
        self.scalar_externs = module.scalar_externs()
        self.ctx = ctx
        self.host = ctx.host
        self.ops = 0

    def run(self, name: str, args) -> Value:
        try:
            return self.call(name, list(args))
        finally:
            self.ctx.ops += self.ops
            self.ops = 0

    def call(self, name: str, args: list) -> Value:
        fn = self.functions.get(name)
        if fn is None:
            raise UnknownHandlerError(name)
        check_args(fn, args, self.host)
        env = dict(zip(fn.param_names, args))
        try:
            self.exec_block(fn.body, env)
        except _ReturnSignal as ret:
            return ret.value
        return None

    def array(self, ref: str, env: dict) -> list:
        handle = env.get(ref)
        name = handle.name if isinstance(handle, ArrayRef) else ref
        arr = self.host.arrays.get(name)
        if arr is None:
            raise UnboundExternalError([name])
        return arr

    # statements

    def exec_block(self, block: Block, env: dict):
        table = _STMT_TABLE
        for s in block:
            table[type(s)](self, s, env)

    def _let(self, s: Let, env):
        self.ops += 1
        env[s.name] = self.eval(s.expr, env)

    def _assign(self, s: Assign, env):
        self.ops += 1
        value = self.eval(s.expr, env)
        if s.name in env or s.name not in self.scalar_externs:
            env[s.name] = value
        else:
            self.host.scalars[s.name] = value

    def _store(self, s: Store, env):
        self.ops += 1
        arr = self.array(s.ref, env)
        index = self.eval(s.index, env)
        value = self.eval(s.value, env)
        if not 0 <= index < len(arr):
            raise Trap("out-of-bounds", f"store {s.ref}[{index}] (length {len(arr)})")
        arr[index] = value

    def _if(self, s: If, env):
        self.ops += 1
        if self.eval(s.cond, env):
            self.exec_block(s.then, env)
        else:
            self.exec_block(s.orelse, env)

    def _for(self, s: For, env):
        self.ops += 1
        env[s.var] = self.eval(s.lo, env)
        step = self.eval(s.step, env)
        if step == 0:
            raise Trap("zero-step", f"for '{s.var}' has step 0")
        while True:
            self.ops += FOR_TEST_BASE_OPS
            hi = self.eval(s.hi, env)
            v = env[s.var]
            if not (v < hi if step > 0 else v > hi):
                break
            self.exec_block(s.body, env)
            self.ops += FOR_INCREMENT_OPS
            env[s.var] = wrap(env[s.var] + step)

    def _while(self, s: While, env):
        self.ops += 1
        while self.eval(s.cond, env):
            self.exec_block(s.body, env)

    def _return(self, s: Return, env):
        self.ops += 1
        raise _ReturnSignal(None if s.expr is None else self.eval(s.expr, env))

    def _expr_stmt(self, s: ExprStmt, env):
        self.ops += 1
        self.eval(s.expr, env)

    def _guard(self, s: Guard, env):
        self.ops += GUARD_OPS
        saved, ctx_saved = self.ops, self.ctx.ops
        ok = self.eval(s.cond, env)
        self.ops, self.ctx.ops = saved, ctx_saved
        if not ok:
            logger.debug("guard '%s' failed", s.label)
            raise GuardFailure(s.label)

    def _do(self, s: Do, env):
        self.exec_block(s.body, env)

    def _nothing(self, s, env):
        pass

    # expressions

    def eval(self, e: Expr, env: dict):
        return _EXPR_TABLE[type(e)](self, e, env)

    def _lit(self, e: Lit, env):
        self.ops += 1
        return e.value

    def _var(self, e: Var, env):
        self.ops += 1
        name = e.name
        if name in env:
            return env[name]
        if name in self.host.scalars:
            return self.host.scalars[name]
        if name in self.host.arrays:
            return ArrayRef(name)
        raise UnboundExternalError([name])

    def _load(self, e: Load, env):
        self.ops += 1
        arr = self.array(e.ref, env)
        index = self.eval(e.index, env)
        if not 0 <= index < len(arr):
            raise Trap("out-of-bounds", f"load {e.ref}[{index}] (length {len(arr)})")
        return arr[index]

    def _binop(self, e: BinOp, env):
        self.ops += 1
        return eval_binop(e.op, self.eval(e.lhs, env), self.eval(e.rhs, env))

    def _cmp(self, e: Cmp, env):
        self.ops += 1
        return eval_cmp(e.op, self.eval(e.lhs, env), self.eval(e.rhs, env))

    def _call(self, e: Call, env):
        self.ops += 1
        args = [self.eval(a, env) for a in e.args]
        return self.call(e.fn, args)

    def _spec(self, e, env):
        return self.eval(e.expr, env)

    def _tap(self, e: Tap, env):
        self.ops += 1
        value = self.eval(e.expr, env)
        self.ops += self.ctx.profiles.tap(e, value)
        return value


_STMT_TABLE = {
    Let: Interpreter._let,
    Assign: Interpreter._assign,
    Store: Interpreter._store,
    If: Interpreter._if,
    For: Interpreter._for,
    While: Interpreter._while,
    Return: Interpreter._return,
    ExprStmt: Interpreter._expr_stmt,
    Guard: Interpreter._guard,
    Do: Interpreter._do,
    Fact: Interpreter._nothing,
    SpecAssume: Interpreter._nothing,
    SpecCustom: Interpreter._nothing,
}

_EXPR_TABLE = {
    Lit: Interpreter._lit,
    Var: Interpreter._var,
    Load: Interpreter._load,
    BinOp: Interpreter._binop,
    Cmp: Interpreter._cmp,
    Call: Interpreter._call,
    SpecEnum: Interpreter._spec,
    SpecRange: Interpreter._spec,
    SpecGeneric: Interpreter._spec,
    Tap: Interpreter._tap,
}


class InterpreterImage:
    """Executable form of a module for the `interp` backend."""

    def __init__(self, module: HandlerModule):
        self.module = module

    def call(self, name: str, args, ctx: ExecContext) -> Value:
        return Interpreter(self.module, ctx).run(name, args)


def interpret(
    m: HandlerModule,
    fn: str,
    args,
    host: HostState,
    profiles: ProfileStore | None = None,
) -> InterpretResult:
    """Run `fn` on `host`; returns the value and the number of executed ops."""
    check_bindings(m, host)
    ctx = ExecContext(host, profiles)
    value = Interpreter(m, ctx).run(fn, args)
    return InterpretResult(value, ctx.ops)
