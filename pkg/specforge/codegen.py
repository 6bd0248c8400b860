"""Compiled backend: translates a module into Python source and executes it.

The generated code charges ops with the same cost model as the interpreter.
Costs of straight-line statement runs are charged in one increment; traps
inside such a run can therefore leave the counter ahead of the interpreter's,
as can a guard failure raised inside a callee. Completed invocations and
guard failures in the invoked function count identically on both backends.
"""

import logging
import time

from .constants import (
    FOR_INCREMENT_OPS,
    FOR_TEST_BASE_OPS,
    GUARD_OPS,
    INT_MASK,
    INT_MIN,
)
from .errors import GuardFailure, Trap, UnknownHandlerError
from .interpreter import ExecContext
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
    HandlerModule,
    If,
    Let,
    Lit,
    Load,
    Tap,
    Return,
    SpecAssume,
    SpecCustom,
    SpecValue,
    Stmt,
    Store,
    Value,
    Var,
    While,
    ArrayRef,
    assigned_names,
    element_type,
    float_div,
    int_div,
    int_mod,
    walk_expr,
)

logger = logging.getLogger(__name__)

_OFFSET = -INT_MIN
_PY_CMP = {"eq": "==", "ne": "!=", "lt": "<", "le": "<=", "gt": ">", "ge": ">="}
_PY_BITWISE = {"and": "&", "or": "|", "xor": "^"}
_RANGE_SAFE_OPS = ("add", "sub", "mul", "and", "or", "xor", "shl", "shr")


def _oob(ref: str, index):
    raise Trap("out-of-bounds", f"{ref}[{index}]")


def _zero_step(var: str):
    raise Trap("zero-step", f"for '{var}' has step 0")


def _guard_fail(label: str):
    logger.debug("guard '%s' failed", label)
    raise GuardFailure(label)


def _tap(c: ExecContext, site: Tap, value):
    c.ops += c.profiles.tap(site, value)
    return value


_RUNTIME = {
    "_oob": _oob,
    "_zero_step": _zero_step,
    "_guard_fail": _guard_fail,
    "_tap": _tap,
    "_idiv": int_div,
    "_imod": int_mod,
    "_fdiv": float_div,
}


def _wrap(code: str) -> str:
    return f"(({code} + {_OFFSET} & {INT_MASK}) - {_OFFSET})"


def expr_cost(e: Expr) -> int:
    """Static op cost of evaluating `e` (tap record costs excluded)."""
    return sum(1 for n in walk_expr(e) if not isinstance(n, SpecValue))


def _flat(block: Block):
    for s in block:
        if isinstance(s, Do):
            yield from _flat(s.body)
        else:
            yield s


class _FunctionEmitter:
    def __init__(self, module: HandlerModule, fn: Function, namespace: dict):
        self.module = module
        self.fn = fn
        self.namespace = namespace
        self.functions = {f.name: f for f in module.functions}
        self.externs = {e.name: e for e in module.externs}
        self.types: dict[str, str] = {p.name: p.type for p in fn.params}
        self.arrays: dict[str, str] = {}
        self.lines: list[str] = []
        self.counter = 0

    def fresh(self, prefix: str = "_t") -> str:
        self.counter += 1
        return f"{prefix}{self.counter}"

    def emit(self, depth: int, line: str):
        self.lines.append("    " * depth + line)

    def constant(self, prefix: str, value) -> str:
        name = f"{prefix}{len(self.namespace)}"
        self.namespace[name] = value
        return name

    def array(self, ref: str) -> str:
        if ref not in self.arrays:
            if ref in self.types:
                self.arrays[ref] = f"_arrays[v_{ref}.name]"
            else:
                self.arrays[ref] = f"_arrays[{ref!r}]"
        return f"a_{ref}"

    def array_type(self, ref: str) -> str:
        return self.types[ref] if ref in self.types else self.externs[ref].kind

    # expressions

    def expr(self, e: Expr) -> tuple[str, str]:
        match e:
            case Lit(value=v):
                if isinstance(v, float):
                    return f"({v!r})", "float"
                return (f"({v})" if v < 0 else str(v)), "int"
            case Var(name=name):
                if name in self.types:
                    return f"v_{name}", self.types[name]
                ext = self.externs[name]
                if ext.is_array:
                    return self.constant("_ref", ArrayRef(name)), ext.kind
                return f"_scalars[{name!r}]", ext.kind
            case Load(ref=ref, index=index):
                idx, _ = self.expr(index)
                a = self.array(ref)
                t = self.fresh()
                oob = f"_oob({ref!r}, {t})"
                code = f"({a}[{t}] if 0 <= ({t} := {idx}) < n_{ref} else {oob})"
                return code, element_type(self.array_type(ref))
            case BinOp(op=op, lhs=lhs, rhs=rhs):
                lc, lt = self.expr(lhs)
                rc, _ = self.expr(rhs)
                return self.binop(op, lc, rc, lt), lt
            case Cmp(op=op, lhs=lhs, rhs=rhs):
                lc, _ = self.expr(lhs)
                rc, _ = self.expr(rhs)
                return f"(1 if {lc} {_PY_CMP[op]} {rc} else 0)", "int"
            case Call(fn=name, args=args):
                codes = [self.expr(a)[0] for a in args]
                call = f"f_{name}({', '.join(codes + ['_c'])})"
                return call, self.functions[name].ret
            case SpecValue(expr=inner):
                return self.expr(inner)
            case Tap(expr=inner):
                code, t = self.expr(inner)
                site = self.constant("_site", e)
                return f"_tap(_c, {site}, {code})", t
        raise TypeError(f"cannot compile {e!r}")

    def binop(self, op: str, lc: str, rc: str, t: str) -> str:
        if t == "float":
            if op == "div":
                return f"_fdiv({lc}, {rc})"
            return f"({lc} {dict(add='+', sub='-', mul='*')[op]} {rc})"
        match op:
            case "add":
                return _wrap(f"{lc} + {rc}")
            case "sub":
                return _wrap(f"{lc} - {rc}")
            case "mul":
                return _wrap(f"{lc} * {rc}")
            case "div":
                return f"_idiv({lc}, {rc})"
            case "mod":
                return f"_imod({lc}, {rc})"
            case "shl":
                return _wrap(f"({lc} << ({rc} & 63))")
            case "shr":
                return f"({lc} >> ({rc} & 63))"
        return f"({lc} {_PY_BITWISE[op]} {rc})"

    def cond(self, e: Expr) -> str:
        if isinstance(e, Cmp):
            lc, _ = self.expr(e.lhs)
            rc, _ = self.expr(e.rhs)
            return f"{lc} {_PY_CMP[e.op]} {rc}"
        return self.expr(e)[0]

    # statements

    def stmt_cost(self, s: Stmt) -> int:
        match s:
            case Let(expr=e) | Assign(expr=e) | ExprStmt(expr=e):
                return 1 + expr_cost(e)
            case Store(index=i, value=v):
                return 1 + expr_cost(i) + expr_cost(v)
            case Return(expr=e):
                return 1 + (0 if e is None else expr_cost(e))
        raise TypeError(s)

    def block(self, block: Block, depth: int):
        start = len(self.lines)
        self.stmts(block, depth)
        if len(self.lines) == start:
            self.emit(depth, "pass")

    def stmts(self, block: Block, depth: int):
        run: list[Stmt] = []
        for s in _flat(block):
            if isinstance(s, (Let, Assign, Store, ExprStmt, Return)):
                run.append(s)
                if isinstance(s, Return):
                    break
                continue
            self.flush(run, depth)
            run = []
            self.compound(s, depth)
        self.flush(run, depth)

    def flush(self, run: list[Stmt], depth: int):
        if not run:
            return
        self.emit(depth, f"_ops += {sum(self.stmt_cost(s) for s in run)}")
        for s in run:
            self.simple(s, depth)

    def simple(self, s: Stmt, depth: int):
        match s:
            case Let(name=name, expr=e):
                code, t = self.expr(e)
                self.types[name] = t
                self.emit(depth, f"v_{name} = {code}")
            case Assign(name=name, expr=e):
                code, _ = self.expr(e)
                target = f"v_{name}" if name in self.types else f"_scalars[{name!r}]"
                self.emit(depth, f"{target} = {code}")
            case Store(ref=ref, index=index, value=value):
                a = self.array(ref)
                i, v = self.fresh(), self.fresh()
                self.emit(depth, f"{i} = {self.expr(index)[0]}")
                self.emit(depth, f"{v} = {self.expr(value)[0]}")
                self.emit(depth, f"if not 0 <= {i} < n_{ref}: _oob({ref!r}, {i})")
                self.emit(depth, f"{a}[{i}] = {v}")
            case ExprStmt(expr=e):
                self.emit(depth, self.expr(e)[0])
            case Return(expr=None):
                self.emit(depth, "return None")
            case Return(expr=e):
                self.emit(depth, f"return {self.expr(e)[0]}")

    def compound(self, s: Stmt, depth: int):
        match s:
            case If(cond=c, then=then, orelse=orelse):
                self.emit(depth, f"_ops += {1 + expr_cost(c)}")
                self.emit(depth, f"if {self.cond(c)}:")
                self.block(then, depth + 1)
                if orelse:
                    self.emit(depth, "else:")
                    self.block(orelse, depth + 1)
            case While(cond=c, body=body):
                cost = expr_cost(c)
                self.emit(depth, f"_ops += {1 + cost}")
                self.emit(depth, f"while {self.cond(c)}:")
                self.block(body, depth + 1)
                self.emit(depth + 1, f"_ops += {cost}")
            case For():
                self.for_loop(s, depth)
            case Guard(label=label, cond=c):
                self.emit(depth, f"_ops += {GUARD_OPS}")
                if any(isinstance(n, (Call, Tap)) for n in walk_expr(c)):
                    saved, ok = self.fresh("_g"), self.fresh("_ok")
                    self.emit(depth, f"{saved} = _c.ops")
                    self.emit(depth, f"{ok} = {self.expr(c)[0]}")
                    self.emit(depth, f"_c.ops = {saved}")
                    self.emit(depth, f"if not {ok}: _guard_fail({label!r})")
                else:
                    self.emit(depth, f"if not ({self.cond(c)}): _guard_fail({label!r})")
            case Fact() | SpecAssume() | SpecCustom():
                pass
            case _:
                raise TypeError(f"cannot compile {s!r}")

    def range_eligible(self, s: For) -> bool:
        step = s.step
        if not (isinstance(step, Lit) and isinstance(step.value, int) and step.value):
            return False
        written = assigned_names(s.body)
        if s.var in written:
            return False
        for n in walk_expr(s.hi):
            match n:
                case Lit(value=v) if isinstance(v, int):
                    pass
                case Var(name=name) if (
                    name in self.types and name != s.var and name not in written
                ):
                    pass
                case BinOp(op=op) if op in _RANGE_SAFE_OPS:
                    pass
                case SpecValue():
                    pass
                case _:
                    return False
        return True

    def for_loop(self, s: For, depth: int):
        entry = 1 + expr_cost(s.lo) + expr_cost(s.step)
        test = FOR_TEST_BASE_OPS + expr_cost(s.hi)
        self.types[s.var] = "int"
        var = f"v_{s.var}"
        lo = self.expr(s.lo)[0]
        if self.range_eligible(s):
            self.emit(depth, f"_ops += {entry + test}")
            hi = self.expr(s.hi)[0]
            self.emit(depth, f"for {var} in range({lo}, {hi}, {s.step.value}):")
            self.block(s.body, depth + 1)
            self.emit(depth + 1, f"_ops += {FOR_INCREMENT_OPS + test}")
            return
        step = self.fresh("_s")
        self.emit(depth, f"_ops += {entry}")
        self.emit(depth, f"{var} = {lo}")
        self.emit(depth, f"{step} = {self.expr(s.step)[0]}")
        self.emit(depth, f"if {step} == 0: _zero_step({s.var!r})")
        self.emit(depth, f"_ops += {test}")
        hi = self.expr(s.hi)[0]
        if isinstance(s.step, Lit):
            check = f"{var} < {hi}" if s.step.value > 0 else f"{var} > {hi}"
        else:
            check = f"({var} < {hi}) if {step} > 0 else ({var} > {hi})"
        self.emit(depth, f"while {check}:")
        self.block(s.body, depth + 1)
        self.emit(depth + 1, f"_ops += {FOR_INCREMENT_OPS + test}")
        self.emit(depth + 1, f"{var} = {_wrap(f'{var} + {step}')}")

    def function_source(self) -> str:
        self.block(self.fn.body, 2)
        body = self.lines
        self.lines = []
        params = ", ".join([f"v_{p.name}" for p in self.fn.params] + ["_c"])
        self.emit(0, f"def f_{self.fn.name}({params}):")
        self.emit(1, "_ops = 0")
        self.emit(1, "_arrays = _c.host.arrays")
        self.emit(1, "_scalars = _c.host.scalars")
        self.emit(1, "try:")
        for ref, source in self.arrays.items():
            self.emit(2, f"a_{ref} = {source}")
            self.emit(2, f"n_{ref} = len(a_{ref})")
        self.lines.extend(body)
        self.emit(1, "finally:")
        self.emit(2, "_c.ops += _ops")
        return "\n".join(self.lines)


class CompiledImage:
    """Executable form of a module for the `compiled` backend."""

    def __init__(self, module: HandlerModule, source: str, functions: dict):
        self.module = module
        self.source = source
        self._functions = functions

    def call(self, name: str, args, ctx: ExecContext) -> Value:
        fn = self._functions.get(name)
        if fn is None:
            raise UnknownHandlerError(name)
        return fn(*args, ctx)


def generate_source(m: HandlerModule, namespace: dict | None = None) -> str:
    namespace = {} if namespace is None else namespace
    sources = [
        _FunctionEmitter(m, fn, namespace).function_source() for fn in m.functions
    ]
    return "\n\n\n".join(sources) + "\n"


def compile_module(m: HandlerModule) -> CompiledImage:
    namespace = dict(_RUNTIME)
    started = time.perf_counter()
    source = generate_source(m, namespace)
    exec(compile(source, "<specforge-image>", "exec"), namespace)
    logger.debug(
        "compiled %d functions (%d lines) in %.1f ms",
        len(m.functions),
        source.count("\n"),
        (time.perf_counter() - started) * 1000,
    )
    functions = {f.name: namespace[f"f_{f.name}"] for f in m.functions}
    return CompiledImage(m, source, functions)
