"""Structured intermediate representation for handler code.

Nodes are immutable and compare structurally. A module holds functions and
declarations of host-registered external state; handler code never owns
persistent storage.
"""

import math
from collections.abc import Callable, Iterator
from dataclasses import dataclass, replace
from typing import Literal, TypeAlias

from .constants import INT_MASK, INT_MAX, INT_MIN
from .errors import IRValidationError, Trap

TypeName = Literal["int", "float", "int[]", "float[]", "void"]
ExternKind = Literal["int", "float", "int[]", "float[]"]
TapMode = Literal["freq", "hist"]

SCALAR_TYPES = ("int", "float")
ARRAY_TYPES = ("int[]", "float[]")
VALUE_TYPES = SCALAR_TYPES + ARRAY_TYPES
RETURN_TYPES = VALUE_TYPES + ("void",)

BINOPS = ("add", "sub", "mul", "div", "mod", "and", "or", "xor", "shl", "shr")
INT_ONLY_BINOPS = ("mod", "and", "or", "xor", "shl", "shr")
CMPOPS = ("eq", "ne", "lt", "le", "gt", "ge")
TRAPPING_BINOPS = ("div", "mod")


@dataclass(frozen=True, slots=True)
class ArrayRef:
    """Handle naming a host-registered array."""

    name: str


Value: TypeAlias = int | float | ArrayRef | None


# -- expressions --------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class Expr:
    pass


@dataclass(frozen=True, slots=True)
class Lit(Expr):
    value: int | float


@dataclass(frozen=True, slots=True)
class Var(Expr):
    name: str


@dataclass(frozen=True, slots=True)
class Load(Expr):
    ref: str
    index: Expr


@dataclass(frozen=True, slots=True)
class BinOp(Expr):
    op: str
    lhs: Expr
    rhs: Expr


@dataclass(frozen=True, slots=True)
class Cmp(Expr):
    op: str
    lhs: Expr
    rhs: Expr


@dataclass(frozen=True, slots=True)
class Call(Expr):
    fn: str
    args: tuple[Expr, ...]


@dataclass(frozen=True, slots=True)
class SpecValue(Expr):
    """Annotation wrapping exactly one expression; transparent when untouched."""

    label: str
    expr: Expr


@dataclass(frozen=True, slots=True)
class SpecEnum(SpecValue):
    values: tuple[int, ...]


@dataclass(frozen=True, slots=True)
class SpecRange(SpecValue):
    lo: int
    hi: int


@dataclass(frozen=True, slots=True)
class SpecGeneric(SpecValue):
    pass


@dataclass(frozen=True, slots=True)
class Tap(Expr):
    """Records the value of `expr` into the profile of `label` every k-th evaluation."""

    label: str
    every_k: int
    mode: TapMode
    lo: int
    hi: int
    expr: Expr


# -- statements ---------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class Stmt:
    pass


Block: TypeAlias = tuple[Stmt, ...]


@dataclass(frozen=True, slots=True)
class Let(Stmt):
    name: str
    expr: Expr


@dataclass(frozen=True, slots=True)
class Assign(Stmt):
    name: str
    expr: Expr


@dataclass(frozen=True, slots=True)
class Store(Stmt):
    ref: str
    index: Expr
    value: Expr


@dataclass(frozen=True, slots=True)
class If(Stmt):
    cond: Expr
    then: Block
    orelse: Block = ()


@dataclass(frozen=True, slots=True)
class For(Stmt):
    var: str
    lo: Expr
    hi: Expr
    step: Expr
    body: Block


@dataclass(frozen=True, slots=True)
class While(Stmt):
    cond: Expr
    body: Block


@dataclass(frozen=True, slots=True)
class Return(Stmt):
    expr: Expr | None = None


@dataclass(frozen=True, slots=True)
class ExprStmt(Stmt):
    expr: Expr


@dataclass(frozen=True, slots=True)
class SpecAssume(Stmt):
    label: str
    pred: Expr


@dataclass(frozen=True, slots=True)
class SpecCustom(Stmt):
    label: str
    kind: str


@dataclass(frozen=True, slots=True)
class Guard(Stmt):
    """Fails the invocation with the guard signal when `cond` is zero."""

    label: str
    cond: Expr


@dataclass(frozen=True, slots=True)
class Fact(Stmt):
    """Unchecked assumption available to the optimizer; costs nothing."""

    label: str
    cond: Expr


@dataclass(frozen=True, slots=True)
class Do(Stmt):
    """Scoped statement group."""

    body: Block


# -- module -------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class Param:
    name: str
    type: TypeName


@dataclass(frozen=True, slots=True)
class Function:
    name: str
    params: tuple[Param, ...]
    ret: TypeName
    body: Block

    @property
    def param_names(self) -> tuple[str, ...]:
        return tuple(p.name for p in self.params)


@dataclass(frozen=True, slots=True)
class Extern:
    name: str
    kind: ExternKind
    length: int | None = None

    @property
    def is_array(self) -> bool:
        return self.kind in ARRAY_TYPES


@dataclass(frozen=True, slots=True)
class HandlerModule:
    functions: tuple[Function, ...]
    externs: tuple[Extern, ...] = ()

    @property
    def function_names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.functions)

    def function(self, name: str) -> Function | None:
        for f in self.functions:
            if f.name == name:
                return f
        return None

    def extern(self, name: str) -> Extern | None:
        for e in self.externs:
            if e.name == name:
                return e
        return None

    def scalar_externs(self) -> frozenset[str]:
        return frozenset(e.name for e in self.externs if not e.is_array)

    def replace_function(self, fn: Function) -> "HandlerModule":
        return replace(
            self,
            functions=tuple(fn if f.name == fn.name else f for f in self.functions),
        )

    def with_functions(self, functions: tuple[Function, ...]) -> "HandlerModule":
        return replace(self, functions=functions)


# -- arithmetic ---------------------------------------------------------------


def wrap(value: int) -> int:
    """Two's complement wrap to 64 bits."""
    return ((value - INT_MIN) & INT_MASK) + INT_MIN


def int_div(a: int, b: int) -> int:
    if b == 0:
        raise Trap("div-by-zero", f"{a} div 0")
    q = abs(a) // abs(b)
    return wrap(-q if (a < 0) != (b < 0) else q)


def int_mod(a: int, b: int) -> int:
    if b == 0:
        raise Trap("div-by-zero", f"{a} mod 0")
    r = abs(a) % abs(b)
    return -r if a < 0 else r


def float_div(a: float, b: float) -> float:
    if b == 0:
        raise Trap("div-by-zero", f"{a} div 0.0")
    return a / b


def eval_binop(op: str, a: int | float, b: int | float) -> int | float:
    if isinstance(a, float):
        match op:
            case "add":
                return a + b
            case "sub":
                return a - b
            case "mul":
                return a * b
            case "div":
                return float_div(a, b)
        raise Trap("type", f"{op} is not defined on float")
    match op:
        case "add":
            return wrap(a + b)
        case "sub":
            return wrap(a - b)
        case "mul":
            return wrap(a * b)
        case "div":
            return int_div(a, b)
        case "mod":
            return int_mod(a, b)
        case "and":
            return a & b
        case "or":
            return a | b
        case "xor":
            return a ^ b
        case "shl":
            return wrap(a << (b & 63))
        case "shr":
            return a >> (b & 63)
    raise Trap("unknown-op", op)


def eval_cmp(op: str, a: int | float, b: int | float) -> int:
    match op:
        case "eq":
            return int(a == b)
        case "ne":
            return int(a != b)
        case "lt":
            return int(a < b)
        case "le":
            return int(a <= b)
        case "gt":
            return int(a > b)
        case "ge":
            return int(a >= b)
    raise Trap("unknown-op", op)


# -- traversal ----------------------------------------------------------------


def expr_children(e: Expr) -> tuple[Expr, ...]:
    match e:
        case Load(index=index):
            return (index,)
        case BinOp(lhs=lhs, rhs=rhs) | Cmp(lhs=lhs, rhs=rhs):
            return (lhs, rhs)
        case Call(args=args):
            return args
        case SpecValue(expr=inner) | Tap(expr=inner):
            return (inner,)
    return ()


def with_children(e: Expr, children: tuple[Expr, ...]) -> Expr:
    match e:
        case Load():
            return replace(e, index=children[0])
        case BinOp() | Cmp():
            return replace(e, lhs=children[0], rhs=children[1])
        case Call():
            return replace(e, args=tuple(children))
        case SpecValue() | Tap():
            return replace(e, expr=children[0])
    return e


def walk_expr(e: Expr) -> Iterator[Expr]:
    """Pre-order walk over an expression tree."""
    yield e
    for child in expr_children(e):
        yield from walk_expr(child)


def map_expr(e: Expr, fn: Callable[[Expr], Expr]) -> Expr:
    """Bottom-up rebuild: children first, then `fn` on the rebuilt node."""
    children = expr_children(e)
    if children:
        new_children = tuple(map_expr(c, fn) for c in children)
        if new_children != children:
            e = with_children(e, new_children)
    return fn(e)


def stmt_exprs(s: Stmt) -> tuple[Expr, ...]:
    """Expressions directly owned by a statement (not those of nested blocks)."""
    match s:
        case Let(expr=e) | Assign(expr=e) | ExprStmt(expr=e):
            return (e,)
        case Store(index=index, value=value):
            return (index, value)
        case If(cond=cond) | While(cond=cond):
            return (cond,)
        case For(lo=lo, hi=hi, step=step):
            return (lo, hi, step)
        case Return(expr=e):
            return () if e is None else (e,)
        case SpecAssume(pred=pred):
            return (pred,)
        case Guard(cond=cond) | Fact(cond=cond):
            return (cond,)
    return ()


def map_stmt_exprs(s: Stmt, fn: Callable[[Expr], Expr]) -> Stmt:
    """Apply `fn` to each expression directly owned by `s`."""
    match s:
        case Let() | Assign() | ExprStmt():
            return replace(s, expr=fn(s.expr))
        case Store():
            return replace(s, index=fn(s.index), value=fn(s.value))
        case If() | While():
            return replace(s, cond=fn(s.cond))
        case For():
            return replace(s, lo=fn(s.lo), hi=fn(s.hi), step=fn(s.step))
        case Return(expr=e) if e is not None:
            return Return(fn(e))
        case SpecAssume():
            return replace(s, pred=fn(s.pred))
        case Guard() | Fact():
            return replace(s, cond=fn(s.cond))
    return s


def child_blocks(s: Stmt) -> tuple[tuple[str, Block], ...]:
    match s:
        case If(then=then, orelse=orelse):
            return (("then", then), ("else", orelse))
        case For(body=body) | While(body=body) | Do(body=body):
            return (("body", body),)
    return ()


def with_blocks(s: Stmt, blocks: tuple[Block, ...]) -> Stmt:
    match s:
        case If():
            return replace(s, then=blocks[0], orelse=blocks[1])
        case For() | While() | Do():
            return replace(s, body=blocks[0])
    return s


Path: TypeAlias = tuple[int | str, ...]


def walk_stmts(block: Block, path: Path = ()) -> Iterator[tuple[Path, Stmt]]:
    """Pre-order walk over statements, yielding the path to each one.

    A path alternates statement indices and block names: ``(3, "then", 0)``.
    """
    for i, s in enumerate(block):
        here = path + (i,)
        yield here, s
        for name, sub in child_blocks(s):
            yield from walk_stmts(sub, here + (name,))


def map_block(block: Block, fn: Callable[[Stmt], Stmt]) -> Block:
    """Bottom-up statement rebuild: nested blocks first, then `fn`."""
    out = []
    for s in block:
        blocks = child_blocks(s)
        if blocks:
            s = with_blocks(s, tuple(map_block(b, fn) for _, b in blocks))
        out.append(fn(s))
    return tuple(out)


def map_block_exprs(block: Block, fn: Callable[[Expr], Expr]) -> Block:
    """Rebuild every expression of a block bottom-up with `fn`."""
    return map_block(block, lambda s: map_stmt_exprs(s, lambda e: map_expr(e, fn)))


def block_exprs(block: Block) -> Iterator[Expr]:
    """Every expression node in a block, nested blocks included."""
    for _, s in walk_stmts(block):
        for e in stmt_exprs(s):
            yield from walk_expr(e)


def count_statements(block: Block) -> int:
    return sum(1 for _ in walk_stmts(block))


def assigned_names(block: Block) -> set[str]:
    """Names written by `assign` anywhere in the block."""
    return {s.name for _, s in walk_stmts(block) if isinstance(s, Assign)}


def bound_names(block: Block) -> set[str]:
    """Names introduced or written anywhere in the block (let, assign, for)."""
    names = set()
    for _, s in walk_stmts(block):
        match s:
            case Let(name=n) | Assign(name=n):
                names.add(n)
            case For(var=v):
                names.add(v)
    return names


def expr_vars(e: Expr) -> set[str]:
    return {n.name for n in walk_expr(e) if isinstance(n, Var)}


def contains_guard(block: Block) -> bool:
    return any(isinstance(s, Guard) for _, s in walk_stmts(block))


def is_pure(e: Expr) -> bool:
    """Effect-free and trap-free: no loads, calls, taps or fallible division."""
    for n in walk_expr(e):
        match n:
            case Load() | Call() | Tap():
                return False
            case BinOp(op=op, rhs=rhs) if op in TRAPPING_BINOPS:
                if not (isinstance(rhs, Lit) and rhs.value != 0):
                    return False
    return True


def strip_expr(e: Expr) -> Expr:
    return map_expr(e, lambda n: n.expr if isinstance(n, SpecValue) else n)


def strip_annotations(m: HandlerModule) -> HandlerModule:
    """Replace every spec-value by its wrapped expression and drop spec statements."""

    def strip_block(block: Block) -> Block:
        out = []
        for s in block:
            if isinstance(s, (SpecAssume, SpecCustom)):
                continue
            blocks = child_blocks(s)
            if blocks:
                s = with_blocks(s, tuple(strip_block(b) for _, b in blocks))
            out.append(map_stmt_exprs(s, strip_expr))
        return tuple(out)

    return m.with_functions(
        tuple(replace(f, body=strip_block(f.body)) for f in m.functions)
    )


# -- validation ---------------------------------------------------------------


def element_type(array_type: str) -> str:
    return array_type[:-2]


def lit_type(value: int | float) -> str:
    return "float" if isinstance(value, float) else "int"


class _Validator:
    def __init__(self, module: HandlerModule):
        self.module = module
        self.diagnostics: list[str] = []
        self.functions = {f.name: f for f in module.functions}
        self.externs = {e.name: e for e in module.externs}
        self.labels: set[str] = set()
        self.fn_name = ""

    def diag(self, msg: str):
        where = f"{self.fn_name}: " if self.fn_name else ""
        self.diagnostics.append(where + msg)

    def run(self) -> list[str]:
        m = self.module
        if not m.functions:
            self.diag("no functions")
        seen: set[str] = set()
        for e in m.externs:
            if e.name in seen:
                self.diag(f"duplicate external '{e.name}'")
            seen.add(e.name)
            if e.kind not in VALUE_TYPES:
                self.diag(f"external '{e.name}' has invalid kind '{e.kind}'")
            if e.length is not None and (not e.is_array or e.length < 0):
                self.diag(f"external '{e.name}' has invalid length")
        seen = set()
        for f in m.functions:
            if f.name in seen:
                self.diag(f"duplicate function '{f.name}'")
            seen.add(f.name)
        for f in m.functions:
            self.check_function(f)
        return self.diagnostics

    def register_label(self, label: str):
        if label in self.labels:
            self.diag(f"duplicate label '{label}'")
        self.labels.add(label)

    def check_function(self, fn: Function):
        self.fn_name = fn.name
        params: dict[str, str] = {}
        for p in fn.params:
            if p.type not in VALUE_TYPES:
                self.diag(f"parameter '{p.name}' has invalid type '{p.type}'")
            if p.name in params:
                self.diag(f"duplicate parameter '{p.name}'")
            if p.name in self.externs:
                self.diag(f"parameter '{p.name}' shadows an external")
            params[p.name] = p.type
        if fn.ret not in RETURN_TYPES:
            self.diag(f"invalid return type '{fn.ret}'")
        self.ret = fn.ret
        self.check_block(fn.body, [params, {}], top=True)
        if fn.ret != "void" and not definitely_returns(fn.body):
            self.diag(f"missing return of type {fn.ret}")
        self.fn_name = ""

    def lookup(self, name: str, scopes: list[dict[str, str]]) -> str | None:
        for scope in reversed(scopes):
            if name in scope:
                return scope[name]
        if name in self.externs:
            return self.externs[name].kind
        return None

    def array_type(self, ref: str, scopes) -> str | None:
        t = self.lookup(ref, scopes)
        if t is None:
            self.diag(f"unknown array '{ref}'")
            return None
        if t not in ARRAY_TYPES:
            self.diag(f"'{ref}' is not an array")
            return None
        return t

    def bind(self, name: str, t: str | None, scopes, what: str):
        if name in self.externs:
            self.diag(f"{what} '{name}' shadows an external")
        for scope in scopes[:-1]:
            if name in scope:
                self.diag(f"{what} '{name}' shadows an outer binding")
        if t is not None:
            scopes[-1][name] = t

    def check_block(self, block: Block, scopes, top: bool = False):
        for s in block:
            self.check_stmt(s, scopes, top)

    def cond(self, e: Expr, scopes, what: str):
        t = self.expr(e, scopes)
        if t is not None and t != "int":
            self.diag(f"{what} condition must be int, got {t}")

    def check_stmt(self, s: Stmt, scopes, top: bool):
        match s:
            case Let(name=name, expr=e):
                t = self.expr(e, scopes)
                if t == "void":
                    self.diag(f"let '{name}' binds a void value")
                elif t in ARRAY_TYPES:
                    self.diag(f"let '{name}' cannot bind an array")
                self.bind(name, t, scopes, "let")
            case Assign(name=name, expr=e):
                target = self.lookup(name, scopes)
                t = self.expr(e, scopes)
                if target is None:
                    self.diag(f"assignment to unbound '{name}'")
                elif target in ARRAY_TYPES:
                    self.diag(f"cannot assign array '{name}'")
                elif t is not None and t != target:
                    self.diag(f"assign '{name}': expected {target}, got {t}")
            case Store(ref=ref, index=index, value=value):
                at = self.array_type(ref, scopes)
                it = self.expr(index, scopes)
                vt = self.expr(value, scopes)
                if it is not None and it != "int":
                    self.diag(f"store index into '{ref}' must be int")
                et = element_type(at) if at is not None else None
                if et is not None and vt is not None and vt != et:
                    self.diag(f"store into '{ref}': expected {et}, got {vt}")
            case If(cond=c, then=then, orelse=orelse):
                self.cond(c, scopes, "if")
                self.check_block(then, scopes + [{}])
                self.check_block(orelse, scopes + [{}])
            case For(var=var, lo=lo, hi=hi, step=step, body=body):
                for part, e in (("lo", lo), ("hi", hi), ("step", step)):
                    t = self.expr(e, scopes)
                    if t is not None and t != "int":
                        self.diag(f"for '{var}' {part} must be int")
                if self.lookup(var, scopes) is not None:
                    self.diag(f"loop variable '{var}' is already bound")
                self.check_block(body, scopes + [{var: "int"}])
            case While(cond=c, body=body):
                self.cond(c, scopes, "while")
                self.check_block(body, scopes + [{}])
            case Return(expr=e):
                if e is None:
                    if self.ret != "void":
                        self.diag(f"bare return in function returning {self.ret}")
                else:
                    t = self.expr(e, scopes)
                    if t is not None and t != self.ret:
                        self.diag(f"return type mismatch: expected {self.ret}, got {t}")
            case ExprStmt(expr=e):
                self.expr(e, scopes)
            case SpecAssume(label=label, pred=pred):
                self.register_label(label)
                self.cond(pred, scopes, f"assume '{label}'")
                if any(isinstance(n, (Call, Tap)) for n in walk_expr(pred)):
                    self.diag(f"assume '{label}' predicate must be side-effect-free")
            case SpecCustom(label=label, kind=kind):
                self.register_label(label)
                if not top:
                    self.diag(f"custom point '{label}' must be a top-level statement")
                if not kind:
                    self.diag(f"custom point '{label}' has no kind")
            case Guard(label=label, cond=c) | Fact(label=label, cond=c):
                self.cond(c, scopes, f"guard '{label}'")
            case Do(body=body):
                self.check_block(body, scopes + [{}])
            case _:
                self.diag(f"unknown statement {type(s).__name__}")

    def numeric_pair(self, op: str, lhs: Expr, rhs: Expr, scopes) -> str | None:
        lt = self.expr(lhs, scopes)
        rt = self.expr(rhs, scopes)
        if lt is None or rt is None:
            return None
        if lt not in SCALAR_TYPES or rt not in SCALAR_TYPES:
            self.diag(f"{op} needs scalar operands, got {lt} and {rt}")
            return None
        if lt != rt:
            self.diag(f"{op} operand types differ: {lt} and {rt}")
            return None
        return lt

    def expr(self, e: Expr, scopes) -> str | None:
        match e:
            case Lit(value=v):
                if isinstance(v, bool) or not isinstance(v, (int, float)):
                    self.diag(f"invalid literal {v!r}")
                    return None
                if isinstance(v, int) and not INT_MIN <= v <= INT_MAX:
                    self.diag(f"integer literal {v} does not fit in 64 bits")
                if isinstance(v, float) and not math.isfinite(v):
                    self.diag(f"float literal {v!r} is not finite")
                return lit_type(v)
            case Var(name=name):
                t = self.lookup(name, scopes)
                if t is None:
                    self.diag(f"unbound variable '{name}'")
                return t
            case Load(ref=ref, index=index):
                at = self.array_type(ref, scopes)
                it = self.expr(index, scopes)
                if it is not None and it != "int":
                    self.diag(f"load index into '{ref}' must be int")
                return element_type(at) if at else None
            case BinOp(op=op, lhs=lhs, rhs=rhs):
                if op not in BINOPS:
                    self.diag(f"unknown operator '{op}'")
                    return None
                t = self.numeric_pair(op, lhs, rhs, scopes)
                if t == "float" and op in INT_ONLY_BINOPS:
                    self.diag(f"{op} is not defined on float")
                    return None
                return t
            case Cmp(op=op, lhs=lhs, rhs=rhs):
                if op not in CMPOPS:
                    self.diag(f"unknown comparison '{op}'")
                    return None
                self.numeric_pair(op, lhs, rhs, scopes)
                return "int"
            case Call(fn=name, args=args):
                arg_types = [self.expr(a, scopes) for a in args]
                callee = self.functions.get(name)
                if callee is None:
                    self.diag(f"call to unknown function '{name}'")
                    return None
                if len(args) != len(callee.params):
                    expected, got = len(callee.params), len(args)
                    self.diag(
                        f"call to '{name}' expects {expected} arguments, got {got}"
                    )
                else:
                    for p, t in zip(callee.params, arg_types):
                        if t is not None and t != p.type:
                            message = f"'{p.name}' expects {p.type}, got {t}"
                            self.diag(f"call to '{name}': {message}")
                return callee.ret
            case SpecValue(label=label, expr=inner):
                self.register_label(label)
                if isinstance(e, SpecEnum):
                    if not e.values:
                        self.diag(f"enum '{label}' has no values")
                    elif len(set(e.values)) != len(e.values):
                        self.diag(f"enum '{label}' has duplicate values")
                if isinstance(e, SpecRange) and e.lo > e.hi:
                    self.diag(f"range '{label}' has lo > hi")
                t = self.expr(inner, scopes)
                if t is not None and t != "int":
                    self.diag(f"spec point '{label}' must wrap an int expression")
                return t
            case Tap(label=label, every_k=k, mode=mode, lo=lo, hi=hi, expr=inner):
                if k < 1:
                    self.diag(f"tap '{label}' needs every_k >= 1")
                if mode not in ("freq", "hist"):
                    self.diag(f"tap '{label}' has invalid mode '{mode}'")
                if mode == "hist" and lo > hi:
                    self.diag(f"tap '{label}' has lo > hi")
                t = self.expr(inner, scopes)
                if t is not None and t != "int":
                    self.diag(f"tap '{label}' must wrap an int expression")
                return t
        self.diag(f"unknown expression {type(e).__name__}")
        return None


def definitely_returns(block: Block) -> bool:
    for s in block:
        match s:
            case Return():
                return True
            case If(then=then, orelse=orelse):
                if definitely_returns(then) and definitely_returns(orelse):
                    return True
            case Do(body=body):
                if definitely_returns(body):
                    return True
    return False


def validate_module(m: HandlerModule) -> list[str]:
    """Return the list of validation diagnostics (empty when valid)."""
    return _Validator(m).run()


def check_module(m: HandlerModule) -> HandlerModule:
    diagnostics = validate_module(m)
    if diagnostics:
        raise IRValidationError(diagnostics)
    return m
