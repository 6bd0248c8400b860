"""Canonical s-expression text format for handler modules.

Grammar (``;`` starts a comment that runs to the end of the line)::

    module  := (module ITEM...) | ITEM...
    ITEM    := (extern NAME KIND [LEN]) | (fn NAME (NAME:TYPE...) -> TYPE BODY)
    BODY    := (block STMT...) | STMT
    STMT    := (let N E) | (assign N E) | (store A E E) | (if E BODY [BODY])
             | (for N E E E BODY) | (while E BODY) | (return [E]) | (expr E)
             | (spec-assume L E) | (spec-custom L KIND) | (guard L E)
             | (fact L E) | (do STMT...)
    E       := INT | FLOAT | NAME | (load A E) | (BINOP E E) | (CMP E E)
             | (call F E...) | (spec-enum L E V...) | (spec-range L E LO HI)
             | (spec-generic L E) | (tap L K freq E) | (tap L K hist LO HI E)
"""

import math
import re
from dataclasses import dataclass

from .errors import IRSyntaxError
from .mini_ir import (
    ARRAY_TYPES,
    BINOPS,
    CMPOPS,
    RETURN_TYPES,
    VALUE_TYPES,
    Assign,
    BinOp,
    Block,
    Call,
    Cmp,
    Do,
    Expr,
    Extern,
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
    Param,
    Tap,
    Return,
    SpecAssume,
    SpecCustom,
    SpecEnum,
    SpecGeneric,
    SpecRange,
    Stmt,
    Store,
    Var,
    While,
    check_module,
)

_TOKEN = re.compile(
    r"(?P<ws>\s+)|(?P<comment>;[^\n]*)|(?P<open>\()|(?P<close>\))|(?P<atom>[^\s();]+)"
)
_NAME = re.compile(r"[A-Za-z_][A-Za-z0-9_]*$")
_KIND_NAME = re.compile(r"[A-Za-z_][A-Za-z0-9_\-]*$")
_INT = re.compile(r"[-+]?\d+$")
_FLOAT = re.compile(r"[-+]?(\d+\.\d*|\.\d+|\d+(\.\d*)?[eE][-+]?\d+)$")


@dataclass(frozen=True, slots=True)
class Atom:
    text: str
    line: int
    col: int


@dataclass(frozen=True, slots=True)
class SList:
    items: tuple["Atom | SList", ...]
    line: int
    col: int


SExpr = Atom | SList


def read_sexprs(text: str) -> list[SExpr]:
    stack: list[tuple[list[SExpr], int, int]] = [([], 1, 1)]
    line, line_start = 1, 0
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        col = pos - line_start + 1
        kind = m.lastgroup
        if kind == "open":
            stack.append(([], line, col))
        elif kind == "close":
            if len(stack) == 1:
                raise IRSyntaxError("unbalanced ')'", line, col)
            items, l0, c0 = stack.pop()
            stack[-1][0].append(SList(tuple(items), l0, c0))
        elif kind == "atom":
            stack[-1][0].append(Atom(m.group(), line, col))
        else:
            newlines = m.group().count("\n")
            if newlines:
                line += newlines
                line_start = pos + m.group().rindex("\n") + 1
        pos = m.end()
    if len(stack) > 1:
        _, l0, c0 = stack[-1]
        raise IRSyntaxError("unclosed '('", l0, c0)
    return stack[0][0]


class _Reader:
    def fail(self, node: SExpr, msg: str):
        raise IRSyntaxError(msg, node.line, node.col)

    def head(self, node: SExpr) -> str:
        if not isinstance(node, SList) or not node.items:
            self.fail(node, "expected a form")
        first = node.items[0]
        if not isinstance(first, Atom):
            self.fail(first, "form head must be a word")
        return first.text

    def is_form(self, node: SExpr, head: str) -> bool:
        if not isinstance(node, SList) or not node.items:
            return False
        first = node.items[0]
        return isinstance(first, Atom) and first.text == head

    def arity(self, node: SList, *counts: int):
        if len(node.items) - 1 not in counts:
            allowed = " or ".join(map(str, counts))
            self.fail(node, f"'{node.items[0].text}' takes {allowed} operands")

    def atom(self, node: SExpr, what: str) -> str:
        if not isinstance(node, Atom):
            self.fail(node, f"expected {what}")
        return node.text

    def name(self, node: SExpr, what: str = "a name") -> str:
        text = self.atom(node, what)
        if not _NAME.match(text):
            self.fail(node, f"invalid {what} '{text}'")
        return text

    def integer(self, node: SExpr, what: str = "an integer") -> int:
        text = self.atom(node, what)
        if not _INT.match(text):
            self.fail(node, f"expected {what}, got '{text}'")
        return int(text)

    def module(self, forms: list[SExpr]) -> HandlerModule:
        if len(forms) == 1 and self.is_form(forms[0], "module"):
            forms = list(forms[0].items[1:])
        functions, externs = [], []
        for form in forms:
            match self.head(form):
                case "extern":
                    externs.append(self.extern(form))
                case "fn":
                    functions.append(self.function(form))
                case other:
                    self.fail(form, f"unexpected top-level form '{other}'")
        return HandlerModule(tuple(functions), tuple(externs))

    def extern(self, form: SList) -> Extern:
        items = form.items
        if len(items) < 3:
            self.fail(form, "extern needs a name and a kind")
        name = self.name(items[1], "external name")
        kind = self.atom(items[2], "external kind")
        if kind not in VALUE_TYPES:
            self.fail(items[2], f"invalid external kind '{kind}'")
        length = None
        if len(items) > 3:
            size = items[3]
            sized = isinstance(size, Atom) and _INT.match(size.text)
            if kind not in ARRAY_TYPES or len(items) > 4 or not sized:
                self.fail(size, "externals are declarations; initializer not allowed")
            length = int(size.text)
            if length < 0:
                self.fail(size, "external length must be >= 0")
        return Extern(name, kind, length)

    def function(self, form: SList) -> Function:
        items = form.items
        if len(items) != 6:
            self.fail(form, "fn takes NAME (PARAMS) -> TYPE BODY")
        name = self.name(items[1], "function name")
        if not isinstance(items[2], SList):
            self.fail(items[2], "expected a parameter list")
        params = []
        for p in items[2].items:
            text = self.atom(p, "NAME:TYPE")
            pname, sep, ptype = text.partition(":")
            if not sep or not _NAME.match(pname) or ptype not in VALUE_TYPES:
                self.fail(p, f"invalid parameter '{text}'")
            params.append(Param(pname, ptype))
        if self.atom(items[3], "'->'") != "->":
            self.fail(items[3], "expected '->'")
        ret = self.atom(items[4], "a return type")
        if ret not in RETURN_TYPES:
            self.fail(items[4], f"invalid return type '{ret}'")
        return Function(name, tuple(params), ret, self.body(items[5]))

    def body(self, node: SExpr) -> Block:
        if self.is_form(node, "block"):
            return tuple(self.stmt(s) for s in node.items[1:])
        return (self.stmt(node),)

    def stmt(self, node: SExpr) -> Stmt:
        head = self.head(node)
        it = node.items
        match head:
            case "let" | "assign":
                self.arity(node, 2)
                cls = Let if head == "let" else Assign
                return cls(self.name(it[1]), self.expr(it[2]))
            case "store":
                self.arity(node, 3)
                ref = self.name(it[1], "array name")
                return Store(ref, self.expr(it[2]), self.expr(it[3]))
            case "if":
                self.arity(node, 2, 3)
                orelse = self.body(it[3]) if len(it) == 4 else ()
                return If(self.expr(it[1]), self.body(it[2]), orelse)
            case "for":
                self.arity(node, 5)
                var = self.name(it[1], "loop variable")
                lo, hi, step = (self.expr(e) for e in it[2:5])
                return For(var, lo, hi, step, self.body(it[5]))
            case "while":
                self.arity(node, 2)
                return While(self.expr(it[1]), self.body(it[2]))
            case "return":
                self.arity(node, 0, 1)
                return Return(self.expr(it[1]) if len(it) == 2 else None)
            case "expr":
                self.arity(node, 1)
                return ExprStmt(self.expr(it[1]))
            case "spec-assume" | "guard" | "fact":
                self.arity(node, 2)
                cls = {"spec-assume": SpecAssume, "guard": Guard, "fact": Fact}[head]
                return cls(self.name(it[1], "label"), self.expr(it[2]))
            case "spec-custom":
                self.arity(node, 2)
                kind = self.atom(it[2], "a generator kind")
                if not _KIND_NAME.match(kind):
                    self.fail(it[2], f"invalid generator kind '{kind}'")
                return SpecCustom(self.name(it[1], "label"), kind)
            case "do":
                return Do(tuple(self.stmt(s) for s in it[1:]))
        self.fail(node, f"unknown statement '{head}'")

    def expr(self, node: SExpr) -> Expr:
        if isinstance(node, Atom):
            text = node.text
            if _INT.match(text):
                return Lit(int(text))
            if _FLOAT.match(text):
                return Lit(float(text))
            if _NAME.match(text):
                return Var(text)
            self.fail(node, f"invalid atom '{text}'")
        head = self.head(node)
        it = node.items
        if head in BINOPS or head in CMPOPS:
            self.arity(node, 2)
            cls = BinOp if head in BINOPS else Cmp
            return cls(head, self.expr(it[1]), self.expr(it[2]))
        match head:
            case "load":
                self.arity(node, 2)
                return Load(self.name(it[1], "array name"), self.expr(it[2]))
            case "call":
                if len(it) < 2:
                    self.fail(node, "call needs a function name")
                fn = self.name(it[1], "function name")
                return Call(fn, tuple(self.expr(a) for a in it[2:]))
            case "spec-enum":
                if len(it) < 4:
                    self.fail(node, "spec-enum needs LABEL EXPR and at least one value")
                values = tuple(self.integer(v, "an enum value") for v in it[3:])
                return SpecEnum(self.name(it[1], "label"), self.expr(it[2]), values)
            case "spec-range":
                self.arity(node, 4)
                label = self.name(it[1], "label")
                lo, hi = self.integer(it[3]), self.integer(it[4])
                return SpecRange(label, self.expr(it[2]), lo, hi)
            case "spec-generic":
                self.arity(node, 2)
                return SpecGeneric(self.name(it[1], "label"), self.expr(it[2]))
            case "tap":
                if len(it) < 5:
                    self.fail(node, "tap needs LABEL K MODE ... EXPR")
                label = self.name(it[1], "label")
                every_k = self.integer(it[2], "a sampling interval")
                mode = self.atom(it[3], "a tap mode")
                if mode == "freq":
                    self.arity(node, 4)
                    return Tap(label, every_k, "freq", 0, 0, self.expr(it[4]))
                if mode == "hist":
                    self.arity(node, 6)
                    lo, hi = self.integer(it[4]), self.integer(it[5])
                    return Tap(label, every_k, "hist", lo, hi, self.expr(it[6]))
                self.fail(it[3], f"invalid tap mode '{mode}'")
        self.fail(node, f"unknown expression '{head}'")


def parse_module(text: str, validate: bool = True) -> HandlerModule:
    """Parse module text; raises IRSyntaxError or IRValidationError."""
    module = _Reader().module(read_sexprs(text))
    return check_module(module) if validate else module


def parse_expr(text: str) -> Expr:
    forms = read_sexprs(text)
    if len(forms) != 1:
        raise IRSyntaxError("expected exactly one expression", 1, 1)
    return _Reader().expr(forms[0])


# -- printing -----------------------------------------------------------------

_INDENT = "  "


def format_literal(value: int | float) -> str:
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError(f"literal {value!r} has no textual form")
        return repr(value)
    return str(value)


def format_expr(e: Expr) -> str:
    match e:
        case Lit(value=v):
            return format_literal(v)
        case Var(name=name):
            return name
        case Load(ref=ref, index=index):
            return f"(load {ref} {format_expr(index)})"
        case BinOp(op=op, lhs=lhs, rhs=rhs) | Cmp(op=op, lhs=lhs, rhs=rhs):
            return f"({op} {format_expr(lhs)} {format_expr(rhs)})"
        case Call(fn=fn, args=args):
            return "(call " + " ".join([fn, *map(format_expr, args)]) + ")"
        case SpecEnum(label=label, expr=inner, values=values):
            listed = " ".join(map(str, values))
            return f"(spec-enum {label} {format_expr(inner)} {listed})"
        case SpecRange(label=label, expr=inner, lo=lo, hi=hi):
            return f"(spec-range {label} {format_expr(inner)} {lo} {hi})"
        case SpecGeneric(label=label, expr=inner):
            return f"(spec-generic {label} {format_expr(inner)})"
        case Tap(label=label, every_k=k, mode="freq", expr=inner):
            return f"(tap {label} {k} freq {format_expr(inner)})"
        case Tap(label=label, every_k=k, lo=lo, hi=hi, expr=inner):
            return f"(tap {label} {k} hist {lo} {hi} {format_expr(inner)})"
    raise TypeError(f"cannot print {e!r}")


def _closed(lines: list[str]) -> list[str]:
    lines[-1] += ")"
    return lines


def _block_lines(block: Block, depth: int) -> list[str]:
    pad = _INDENT * depth
    if not block:
        return [pad + "(block)"]
    lines = [pad + "(block"]
    for s in block:
        lines.extend(_stmt_lines(s, depth + 1))
    return _closed(lines)


def _stmt_lines(s: Stmt, depth: int) -> list[str]:
    pad = _INDENT * depth
    match s:
        case Let(name=n, expr=e):
            return [f"{pad}(let {n} {format_expr(e)})"]
        case Assign(name=n, expr=e):
            return [f"{pad}(assign {n} {format_expr(e)})"]
        case Store(ref=ref, index=i, value=v):
            return [f"{pad}(store {ref} {format_expr(i)} {format_expr(v)})"]
        case If(cond=c, then=then, orelse=orelse):
            return _closed(
                [
                    f"{pad}(if {format_expr(c)}",
                    *_block_lines(then, depth + 1),
                    *_block_lines(orelse, depth + 1),
                ]
            )
        case For(var=v, lo=lo, hi=hi, step=step, body=body):
            bounds = " ".join(map(format_expr, (lo, hi, step)))
            head = f"{pad}(for {v} {bounds}"
            return _closed([head, *_block_lines(body, depth + 1)])
        case While(cond=c, body=body):
            head = f"{pad}(while {format_expr(c)}"
            return _closed([head, *_block_lines(body, depth + 1)])
        case Return(expr=None):
            return [f"{pad}(return)"]
        case Return(expr=e):
            return [f"{pad}(return {format_expr(e)})"]
        case ExprStmt(expr=e):
            return [f"{pad}(expr {format_expr(e)})"]
        case SpecAssume(label=label, pred=pred):
            return [f"{pad}(spec-assume {label} {format_expr(pred)})"]
        case SpecCustom(label=label, kind=kind):
            return [f"{pad}(spec-custom {label} {kind})"]
        case Guard(label=label, cond=c):
            return [f"{pad}(guard {label} {format_expr(c)})"]
        case Fact(label=label, cond=c):
            return [f"{pad}(fact {label} {format_expr(c)})"]
        case Do(body=body):
            if not body:
                return [f"{pad}(do)"]
            lines = [f"{pad}(do"]
            for sub in body:
                lines.extend(_stmt_lines(sub, depth + 1))
            return _closed(lines)
    raise TypeError(f"cannot print {s!r}")


def print_function(fn: Function, depth: int = 0) -> str:
    pad = _INDENT * depth
    params = " ".join(f"{p.name}:{p.type}" for p in fn.params)
    head = f"{pad}(fn {fn.name} ({params}) -> {fn.ret}"
    lines = [head, *_block_lines(fn.body, depth + 1)]
    return "\n".join(_closed(lines))


def print_module(m: HandlerModule) -> str:
    """Canonical text: one item per line group, two-space indent, trailing newline."""
    lines = ["(module"]
    for e in m.externs:
        length = "" if e.length is None else f" {e.length}"
        lines.append(f"{_INDENT}(extern {e.name} {e.kind}{length})")
    for f in m.functions:
        lines.extend(print_function(f, 1).split("\n"))
    return "\n".join(_closed(lines)) + "\n"
