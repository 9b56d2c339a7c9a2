"""Values, expressions and three-valued guard evaluation.

The value domain is the set of concrete literals of the five base types plus
an absorbing unknown element :data:`TOP`.  Guards evaluate to a
:class:`Truth3` under strong Kleene logic.

This module also owns the concrete text syntax for expressions, shared by the
``.cir`` format (branch conditions, written values) and the net exports::

    ready == true && !(count >= 3)
    count + 1
    state == Busy
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from typing import Mapping, Union

BASE_TYPES = ("Bool", "Int", "Float", "String", "Enum")


class UnknownVariable(KeyError):
    """A ``Ref`` names a variable that the valuation does not house."""


# ---------------------------------------------------------------------------
# Values
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Concrete:
    type: str
    value: object

    def __repr__(self) -> str:
        return f"Concrete({self.type}, {self.value!r})"


class _Top:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "TOP"

    def __reduce__(self):
        return (_Top, ())


TOP = _Top()
Value = Union[Concrete, _Top]


def is_top(v: Value) -> bool:
    return v is TOP


def boolean(b: bool) -> Concrete:
    return Concrete("Bool", bool(b))


def integer(n: int) -> Concrete:
    return Concrete("Int", int(n))


def format_value(v: Value) -> str:
    if v is TOP:
        return "⊤"
    if v.type == "Bool":
        return "true" if v.value else "false"
    if v.type == "String":
        return '"' + str(v.value).replace("\\", "\\\\").replace('"', '\\"') + '"'
    if v.type == "Float":
        return repr(float(v.value))
    return str(v.value)


def value_to_json(v: Value):
    if v is TOP:
        return {"top": True}
    return {"type": v.type, "value": v.value}


# ---------------------------------------------------------------------------
# Three-valued truth
# ---------------------------------------------------------------------------


class Truth3(enum.Enum):
    FALSE = 0
    TRUE = 1
    UNKNOWN = 2

    @classmethod
    def of(cls, b: bool) -> "Truth3":
        return cls.TRUE if b else cls.FALSE

    def __and__(self, other: "Truth3") -> "Truth3":
        if self is Truth3.FALSE or other is Truth3.FALSE:
            return Truth3.FALSE
        if self is Truth3.UNKNOWN or other is Truth3.UNKNOWN:
            return Truth3.UNKNOWN
        return Truth3.TRUE

    def __or__(self, other: "Truth3") -> "Truth3":
        if self is Truth3.TRUE or other is Truth3.TRUE:
            return Truth3.TRUE
        if self is Truth3.UNKNOWN or other is Truth3.UNKNOWN:
            return Truth3.UNKNOWN
        return Truth3.FALSE

    def __invert__(self) -> "Truth3":
        if self is Truth3.UNKNOWN:
            return self
        return Truth3.of(self is Truth3.FALSE)

    def __str__(self) -> str:
        return self.name.lower()


# ---------------------------------------------------------------------------
# Expression trees
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Lit:
    value: Value


@dataclass(frozen=True)
class Ref:
    name: str


@dataclass(frozen=True)
class BinOp:
    left: "Expr"
    op: str
    right: "Expr"


Expr = Union[Lit, Ref, BinOp]


@dataclass(frozen=True)
class BTrue:
    pass


@dataclass(frozen=True)
class BFalse:
    pass


@dataclass(frozen=True)
class Cmp:
    left: Expr
    op: str
    right: Expr


@dataclass(frozen=True)
class And:
    left: "BoolExpr"
    right: "BoolExpr"


@dataclass(frozen=True)
class Or:
    left: "BoolExpr"
    right: "BoolExpr"


@dataclass(frozen=True)
class Not:
    arg: "BoolExpr"


BoolExpr = Union[BTrue, BFalse, Cmp, And, Or, Not]

ARITH_OPS = ("+", "-", "*", "/", "%")
CMP_OPS = ("==", "!=", "<", "<=", ">", ">=")
BOOL_TYPES = (BTrue, BFalse, Cmp, And, Or, Not)
EXPR_TYPES = (Lit, Ref, BinOp)


def is_bool_expr(node) -> bool:
    return isinstance(node, BOOL_TYPES)


def conj(parts) -> BoolExpr:
    """Fold a sequence of guards with ``And``; empty means ``True``."""
    parts = list(parts)
    if not parts:
        return BTrue()
    acc = parts[0]
    for p in parts[1:]:
        acc = And(acc, p)
    return acc


def refs(node) -> set:
    """Variable names referenced anywhere under ``node``."""
    if isinstance(node, Ref):
        return {node.name}
    if isinstance(node, (BinOp, Cmp, And, Or)):
        return refs(node.left) | refs(node.right)
    if isinstance(node, Not):
        return refs(node.arg)
    return set()


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

_NUMERIC = ("Int", "Float")


def _arith(op: str, a: Concrete, b: Concrete) -> Value:
    if a.type == "String" and b.type == "String" and op == "+":
        return Concrete("String", a.value + b.value)
    if a.type not in _NUMERIC or b.type not in _NUMERIC:
        return TOP
    rtype = "Int" if a.type == b.type == "Int" else "Float"
    x, y = a.value, b.value
    if op in ("/", "%") and y == 0:
        return TOP
    if op == "+":
        r = x + y
    elif op == "-":
        r = x - y
    elif op == "*":
        r = x * y
    elif op == "/":
        r = x // y if rtype == "Int" else x / y
    elif op == "%":
        r = x % y
    else:
        raise ValueError(f"unknown arithmetic operator {op!r}")
    return Concrete(rtype, int(r) if rtype == "Int" else float(r))


def eval_expr(e: Expr, v: Mapping[str, Value]) -> Value:
    """Evaluate a value expression; any ``TOP`` operand makes the result ``TOP``."""
    if isinstance(e, Lit):
        return e.value
    if isinstance(e, Ref):
        try:
            return v[e.name]
        except KeyError:
            raise UnknownVariable(e.name) from None
    if isinstance(e, BinOp):
        a = eval_expr(e.left, v)
        b = eval_expr(e.right, v)
        if a is TOP or b is TOP:
            return TOP
        return _arith(e.op, a, b)
    raise TypeError(f"not a value expression: {e!r}")


def _compare(op: str, a: Concrete, b: Concrete) -> Truth3:
    numeric = a.type in _NUMERIC and b.type in _NUMERIC
    if op in ("==", "!="):
        if numeric:
            eq = a.value == b.value
        else:
            eq = a.type == b.type and a.value == b.value
        return Truth3.of(eq if op == "==" else not eq)
    if not (numeric or (a.type == b.type == "String")):
        return Truth3.UNKNOWN
    x, y = a.value, b.value
    return Truth3.of(
        {"<": x < y, "<=": x <= y, ">": x > y, ">=": x >= y}[op]
    )


def eval_guard(g: BoolExpr, v: Mapping[str, Value]) -> Truth3:
    """Strong Kleene evaluation; comparisons touching ``TOP`` are unknown."""
    if isinstance(g, BTrue):
        return Truth3.TRUE
    if isinstance(g, BFalse):
        return Truth3.FALSE
    if isinstance(g, Cmp):
        a = eval_expr(g.left, v)
        b = eval_expr(g.right, v)
        if a is TOP or b is TOP:
            return Truth3.UNKNOWN
        return _compare(g.op, a, b)
    if isinstance(g, And):
        # both sides evaluated so that unhoused variables are always reported
        return eval_guard(g.left, v) & eval_guard(g.right, v)
    if isinstance(g, Or):
        return eval_guard(g.left, v) | eval_guard(g.right, v)
    if isinstance(g, Not):
        return ~eval_guard(g.arg, v)
    raise TypeError(f"not a boolean expression: {g!r}")


# ---------------------------------------------------------------------------
# Text syntax
# ---------------------------------------------------------------------------


class ExprSyntaxError(ValueError):
    def __init__(self, message: str, offset: int = 0):
        super().__init__(message)
        self.offset = offset


_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<float>\d+\.\d+)
  | (?P<int>\d+)
  | (?P<str>"(?:[^"\\]|\\.)*")
  | (?P<op>==|!=|<=|>=|&&|\|\||[-+*/%<>!()])
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
    """,
    re.VERBOSE,
)

_WORD_OPS = {"and": "&&", "or": "||", "not": "!"}


def _tokenize(text: str):
    pos = 0
    out = []
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        if kind != "ws":
            tok = m.group(kind)
            if kind == "name" and tok in _WORD_OPS:
                kind, tok = "op", _WORD_OPS[tok]
            out.append((kind, tok, pos))
        pos = m.end()
    out.append(("end", "", len(text)))
    return out


def _unescape(s: str) -> str:
    return re.sub(r"\\(.)", r"\1", s[1:-1])


class _Parser:
    # precedence climbing: || < && < ! < cmp < +,- < *,/,%
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, tok: str):
        kind, val, pos = self.take()
        if val != tok:
            raise ExprSyntaxError(f"expected {tok!r}, found {val or 'end'!r}", pos)

    def parse(self):
        node = self.or_()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"trailing input at {val!r}", pos)
        return node

    def or_(self):
        node = self.and_()
        while self.peek()[1] == "||":
            self.take()
            node = Or(_as_bool(node, self), _as_bool(self.and_(), self))
        return node

    def and_(self):
        node = self.not_()
        while self.peek()[1] == "&&":
            self.take()
            node = And(_as_bool(node, self), _as_bool(self.not_(), self))
        return node

    def not_(self):
        if self.peek()[1] == "!":
            self.take()
            return Not(_as_bool(self.not_(), self))
        return self.cmp()

    def cmp(self):
        node = self.add()
        if self.peek()[1] in CMP_OPS:
            op = self.take()[1]
            node = Cmp(_as_value(node, self), op, _as_value(self.add(), self))
        return node

    def add(self):
        node = self.mul()
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            node = BinOp(_as_value(node, self), op, _as_value(self.mul(), self))
        return node

    def mul(self):
        node = self.atom()
        while self.peek()[1] in ("*", "/", "%"):
            op = self.take()[1]
            node = BinOp(_as_value(node, self), op, _as_value(self.atom(), self))
        return node

    def atom(self):
        kind, val, pos = self.take()
        if val == "-" and self.peek()[0] in ("int", "float"):
            kind, val, pos = self.take()
            val = "-" + val
        if val == "(":
            node = self.or_()
            self.expect(")")
            return node
        if kind == "int":
            return Lit(Concrete("Int", int(val)))
        if kind == "float":
            return Lit(Concrete("Float", float(val)))
        if kind == "str":
            return Lit(Concrete("String", _unescape(val)))
        if kind == "name":
            if val == "true":
                return BTrue()
            if val == "false":
                return BFalse()
            return Ref(val)
        raise ExprSyntaxError(f"unexpected {val or 'end'!r}", pos)


def _as_bool(node, p: _Parser):
    if not is_bool_expr(node):
        raise ExprSyntaxError("expected a boolean expression", p.peek()[2])
    return node


def _as_value(node, p: _Parser):
    # true/false in value position are Bool literals
    if isinstance(node, BTrue):
        return Lit(boolean(True))
    if isinstance(node, BFalse):
        return Lit(boolean(False))
    if is_bool_expr(node):
        raise ExprSyntaxError("expected a value expression", p.peek()[2])
    return node


def parse_expr(text: str) -> Expr:
    """Parse a value expression (``count + 1``, ``true``, ``"x"``, ``Idle``)."""
    p = _Parser(text)
    node = p.parse()
    return _as_value(node, p)


def parse_condition(text: str):
    """Parse a branch condition.

    Returns a :data:`BoolExpr` when the text is boolean; a bare value
    expression is returned unchanged so that the checker can report it as a
    non-boolean condition rather than the parser rejecting it.
    """
    return _Parser(text).parse()


def parse_literal(text: str, enum_ok: bool = True) -> Concrete:
    """Parse a single literal: Bool, Int, Float, quoted String, or bare Enum."""
    text = text.strip()
    if text in ("true", "false"):
        return boolean(text == "true")
    if re.fullmatch(r"-?\d+", text):
        return Concrete("Int", int(text))
    if re.fullmatch(r"-?\d+\.\d+", text):
        return Concrete("Float", float(text))
    if re.fullmatch(r'"(?:[^"\\]|\\.)*"', text):
        return Concrete("String", _unescape(text))
    if enum_ok and re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", text):
        return Concrete("Enum", text)
    raise ExprSyntaxError(f"invalid literal {text!r}")


_PREC = {"||": 1, "&&": 2, "!": 3, "cmp": 4, "+": 5, "-": 5, "*": 6, "/": 6, "%": 6}


def format_expr(node, _parent: int = 0) -> str:
    """Render an expression or guard; ``parse_*(format_expr(e)) == e``."""
    if isinstance(node, Lit):
        return format_value(node.value)
    if isinstance(node, Ref):
        return node.name
    if isinstance(node, BTrue):
        return "true"
    if isinstance(node, BFalse):
        return "false"
    if isinstance(node, BinOp):
        prec = _PREC[node.op]
        # left-associative: the right operand needs parentheses at equal precedence
        s = f"{format_expr(node.left, prec)} {node.op} {format_expr(node.right, prec + 1)}"
    elif isinstance(node, Cmp):
        prec = _PREC["cmp"]
        s = f"{format_expr(node.left, prec + 1)} {node.op} {format_expr(node.right, prec + 1)}"
    elif isinstance(node, (And, Or)):
        sym = "&&" if isinstance(node, And) else "||"
        prec = _PREC[sym]
        s = f"{format_expr(node.left, prec)} {sym} {format_expr(node.right, prec + 1)}"
    elif isinstance(node, Not):
        prec = _PREC["!"]
        s = "!" + format_expr(node.arg, _PREC["+"])
    else:
        raise TypeError(f"cannot format {node!r}")
    return f"({s})" if prec < _parent else s


def expr_to_json(node):
    """Expression tree as nested JSON-ready dicts."""
    if isinstance(node, Lit):
        return {"lit": value_to_json(node.value)}
    if isinstance(node, Ref):
        return {"ref": node.name}
    if isinstance(node, BTrue):
        return {"bool": True}
    if isinstance(node, BFalse):
        return {"bool": False}
    if isinstance(node, (BinOp, Cmp)):
        return {"op": node.op, "left": expr_to_json(node.left), "right": expr_to_json(node.right)}
    if isinstance(node, (And, Or)):
        return {"op": "&&" if isinstance(node, And) else "||",
                "left": expr_to_json(node.left), "right": expr_to_json(node.right)}
    if isinstance(node, Not):
        return {"op": "!", "arg": expr_to_json(node.arg)}
    raise TypeError(f"cannot serialise {node!r}")
