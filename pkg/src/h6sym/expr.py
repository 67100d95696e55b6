"""Small arithmetic expression language for user-supplied functions F, G.

Grammar (EBNF)::

    expr    = term { ("+" | "-") term } ;
    term    = unary { ("*" | "/") unary } ;
    unary   = "-" unary | power ;
    power   = atom [ "^" exponent ] ;
    exponent= [ "-" ] integer | "(" [ "-" ] integer ")" ;
    atom    = number | name | func "(" expr ")" | "(" expr ")" ;
    func    = "exp" | "log" | "sin" | "cos" | "sqrt" ;
    number  = digits [ "." digits ] ;

Names must belong to the variable set given to :func:`parse_expr`
(``X, Y`` by default).  Literals are stored as exact fractions.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from decimal import Decimal
from fractions import Fraction
from typing import Mapping, Union

from . import autodiff
from .autodiff import DomainError, Dual

FUNCTIONS = {
    "exp": autodiff.exp,
    "log": autodiff.log,
    "sin": autodiff.sin,
    "cos": autodiff.cos,
    "sqrt": autodiff.sqrt,
}


class ExprSyntaxError(ValueError):
    def __init__(self, message: str, position: int, text: str):
        super().__init__(f"{message} at position {position}: {text!r}")
        self.position = position
        self.text = text


class ExprDomainError(DomainError):
    """Domain violation, tagged with the sub-expression where it happened."""

    def __init__(self, reason: str, subexpr: str):
        super().__init__(f"{reason} in sub-expression {subexpr!r}")
        self.reason = reason
        self.subexpr = subexpr


# tree nodes


@dataclass(frozen=True)
class Num:
    value: Fraction


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Pow:
    base: "Node"
    exponent: int


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Node"


Node = Union[Num, Var, Neg, BinOp, Pow, Call]


# tokenizer

_TOKEN = re.compile(r"\s*(?:(\d+(?:\.\d+)?)|([A-Za-z_][A-Za-z_0-9]*)|(.))")


def _tokenize(text: str):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            break
        start = m.start(m.lastindex) if m.lastindex else m.end()
        if m.group(1):
            tokens.append(("num", m.group(1), start))
        elif m.group(2):
            tokens.append(("name", m.group(2), start))
        elif m.group(3):
            ch = m.group(3)
            if ch not in "+-*/^()":
                raise ExprSyntaxError(f"unexpected character {ch!r}", start, text)
            tokens.append(("op", ch, start))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, variables: tuple[str, ...]):
        self.text = text
        self.variables = variables
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def error(self, message, tok=None):
        tok = tok or self.peek()
        raise ExprSyntaxError(message, tok[2], self.text)

    def expect(self, value):
        tok = self.take()
        if tok[1] != value or tok[0] != "op":
            self.error(f"expected {value!r}", tok)
        return tok

    def parse(self) -> Node:
        if self.peek()[0] == "end":
            self.error("empty expression")
        node = self.expr()
        if self.peek()[0] != "end":
            self.error(f"unexpected token {self.peek()[1]!r}")
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        if self.peek()[0:2] == ("op", "-"):
            self.take()
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[0:2] == ("op", "^"):
            self.take()
            return Pow(base, self.exponent())
        return base

    def exponent(self) -> int:
        paren = self.peek()[0:2] == ("op", "(")
        if paren:
            self.take()
        sign = 1
        if self.peek()[0:2] == ("op", "-"):
            self.take()
            sign = -1
        tok = self.take()
        if tok[0] != "num" or "." in tok[1]:
            self.error("exponent must be an integer literal", tok)
        if paren:
            self.expect(")")
        return sign * int(tok[1])

    def atom(self):
        tok = self.take()
        kind, value, _ = tok
        if kind == "num":
            return Num(Fraction(value))
        if kind == "name":
            if value in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(value, arg)
            if value in self.variables:
                return Var(value)
            self.error(f"unknown identifier {value!r} (allowed: {', '.join(self.variables)})", tok)
        if (kind, value) == ("op", "("):
            node = self.expr()
            self.expect(")")
            return node
        self.error("unexpected end of input" if kind == "end" else f"unexpected token {value!r}", tok)


# unparsing

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def _prec(node: Node) -> int:
    if isinstance(node, BinOp):
        return _PREC[node.op]
    if isinstance(node, Neg):
        return 3
    if isinstance(node, Pow):
        return 4
    return 5


def _fmt_num(value: Fraction) -> str:
    if value.denominator == 1:
        return str(value.numerator)
    # literals come from finite decimals, so this terminates
    d = Decimal(value.numerator) / Decimal(value.denominator)
    s = format(d, "f")
    return s.rstrip("0").rstrip(".") if "." in s else s


def unparse(node: Node) -> str:
    if isinstance(node, Num):
        return _fmt_num(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Call):
        return f"{node.func}({unparse(node.arg)})"
    if isinstance(node, Neg):
        inner = unparse(node.operand)
        return f"-{inner}" if _prec(node.operand) >= 3 else f"-({inner})"
    if isinstance(node, Pow):
        base = unparse(node.base)
        if _prec(node.base) < 5:
            base = f"({base})"
        exp = str(node.exponent) if node.exponent >= 0 else f"({node.exponent})"
        return f"{base}^{exp}"
    p = _PREC[node.op]
    left = unparse(node.left)
    if _prec(node.left) < p:
        left = f"({left})"
    right = unparse(node.right)
    if _prec(node.right) <= p:
        right = f"({right})"
    sep = f" {node.op} " if p == 1 else node.op
    return f"{left}{sep}{right}"


# evaluation


def _is_zero(x) -> bool:
    return (x.value if isinstance(x, Dual) else x) == 0


def evaluate(node: Node, env: Mapping[str, object]):
    """Evaluate with floats or dual numbers; domain errors name the sub-expression."""
    if isinstance(node, Num):
        return float(node.value)
    if isinstance(node, Var):
        return env[node.name]
    if isinstance(node, Neg):
        return -evaluate(node.operand, env)
    if isinstance(node, Call):
        arg = evaluate(node.arg, env)
        try:
            return FUNCTIONS[node.func](arg)
        except ExprDomainError:
            raise
        except DomainError as exc:
            raise ExprDomainError(str(exc), unparse(node)) from None
    if isinstance(node, Pow):
        base = evaluate(node.base, env)
        if node.exponent < 0 and _is_zero(base):
            raise ExprDomainError("zero raised to a negative power", unparse(node))
        if isinstance(base, Dual):
            return base**node.exponent
        return float(base) ** node.exponent
    left = evaluate(node.left, env)
    right = evaluate(node.right, env)
    if node.op == "+":
        return left + right
    if node.op == "-":
        return left - right
    if node.op == "*":
        return left * right
    if _is_zero(right):
        raise ExprDomainError("division by zero", unparse(node))
    return left / right


def free_variables(node: Node) -> set[str]:
    if isinstance(node, Var):
        return {node.name}
    if isinstance(node, Num):
        return set()
    if isinstance(node, (Neg, Call)):
        return free_variables(node.operand if isinstance(node, Neg) else node.arg)
    if isinstance(node, Pow):
        return free_variables(node.base)
    return free_variables(node.left) | free_variables(node.right)


@dataclass(frozen=True)
class ExprTree:
    """A parsed expression together with its declared variables."""

    root: Node
    variables: tuple[str, ...] = ("X", "Y")

    def __call__(self, *args, **kwargs):
        env = dict(zip(self.variables, args))
        env.update(kwargs)
        missing = [v for v in self.variables if v not in env]
        if missing:
            raise ValueError(f"missing values for {missing}")
        return evaluate(self.root, env)

    def unparse(self) -> str:
        return unparse(self.root)

    def __str__(self) -> str:
        return self.unparse()


def parse_expr(text: str, variables=("X", "Y")) -> ExprTree:
    if not isinstance(text, str):
        raise TypeError("expression must be a string")
    variables = tuple(variables)
    return ExprTree(_Parser(text, variables).parse(), variables)
