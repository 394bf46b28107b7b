# © Copyright 2021 Łukasz Langa.  Licensed under Apache License, Version 2.0.

"""Expression trees of the mapping-spec grammar.

    expr  := term (("+" | "-") term)*
    term  := unary (("*" | "/") unary)*
    unary := ("-" | "+") unary | power
    power := atom (("^" | "**") INT)?
    atom  := INT | "i" | "phi" | VAR | "conj" "(" expr ")" | "(" expr ")"

Constant subtrees are folded while parsing, so `3/2` is a single `Num` and
`-3` never appears as a negation of a literal.
"""

from __future__ import annotations
from typing import *

from dataclasses import dataclass
from functools import singledispatch

import numpy as np

from .errors import SpecSemanticError, SpecSyntaxError
from .poly import ONE, Coefficient, I, MixedPoly, complex_value, conjugate, format_coefficient, gaussian


MAX_EXPONENT = 64
MAX_TERMS = 20_000
MAX_DEPTH = 200
MAX_LITERAL_DIGITS = 1000
# Folded constants stay below this many bits per numerator plus denominator.
MAX_CONSTANT_BITS = 8192
ALIASES = {"z": 1, "w": 2, "zeta": 3, "ζ": 3}


class Expr:
    pass


@dataclass(frozen=True)
class Num(Expr):
    value: Coefficient


@dataclass(frozen=True)
class Var(Expr):
    index: int  # 1-based


@dataclass(frozen=True)
class Phi(Expr):
    """The reserved chart symbol φ = 1/(1+ρ)."""


@dataclass(frozen=True)
class Neg(Expr):
    arg: Expr


@dataclass(frozen=True)
class BinOp(Expr):
    op: Literal["+", "-", "*", "/"]
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Pow(Expr):
    base: Expr
    exponent: int


@dataclass(frozen=True)
class Conj(Expr):
    arg: Expr


# Constructors that fold constants.  They raise ZeroDivisionError and
# OverflowError, which the parser turns into positioned errors.


def constant_bits(c: Coefficient) -> int:
    return max(
        int(q.numerator).bit_length() + int(q.denominator).bit_length()
        for q in (c.x, c.y)
    )


def _checked(c: Coefficient) -> Num:
    if constant_bits(c) > MAX_CONSTANT_BITS:
        raise OverflowError(f"constant exceeds {MAX_CONSTANT_BITS} bits")
    return Num(c)


def make_binop(op: str, left: Expr, right: Expr) -> Expr:
    if isinstance(left, Num) and isinstance(right, Num):
        a, b = left.value, right.value
        if op == "+":
            return _checked(a + b)
        if op == "-":
            return _checked(a - b)
        if op == "*":
            return _checked(a * b)
        if not b:
            raise ZeroDivisionError("division by zero")
        return _checked(a / b)
    return BinOp(cast(Any, op), left, right)


def make_neg(arg: Expr) -> Expr:
    if isinstance(arg, Num):
        return Num(-arg.value)
    return Neg(arg)


def make_pow(base: Expr, exponent: int) -> Expr:
    if isinstance(base, Num):
        if exponent * constant_bits(base.value) > MAX_CONSTANT_BITS:
            raise OverflowError(f"constant exceeds {MAX_CONSTANT_BITS} bits")
        return Num(base.value ** exponent)
    return Pow(base, exponent)


def make_conj(arg: Expr) -> Expr:
    if isinstance(arg, Num):
        return Num(conjugate(arg.value))
    return Conj(arg)


# Tokenizer.


class Token(NamedTuple):
    kind: Literal["int", "ident", "op", "end"]
    text: str
    line: int
    column: int


OPERATORS = ("**", "+", "-", "*", "/", "^", "(", ")")


def tokenize(text: str, line: int = 1, column: int = 1) -> list[Token]:
    """Tokens of one expression; `column` is where `text` starts on its line."""
    tokens: list[Token] = []
    pos = 0
    while pos < len(text):
        ch = text[pos]
        col = column + pos
        if ch.isspace():
            pos += 1
        elif ch.isdigit():
            end = pos
            while end < len(text) and text[end].isdigit():
                end += 1
            if end - pos > MAX_LITERAL_DIGITS:
                raise SpecSyntaxError("integer literal too long", line, col)
            if end < len(text) and text[end] == ".":
                raise SpecSyntaxError(
                    "decimal literals are not allowed; write p/q", line, col
                )
            tokens.append(Token("int", text[pos:end], line, col))
            pos = end
        elif ch.isalpha() or ch == "_":
            end = pos
            while end < len(text) and (text[end].isalnum() or text[end] == "_"):
                end += 1
            tokens.append(Token("ident", text[pos:end], line, col))
            pos = end
        else:
            for op in OPERATORS:
                if text.startswith(op, pos):
                    tokens.append(Token("op", op, line, col))
                    pos += len(op)
                    break
            else:
                raise SpecSyntaxError(f"unexpected character {ch!r}", line, col)
    tokens.append(Token("end", "", line, column + len(text)))
    return tokens


class ExprParser:
    """Recursive descent over one expression.

    With `holomorphic=True` the conjugate and `phi` tokens are rejected,
    which is what G components require.
    """

    def __init__(self, tokens: list[Token], n: int, *, holomorphic: bool) -> None:
        self.tokens = tokens
        self.pos = 0
        self.n = n
        self.holomorphic = holomorphic
        self.depth = 0

    @property
    def current(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        token = self.tokens[self.pos]
        self.pos += 1
        return token

    def expect(self, text: str) -> Token:
        token = self.current
        if token.kind != "op" or token.text != text:
            found = token.text or "end of expression"
            raise SpecSyntaxError(
                f"expected {text!r}, found {found!r}", token.line, token.column
            )
        return self.advance()

    def parse(self) -> Expr:
        result = self.expr()
        token = self.current
        if token.kind != "end":
            raise SpecSyntaxError(
                f"unexpected {token.text!r}", token.line, token.column
            )
        return result

    def _fold(self, token: Token, build: Callable[[], Expr]) -> Expr:
        try:
            return build()
        except ZeroDivisionError:
            raise SpecSemanticError("division by zero", token.line, token.column)
        except OverflowError as e:
            raise SpecSemanticError(str(e), token.line, token.column)

    def expr(self) -> Expr:
        result = self.term()
        while self.current.kind == "op" and self.current.text in "+-":
            op = self.advance()
            right = self.term()
            left = result
            result = self._fold(op, lambda: make_binop(op.text, left, right))
        return result

    def term(self) -> Expr:
        result = self.unary()
        while self.current.kind == "op" and self.current.text in ("*", "/"):
            op = self.advance()
            right = self.unary()
            left = result
            result = self._fold(op, lambda: make_binop(op.text, left, right))
        return result

    def unary(self) -> Expr:
        token = self.current
        if token.kind == "op" and token.text in "+-":
            self.advance()
            self.depth += 1
            if self.depth > MAX_DEPTH:
                raise SpecSyntaxError("expression nested too deeply", token.line, token.column)
            arg = self.unary()
            self.depth -= 1
            return make_neg(arg) if token.text == "-" else arg
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        token = self.current
        if token.kind == "op" and token.text in ("^", "**"):
            self.advance()
            exp_token = self.current
            if exp_token.kind != "int":
                raise SpecSyntaxError(
                    "exponents must be nonnegative integer literals",
                    exp_token.line,
                    exp_token.column,
                )
            self.advance()
            exponent = int(exp_token.text)
            if exponent > MAX_EXPONENT:
                raise SpecSemanticError(
                    f"exponent {exponent} exceeds {MAX_EXPONENT}",
                    exp_token.line,
                    exp_token.column,
                )
            after = self.current
            if after.kind == "op" and after.text in ("^", "**"):
                raise SpecSyntaxError(
                    "chained exponents need parentheses", after.line, after.column
                )
            return self._fold(token, lambda: make_pow(base, exponent))
        return base

    def atom(self) -> Expr:
        token = self.advance()
        if token.kind == "int":
            return Num(gaussian(int(token.text)))
        if token.kind == "op" and token.text == "(":
            self.depth += 1
            if self.depth > MAX_DEPTH:
                raise SpecSyntaxError("expression nested too deeply", token.line, token.column)
            inner = self.expr()
            self.expect(")")
            self.depth -= 1
            return inner
        if token.kind == "ident":
            return self.identifier(token)
        found = token.text or "end of expression"
        raise SpecSyntaxError(f"unexpected {found!r}", token.line, token.column)

    def identifier(self, token: Token) -> Expr:
        name = token.text
        if name == "i":
            return Num(I)
        if name in ("conj", "phi"):
            if self.holomorphic:
                what = "conjugate token" if name == "conj" else "chart symbol phi"
                raise SpecSemanticError(
                    f"{what} in holomorphic component", token.line, token.column
                )
            if name == "phi":
                return Phi()
            self.expect("(")
            self.depth += 1
            if self.depth > MAX_DEPTH:
                raise SpecSyntaxError("expression nested too deeply", token.line, token.column)
            inner = self.expr()
            self.expect(")")
            self.depth -= 1
            return make_conj(inner)
        index = variable_index(name, self.n)
        if index is None:
            raise SpecSemanticError(
                f"unknown identifier {name!r} (variables are z1..z{self.n})",
                token.line,
                token.column,
            )
        return Var(index)


def variable_index(name: str, n: int) -> int | None:
    if name.startswith("z") and name[1:].isdigit():
        k = int(name[1:])
        return k if 1 <= k <= n else None
    if n <= 3 and name in ALIASES and ALIASES[name] <= n:
        return ALIASES[name]
    return None


def parse_expression(
    text: str, n: int, *, holomorphic: bool, line: int = 1, column: int = 1
) -> Expr:
    return ExprParser(tokenize(text, line, column), n, holomorphic=holomorphic).parse()


# Conversion to polynomials.


@singledispatch
def to_poly(e: Expr, n: int) -> MixedPoly:
    raise TypeError(type(e))


@to_poly.register
def _p_num(e: Num, n: int) -> MixedPoly:
    return MixedPoly.constant(n, e.value)


@to_poly.register
def _p_var(e: Var, n: int) -> MixedPoly:
    return MixedPoly.var(n, e.index)


@to_poly.register
def _p_phi(e: Phi, n: int) -> MixedPoly:
    raise SpecSemanticError("phi is not a polynomial")


@to_poly.register
def _p_neg(e: Neg, n: int) -> MixedPoly:
    return -to_poly(e.arg, n)


@to_poly.register
def _p_conj(e: Conj, n: int) -> MixedPoly:
    return to_poly(e.arg, n).conj()


def _guarded_product(a: MixedPoly, b: MixedPoly) -> MixedPoly:
    if len(a) * len(b) > 50 * MAX_TERMS:
        raise SpecSemanticError("expression too large to expand")
    result = a * b
    if len(result) > MAX_TERMS:
        raise SpecSemanticError("expression too large to expand")
    return result


@to_poly.register
def _p_binop(e: BinOp, n: int) -> MixedPoly:
    left = to_poly(e.left, n)
    right = to_poly(e.right, n)
    if e.op == "+":
        return left + right
    if e.op == "-":
        return left - right
    if e.op == "*":
        return _guarded_product(left, right)
    if right.degree > 0 or right.is_zero():
        raise SpecSemanticError("division by a non-constant or zero polynomial")
    zeros = (0,) * n
    return left.scale(ONE / right.terms[(zeros, zeros)])


@to_poly.register
def _p_pow(e: Pow, n: int) -> MixedPoly:
    base = to_poly(e.base, n)
    result = MixedPoly.constant(n, 1)
    for _ in range(e.exponent):
        result = _guarded_product(result, base)
    return result


# Canonical text.

PRECEDENCE = {"+": 1, "-": 1, "*": 2, "/": 2}
NEG_PRECEDENCE = 3
POW_PRECEDENCE = 4
ATOM_PRECEDENCE = 5


@singledispatch
def precedence(e: Expr) -> int:
    return ATOM_PRECEDENCE


@precedence.register
def _prec_binop(e: BinOp) -> int:
    return PRECEDENCE[e.op]


@precedence.register
def _prec_neg(e: Neg) -> int:
    return NEG_PRECEDENCE


@precedence.register
def _prec_pow(e: Pow) -> int:
    return POW_PRECEDENCE


def _wrap(e: Expr, wrap: bool) -> str:
    text = format_expr(e)
    return f"({text})" if wrap else text


@singledispatch
def format_expr(e: Expr) -> str:
    raise TypeError(type(e))


@format_expr.register
def _f_num(e: Num) -> str:
    return format_coefficient(e.value)


@format_expr.register
def _f_var(e: Var) -> str:
    return f"z{e.index}"


@format_expr.register
def _f_phi(e: Phi) -> str:
    return "phi"


@format_expr.register
def _f_neg(e: Neg) -> str:
    return "-" + _wrap(e.arg, precedence(e.arg) < NEG_PRECEDENCE)


@format_expr.register
def _f_binop(e: BinOp) -> str:
    p = PRECEDENCE[e.op]
    left = _wrap(e.left, precedence(e.left) < p)
    right = _wrap(e.right, precedence(e.right) <= p)
    if p == 1:
        return f"{left} {e.op} {right}"
    return f"{left}{e.op}{right}"


@format_expr.register
def _f_pow(e: Pow) -> str:
    return _wrap(e.base, precedence(e.base) < ATOM_PRECEDENCE) + f"^{e.exponent}"


@format_expr.register
def _f_conj(e: Conj) -> str:
    return f"conj({format_expr(e.arg)})"


# Numeric evaluation of chart expressions over arrays of points.


@singledispatch
def evaluate_expr(e: Expr, z: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Values at complex points `z` of shape (N, n); `phi` holds 1/(1+ρ)."""
    raise TypeError(type(e))


@evaluate_expr.register
def _e_num(e: Num, z: np.ndarray, phi: np.ndarray) -> np.ndarray:
    return np.full(z.shape[:-1], complex_value(e.value))


@evaluate_expr.register
def _e_var(e: Var, z: np.ndarray, phi: np.ndarray) -> np.ndarray:
    return z[..., e.index - 1]


@evaluate_expr.register
def _e_phi(e: Phi, z: np.ndarray, phi: np.ndarray) -> np.ndarray:
    return phi.astype(complex)


@evaluate_expr.register
def _e_neg(e: Neg, z: np.ndarray, phi: np.ndarray) -> np.ndarray:
    return -evaluate_expr(e.arg, z, phi)


@evaluate_expr.register
def _e_conj(e: Conj, z: np.ndarray, phi: np.ndarray) -> np.ndarray:
    return np.conj(evaluate_expr(e.arg, z, phi))


@evaluate_expr.register
def _e_pow(e: Pow, z: np.ndarray, phi: np.ndarray) -> np.ndarray:
    return evaluate_expr(e.base, z, phi) ** e.exponent


@evaluate_expr.register
def _e_binop(e: BinOp, z: np.ndarray, phi: np.ndarray) -> np.ndarray:
    left = evaluate_expr(e.left, z, phi)
    right = evaluate_expr(e.right, z, phi)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        if e.op == "+":
            return left + right
        if e.op == "-":
            return left - right
        if e.op == "*":
            return left * right
        return left / right


# Growth at infinity, as a degree in |x|.


@singledispatch
def growth_degree(e: Expr) -> int:
    raise TypeError(type(e))


@growth_degree.register
def _g_num(e: Num) -> int:
    return 0


@growth_degree.register
def _g_var(e: Var) -> int:
    return 1


@growth_degree.register
def _g_phi(e: Phi) -> int:
    return -2


@growth_degree.register
def _g_neg(e: Neg) -> int:
    return growth_degree(e.arg)


@growth_degree.register
def _g_conj(e: Conj) -> int:
    return growth_degree(e.arg)


@growth_degree.register
def _g_pow(e: Pow) -> int:
    return growth_degree(e.base) * e.exponent


@growth_degree.register
def _g_binop(e: BinOp) -> int:
    left = growth_degree(e.left)
    right = growth_degree(e.right)
    if e.op in "+-":
        return max(left, right)
    if e.op == "*":
        return left + right
    return left - right
