"""Pratt parser for the expression grammar.

Grammar summary::

    expr    := expr ('+'|'-') expr | expr ('*'|'/') expr | expr ('^'|'**') expr
             | ('-'|'+') expr | '(' expr ')' | number | identifier | call
    call    := name "'"* '(' args ')'          f(u), f'(u), f''(u)
             | name '_' letters '(' args ')'    p_xu(x,t,u): one letter per derivative
             | name '_[' ints ']' '(' args ')'   p_[1,0,1](x,t,u)
             | ('exp'|'log'|'sqrt') '(' expr ')'
             | 'd' [count] ('x'|'t') '(' expr ')'   total derivative, applied at parse time

Identifiers x, t, z are variables; u, u_x, u_xt, ... are jet coordinates;
everything else is a parameter.  ``λ`` is read as the parameter ``lambda``.
"""

from __future__ import annotations

import re
from fractions import Fraction

from ..errors import JetOrderError, ParseError, SymbolClassError
from .nodes import Expr, Fn, Num, Sym, add, classify_identifier, exp, log, mul, neg, power, sqrt

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][-+]?\d+)?)
  | (?P<ident>[^\W\d]\w*)
  | (?P<primes>'+)
  | (?P<op>\*\*|[-+*/^(),\[\]])
    """,
    re.VERBOSE,
)

_DERIV_SHORTHAND = re.compile(r"^d(\d*)([xt])$")
_ALIASES = {"λ": "lambda", "lam": "lambda"}

_INFIX = {"+": (10, 11), "-": (10, 11), "*": (20, 21), "/": (20, 21), "^": (30, 30), "**": (30, 30)}
_PREFIX_BP = 25


class _Token:
    __slots__ = ("kind", "text", "pos")

    def __init__(self, kind: str, text: str, pos: int):
        self.kind = kind
        self.text = text
        self.pos = pos

    def __repr__(self) -> str:
        return f"{self.kind}:{self.text}@{self.pos}"


def _tokenize(text: str) -> list[_Token]:
    out = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", pos, text)
        kind = m.lastgroup
        if kind != "ws":
            out.append(_Token(kind, m.group(), pos))
        pos = m.end()
    out.append(_Token("end", "", len(text)))
    return out


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    # token helpers
    def peek(self, offset: int = 0) -> _Token:
        return self.tokens[min(self.i + offset, len(self.tokens) - 1)]

    def advance(self) -> _Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, text: str) -> _Token:
        tok = self.peek()
        if tok.text != text or tok.kind not in ("op",):
            found = tok.text or "end of input"
            raise ParseError(f"expected {text!r}, found {found!r}", tok.pos, self.text)
        return self.advance()

    def error(self, message: str, tok: _Token) -> ParseError:
        return ParseError(message, tok.pos, self.text)

    # grammar
    def parse(self) -> Expr:
        if self.peek().kind == "end":
            raise self.error("empty expression", self.peek())
        e = self.expression(0)
        tok = self.peek()
        if tok.kind != "end":
            raise self.error(f"unexpected {tok.text!r}", tok)
        return e

    def expression(self, min_bp: int) -> Expr:
        left = self.prefix()
        while True:
            tok = self.peek()
            if tok.kind != "op" or tok.text not in _INFIX:
                break
            lbp, rbp = _INFIX[tok.text]
            if lbp < min_bp or (lbp == min_bp and tok.text not in ("^", "**")):
                break
            self.advance()
            right = self.expression(rbp)
            left = _combine(tok.text, left, right)
        return left

    def prefix(self) -> Expr:
        tok = self.advance()
        if tok.kind == "number":
            return Num(Fraction(tok.text))
        if tok.kind == "op" and tok.text == "-":
            return neg(self.expression(_PREFIX_BP))
        if tok.kind == "op" and tok.text == "+":
            return self.expression(_PREFIX_BP)
        if tok.kind == "op" and tok.text == "(":
            e = self.expression(0)
            self.expect(")")
            return e
        if tok.kind == "ident":
            return self.identifier(tok)
        found = tok.text or "end of input"
        raise self.error(f"unexpected {found!r}", tok)

    def arguments(self) -> list[Expr]:
        self.expect("(")
        args = [self.expression(0)]
        while self.peek().text == "," and self.peek().kind == "op":
            self.advance()
            args.append(self.expression(0))
        self.expect(")")
        return args

    def identifier(self, tok: _Token) -> Expr:
        name = _ALIASES.get(tok.text, tok.text)
        nxt = self.peek()
        if nxt.kind == "primes":
            self.advance()
            args = self.arguments()
            if len(args) != 1:
                raise self.error("primed derivative notation needs exactly one argument", tok)
            return Fn(name, args, (len(nxt.text),))
        if nxt.kind == "op" and nxt.text == "[" and name.endswith("_"):
            self.advance()
            idx = []
            while True:
                num = self.advance()
                if num.kind != "number" or not num.text.isdigit():
                    raise self.error("derivative index must be a non-negative integer", num)
                idx.append(int(num.text))
                sep = self.advance()
                if sep.text == "]":
                    break
                if sep.text != ",":
                    raise self.error("expected ',' or ']'", sep)
            args = self.arguments()
            if len(idx) != len(args):
                raise self.error("derivative index length differs from argument count", tok)
            return Fn(name[:-1], args, idx)
        if nxt.kind == "op" and nxt.text == "(":
            return self.call(name, tok)
        try:
            sym = classify_identifier(name)
        except JetOrderError as exc:
            raise SymbolClassError(str(exc), tok.pos, self.text) from None
        if sym is None:
            raise SymbolClassError(f"{name!r} is not a valid jet coordinate", tok.pos, self.text)
        return sym

    def call(self, name: str, tok: _Token) -> Expr:
        if name in ("exp", "log", "sqrt"):
            args = self.arguments()
            if len(args) != 1:
                raise self.error(f"{name} takes one argument", tok)
            return {"exp": exp, "log": log, "sqrt": sqrt}[name](args[0])
        m = _DERIV_SHORTHAND.match(name)
        if m:
            args = self.arguments()
            if len(args) != 1:
                raise self.error(f"{name} takes one argument", tok)
            from ..jet import total_derivative

            count = int(m.group(1) or 1)
            e = args[0]
            try:
                for _ in range(count):
                    e = total_derivative(e, m.group(2))
            except JetOrderError as exc:
                raise SymbolClassError(str(exc), tok.pos, self.text) from None
            return e
        if name == "u" or name.startswith("u_"):
            raise SymbolClassError(f"{name!r} is a jet coordinate, not a function", tok.pos, self.text)
        args = self.arguments()
        if "_" in name:
            base, suffix = name.rsplit("_", 1)
            argnames = [a.name if isinstance(a, Sym) else None for a in args]
            if base and suffix and all(ch in argnames for ch in suffix):
                deriv = [suffix.count(n) if n is not None else 0 for n in argnames]
                return Fn(base, args, deriv)
        return Fn(name, args)


def _combine(op: str, left: Expr, right: Expr) -> Expr:
    if op == "+":
        return add(left, right)
    if op == "-":
        return add(left, neg(right))
    if op == "*":
        return mul(left, right)
    if op == "/":
        if right == Num(0):
            raise ZeroDivisionError("division by zero")
        return mul(left, power(right, Num(-1)))
    return power(left, right)


def parse(text: str) -> Expr:
    """Parse ``text`` into an expression tree.

    Raises :class:`ParseError` (with the offending position) on syntax
    errors and :class:`SymbolClassError` for malformed jet names.
    """
    return _Parser(text).parse()
