"""Recursive-descent parser and formatter for the textual STL grammar.

    formula   := conj
    conj      := unary { "&&" unary }
    unary     := "true" | pred | "!" pred | temporal | "(" formula ")"
    temporal  := ("F"|"G") "[" num "," num "]" "(" formula ")"
               | "(" formula ")" "U" "[" num "," num "]" "(" formula ")"
    pred      := "ball(" vec "," num ")" | "clear(" ident "," num ")"
               | "half(" vec "," num ")"
    vec       := "[" num { "," num } "]" | ident

A bare identifier in vector position is looked up in the ``waypoints``
mapping handed to :func:`parse_formula`.
"""
from __future__ import annotations

import math
import re
from typing import Mapping, NamedTuple, Optional, Sequence

from .formula import (Always, And, BallReach, Clearance, Eventually, Formula,
                      FragmentError, Halfspace, Interval, Not, Pred, TrueF,
                      Until)


class STLSyntaxError(ValueError):
    def __init__(self, msg: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {msg}")
        self.line = line
        self.column = column


class _Tok(NamedTuple):
    kind: str
    text: str
    line: int
    col: int


_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>&&|[!()\[\],])
""", re.VERBOSE)


def _tokenize(text: str) -> list:
    toks = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise STLSyntaxError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind != "ws":
            toks.append(_Tok(kind, m.group(), line, pos - line_start + 1))
        else:
            chunk = m.group()
            if "\n" in chunk:
                line += chunk.count("\n")
                line_start = pos + chunk.rfind("\n") + 1
        pos = m.end()
    toks.append(_Tok("eof", "", line, pos - line_start + 1))
    return toks


class _Parser:
    def __init__(self, text: str, waypoints: Optional[Mapping[str, Sequence[float]]]):
        self.toks = _tokenize(text)
        self.i = 0
        self.waypoints = waypoints or {}

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def error(self, msg, tok=None):
        tok = tok or self.tok
        return STLSyntaxError(msg, tok.line, tok.col)

    def advance(self) -> _Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, text: str) -> _Tok:
        if self.tok.text != text or self.tok.kind == "eof":
            found = self.tok.text or "end of input"
            raise self.error(f"expected {text!r}, found {found!r}")
        return self.advance()

    def parse(self) -> Formula:
        f = self.conj()
        if self.tok.kind != "eof":
            raise self.error(f"unexpected {self.tok.text!r}")
        return f

    def conj(self) -> Formula:
        f = self.unary()
        while self.tok.text == "&&":
            self.advance()
            f = And(f, self.unary())
        return f

    def unary(self) -> Formula:
        tok = self.tok
        if tok.kind == "ident":
            if tok.text == "true":
                self.advance()
                return TrueF()
            if tok.text in ("ball", "clear", "half"):
                return Pred(self.predicate())
            if tok.text in ("F", "G"):
                return self.temporal()
            raise self.error(f"unexpected identifier {tok.text!r}")
        if tok.text == "!":
            self.advance()
            inner_tok = self.tok
            inner = self.unary()
            if not isinstance(inner, Pred):
                raise FragmentError(
                    f"line {inner_tok.line}, column {inner_tok.col}: negation applies "
                    f"only to predicates, found {type(inner).__name__}")
            return Not(inner)
        if tok.text == "(":
            self.advance()
            inner = self.conj()
            self.expect(")")
            if self.tok.text == "U":
                self.advance()
                iv = self.interval()
                self.expect("(")
                right = self.conj()
                self.expect(")")
                return self.build(tok, Until, iv, inner, right)
            return inner
        raise self.error(f"unexpected {tok.text or 'end of input'!r}")

    def temporal(self) -> Formula:
        op = self.advance()
        iv = self.interval()
        self.expect("(")
        inner = self.conj()
        self.expect(")")
        return self.build(op, Eventually if op.text == "F" else Always, iv, inner)

    def build(self, tok, cls, *args):
        try:
            return cls(*args)
        except FragmentError as e:
            raise FragmentError(f"line {tok.line}, column {tok.col}: {e}") from None

    def interval(self) -> Interval:
        start = self.expect("[")
        a = self.number(allow_inf=True)
        self.expect(",")
        b = self.number(allow_inf=True)
        self.expect("]")
        if math.isinf(a) or math.isinf(b):
            raise FragmentError(f"line {start.line}, column {start.col}: unbounded interval")
        if not 0 <= a <= b:
            raise self.error(f"interval requires 0 <= a <= b, got [{a}, {b}]", start)
        return Interval(a, b)

    def number(self, allow_inf=False) -> float:
        tok = self.tok
        if tok.kind == "num":
            self.advance()
            return float(tok.text)
        if allow_inf and tok.kind == "ident" and tok.text in ("inf", "infinity"):
            self.advance()
            return math.inf
        raise self.error(f"expected a number, found {tok.text or 'end of input'!r}")

    def vector(self) -> tuple:
        tok = self.tok
        if tok.kind == "ident":
            self.advance()
            if tok.text not in self.waypoints:
                raise self.error(f"unknown waypoint {tok.text!r}", tok)
            return tuple(float(v) for v in self.waypoints[tok.text])
        self.expect("[")
        vals = [self.number()]
        while self.tok.text == ",":
            self.advance()
            vals.append(self.number())
        self.expect("]")
        return tuple(vals)

    def predicate(self):
        kw = self.advance()
        self.expect("(")
        try:
            if kw.text == "clear":
                ident = self.tok
                if ident.kind != "ident":
                    raise self.error("expected an obstacle identifier")
                self.advance()
                self.expect(",")
                p = Clearance(ident.text, self.number())
            else:
                vec = self.vector()
                self.expect(",")
                num = self.number()
                p = BallReach(vec, num) if kw.text == "ball" else Halfspace(vec, num)
        except ValueError as e:
            if isinstance(e, STLSyntaxError):
                raise
            raise self.error(str(e), kw) from None
        self.expect(")")
        return p


def parse_formula(text: str, waypoints: Optional[Mapping[str, Sequence[float]]] = None) -> Formula:
    """Parse ``text`` into a formula of the supported fragment.

    Raises STLSyntaxError (with ``line``/``column``) on malformed input and
    FragmentError for well-formed text outside the fragment, e.g. a negated
    temporal operator, nested temporal operators or an unbounded interval.
    """
    return _Parser(text, waypoints).parse()


def _num(v: float) -> str:
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(float(v))


def _vec(v) -> str:
    return "[" + ",".join(_num(c) for c in v) + "]"


def format_predicate(p) -> str:
    if isinstance(p, BallReach):
        return f"ball({_vec(p.center)}, {_num(p.epsilon)})"
    if isinstance(p, Halfspace):
        return f"half({_vec(p.normal)}, {_num(p.offset)})"
    if isinstance(p, Clearance):
        return f"clear({p.obstacle}, {_num(p.safe_distance)})"
    raise TypeError(p)


def format_formula(f: Formula) -> str:
    if isinstance(f, TrueF):
        return "true"
    if isinstance(f, Pred):
        return format_predicate(f.predicate)
    if isinstance(f, Not):
        return "!" + format_predicate(f.arg.predicate)
    if isinstance(f, And):
        return f"({format_formula(f.left)}) && ({format_formula(f.right)})"
    if isinstance(f, (Eventually, Always)):
        op = "F" if isinstance(f, Eventually) else "G"
        return f"{op}[{_num(f.interval.a)},{_num(f.interval.b)}]({format_formula(f.arg)})"
    if isinstance(f, Until):
        iv = f.interval
        return (f"({format_formula(f.left)}) U[{_num(iv.a)},{_num(iv.b)}]"
                f"({format_formula(f.right)})")
    raise TypeError(f)
