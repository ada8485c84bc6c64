"""Multimodal formulas: syntax trees, text parser and printer.

Text syntax::

    true | false | <atom> | !f | (f & g & ...) | (f | g | ...) | K<i> f | P<i> f

Disjunction, ``false`` and implication are sugar over ``!`` and ``&``.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable


class Formula:
    __slots__ = ()


@dataclass(frozen=True)
class Top(Formula):
    pass


@dataclass(frozen=True)
class Atom(Formula):
    name: str


@dataclass(frozen=True)
class Not(Formula):
    arg: Formula


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class K(Formula):
    """Necessity / knowledge of ``agent``."""

    agent: int
    arg: Formula


@dataclass(frozen=True)
class P(Formula):
    """Possibility for ``agent``.

    Holds at ``t`` when some ``s`` with ``(s, t)`` in the agent's relation
    satisfies ``arg``, i.e. the forward image of ``arg`` under the relation.
    This is the adjoint partner of ``K`` and agrees with ``!K<agent>!arg``
    whenever the relation is symmetric (e.g. an equivalence relation).
    """

    agent: int
    arg: Formula


TRUE = Top()
FALSE = Not(TRUE)


def Or(left: Formula, right: Formula) -> Formula:
    return Not(And(Not(left), Not(right)))


def Implies(left: Formula, right: Formula) -> Formula:
    return Or(Not(left), right)


def conjunction(parts: Iterable[Formula]) -> Formula:
    """Left-nested conjunction; ``true`` when empty."""
    out = None
    for f in parts:
        out = f if out is None else And(out, f)
    return TRUE if out is None else out


def disjunction(parts: Iterable[Formula]) -> Formula:
    out = None
    for f in parts:
        out = f if out is None else Or(out, f)
    return FALSE if out is None else out


def subformulas(f: Formula):
    """Children of a node, in evaluation order."""
    if isinstance(f, (Not, K, P)):
        return (f.arg,)
    if isinstance(f, And):
        return (f.left, f.right)
    return ()


def depth(f: Formula) -> int:
    memo: dict[int, int] = {}
    stack = [(f, False)]
    while stack:
        node, done = stack.pop()
        if id(node) in memo:
            continue
        kids = subformulas(node)
        if done or not kids:
            memo[id(node)] = 1 + max((memo[id(c)] for c in kids), default=-1)
        else:
            stack.append((node, True))
            stack.extend((c, False) for c in kids)
    return memo[id(f)]


def to_text(f: Formula) -> str:
    if isinstance(f, Top):
        return "true"
    if isinstance(f, Atom):
        return f.name
    if isinstance(f, Not):
        if isinstance(f.arg, Top):
            return "false"
        return "!" + to_text(f.arg)
    if isinstance(f, And):
        return f"({to_text(f.left)} & {to_text(f.right)})"
    if isinstance(f, K):
        return f"K<{f.agent}> {to_text(f.arg)}"
    if isinstance(f, P):
        return f"P<{f.agent}> {to_text(f.arg)}"
    raise TypeError(f"not a formula: {f!r}")


class FormulaSyntaxError(ValueError):
    def __init__(self, message: str, text: str, position: int):
        self.position = position
        self.text = text
        super().__init__(f"{message} at position {position}: {text!r}")


_TOKEN = re.compile(r"\s*(?:(?P<modal>[KP])<\s*(?P<agent>\d+)\s*>|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)|(?P<sym>[!&|()]))")


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens: list[tuple[str, str, int]] = []
        pos = 0
        while True:
            while pos < len(text) and text[pos].isspace():
                pos += 1
            if pos >= len(text):
                break
            m = _TOKEN.match(text, pos)
            if not m:
                raise FormulaSyntaxError("unexpected character", text, pos)
            if m.group("modal"):
                self.tokens.append((m.group("modal"), m.group("agent"), m.start("modal")))
            elif m.group("ident"):
                self.tokens.append(("ident", m.group("ident"), m.start("ident")))
            else:
                self.tokens.append((m.group("sym"), m.group("sym"), m.start("sym")))
            pos = m.end()
        self.i = 0

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else ("eof", "", len(self.text))

    def take(self):
        tok = self.peek()
        self.i += 1
        return tok

    def parse(self) -> Formula:
        f = self.formula()
        kind, _, pos = self.peek()
        if kind != "eof":
            raise FormulaSyntaxError("trailing input", self.text, pos)
        return f

    def formula(self) -> Formula:
        kind, value, pos = self.take()
        if kind == "ident":
            if value == "true":
                return TRUE
            if value == "false":
                return FALSE
            return Atom(value)
        if kind == "!":
            return Not(self.formula())
        if kind in ("K", "P"):
            ctor = K if kind == "K" else P
            return ctor(int(value), self.formula())
        if kind == "(":
            first = self.formula()
            parts, op = [first], None
            while True:
                nk, _, npos = self.peek()
                if nk == ")":
                    self.take()
                    break
                if nk not in ("&", "|"):
                    raise FormulaSyntaxError("expected '&', '|' or ')'", self.text, npos)
                if op is not None and nk != op:
                    raise FormulaSyntaxError("mixed '&' and '|' need parentheses", self.text, npos)
                op = nk
                self.take()
                parts.append(self.formula())
            if op is None:
                return first
            return conjunction(parts) if op == "&" else disjunction(parts)
        if kind == "eof":
            raise FormulaSyntaxError("unexpected end of formula", self.text, pos)
        raise FormulaSyntaxError(f"unexpected {value!r}", self.text, pos)


def parse_formula(text: str) -> Formula:
    return _Parser(text).parse()
