"""Polynomial potential mini-language.

Grammar (whitespace is insignificant)::

    expr   := term (("+" | "-") term)*
    term   := unary (("*" | "/") unary)*
    unary  := ("+" | "-") unary | power
    power  := atom ("^" INTEGER)?
    atom   := NUMBER | "i" | "x" | "(" expr ")"

``NUMBER`` is a decimal real literal (``2``, ``2.5``, ``.5``, ``1e-3``).
Division is only allowed by constants; anything that would leave the
polynomial ring raises :class:`NonPolynomial`.
"""

from __future__ import annotations

import math
import re

from .errors import NonPolynomial, PotentialSyntaxError

__all__ = ["parse_coefficients", "format_coefficients"]

_NUMBER = re.compile(r"(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?")
_INTEGER = re.compile(r"\d+")

Poly = list  # list[complex], index = power of x
MAX_DEGREE = 256


def _trim(p: Poly) -> Poly:
    while len(p) > 1 and p[-1] == 0:
        p.pop()
    return p


def _add(p: Poly, q: Poly, sign: int = 1) -> Poly:
    n = max(len(p), len(q))
    out = [0j] * n
    for k, c in enumerate(p):
        out[k] += c
    for k, c in enumerate(q):
        out[k] = out[k] + c if sign > 0 else out[k] - c
    return _trim(out)


def _mul(p: Poly, q: Poly) -> Poly:
    out = [0j] * (len(p) + len(q) - 1)
    for i, a in enumerate(p):
        if a == 0:
            continue
        for j, b in enumerate(q):
            out[i + j] += a * b
    return _trim(out)


def _is_constant(p: Poly) -> bool:
    return len(_trim(list(p))) == 1


class _Parser:
    def __init__(self, src: str):
        self.src = src
        self.pos = 0

    def _skip(self):
        while self.pos < len(self.src) and self.src[self.pos].isspace():
            self.pos += 1

    def _peek(self) -> str:
        self._skip()
        return self.src[self.pos] if self.pos < len(self.src) else ""

    def _fail(self, expected: str):
        self._skip()
        raise PotentialSyntaxError(self.pos, expected, self.src)

    def parse(self) -> Poly:
        p = self.expr()
        if self._peek():
            self._fail("operator or end of input")
        return p

    def expr(self) -> Poly:
        p = self.term()
        while self._peek() in ("+", "-"):
            op = self.src[self.pos]
            self.pos += 1
            p = _add(p, self.term(), 1 if op == "+" else -1)
        return p

    def term(self) -> Poly:
        p = self.unary()
        while self._peek() in ("*", "/"):
            op, at = self.src[self.pos], self.pos
            self.pos += 1
            q = self.unary()
            if op == "*":
                p = _mul(p, q)
            else:
                if not _is_constant(q):
                    raise NonPolynomial(at, "division by a non-constant expression")
                if q[0] == 0:
                    raise NonPolynomial(at, "division by zero")
                p = _trim([c / q[0] for c in p])
        return p

    def unary(self) -> Poly:
        c = self._peek()
        if c == "-":
            self.pos += 1
            return [-a for a in self.unary()]
        if c == "+":
            self.pos += 1
            return self.unary()
        return self.power()

    def power(self) -> Poly:
        base = self.atom()
        if self._peek() != "^":
            return base
        at = self.pos
        self.pos += 1
        self._skip()
        if self._peek() == "-":
            raise NonPolynomial(at, "negative exponent")
        m = _INTEGER.match(self.src, self.pos)
        if not m:
            self._fail("non-negative integer exponent")
        end = m.end()
        if end < len(self.src) and self.src[end] in ".eE":
            raise NonPolynomial(at, "non-integer exponent")
        self.pos = end
        n = int(m.group())
        if n * (len(base) - 1) > MAX_DEGREE:
            raise NonPolynomial(at, f"degree exceeds {MAX_DEGREE}")
        out: Poly = [1 + 0j]
        for _ in range(n):
            out = _mul(out, base)
        return out

    def atom(self) -> Poly:
        c = self._peek()
        if c == "(":
            self.pos += 1
            p = self.expr()
            if self._peek() != ")":
                self._fail("')'")
            self.pos += 1
            return p
        if c == "x" or c == "i":
            nxt = self.src[self.pos + 1: self.pos + 2]
            if nxt.isalnum() or nxt == "_":
                self._fail("'x', 'i', a number or '('")
            self.pos += 1
            return [0j, 1 + 0j] if c == "x" else [1j]
        m = _NUMBER.match(self.src, self.pos) if c else None
        if m:
            self.pos = m.end()
            return [complex(float(m.group()))]
        self._fail("'x', 'i', a number or '('")


def parse_coefficients(src: str) -> tuple[complex, ...]:
    """Parse ``src`` into polynomial coefficients ``(c0, c1, ..., cd)``."""
    return tuple(_trim(_Parser(src).parse()))


def _real(v: float) -> str:
    if not math.isfinite(v):
        raise ValueError(f"cannot format non-finite coefficient {v!r}")
    return ("-" if math.copysign(1.0, v) < 0 else "") + repr(abs(v))


def format_coefficients(coeffs) -> str:
    """Render coefficients as an expression that parses back to the same values."""
    parts = []
    for k, c in enumerate(coeffs):
        c = complex(c)
        if c == 0 and len(coeffs) > 1:
            continue
        coef = f"({_real(c.real)} + {_real(c.imag)}*i)"
        if k == 0:
            parts.append(coef)
        elif k == 1:
            parts.append(f"{coef}*x")
        else:
            parts.append(f"{coef}*x^{k}")
    return " + ".join(parts) if parts else "0"
