"""Polynomial map DSL: parser with line/column diagnostics.

Grammar (rational literals only; transcendental maps are rejected by design):

    mapexpr := map_literal | combinator
    map_literal := "map(" idlist ")" "->" "(" exprlist ")"
    combinator  := "compose(" mapexpr "," mapexpr ")"
                 | "dilate(" rational ")"
                 | "ltrans(" rational_list ")"
                 | "conj()"
                 | "lift_symplectic(" expr_in_one_var ")"
    expr := polynomial over the declared identifiers with +, -, *, ^, parentheses
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..scalars import GaussianRational


class ParseError(ValueError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{message} (line {line}, column {col})")
        self.line = line
        self.col = col


class ArityError(ParseError):
    pass


class UnknownIdentifierError(ParseError):
    pass


# -- polynomials ------------------------------------------------------------------


class Polynomial:
    """Sparse polynomial over named variables; coefficients Fraction or
    GaussianRational.  Exponent keys are tuples of length nvars."""

    __slots__ = ("nvars", "coeffs")

    def __init__(self, nvars: int, coeffs: Optional[Dict[Tuple[int, ...], object]] = None):
        self.nvars = nvars
        self.coeffs: Dict[Tuple[int, ...], object] = {}
        if coeffs:
            for k, v in coeffs.items():
                if v:
                    self.coeffs[tuple(k)] = v

    @classmethod
    def constant(cls, nvars: int, c) -> "Polynomial":
        return cls(nvars, {(0,) * nvars: c} if c else {})

    @classmethod
    def variable(cls, nvars: int, i: int) -> "Polynomial":
        e = [0] * nvars
        e[i] = 1
        return cls(nvars, {tuple(e): Fraction(1)})

    def __add__(self, other):
        other = self._co(other)
        out = dict(self.coeffs)
        for k, v in other.coeffs.items():
            s = out.get(k, 0) + v
            if s:
                out[k] = s
            elif k in out:
                del out[k]
        return Polynomial(self.nvars, out)

    def __sub__(self, other):
        return self + (-self._co(other))

    def __neg__(self):
        return Polynomial(self.nvars, {k: -v for k, v in self.coeffs.items()})

    def __mul__(self, other):
        other = self._co(other)
        out: Dict[Tuple[int, ...], object] = {}
        for k1, v1 in self.coeffs.items():
            for k2, v2 in other.coeffs.items():
                k = tuple(a + b for a, b in zip(k1, k2))
                s = out.get(k, 0) + v1 * v2
                if s:
                    out[k] = s
                elif k in out:
                    del out[k]
        return Polynomial(self.nvars, out)

    __rmul__ = __mul__
    __radd__ = __add__

    def __pow__(self, n: int):
        if n < 0:
            raise ValueError("negative power")
        acc = Polynomial.constant(self.nvars, Fraction(1))
        base = self
        while n:
            if n & 1:
                acc = acc * base
            base = base * base
            n >>= 1
        return acc

    def _co(self, other) -> "Polynomial":
        if isinstance(other, Polynomial):
            if other.nvars != self.nvars:
                raise ValueError("variable count mismatch")
            return other
        return Polynomial.constant(self.nvars, other)

    def is_zero(self) -> bool:
        return not self.coeffs

    def degree(self) -> int:
        return max((sum(k) for k in self.coeffs), default=0)

    def partial(self, i: int) -> "Polynomial":
        out = {}
        for k, v in self.coeffs.items():
            if k[i] == 0:
                continue
            kk = list(k)
            kk[i] -= 1
            out[tuple(kk)] = v * k[i]
        return Polynomial(self.nvars, out)

    def integrate(self, i: int) -> "Polynomial":
        out = {}
        for k, v in self.coeffs.items():
            kk = list(k)
            kk[i] += 1
            out[tuple(kk)] = v * Fraction(1, kk[i])
        return Polynomial(self.nvars, out)

    def subs(self, values: Sequence["Polynomial"]) -> "Polynomial":
        """Substitute one polynomial per variable (all over the same new vars)."""
        if len(values) != self.nvars:
            raise ValueError("substitution arity mismatch")
        nv = values[0].nvars if values else 0
        acc = Polynomial(nv)
        for k, v in self.coeffs.items():
            term = Polynomial.constant(nv, v)
            for i, e in enumerate(k):
                if e:
                    term = term * (values[i] ** e)
            acc = acc + term
        return acc

    def eval(self, pts: np.ndarray) -> np.ndarray:
        """Evaluate at points of shape (M, nvars) (float or complex)."""
        pts = np.asarray(pts)
        cplx = any(isinstance(v, (GaussianRational, complex)) for v in self.coeffs.values())
        out = np.zeros(pts.shape[0], dtype=complex if (cplx or np.iscomplexobj(pts)) else float)
        if not self.coeffs:
            return out
        maxe = [0] * self.nvars
        for k in self.coeffs:
            for i, e in enumerate(k):
                if e > maxe[i]:
                    maxe[i] = e
        pows = []
        for i, me in enumerate(maxe):
            col = [None]
            if me >= 1:
                col.append(pts[:, i])
                for _ in range(2, me + 1):
                    col.append(col[-1] * pts[:, i])
            pows.append(col)
        for k, v in self.coeffs.items():
            c = complex(v) if isinstance(v, (GaussianRational, complex)) else float(v)
            term = None
            for i, e in enumerate(k):
                if e:
                    term = pows[i][e] if term is None else term * pows[i][e]
            if term is None:
                out += c
            else:
                out += c * term
        return out

    def eval_exact(self, values: Sequence) -> object:
        acc = Fraction(0)
        for k, v in self.coeffs.items():
            term = v
            for i, e in enumerate(k):
                if e:
                    term = term * values[i] ** e
            acc = acc + term
        return acc

    def conjugate(self) -> "Polynomial":
        out = {}
        for k, v in self.coeffs.items():
            out[k] = v.conjugate() if isinstance(v, GaussianRational) else v
        return Polynomial(self.nvars, out)

    def __eq__(self, other):
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.nvars == other.nvars and (self - other).is_zero()

    def __hash__(self):
        return hash((self.nvars, frozenset(self.coeffs.items())))

    def __repr__(self):
        if not self.coeffs:
            return "0"
        parts = []
        for k in sorted(self.coeffs):
            mono = "*".join(f"x{i + 1}^{e}" if e > 1 else f"x{i + 1}"
                            for i, e in enumerate(k) if e)
            c = self.coeffs[k]
            parts.append(f"({c}){'*' + mono if mono else ''}")
        return " + ".join(parts)


# -- AST --------------------------------------------------------------------------


@dataclass
class MapLiteral:
    variables: Tuple[str, ...]
    polys: Tuple[Polynomial, ...]


@dataclass
class Compose:
    outer: "MapExpr"
    inner: "MapExpr"


@dataclass
class Dilate:
    factor: Fraction


@dataclass
class LTrans:
    point: Tuple[Fraction, ...]


@dataclass
class Conj:
    pass


@dataclass
class LiftSymplectic:
    variable: str
    shear: Polynomial      # u(x), one variable


MapExpr = Union[MapLiteral, Compose, Dilate, LTrans, Conj, LiftSymplectic]


# -- tokenizer ---------------------------------------------------------------------


_PUNCT = ("->", "(", ")", ",", "+", "-", "*", "^", "/")


@dataclass
class _Token:
    kind: str    # "ident" | "int" | "punct" | "eof"
    text: str
    line: int
    col: int


def _tokenize(src: str) -> List[_Token]:
    toks = []
    line, col = 1, 1
    i = 0
    while i < len(src):
        ch = src[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if src.startswith("->", i):
            toks.append(_Token("punct", "->", line, col))
            i += 2
            col += 2
            continue
        if ch in "(),+-*^/":
            toks.append(_Token("punct", ch, line, col))
            i += 1
            col += 1
            continue
        if ch.isdigit():
            j = i
            while j < len(src) and src[j].isdigit():
                j += 1
            toks.append(_Token("int", src[i:j], line, col))
            col += j - i
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < len(src) and (src[j].isalnum() or src[j] == "_"):
                j += 1
            toks.append(_Token("ident", src[i:j], line, col))
            col += j - i
            i = j
            continue
        raise ParseError(f"unexpected character {ch!r}", line, col)
    toks.append(_Token("eof", "", line, col))
    return toks


# -- recursive descent parser ------------------------------------------------------


class _Parser:
    def __init__(self, src: str):
        self.toks = _tokenize(src)
        self.pos = 0

    def peek(self) -> _Token:
        return self.toks[self.pos]

    def next(self) -> _Token:
        t = self.toks[self.pos]
        self.pos += 1
        return t

    def expect(self, text: str) -> _Token:
        t = self.next()
        if t.text != text:
            raise ParseError(f"expected {text!r}, found {t.text!r}", t.line, t.col)
        return t

    def parse_mapexpr(self) -> MapExpr:
        t = self.peek()
        if t.kind != "ident":
            raise ParseError(f"expected a map expression, found {t.text!r}", t.line, t.col)
        if t.text == "map":
            return self.parse_map_literal()
        if t.text == "compose":
            self.next()
            self.expect("(")
            outer = self.parse_mapexpr()
            self.expect(",")
            inner = self.parse_mapexpr()
            self.expect(")")
            return Compose(outer, inner)
        if t.text == "dilate":
            self.next()
            self.expect("(")
            r = self.parse_rational()
            self.expect(")")
            return Dilate(r)
        if t.text == "ltrans":
            self.next()
            self.expect("(")
            vals = [self.parse_rational()]
            while self.peek().text == ",":
                self.next()
                vals.append(self.parse_rational())
            self.expect(")")
            return LTrans(tuple(vals))
        if t.text == "conj":
            self.next()
            self.expect("(")
            self.expect(")")
            return Conj()
        if t.text == "lift_symplectic":
            self.next()
            self.expect("(")
            # expression in exactly one (implicitly declared) variable
            save = self.pos
            var = self._scan_single_variable()
            self.pos = save
            poly = self.parse_expr((var,))
            self.expect(")")
            return LiftSymplectic(var, poly)
        raise ParseError(f"unknown map keyword {t.text!r}", t.line, t.col)

    def _scan_single_variable(self) -> str:
        depth = 0
        names = []
        while True:
            t = self.peek()
            if t.kind == "eof":
                raise ParseError("unterminated lift_symplectic(...)", t.line, t.col)
            if t.text == "(":
                depth += 1
            elif t.text == ")":
                if depth == 0:
                    break
                depth -= 1
            elif t.kind == "ident":
                if t.text not in names:
                    names.append(t.text)
            self.next()
        if len(names) > 1:
            t = self.peek()
            raise ArityError(f"lift_symplectic shear must use one variable, got {names}",
                             t.line, t.col)
        return names[0] if names else "x"

    def parse_map_literal(self) -> MapLiteral:
        t = self.expect("map")
        self.expect("(")
        variables = [self._ident()]
        while self.peek().text == ",":
            self.next()
            variables.append(self._ident())
        self.expect(")")
        self.expect("->")
        self.expect("(")
        polys = [self.parse_expr(tuple(variables))]
        while self.peek().text == ",":
            self.next()
            polys.append(self.parse_expr(tuple(variables)))
        close = self.expect(")")
        if len(polys) != len(variables):
            raise ArityError(
                f"map declares {len(variables)} variables but {len(polys)} outputs",
                close.line, close.col)
        return MapLiteral(tuple(variables), tuple(polys))

    def _ident(self) -> str:
        t = self.next()
        if t.kind != "ident":
            raise ParseError(f"expected an identifier, found {t.text!r}", t.line, t.col)
        return t.text

    def parse_rational(self) -> Fraction:
        neg = False
        while self.peek().text in ("+", "-"):
            if self.next().text == "-":
                neg = not neg
        t = self.next()
        if t.kind != "int":
            raise ParseError(f"expected a rational literal, found {t.text!r}", t.line, t.col)
        num = int(t.text)
        if self.peek().text == "/":
            self.next()
            d = self.next()
            if d.kind != "int":
                raise ParseError(f"expected a denominator, found {d.text!r}", d.line, d.col)
            val = Fraction(num, int(d.text))
        else:
            val = Fraction(num)
        return -val if neg else val

    # expression grammar: sum of terms; term = product of factors; factor = base ^ int
    def parse_expr(self, variables: Tuple[str, ...]) -> Polynomial:
        acc = self.parse_term(variables)
        while self.peek().text in ("+", "-"):
            op = self.next().text
            rhs = self.parse_term(variables)
            acc = acc + rhs if op == "+" else acc - rhs
        return acc

    def parse_term(self, variables) -> Polynomial:
        acc = self.parse_factor(variables)
        while True:
            t = self.peek()
            if t.text == "*":
                self.next()
                acc = acc * self.parse_factor(variables)
            elif t.text == "/":
                self.next()
                d = self.next()
                if d.kind != "int":
                    raise ParseError("only division by integer literals is allowed",
                                     d.line, d.col)
                acc = acc * Fraction(1, int(d.text))
            else:
                return acc

    def parse_factor(self, variables) -> Polynomial:
        t = self.peek()
        if t.text == "-":
            self.next()
            return -self.parse_factor(variables)
        if t.text == "+":
            self.next()
            return self.parse_factor(variables)
        base = self.parse_atom(variables)
        if self.peek().text == "^":
            self.next()
            e = self.next()
            if e.kind != "int":
                raise ParseError(f"expected an integer exponent, found {e.text!r}",
                                 e.line, e.col)
            return base ** int(e.text)
        return base

    def parse_atom(self, variables) -> Polynomial:
        t = self.next()
        if t.text == "(":
            inner = self.parse_expr(variables)
            self.expect(")")
            return inner
        if t.kind == "int":
            num = int(t.text)
            if self.peek().text == "/":
                self.next()
                d = self.next()
                if d.kind != "int":
                    raise ParseError("expected a denominator", d.line, d.col)
                return Polynomial.constant(len(variables), Fraction(num, int(d.text)))
            return Polynomial.constant(len(variables), Fraction(num))
        if t.kind == "ident":
            if t.text not in variables:
                raise UnknownIdentifierError(f"unknown identifier {t.text!r}", t.line, t.col)
            return Polynomial.variable(len(variables), variables.index(t.text))
        raise ParseError(f"unexpected token {t.text!r}", t.line, t.col)


def parse_map(source: str) -> MapExpr:
    """Parse DSL source into a MapExpr AST (first error wins, with line/col)."""
    p = _Parser(source)
    expr = p.parse_mapexpr()
    t = p.peek()
    if t.kind != "eof":
        raise ParseError(f"trailing input starting at {t.text!r}", t.line, t.col)
    return expr
