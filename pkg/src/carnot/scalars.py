"""Scalar fields: exact rationals, Gaussian rationals, and float fallbacks.

Every algebra carries one of four field tags.  Exact tags ("Q", "Qi") support
equality and exact kernel/rank computation; float tags ("f64", "c64") carry an
epsilon used by all approximate comparisons.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Union

DEFAULT_EPS = 1e-9

EXACT_TAGS = ("Q", "Qi")
FLOAT_TAGS = ("f64", "c64")
ALL_TAGS = EXACT_TAGS + FLOAT_TAGS


class GaussianRational:
    """Exact complex number a + b*i with rational a, b."""

    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        self.re = Fraction(re)
        self.im = Fraction(im)

    def __add__(self, other):
        other = _as_gq(other)
        return GaussianRational(self.re + other.re, self.im + other.im)

    __radd__ = __add__

    def __sub__(self, other):
        other = _as_gq(other)
        return GaussianRational(self.re - other.re, self.im - other.im)

    def __rsub__(self, other):
        return _as_gq(other) - self

    def __mul__(self, other):
        other = _as_gq(other)
        return GaussianRational(
            self.re * other.re - self.im * other.im,
            self.re * other.im + self.im * other.re,
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = _as_gq(other)
        d = other.re * other.re + other.im * other.im
        if d == 0:
            raise ZeroDivisionError("division by zero Gaussian rational")
        return GaussianRational(
            (self.re * other.re + self.im * other.im) / d,
            (self.im * other.re - self.re * other.im) / d,
        )

    def __rtruediv__(self, other):
        return _as_gq(other) / self

    def __neg__(self):
        return GaussianRational(-self.re, -self.im)

    def __eq__(self, other):
        if isinstance(other, (GaussianRational, int, Fraction)):
            other = _as_gq(other)
            return self.re == other.re and self.im == other.im
        return NotImplemented

    def __hash__(self):
        if self.im == 0:
            return hash(self.re)
        return hash((self.re, self.im))

    def __bool__(self):
        return self.re != 0 or self.im != 0

    def conjugate(self):
        return GaussianRational(self.re, -self.im)

    def __complex__(self):
        return complex(float(self.re), float(self.im))

    def __repr__(self):
        if self.im == 0:
            return f"GQ({self.re})"
        return f"GQ({self.re}, {self.im})"


def _as_gq(v) -> GaussianRational:
    if isinstance(v, GaussianRational):
        return v
    if isinstance(v, (int, Fraction)):
        return GaussianRational(v)
    raise TypeError(f"cannot coerce {v!r} to GaussianRational")


Scalar = Union[Fraction, GaussianRational, float, complex]

GQ_I = GaussianRational(0, 1)


def is_exact(tag: str) -> bool:
    return tag in EXACT_TAGS


def zero(tag: str) -> Scalar:
    return {"Q": Fraction(0), "Qi": GaussianRational(0),
            "f64": 0.0, "c64": complex(0)}[tag]


def one(tag: str) -> Scalar:
    return {"Q": Fraction(1), "Qi": GaussianRational(1),
            "f64": 1.0, "c64": complex(1)}[tag]


def coerce(tag: str, v) -> Scalar:
    """Coerce a number into the given field; raises on lossy coercions."""
    if tag == "Q":
        if isinstance(v, GaussianRational):
            if v.im != 0:
                raise ValueError("complex value in a real field")
            return v.re
        if isinstance(v, float) and not v.is_integer():
            raise ValueError("float into exact rational field; rationalize first")
        return Fraction(v)
    if tag == "Qi":
        if isinstance(v, GaussianRational):
            return v
        if isinstance(v, complex):
            raise ValueError("inexact complex into Qi; rationalize first")
        if isinstance(v, float) and not v.is_integer():
            raise ValueError("float into exact field; rationalize first")
        return GaussianRational(Fraction(v))
    if tag == "f64":
        if isinstance(v, GaussianRational):
            if v.im != 0:
                raise ValueError("complex value in a real field")
            return float(v.re)
        if isinstance(v, complex):
            if v.imag != 0:
                raise ValueError("complex value in a real field")
            return v.real
        return float(v)
    if tag == "c64":
        if isinstance(v, GaussianRational):
            return complex(v)
        return complex(v)
    raise ValueError(f"unknown field tag {tag!r}")


def is_zero(tag: str, v, eps: float = DEFAULT_EPS) -> bool:
    if is_exact(tag):
        return not v
    return abs(v) <= eps


def conj(tag: str, v) -> Scalar:
    if tag == "Qi":
        return _as_gq(v).conjugate()
    if tag == "c64":
        return complex(v).conjugate()
    return v


def to_float(v) -> complex:
    """Numeric (float or complex) image of any scalar."""
    if isinstance(v, GaussianRational):
        return complex(v) if v.im != 0 else float(v.re)
    if isinstance(v, Fraction):
        return float(v)
    return v


def complex_tag(tag: str) -> str:
    """Field tag of the complexification."""
    return {"Q": "Qi", "Qi": "Qi", "f64": "c64", "c64": "c64"}[tag]


def rationalize(x, max_denominator: int = 10**6):
    """Nearest small rational (or Gaussian rational) to a float/complex."""
    if isinstance(x, complex):
        if x.imag == 0:
            return Fraction(x.real).limit_denominator(max_denominator)
        return GaussianRational(
            Fraction(x.real).limit_denominator(max_denominator),
            Fraction(x.imag).limit_denominator(max_denominator),
        )
    return Fraction(float(x)).limit_denominator(max_denominator)


def sqrt_exact(q: Fraction):
    """Exact square root of a nonnegative rational, or None if irrational."""
    if q < 0:
        raise ValueError("square root of a negative rational")
    num, den = q.numerator, q.denominator
    rn, rd = _isqrt(num), _isqrt(den)
    if rn is None or rd is None:
        return None
    return Fraction(rn, rd)


def _isqrt(n: int):
    import math

    r = math.isqrt(n)
    return r if r * r == n else None


def format_scalar(v) -> object:
    """JSON encoding: rationals as "p/q" strings, complex as [re, im]."""
    if isinstance(v, Fraction):
        return f"{v.numerator}/{v.denominator}" if v.denominator != 1 else str(v.numerator)
    if isinstance(v, GaussianRational):
        if v.im == 0:
            return format_scalar(v.re)
        return [format_scalar(v.re), format_scalar(v.im)]
    if isinstance(v, complex):
        if v.imag == 0:
            return v.real
        return [v.real, v.imag]
    return v


def parse_scalar(tag: str, raw) -> Scalar:
    """Inverse of :func:`format_scalar` for a given field tag."""
    if isinstance(raw, str):
        val = Fraction(raw)
        return coerce(tag, val)
    if isinstance(raw, list):
        if len(raw) != 2:
            raise ValueError(f"bad complex scalar encoding {raw!r}")
        re, im = raw
        re = Fraction(re) if isinstance(re, str) else re
        im = Fraction(im) if isinstance(im, str) else im
        if tag == "Qi":
            return GaussianRational(re, im)
        if tag == "c64":
            return complex(float(re), float(im))
        raise ValueError(f"complex scalar in real field {tag!r}")
    return coerce(tag, raw)
