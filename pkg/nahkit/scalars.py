"""Exact scalars: rationals at a prime place, and number field elements.

Magnitudes are always carried as base-q logarithms, which are rationals (or
-inf for zero); no floating point q-powers are ever formed.
"""

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass
from fractions import Fraction
from typing import Union

from sympy import Poly, QQ, Rational, Symbol, isprime

from .consts import MAX_UNREDUCED_DEGREE
from .exceptions import NumberFieldError, ValidationError

logger = logging.getLogger(__name__)

THETA = Symbol("theta")

# Valuation of zero.
INFINITY = math.inf


def int_valuation(n: int, p: int) -> int:
    """Exponent of p in the nonzero integer n."""
    n = abs(n)
    v = 0
    while n % p == 0:
        n //= p
        v += 1
    return v


@dataclass(frozen=True)
class PrimePlace:
    """A prime p, with q = p used as the base of every logarithm."""

    p: int

    def __post_init__(self):
        if (
            isinstance(self.p, bool)
            or not isinstance(self.p, int)
            or self.p < 2
            or not isprime(self.p)
        ):
            raise ValidationError(f"p must be a prime, got {self.p!r}")

    @property
    def q(self) -> int:
        return self.p

    def valuation(self, x: Fraction | int) -> int | float:
        """Exact p-adic valuation; +inf for zero."""
        x = Fraction(x)
        if x == 0:
            return INFINITY
        return int_valuation(x.numerator, self.p) - int_valuation(
            x.denominator, self.p
        )

    def log_abs(self, x: Fraction | int) -> Fraction | float:
        """log_q |x| = -valuation(x); -inf for zero."""
        v = self.valuation(x)
        if v == INFINITY:
            return -INFINITY
        return Fraction(-v)


@dataclass(frozen=True)
class ValuedScalar:
    """An exact rational together with the place it is measured at."""

    value: Fraction
    place: PrimePlace

    def __post_init__(self):
        object.__setattr__(self, "value", Fraction(self.value))


def valuation(x: ValuedScalar) -> int | float:
    return x.place.valuation(x.value)


def log_abs(x: ValuedScalar) -> Fraction | float:
    return x.place.log_abs(x.value)


def to_sympy(x: Fraction) -> Rational:
    return Rational(x.numerator, x.denominator)


def from_sympy(c) -> Fraction:
    return Fraction(int(c.p), int(c.q))


class NumberField:
    """Q(theta) presented by one monic irreducible rational polynomial.

    The minimal polynomial is given by its coefficients, leading first, so
    x^2 + 1 is [1, 0, 1].
    """

    def __init__(self, minpoly: Sequence[Fraction | int]):
        coeffs = tuple(Fraction(c) for c in minpoly)
        if len(coeffs) < 2:
            raise NumberFieldError("minimal polynomial must have degree >= 1")
        if coeffs[0] != 1:
            raise NumberFieldError(
                f"minimal polynomial must be monic, leading coefficient is "
                f"{coeffs[0]}"
            )
        poly = Poly([to_sympy(c) for c in coeffs], THETA, domain=QQ)
        if not poly.is_irreducible:
            raise NumberFieldError(
                f"minimal polynomial {poly.as_expr()} is reducible over Q"
            )
        self.minpoly = coeffs
        self.poly = poly
        self.degree = len(coeffs) - 1

    def __eq__(self, other: object) -> bool:
        return isinstance(other, NumberField) and self.minpoly == other.minpoly

    def __hash__(self) -> int:
        return hash(self.minpoly)

    def __repr__(self) -> str:
        return f"NumberField({self.poly.as_expr()})"

    def element(self, coeffs: Sequence[Fraction | int]) -> "NumberFieldElement":
        """Element with the given coefficients in 1, theta, theta^2, ..."""
        return NumberFieldElement(self, coeffs)

    @property
    def theta(self) -> "NumberFieldElement":
        return NumberFieldElement(self, (0, 1))

    def from_poly(self, poly: Poly) -> "NumberFieldElement":
        ascending = [from_sympy(c) for c in reversed(poly.all_coeffs())]
        return NumberFieldElement(self, ascending)


class NumberFieldElement:
    """An element of a NumberField, kept reduced modulo the minimal polynomial.

    Coefficients are stored lowest power first and always have exactly
    `field.degree` entries, so equality is coefficient-wise.
    """

    __slots__ = ("field", "coeffs")

    def __init__(self, field: NumberField, coeffs: Sequence[Fraction | int]):
        self.field = field
        self.coeffs = _reduce(field, [Fraction(c) for c in coeffs])

    def _poly(self) -> Poly:
        return Poly(
            [to_sympy(c) for c in reversed(self.coeffs)], THETA, domain=QQ
        )

    def _coerce(self, other) -> Union["NumberFieldElement", None]:
        if isinstance(other, NumberFieldElement):
            if other.field != self.field:
                raise NumberFieldError(
                    f"cannot mix elements of {self.field!r} and {other.field!r}"
                )
            return other
        if isinstance(other, (int, Fraction)) and not isinstance(other, bool):
            return NumberFieldElement(self.field, (other,))
        return None

    @property
    def is_rational(self) -> bool:
        return all(c == 0 for c in self.coeffs[1:])

    def to_fraction(self) -> Fraction:
        if not self.is_rational:
            raise NumberFieldError(f"{self!r} is not rational")
        return self.coeffs[0]

    def __add__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return NumberFieldElement(
            self.field, [a + b for a, b in zip(self.coeffs, other.coeffs)]
        )

    __radd__ = __add__

    def __neg__(self):
        return NumberFieldElement(self.field, [-a for a in self.coeffs])

    def __sub__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return other + (-self)

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)) and not isinstance(other, bool):
            return NumberFieldElement(self.field, [a * other for a in self.coeffs])
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        product = (self._poly() * other._poly()).rem(self.field.poly)
        return self.field.from_poly(product)

    __rmul__ = __mul__

    def inverse(self) -> "NumberFieldElement":
        if not self:
            raise NumberFieldError("zero is not invertible")
        return self.field.from_poly(self._poly().invert(self.field.poly))

    def __truediv__(self, other):
        if isinstance(other, (int, Fraction)) and not isinstance(other, bool):
            if other == 0:
                raise NumberFieldError("division by zero")
            return NumberFieldElement(
                self.field, [a / other for a in self.coeffs]
            )
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return self * other.inverse()

    def __rtruediv__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return other * self.inverse()

    def __pow__(self, exponent: int):
        if exponent < 0:
            return self.inverse() ** (-exponent)
        result = NumberFieldElement(self.field, (1,))
        for _ in range(exponent):
            result = result * self
        return result

    def __eq__(self, other) -> bool:
        if isinstance(other, NumberFieldElement):
            return self.field == other.field and self.coeffs == other.coeffs
        if isinstance(other, (int, Fraction)) and not isinstance(other, bool):
            return self.is_rational and self.coeffs[0] == other
        return NotImplemented

    def __hash__(self) -> int:
        if self.is_rational:
            return hash(self.coeffs[0])
        return hash((self.field, self.coeffs))

    def __bool__(self) -> bool:
        return any(c != 0 for c in self.coeffs)

    def __repr__(self) -> str:
        return f"NumberFieldElement({self._poly().as_expr()})"


def _reduce(field: NumberField, coeffs: list[Fraction]) -> tuple[Fraction, ...]:
    if len(coeffs) > MAX_UNREDUCED_DEGREE:
        raise NumberFieldError(
            f"coefficient list of length {len(coeffs)} exceeds the "
            f"unreduced degree bound {MAX_UNREDUCED_DEGREE}"
        )
    if len(coeffs) > field.degree:
        poly = Poly([to_sympy(c) for c in reversed(coeffs)], THETA, domain=QQ)
        remainder = poly.rem(field.poly)
        coeffs = [from_sympy(c) for c in reversed(remainder.all_coeffs())]
    coeffs = coeffs[: field.degree]
    return tuple(coeffs) + (Fraction(0),) * (field.degree - len(coeffs))


def nf_normalize(e: NumberFieldElement) -> NumberFieldElement:
    """Canonical reduced representative of e; idempotent."""
    return NumberFieldElement(e.field, e.coeffs)


def grid_round(x: Fraction, bits: int) -> Fraction:
    """Nearest multiple of 2 ** -bits."""
    scale = 1 << bits
    return Fraction(round(x * scale), scale)
