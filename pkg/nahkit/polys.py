"""Characteristic polynomials and root-of-unity detection.

Polynomials are coefficient tuples, leading coefficient first. Cyclotomic
questions are always settled by exact factorization over Q.
"""

import logging
import math
from fractions import Fraction

from sympy import (
    Poly,
    QQ,
    Symbol,
    cyclotomic_poly,
    resultant,
    totient,
)

from .linalg import (
    Matrix,
    Scalar,
    ZERO,
    identity,
    is_zero,
    mat_add,
    mat_scale,
    mat_sub,
    matmul,
    matpow,
    to_domain_matrix,
)
from .scalars import THETA, NumberFieldElement, from_sympy, to_sympy

logger = logging.getLogger(__name__)

X = Symbol("x")


def is_rational_matrix(m: Matrix) -> bool:
    return all(isinstance(x, (int, Fraction)) for row in m for x in row)


def charpoly(m: Matrix) -> tuple[Scalar, ...]:
    """Monic characteristic polynomial det(x I - m), leading coefficient first."""
    n = len(m)
    if n == 0:
        return (Fraction(1),)
    dm, back = to_domain_matrix(m)
    return tuple(back(c) for c in dm.charpoly())


def poly_at_matrix(coeffs: tuple[Scalar, ...], m: Matrix) -> Matrix:
    """Horner evaluation of a polynomial (leading coefficient first) at m."""
    n = len(m)
    eye = identity(n)
    result = tuple((ZERO,) * n for _ in range(n))
    for c in coeffs:
        result = mat_add(matmul(result, m), mat_scale(c, eye))
    return result


def to_poly(coeffs: tuple[Scalar, ...]) -> Poly:
    """Rational coefficient tuple to a sympy Poly in x over QQ."""
    return Poly([to_sympy(Fraction(c)) for c in coeffs], X, domain=QQ)


def from_poly(poly: Poly) -> tuple[Fraction, ...]:
    return tuple(from_sympy(c) for c in poly.all_coeffs())


def rational_shadow(coeffs: tuple[Scalar, ...]) -> Poly:
    """A rational polynomial whose roots are the Galois conjugates of the roots.

    For number field coefficients this is the norm down to Q, computed as a
    resultant against the minimal polynomial.
    """
    fields = {c.field for c in coeffs if isinstance(c, NumberFieldElement)}
    if not fields:
        return to_poly(coeffs)
    (field,) = fields
    degree = len(coeffs) - 1
    expr = 0
    for k, c in enumerate(coeffs):
        if isinstance(c, NumberFieldElement):
            c_expr = sum(
                to_sympy(a) * THETA**j for j, a in enumerate(c.coeffs)
            )
        else:
            c_expr = to_sympy(Fraction(c))
        expr += c_expr * X ** (degree - k)
    norm = resultant(field.poly.as_expr(), expr, THETA)
    return Poly(norm, X, domain=QQ)


def cyclotomic_order(factor: Poly) -> int | None:
    """m if the irreducible `factor` is the m-th cyclotomic polynomial."""
    d = factor.degree()
    target = factor.monic()
    # phi(m) >= sqrt(m / 2), so phi(m) = d forces m <= 2 d^2.
    for m in range(1, 2 * d * d + 3):
        if totient(m) != d:
            continue
        if Poly(cyclotomic_poly(m, X), X, domain=QQ) == target:
            return m
    return None


def root_of_unity_orders(coeffs: tuple[Scalar, ...]) -> list[int] | None:
    """Orders of the roots, or None when some root is not a root of unity."""
    shadow = rational_shadow(coeffs)
    if shadow.degree() <= 0:
        return []
    _, factors = shadow.factor_list()
    orders = []
    for factor, _ in factors:
        if factor.degree() <= 0:
            continue
        m = cyclotomic_order(factor)
        if m is None:
            logger.debug(f"factor {factor.as_expr()} is not cyclotomic")
            return None
        orders.append(m)
    return orders


def is_nilpotent(m: Matrix) -> bool:
    return is_zero(matpow(m, len(m)))


def is_unipotent(m: Matrix) -> bool:
    return is_nilpotent(mat_sub(m, identity(len(m))))


def quasiunipotent_order(t: Matrix) -> int | None:
    """Smallest m with t^m unipotent, or None if t is not quasiunipotent."""
    orders = root_of_unity_orders(charpoly(t))
    if orders is None:
        return None
    return math.lcm(*orders) if orders else 1


def is_semisimple(m: Matrix) -> bool:
    """Rational matrices only: the squarefree part of the charpoly kills m."""
    squarefree = to_poly(charpoly(m)).sqf_part()
    return is_zero(poly_at_matrix(from_poly(squarefree), m))
