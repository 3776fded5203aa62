"""Exact dense linear algebra over Q or a number field.

Matrices are tuples of row tuples, vectors are tuples. Entries are Fractions
or NumberFieldElements. Elimination, determinants and inverses run on sympy
DomainMatrix, over QQ or over QQ.algebraic_field when an entry lives in a
number field; results come back as plain tuples.
"""

from collections.abc import Iterable, Sequence
from fractions import Fraction
from functools import lru_cache
from itertools import combinations
from typing import Any, Callable

from sympy import QQ, CRootOf
from sympy.polys.matrices import DomainMatrix

from .exceptions import ValidationError
from .scalars import NumberField, NumberFieldElement

Scalar = Any
Vector = tuple[Scalar, ...]
Matrix = tuple[Vector, ...]

ZERO = Fraction(0)
ONE = Fraction(1)


def as_vector(values: Iterable[Any]) -> Vector:
    return tuple(Fraction(x) if isinstance(x, int) else x for x in values)


def as_matrix(rows: Iterable[Iterable[Any]]) -> Matrix:
    return tuple(as_vector(row) for row in rows)


def shape(m: Matrix) -> tuple[int, int]:
    return len(m), (len(m[0]) if m else 0)


def is_square(m: Matrix) -> bool:
    return all(len(row) == len(m) for row in m)


def identity(n: int) -> Matrix:
    return tuple(
        tuple(ONE if i == j else ZERO for j in range(n)) for i in range(n)
    )


def zeros(nrows: int, ncols: int) -> Matrix:
    return tuple((ZERO,) * ncols for _ in range(nrows))


def transpose(m: Matrix) -> Matrix:
    return tuple(zip(*m))


def columns(m: Matrix) -> list[Vector]:
    return list(transpose(m))


def from_columns(cols: Sequence[Vector], nrows: int | None = None) -> Matrix:
    if not cols:
        return zeros(nrows or 0, 0)
    return tuple(zip(*cols))


def dot(u: Sequence[Scalar], v: Sequence[Scalar]) -> Scalar:
    return sum((a * b for a, b in zip(u, v)), ZERO)


def matmul(a: Matrix, b: Matrix) -> Matrix:
    cols = transpose(b)
    if not cols:
        return tuple(() for _ in a)
    return tuple(tuple(dot(row, col) for col in cols) for row in a)


def matvec(a: Matrix, v: Sequence[Scalar]) -> Vector:
    return tuple(dot(row, v) for row in a)


def vec_add(u: Vector, v: Vector) -> Vector:
    return tuple(a + b for a, b in zip(u, v))


def vec_sub(u: Vector, v: Vector) -> Vector:
    return tuple(a - b for a, b in zip(u, v))


def vec_scale(c: Scalar, v: Vector) -> Vector:
    return tuple(c * a for a in v)


def mat_add(a: Matrix, b: Matrix) -> Matrix:
    return tuple(vec_add(r, s) for r, s in zip(a, b))


def mat_sub(a: Matrix, b: Matrix) -> Matrix:
    return tuple(vec_sub(r, s) for r, s in zip(a, b))


def mat_scale(c: Scalar, a: Matrix) -> Matrix:
    return tuple(vec_scale(c, r) for r in a)


def trace(m: Matrix) -> Scalar:
    return sum((m[i][i] for i in range(len(m))), ZERO)


def is_zero(m: Matrix) -> bool:
    return all(x == 0 for row in m for x in row)


def is_identity(m: Matrix) -> bool:
    return all(
        (x == 1) if i == j else (x == 0)
        for i, row in enumerate(m)
        for j, x in enumerate(row)
    )


def commutes(a: Matrix, b: Matrix) -> bool:
    return matmul(a, b) == matmul(b, a)


def kron(a: Matrix, b: Matrix) -> Matrix:
    """Kronecker product; vec(P X Q) = kron(P, Q^T) vec(X) for row-major vec."""
    return tuple(
        tuple(x * y for x in row_a for y in row_b)
        for row_a in a
        for row_b in b
    )


def block_diag(*blocks: Matrix) -> Matrix:
    n = sum(len(b) for b in blocks)
    rows = []
    offset = 0
    for block in blocks:
        k = len(block)
        for row in block:
            rows.append(
                (ZERO,) * offset + tuple(row) + (ZERO,) * (n - offset - k)
            )
        offset += k
    return tuple(rows)


def submatrix(m: Matrix, rows: Sequence[int], cols: Sequence[int]) -> Matrix:
    return tuple(tuple(m[i][j] for j in cols) for i in rows)


def vec_matrix(m: Matrix) -> Vector:
    """Row-major flattening."""
    return tuple(x for row in m for x in row)


def unvec_matrix(v: Sequence[Scalar], n: int) -> Matrix:
    return tuple(tuple(v[i * n : (i + 1) * n]) for i in range(n))


# =============================================================================
# sympy DomainMatrix bridge
# =============================================================================


@lru_cache(maxsize=None)
def algebraic_domain(field: NumberField):
    """QQ(theta) as a sympy domain, theta a root of the field's polynomial."""
    return QQ.algebraic_field((field.poly, CRootOf(field.poly, 0)))


def _fraction(c) -> Fraction:
    return Fraction(int(c.numerator), int(c.denominator))


def _field_of(m: Matrix) -> NumberField | None:
    for row in m:
        for x in row:
            if isinstance(x, NumberFieldElement):
                return x.field
    return None


def to_domain_matrix(m: Matrix) -> tuple[DomainMatrix, Callable[[Any], Scalar]]:
    """DomainMatrix of m and the converter taking its entries back."""
    nrows, ncols = shape(m)
    field = _field_of(m)
    if field is None:

        def lift(x):
            x = Fraction(x)
            return QQ(x.numerator, x.denominator)

        dm = DomainMatrix([[lift(x) for x in row] for row in m], (nrows, ncols), QQ)
        return dm, _fraction

    domain = algebraic_domain(field)

    def lift_alg(x):
        if isinstance(x, NumberFieldElement):
            coeffs = x.coeffs
        else:
            coeffs = (Fraction(x),)
        return domain.new(
            [QQ(c.numerator, c.denominator) for c in reversed(coeffs)]
        )

    def back(a) -> NumberFieldElement:
        return NumberFieldElement(
            field, [_fraction(c) for c in reversed(a.to_list())]
        )

    dm = DomainMatrix(
        [[lift_alg(x) for x in row] for row in m], (nrows, ncols), domain
    )
    return dm, back


def rref(m: Matrix) -> tuple[list[list[Scalar]], list[int]]:
    """Reduced row echelon form and pivot columns."""
    nrows, ncols = shape(m)
    if nrows == 0 or ncols == 0:
        return [list(r) for r in m], []
    dm, back = to_domain_matrix(m)
    reduced, pivots = dm.rref()
    rows = [[back(x) for x in row] for row in reduced.to_list()]
    return rows, list(pivots)


def rank(m: Matrix) -> int:
    nrows, ncols = shape(m)
    if nrows == 0 or ncols == 0:
        return 0
    return to_domain_matrix(m)[0].rank()


def nullspace(m: Matrix, ncols: int | None = None) -> list[Vector]:
    """Kernel basis: one vector per free column, that column set to 1."""
    if ncols is None:
        ncols = shape(m)[1]
    rows, pivots = rref(m) if m else ([], [])
    basis = []
    for free in (c for c in range(ncols) if c not in pivots):
        v = [ZERO] * ncols
        v[free] = ONE
        for i, pc in enumerate(pivots):
            v[pc] = -rows[i][free]
        basis.append(tuple(v))
    return basis


def solve(a: Matrix, b: Sequence[Scalar], ncols: int | None = None) -> Vector | None:
    """One solution of a x = b with every free variable 0, or None."""
    if ncols is None:
        ncols = shape(a)[1]
    if not a:
        return (ZERO,) * ncols
    augmented = tuple(tuple(row) + (rhs,) for row, rhs in zip(a, b))
    rows, pivots = rref(augmented)
    if pivots and pivots[-1] == ncols:
        return None
    x = [ZERO] * ncols
    for i, pc in enumerate(pivots):
        x[pc] = rows[i][ncols]
    return tuple(x)


def det(m: Matrix) -> Scalar:
    if not m:
        return ONE
    dm, back = to_domain_matrix(m)
    return back(dm.det())


def inverse(m: Matrix) -> Matrix:
    n = len(m)
    if not is_square(m):
        raise ValidationError(f"matrix of shape {shape(m)} is not square")
    if n == 0:
        return ()
    dm, back = to_domain_matrix(m)
    if dm.rank() < n:
        raise ValidationError("matrix is singular")
    return tuple(tuple(back(x) for x in row) for row in dm.inv().to_list())


def matpow(m: Matrix, k: int) -> Matrix:
    if k < 0:
        return matpow(inverse(m), -k)
    result = identity(len(m))
    base = m
    while k:
        if k & 1:
            result = matmul(result, base)
        base = matmul(base, base)
        k >>= 1
    return result


def conjugate_by(p: Matrix, m: Matrix, p_inv: Matrix | None = None) -> Matrix:
    """p^-1 m p."""
    if p_inv is None:
        p_inv = inverse(p)
    return matmul(p_inv, matmul(m, p))


def compound(m: Matrix, k: int) -> Matrix:
    """k-th compound: the k x k minors, index sets in lexicographic order."""
    nrows, ncols = shape(m)
    row_sets = list(combinations(range(nrows), k))
    col_sets = list(combinations(range(ncols), k))
    return tuple(
        tuple(det(submatrix(m, rs, cs)) for cs in col_sets) for rs in row_sets
    )


# =============================================================================
# Subspaces, given by lists of spanning column vectors
# =============================================================================


def independent_subset(vectors: Iterable[Vector]) -> list[Vector]:
    """Greedy maximal independent subset, keeping the input order."""
    kept: list[Vector] = []
    for v in vectors:
        if rank(tuple(kept) + (v,)) > len(kept):
            kept.append(v)
    return kept


def is_independent(vectors: Sequence[Vector]) -> bool:
    return rank(tuple(vectors)) == len(vectors)


def in_span(v: Vector, basis: Sequence[Vector]) -> bool:
    if not basis:
        return all(x == 0 for x in v)
    return solve(from_columns(basis), v) is not None


def contains(big: Sequence[Vector], small: Sequence[Vector]) -> bool:
    return all(in_span(v, big) for v in small)


def extend_basis(
    base: Sequence[Vector], candidates: Iterable[Vector]
) -> list[Vector]:
    """Candidates that extend `base` to a basis of the joint span."""
    kept = list(base)
    added = []
    for v in candidates:
        if rank(tuple(kept) + (v,)) > len(kept):
            kept.append(v)
            added.append(v)
    return added


def standard_basis(n: int) -> list[Vector]:
    return columns(identity(n)) if n else []


def complete_basis(base: Sequence[Vector], n: int) -> list[Vector]:
    """Extend an independent list to a basis of the whole space."""
    return list(base) + extend_basis(base, standard_basis(n))


def annihilator(base: Sequence[Vector], n: int) -> list[Vector]:
    """Basis of the linear forms vanishing on span(base), as vectors."""
    if not base:
        return standard_basis(n)
    return nullspace(tuple(base), n)


def coordinates(basis: Sequence[Vector], v: Vector) -> Vector:
    """Coordinates of v in an independent list spanning it."""
    x = solve(from_columns(basis), v)
    if x is None:
        raise ValidationError("vector is not in the span of the basis")
    return x
