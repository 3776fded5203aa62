"""Cocycles, coboundaries and order-by-order lifting of deformations.

A deformation of rho over Q[t]/t^(k+1) is written

    rho_t(g_i) = (1 + t c_i + t^2 c_(i,2) + ... + t^k c_(i,k)) rho(g_i)

and matrices in End(V) are vectorized row by row, so that
vec(P X Q) = kron(P, Q^T) vec(X).
"""

import logging
from collections.abc import Sequence
from dataclasses import dataclass
from typing import NamedTuple

from .exceptions import InvariantViolation, ValidationError
from .groups import GroupPresentation, GroupRep, Word
from .linalg import (
    ZERO,
    Matrix,
    Scalar,
    as_matrix,
    identity,
    inverse,
    is_zero,
    kron,
    mat_add,
    mat_scale,
    mat_sub,
    matmul,
    nullspace,
    rank,
    solve,
    transpose,
    unvec_matrix,
    vec_matrix,
    zeros,
)

logger = logging.getLogger(__name__)


# =============================================================================
# Fox calculus
# =============================================================================


@dataclass(frozen=True)
class GroupRingElement:
    """Integer combination of group words."""

    terms: tuple[tuple[Word, int], ...]

    def ad_matrix(self, rep: GroupRep) -> Matrix:
        """sum n_w Ad(rho(w)) acting on vec(End V)."""
        r2 = rep.rank**2
        total = zeros(r2, r2)
        for word, coeff in self.terms:
            total = mat_add(total, mat_scale(coeff, adjoint(rep.evaluate(word))))
        return total


def adjoint(p: Matrix) -> Matrix:
    """X -> p X p^-1 on row-major vectorized matrices."""
    return kron(p, transpose(inverse(p)))


def fox_derivative(relator: Sequence[int], generator: int) -> GroupRingElement:
    """d relator / d g_generator in the free group ring."""
    terms = []
    prefix: list[int] = []
    for letter in relator:
        if letter == generator:
            terms.append((tuple(prefix), 1))
        elif letter == -generator:
            terms.append((tuple(prefix) + (letter,), -1))
        prefix.append(letter)
    return GroupRingElement(tuple(terms))


def fox_matrix(pres: GroupPresentation, rep: GroupRep) -> Matrix:
    """Linearized relator equations: J c = 0 exactly when c is a cocycle.

    Rows are blocked by relator, columns by generator, each block r^2 wide.
    """
    if rep.presentation != pres:
        raise ValidationError("representation belongs to another presentation")
    r2 = rep.rank**2
    rows = []
    for relator in pres.relators:
        blocks = [
            fox_derivative(relator, i).ad_matrix(rep)
            for i in range(1, pres.generators + 1)
        ]
        for k in range(r2):
            rows.append(tuple(x for block in blocks for x in block[k]))
    return tuple(rows)


# =============================================================================
# Cocycles and coboundaries
# =============================================================================


@dataclass(frozen=True)
class FirstOrderDeformation:
    """A 1-cocycle, given by its values c_i on the generators."""

    cocycle: tuple[Matrix, ...]

    def __post_init__(self):
        object.__setattr__(
            self, "cocycle", tuple(as_matrix(m) for m in self.cocycle)
        )

    def as_vector(self) -> tuple[Scalar, ...]:
        return tuple(x for m in self.cocycle for x in vec_matrix(m))

    @classmethod
    def from_vector(cls, v: Sequence[Scalar], generators: int, r: int):
        r2 = r * r
        return cls(
            tuple(unvec_matrix(v[i * r2 : (i + 1) * r2], r) for i in range(generators))
        )


def _check_shape(rep: GroupRep, c: FirstOrderDeformation) -> None:
    if len(c.cocycle) != rep.generators:
        raise ValidationError(
            f"cocycle has {len(c.cocycle)} values for {rep.generators} generators"
        )
    for i, m in enumerate(c.cocycle, start=1):
        if len(m) != rep.rank or any(len(row) != rep.rank for row in m):
            raise ValidationError(f"cocycle value on generator {i} has the wrong shape")


def is_cocycle(rep: GroupRep, c: FirstOrderDeformation) -> bool:
    _check_shape(rep, c)
    j = fox_matrix(rep.presentation, rep)
    return all(
        sum((a * x for a, x in zip(row, c.as_vector())), ZERO) == 0 for row in j
    )


def z1_basis(rep: GroupRep) -> list[FirstOrderDeformation]:
    """Canonical kernel basis of the Fox matrix; dim = s r^2 - rank J."""
    ncols = rep.generators * rep.rank**2
    kernel = nullspace(fox_matrix(rep.presentation, rep), ncols)
    return [
        FirstOrderDeformation.from_vector(v, rep.generators, rep.rank) for v in kernel
    ]


def coboundary(rep: GroupRep, f: Sequence[Sequence[Scalar]]) -> FirstOrderDeformation:
    """c_i = rho(g_i) f rho(g_i)^-1 - f."""
    f = as_matrix(f)
    return FirstOrderDeformation(
        tuple(
            mat_sub(matmul(m, matmul(f, m_inv)), f)
            for m, m_inv in zip(rep.matrices, rep.inverses)
        )
    )


def _coboundary_matrix(rep: GroupRep) -> Matrix:
    """Columns are the coboundaries of the elementary matrices E_ab."""
    r = rep.rank
    cols = []
    for k in range(r * r):
        e = unvec_matrix([int(i == k) for i in range(r * r)], r)
        cols.append(coboundary(rep, e).as_vector())
    return transpose(tuple(cols)) if cols else ()


def b1_basis(rep: GroupRep) -> list[FirstOrderDeformation]:
    """Independent coboundaries spanning B^1."""
    cols = transpose(_coboundary_matrix(rep)) if rep.rank else ()
    kept = []
    for v in cols:
        if rank(tuple(kept) + (v,)) > len(kept):
            kept.append(v)
    return [
        FirstOrderDeformation.from_vector(v, rep.generators, rep.rank) for v in kept
    ]


class TangentDims(NamedTuple):
    z1: int
    b1: int

    @property
    def h1(self) -> int:
        return self.z1 - self.b1


def tangent_dims(rep: GroupRep) -> TangentDims:
    z1 = len(z1_basis(rep))
    b1 = rank(_coboundary_matrix(rep)) if rep.rank else 0
    logger.debug(f"dim Z1 = {z1}, dim B1 = {b1}")
    return TangentDims(z1, b1)


def h1_dim(rep: GroupRep) -> int:
    return tangent_dims(rep).h1


def cocycle_value(
    rep: GroupRep, c: FirstOrderDeformation, word: Sequence[int]
) -> Matrix:
    """c(word) from c(uv) = c(u) + Ad(rho(u)) c(v)."""
    _check_shape(rep, c)
    r = rep.rank
    value = zeros(r, r)
    prefix = identity(r)
    for letter in word:
        i = abs(letter) - 1
        if letter > 0:
            p = prefix
            term = c.cocycle[i]
        else:
            p = matmul(prefix, rep.inverses[i])
            term = mat_scale(-1, c.cocycle[i])
        value = mat_add(value, matmul(p, matmul(term, inverse(p))))
        prefix = matmul(prefix, rep.letter(letter))
    return value


# =============================================================================
# Truncated polynomial matrices
# =============================================================================


@dataclass(frozen=True)
class TruncatedMatrix:
    """sum_j t^j M_j modulo t^(order+1)."""

    coeffs: tuple[Matrix, ...]

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    @property
    def dim(self) -> int:
        return len(self.coeffs[0])

    @classmethod
    def constant(cls, m: Matrix, order: int) -> "TruncatedMatrix":
        n = len(m)
        return cls((m,) + tuple(zeros(n, n) for _ in range(order)))

    def __mul__(self, other: "TruncatedMatrix") -> "TruncatedMatrix":
        n = self.dim
        out = []
        for j in range(self.order + 1):
            acc = zeros(n, n)
            for a in range(j + 1):
                if is_zero(self.coeffs[a]) or is_zero(other.coeffs[j - a]):
                    continue
                acc = mat_add(acc, matmul(self.coeffs[a], other.coeffs[j - a]))
            out.append(acc)
        return TruncatedMatrix(tuple(out))

    def inverse(self) -> "TruncatedMatrix":
        """Series inverse; the constant term must be invertible."""
        n = self.dim
        head_inv = inverse(self.coeffs[0])
        out = [head_inv]
        for j in range(1, self.order + 1):
            acc = zeros(n, n)
            for a in range(1, j + 1):
                acc = mat_add(acc, matmul(self.coeffs[a], out[j - a]))
            out.append(mat_scale(-1, matmul(head_inv, acc)))
        return TruncatedMatrix(tuple(out))


def _deformed_generators(
    rep: GroupRep, series: Sequence[Sequence[Matrix]], order: int
) -> tuple[list[TruncatedMatrix], list[TruncatedMatrix]]:
    """rho_t(g_i) and rho_t(g_i)^-1 for every generator."""
    r = rep.rank
    forward, backward = [], []
    for i, m in enumerate(rep.matrices):
        factor = [identity(r)] + [
            series[j][i] if j < len(series) else zeros(r, r) for j in range(order)
        ]
        tm = TruncatedMatrix(tuple(factor)) * TruncatedMatrix.constant(m, order)
        forward.append(tm)
        backward.append(tm.inverse())
    return forward, backward


def relator_series(
    rep: GroupRep, series: Sequence[Sequence[Matrix]], order: int
) -> list[TruncatedMatrix]:
    """rho_t(R) for every relator; series[j - 1][i] is c_(i,j)."""
    forward, backward = _deformed_generators(rep, series, order)
    out = []
    for relator in rep.presentation.relators:
        acc = TruncatedMatrix.constant(identity(rep.rank), order)
        for letter in relator:
            acc = acc * (forward[letter - 1] if letter > 0 else backward[-letter - 1])
        out.append(acc)
    return out


class LiftResult(NamedTuple):
    """Outcome of lifting a first-order deformation.

    `order` is the highest order reached when status is "lifted", else the
    order at which the relator equations had no solution; `residuals` then
    holds the per-relator obstruction at that order.
    """

    status: str
    order: int
    coefficients: tuple[FirstOrderDeformation, ...]
    residuals: tuple[Matrix, ...] | None = None


def _coboundary_lift(
    rep: GroupRep, f: Matrix, order: int
) -> list[FirstOrderDeformation]:
    """Coefficients of conjugation by (1 + t f)^-1: c_j = (-f)^(j-1) c_1."""
    c1 = coboundary(rep, f)
    coeffs = [c1]
    power = identity(rep.rank)
    minus_f = mat_scale(-1, f)
    for _ in range(2, order + 1):
        power = matmul(power, minus_f)
        coeffs.append(
            FirstOrderDeformation(tuple(matmul(power, m) for m in c1.cocycle))
        )
    return coeffs


def _as_coboundary(rep: GroupRep, c: FirstOrderDeformation) -> Matrix | None:
    if not rep.rank:
        return None
    x = solve(_coboundary_matrix(rep), c.as_vector(), rep.rank**2)
    return None if x is None else unvec_matrix(x, rep.rank)


def lift_order(rep: GroupRep, c: FirstOrderDeformation, order: int) -> LiftResult:
    """Solve the relator equations order by order up to t^order.

    At order j the equations read J c_j = -Res_j, with J the Fox matrix and
    Res_j the t^j coefficient of rho_t(R) for c_j = 0. The canonical
    solution of each system is kept. Coboundaries lift in closed form.
    """
    if order < 1:
        raise ValidationError(f"lift order must be at least 1, got {order}")
    _check_shape(rep, c)
    if not is_cocycle(rep, c):
        raise ValidationError("deformation is not a cocycle")

    f = _as_coboundary(rep, c)
    if f is not None:
        coeffs = _coboundary_lift(rep, f, order)
        series = [d.cocycle for d in coeffs]
        for rt in relator_series(rep, series, order):
            if any(not is_zero(m) for m in rt.coeffs[1:]):
                raise InvariantViolation("coboundary lift leaves a relator residual")
        logger.info(f"coboundary lifts to order {order}")
        return LiftResult("lifted", order, tuple(coeffs))

    j_matrix = fox_matrix(rep.presentation, rep)
    ncols = rep.generators * rep.rank**2
    series = [c.cocycle]
    coeffs = [c]
    for j in range(2, order + 1):
        residuals = [rt.coeffs[j] for rt in relator_series(rep, series, j)]
        rhs = tuple(-x for m in residuals for x in vec_matrix(m))
        x = solve(j_matrix, rhs, ncols)
        if x is None:
            logger.info(f"lift obstructed at order {j}")
            return LiftResult("obstructed", j, tuple(coeffs), tuple(residuals))
        step = FirstOrderDeformation.from_vector(x, rep.generators, rep.rank)
        series.append(step.cocycle)
        coeffs.append(step)
        logger.debug(f"lifted to order {j}")
    return LiftResult("lifted", order, tuple(coeffs))
