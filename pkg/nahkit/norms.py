"""The space of norms on Q^n at a prime place.

A norm is stored diagonalized: an invertible basis (the columns of `basis`)
and rational weights a_i with log_q ||e_i|| = -a_i, so that

    log_q || sum c_i e_i || = max_i (log_q |c_i| - a_i).

Two norms always admit a common orthogonal basis; every metric quantity
(relative spectrum, distances, geodesics, barycenters) is computed in one.
Equality of norms is decided by a vanishing relative spectrum, never by
comparing representations, since diagonalizing data is not unique.
"""

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from itertools import combinations
from typing import NamedTuple

from .consts import COM_MAX_SWEEPS, DEFAULT_TOL, GRID_BITS
from .exceptions import InvariantViolation, ValidationError
from .linalg import (
    Matrix,
    Vector,
    annihilator,
    as_matrix,
    as_vector,
    block_diag,
    columns,
    compound,
    det,
    from_columns,
    inverse,
    is_independent,
    is_square,
    matmul,
    matvec,
    submatrix,
    transpose,
)
from .scalars import INFINITY, PrimePlace, grid_round

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DiagNorm:
    """A point of the building: a basis plus log-weights."""

    place: PrimePlace
    basis: Matrix
    weights: tuple[Fraction, ...]

    def __post_init__(self):
        basis = as_matrix(self.basis)
        weights = tuple(Fraction(w) for w in self.weights)
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "weights", weights)

        if not is_square(basis):
            raise ValidationError("basis must be a square matrix")
        if len(weights) != len(basis):
            raise ValidationError(
                f"{len(weights)} weights for a basis of dimension {len(basis)}"
            )
        if not all(isinstance(x, Fraction) for row in basis for x in row):
            raise ValidationError("norm bases must have rational entries")
        if basis and det(basis) == 0:
            raise ValidationError("basis singular")

    @property
    def dim(self) -> int:
        return len(self.basis)

    @cached_property
    def basis_inverse(self) -> Matrix:
        return inverse(self.basis)

    def basis_vectors(self) -> list[Vector]:
        return columns(self.basis)

    def coordinates(self, v: Sequence[Fraction]) -> Vector:
        return matvec(self.basis_inverse, v)

    def normalized(self) -> "DiagNorm":
        """Same norm, basis columns rescaled to primitive integer vectors."""
        cols = []
        weights = []
        for col, w in zip(self.basis_vectors(), self.weights):
            scale, col = _primitive(col)
            cols.append(col)
            weights.append(w + self.place.valuation(scale))
        return DiagNorm(self.place, from_columns(cols, self.dim), tuple(weights))


class Spectrum(NamedTuple):
    """Relative spectrum, decreasing."""

    lambdas: tuple[Fraction, ...]


class Distances(NamedTuple):
    d2_sq: Fraction
    d_inf: Fraction

    @property
    def d2_approx(self) -> float:
        return math.sqrt(self.d2_sq)


class CommonBasis(NamedTuple):
    basis: Matrix
    weights_a: tuple[Fraction, ...]
    weights_b: tuple[Fraction, ...]


class CenterOfMass(NamedTuple):
    """`reason` is "exact", "converged" or "max_sweeps"; `moved` is the
    d2_sq move of the last sweep."""

    point: DiagNorm
    objective: Fraction
    exact: bool
    sweeps: int
    reason: str = "exact"
    moved: Fraction = Fraction(0)


def _primitive(col: Vector) -> tuple[Fraction, Vector]:
    """(c, c * col) with c * col a primitive integer vector, first entry > 0."""
    den = math.lcm(*(x.denominator for x in col))
    num = math.gcd(*(int(x * den) for x in col))
    scale = Fraction(den, num)
    leading = next(x for x in col if x != 0)
    if leading < 0:
        scale = -scale
    return scale, tuple(x * scale for x in col)


def _check_vector(n: DiagNorm, v: Sequence) -> Vector:
    if len(v) != n.dim:
        raise ValidationError(
            f"vector of length {len(v)} for a norm of dimension {n.dim}"
        )
    return as_vector(v)


def _check_compatible(a: DiagNorm, b: DiagNorm) -> None:
    if a.place != b.place:
        raise ValidationError(
            f"norms at different places: p={a.place.p} and p={b.place.p}"
        )
    if a.dim != b.dim:
        raise ValidationError(
            f"norms of different dimensions: {a.dim} and {b.dim}"
        )


def _log_norm(place: PrimePlace, coords: Vector, weights) -> Fraction | float:
    return max(
        (place.log_abs(c) - a for c, a in zip(coords, weights)),
        default=-INFINITY,
    )


def norm_eval(n: DiagNorm, v: Sequence[Fraction]) -> Fraction | float:
    """log_q ||v||; -inf for the zero vector."""
    v = _check_vector(n, v)
    return _log_norm(n.place, n.coordinates(v), n.weights)


def is_orthogonal(n: DiagNorm, vectors: Sequence[Sequence[Fraction]]) -> bool:
    """Hadamard criterion: the wedge of the vectors has the largest possible norm."""
    vectors = [_check_vector(n, v) for v in vectors]
    if not is_independent(vectors):
        raise ValidationError("vectors are linearly dependent")
    if not vectors:
        return True

    coords = from_columns([n.coordinates(v) for v in vectors])
    log_sum = sum(_log_norm(n.place, c, n.weights) for c in transpose(coords))
    k = len(vectors)
    wedge = max(
        n.place.log_abs(det(submatrix(coords, rows, range(k))))
        - sum(n.weights[i] for i in rows)
        for rows in combinations(range(n.dim), k)
    )
    return wedge == log_sum


def _weights_in_basis(n: DiagNorm, basis: Matrix) -> tuple[Fraction, ...] | None:
    """Weights of n in a full basis, or None if that basis is not n-orthogonal."""
    coords = matmul(n.basis_inverse, basis)
    logs = [_log_norm(n.place, c, n.weights) for c in transpose(coords)]
    wedge = n.place.log_abs(det(coords)) - sum(n.weights)
    if wedge != sum(logs):
        return None
    return tuple(-x for x in logs)


def orthogonalize(
    n: DiagNorm, vectors: Sequence[Sequence[Fraction]]
) -> tuple[list[Vector], list[Fraction], list[Vector]]:
    """Orthogonal basis of span(vectors) by weighted pivoting.

    Each vector in turn is pivoted on the coordinate where its norm is
    attained (lowest index on ties) and that coordinate is cleared from the
    vectors after it. Vectors that reduce to zero are dropped.

    Returns:
        (basis, log-norms, combinations) where combinations[t] expresses
        basis[t] in terms of the input vectors.
    """
    vectors = [list(_check_vector(n, v)) for v in vectors]
    coords = [list(n.coordinates(v)) for v in vectors]
    count = len(vectors)
    combos = [[Fraction(int(i == j)) for i in range(count)] for j in range(count)]

    basis, logs, used = [], [], []
    for j in range(count):
        col = coords[j]
        scores = [
            (n.place.log_abs(c) - a, i)
            for i, (c, a) in enumerate(zip(col, n.weights))
            if c != 0
        ]
        if not scores:
            continue
        score, pivot_row = max(scores, key=lambda s: (s[0], -s[1]))
        pivot = col[pivot_row]
        for k in range(j + 1, count):
            f = coords[k][pivot_row] / pivot
            if f == 0:
                continue
            coords[k] = [x - f * y for x, y in zip(coords[k], col)]
            vectors[k] = [x - f * y for x, y in zip(vectors[k], vectors[j])]
            combos[k] = [x - f * y for x, y in zip(combos[k], combos[j])]
        basis.append(tuple(vectors[j]))
        logs.append(score)
        used.append(tuple(combos[j]))
    return basis, logs, used


def restriction_norm(n: DiagNorm, w: Sequence[Sequence[Fraction]]) -> DiagNorm:
    """Induced norm on span(w), in coordinates with respect to the list w."""
    w = [_check_vector(n, v) for v in w]
    if not is_independent(w):
        raise ValidationError("subspace basis is linearly dependent")
    _, logs, combos = orthogonalize(n, w)
    basis = from_columns(combos, len(w))
    return DiagNorm(n.place, basis, tuple(-x for x in logs)).normalized()


def dual_norm(n: DiagNorm) -> DiagNorm:
    """Dual norm on the dual space, in the dual coordinates."""
    return DiagNorm(
        n.place, transpose(n.basis_inverse), tuple(-a for a in n.weights)
    ).normalized()


def quotient_coordinates(w: Sequence[Sequence[Fraction]], dim: int) -> Matrix:
    """Rows of the map V -> V/W used as coordinates on the quotient."""
    return tuple(annihilator([as_vector(v) for v in w], dim))


def quotient_norm(n: DiagNorm, w: Sequence[Sequence[Fraction]]) -> DiagNorm:
    """||x + W|| = inf over y in x + W of ||y||.

    Computed as the dual of the restriction of the dual norm to the
    annihilator of W; the result lives in the coordinates given by
    quotient_coordinates(w, n.dim).
    """
    w = [_check_vector(n, v) for v in w]
    if not is_independent(w):
        raise ValidationError("subspace basis is linearly dependent")
    forms = quotient_coordinates(w, n.dim)
    return dual_norm(restriction_norm(dual_norm(n), forms))


def wedge_norm(n: DiagNorm, r: int) -> DiagNorm:
    """Induced norm on the r-th exterior power, wedge basis in lexicographic order."""
    if not 1 <= r <= n.dim:
        raise ValidationError(f"wedge degree {r} out of range 1..{n.dim}")
    weights = tuple(
        sum(n.weights[i] for i in idx) for idx in combinations(range(n.dim), r)
    )
    return DiagNorm(n.place, compound(n.basis, r), weights).normalized()


def direct_sum_norm(n1: DiagNorm, n2: DiagNorm) -> DiagNorm:
    if n1.place != n2.place:
        raise ValidationError(
            f"norms at different places: p={n1.place.p} and p={n2.place.p}"
        )
    return DiagNorm(
        n1.place, block_diag(n1.basis, n2.basis), n1.weights + n2.weights
    )


def _pivot_allowed(
    m: list[list[Fraction]],
    val,
    beta: Sequence[Fraction],
    alphas: Sequence[Sequence[Fraction]],
    rows_left: set[int],
    cols_left: set[int],
    jp: int,
    ip: int,
) -> bool:
    """Whether eliminating around m[jp][ip] keeps every placed norm's weights.

    Row operations re-choose the b-basis and need row jp to attain the
    b-norm of column ip. Column operations add multiples of column ip to
    the others and must not raise any placed norm of those columns.
    """
    score = val(m[jp][ip])
    for j in rows_left:
        if m[j][ip] != 0 and val(m[j][ip]) + beta[j] < score + beta[jp]:
            return False
    for k in cols_left:
        if k == ip or m[jp][k] == 0:
            continue
        shift = val(m[jp][k]) - score
        if any(shift < alpha[k] - alpha[ip] for alpha in alphas):
            return False
    return True


def _smith_reduce(
    e: Matrix, alphas: Sequence[Sequence[Fraction]], b: DiagNorm
) -> tuple[Matrix, tuple[Fraction, ...]] | None:
    """Re-choose the basis e so that it is also b-orthogonal.

    e is orthogonal for every norm whose weights are listed in alphas, and
    those weights are kept. Weighted Smith reduction over the valuation ring
    of M = B_b^-1 e: among the admissible pivots the one minimizing
    v(M_ji) + beta_j - alphas[0]_i is taken, ties going to the Markowitz
    cost, then to the lowest column and row. With a single placed norm the
    global minimum is always admissible and the reduction cannot fail.

    Returns:
        (new basis, weights of b in it), or None when no admissible pivot
        is left.
    """
    dim = len(e)
    val = b.place.valuation
    m = [list(row) for row in matmul(b.basis_inverse, e)]
    e = [list(row) for row in e]
    beta = b.weights

    rows_left = set(range(dim))
    cols_left = set(range(dim))
    pairing: dict[int, int] = {}
    while cols_left:
        row_nnz = {j: sum(m[j][i] != 0 for i in cols_left) for j in rows_left}
        col_nnz = {i: sum(m[j][i] != 0 for j in rows_left) for i in cols_left}
        pivots = [
            (
                val(m[j][i]) + beta[j] - alphas[0][i],
                (row_nnz[j] - 1) * (col_nnz[i] - 1),
                i,
                j,
            )
            for j in rows_left
            for i in cols_left
            if m[j][i] != 0
            and _pivot_allowed(m, val, beta, alphas, rows_left, cols_left, j, i)
        ]
        if not pivots:
            return None
        _, _, ip, jp = min(pivots)
        pivot = m[jp][ip]
        for k in cols_left:
            if k != ip and m[jp][k] != 0:
                c = m[jp][k] / pivot
                for row in m:
                    row[k] -= c * row[ip]
                for row in e:
                    row[k] -= c * row[ip]
        for j in rows_left:
            if j != jp and m[j][ip] != 0:
                c = m[j][ip] / pivot
                m[j] = [x - c * y for x, y in zip(m[j], m[jp])]
        pairing[ip] = jp
        rows_left.remove(jp)
        cols_left.remove(ip)

    weights = tuple(beta[pairing[i]] + val(m[pairing[i]][i]) for i in range(dim))
    return tuple(tuple(row) for row in e), weights


def common_orthogonal_basis(a: DiagNorm, b: DiagNorm) -> CommonBasis:
    """A basis orthogonal for both norms, with the weights of each.

    The a-basis is reduced against b: column operations keep it
    a-orthogonal with unchanged weights and row operations only re-choose
    the b-basis. Columns are then made primitive.
    """
    _check_compatible(a, b)
    reduced = _smith_reduce(a.basis, [a.weights], b)
    if reduced is None:
        raise InvariantViolation("weighted Smith reduction found no pivot")
    e, beta = reduced

    val = a.place.valuation
    cols, weights_a, weights_b = [], [], []
    for col, alpha, w in zip(columns(e), a.weights, beta):
        scale, col = _primitive(col)
        shift = val(scale)
        cols.append(col)
        weights_a.append(alpha + shift)
        weights_b.append(w + shift)
    return CommonBasis(from_columns(cols, a.dim), tuple(weights_a), tuple(weights_b))


def relative_spectrum(a: DiagNorm, b: DiagNorm) -> Spectrum:
    """lambda_i = log_q(||f_i||_b / ||f_i||_a) on a common orthogonal basis."""
    common = common_orthogonal_basis(a, b)
    lambdas = (wa - wb for wa, wb in zip(common.weights_a, common.weights_b))
    return Spectrum(tuple(sorted(lambdas, reverse=True)))


def distances(a: DiagNorm, b: DiagNorm) -> Distances:
    lambdas = relative_spectrum(a, b).lambdas
    if not lambdas:
        return Distances(Fraction(0), Fraction(0))
    d2_sq = sum((x * x for x in lambdas), Fraction(0))
    return Distances(d2_sq, max(lambdas[0], -lambdas[-1]))


def norms_equal(a: DiagNorm, b: DiagNorm) -> bool:
    return all(x == 0 for x in relative_spectrum(a, b).lambdas)


def geodesic(a: DiagNorm, b: DiagNorm, t: Fraction) -> DiagNorm:
    """Point at parameter t on the geodesic from a (t = 0) to b (t = 1)."""
    t = Fraction(t)
    if not 0 <= t <= 1:
        raise ValidationError(f"geodesic parameter {t} outside [0, 1]")
    common = common_orthogonal_basis(a, b)
    weights = tuple(
        (1 - t) * wa + t * wb for wa, wb in zip(common.weights_a, common.weights_b)
    )
    return DiagNorm(a.place, common.basis, weights)


def midpoint(a: DiagNorm, b: DiagNorm) -> DiagNorm:
    return geodesic(a, b, Fraction(1, 2))


def round_norm(n: DiagNorm, bits: int = GRID_BITS) -> DiagNorm:
    """Move n inside its apartment to the nearest grid point."""
    return DiagNorm(n.place, n.basis, tuple(grid_round(w, bits) for w in n.weights))


def _primitive_basis(basis: Matrix) -> Matrix:
    return from_columns([_primitive(col)[1] for col in columns(basis)], len(basis))


def _apartment_candidates(points: Sequence[DiagNorm]):
    """Bases that may be orthogonal for every point, cheapest first.

    The points' own bases come first. Then, for every pair, their common
    basis is reduced against each remaining point in index order while
    keeping the weights of the points already placed. A point the current
    basis already diagonalizes is placed without reduction.
    """
    for p in points:
        yield p.basis
    for s, t in combinations(range(len(points)), 2):
        common = common_orthogonal_basis(points[s], points[t])
        basis = common.basis
        placed = [common.weights_a, common.weights_b]
        for r, p in enumerate(points):
            if r in (s, t):
                continue
            weights = _weights_in_basis(p, basis)
            if weights is None:
                reduced = _smith_reduce(basis, placed, p)
                if reduced is None:
                    logger.debug(f"apartment search from pair ({s}, {t}) stuck at {r}")
                    break
                basis, weights = reduced
            placed.append(weights)
        else:
            yield _primitive_basis(basis)


def shared_apartment(
    points: Sequence[DiagNorm],
) -> tuple[Matrix, list[tuple[Fraction, ...]]] | None:
    """A basis orthogonal for every point, with each point's weights in it.

    None when no candidate basis works; every candidate is checked exactly.
    """
    for basis in _apartment_candidates(points):
        rows = []
        for p in points:
            weights = _weights_in_basis(p, basis)
            if weights is None:
                break
            rows.append(weights)
        else:
            return basis, rows
    return None


def center_of_mass(
    points: Sequence[DiagNorm],
    masses: Sequence[Fraction] | None = None,
    tol: Fraction = DEFAULT_TOL,
    max_sweeps: int = COM_MAX_SWEEPS,
    grid_bits: int = GRID_BITS,
) -> CenterOfMass:
    """Minimizer of sum m_k d(x, P_k)^2.

    Exact weighted barycenter of the weight vectors when the points share an
    apartment. Otherwise cyclic inductive means: the estimate carries the
    total mass W, and each sweep moves it toward P_k by m_k / (M + m_k) along
    the geodesic, M being W plus the masses already visited in that sweep.
    A sweep is a 1/2-contraction, so the iteration stops once one sweep moves
    the estimate by d2_sq < tol^2, or at max_sweeps.
    """
    if not points:
        raise ValidationError("center of mass of an empty set of points")
    if masses is None:
        masses = [Fraction(1)] * len(points)
    masses = [Fraction(m) for m in masses]
    if len(masses) != len(points):
        raise ValidationError(
            f"{len(masses)} masses for {len(points)} points"
        )
    if any(m <= 0 for m in masses):
        raise ValidationError("masses must be positive")
    if tol <= 0:
        raise ValidationError(f"tol must be positive, got {tol}")
    for p in points[1:]:
        _check_compatible(points[0], p)

    place = points[0].place
    total = sum(masses)
    apartment = shared_apartment(points)
    if apartment is not None:
        basis, rows = apartment
        bary = tuple(
            sum(m * w[i] for m, w in zip(masses, rows)) / total
            for i in range(points[0].dim)
        )
        objective = sum(
            (
                m * sum((x - y) ** 2 for x, y in zip(bary, w))
                for m, w in zip(masses, rows)
            ),
            Fraction(0),
        )
        return CenterOfMass(DiagNorm(place, basis, bary), objective, True, 0)

    current = points[0]
    sweeps = 0
    moved = Fraction(0)
    reason = "max_sweeps"
    for sweep in range(1, max_sweeps + 1):
        start = current
        carried = total
        for point, mass in zip(points, masses):
            current = geodesic(current, point, mass / (carried + mass))
            current = round_norm(current, grid_bits)
            carried += mass
        sweeps = sweep
        moved = distances(start, current).d2_sq
        logger.debug(f"barycenter sweep {sweep}: moved d2_sq={float(moved):.3e}")
        if moved < tol * tol:
            reason = "converged"
            break
    else:
        logger.warning(
            f"barycenter iteration stopped at the cap of {max_sweeps} sweeps, "
            f"last move d2_sq={float(moved):.3e}"
        )

    objective = sum(
        (m * distances(current, p).d2_sq for m, p in zip(masses, points)),
        Fraction(0),
    )
    return CenterOfMass(current, objective, False, sweeps, reason, moved)


def act(g: Sequence[Sequence[Fraction]], n: DiagNorm) -> DiagNorm:
    """(g . n)(v) = n(g^-1 v): basis g e_i, same weights."""
    g = as_matrix(g)
    if len(g) != n.dim or not is_square(g):
        raise ValidationError(
            f"matrix of shape {len(g)}x{len(g[0]) if g else 0} acting on "
            f"a norm of dimension {n.dim}"
        )
    if g and det(g) == 0:
        raise ValidationError("matrix is singular")
    return DiagNorm(n.place, matmul(g, n.basis), n.weights).normalized()


def is_fixed(g: Sequence[Sequence[Fraction]], n: DiagNorm) -> bool:
    return norms_equal(act(g, n), n)


def lattice_norm(basis: Sequence[Sequence[Fraction]], place: PrimePlace) -> DiagNorm:
    """Norm whose unit ball is the lattice spanned by the basis columns."""
    basis = as_matrix(basis)
    return DiagNorm(place, basis, (Fraction(0),) * len(basis))


def standard_norm(dim: int, place: PrimePlace) -> DiagNorm:
    return lattice_norm(
        tuple(tuple(Fraction(int(i == j)) for j in range(dim)) for i in range(dim)),
        place,
    )
