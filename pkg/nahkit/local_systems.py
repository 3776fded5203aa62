"""Monodromy toolkit for representations of finitely presented groups.

Covers quasiunipotence and unipotent reduction, flat lattices, monodromy
weight filtrations, graded nearby cycles, semisimplification, characteristic
polynomial and residue maps, and the KMS rescaling of parabolic data.
"""

import logging
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from sympy import I, Matrix as SympyMatrix, conjugate, expand, im, re

from .consts import RESIDUE_EXP_SIGN
from .exceptions import (
    InvariantViolation,
    NotQuasiunipotentError,
    UnsupportedError,
    ValidationError,
)
from .groups import GroupRep, Word, reduce_word
from .linalg import (
    ZERO,
    Matrix,
    Scalar,
    Vector,
    annihilator,
    as_matrix,
    commutes,
    contains,
    extend_basis,
    from_columns,
    identity,
    in_span,
    independent_subset,
    inverse,
    is_independent,
    is_square,
    mat_sub,
    matmul,
    matvec,
    nullspace,
    solve,
    standard_basis,
    trace,
    vec_matrix,
    vec_scale,
)
from .polys import (
    charpoly,
    from_poly,
    is_nilpotent,
    is_rational_matrix,
    is_semisimple,
    is_unipotent,
    poly_at_matrix,
    quasiunipotent_order,
    to_poly,
)
from .scalars import PrimePlace, from_sympy, to_sympy

logger = logging.getLogger(__name__)


# =============================================================================
# Quasiunipotence
# =============================================================================


def unipotent_reduction_exponent(rep: GroupRep, loops: Sequence[Word]) -> int:
    """lcm of the quasiunipotent orders of rho(loop); 1 for no loops."""
    orders = []
    for loop in loops:
        m = quasiunipotent_order(rep.evaluate(loop))
        if m is None:
            raise NotQuasiunipotentError(tuple(loop))
        logger.debug(f"loop {list(loop)} has quasiunipotent order {m}")
        orders.append(m)
    return math.lcm(*orders) if orders else 1


# =============================================================================
# Flat lattices
# =============================================================================


def _check_commuting_unipotent(mats: Sequence[Matrix]) -> None:
    for i, m in enumerate(mats):
        if not all(isinstance(x, Fraction) for row in m for x in row):
            raise ValidationError(f"matrix {i} must have rational entries")
        if not is_square(m) or len(m) != len(mats[0]):
            raise ValidationError(f"matrix {i} has the wrong shape")
        if not is_unipotent(m):
            raise ValidationError(f"matrix {i} is not unipotent")
    for i, a in enumerate(mats):
        for j in range(i + 1, len(mats)):
            if not commutes(a, mats[j]):
                raise ValidationError(f"matrices {i} and {j} do not commute")


def common_invariant_flag(mats: Sequence[Matrix], dim: int) -> list[Vector]:
    """f_1, ..., f_r with (U - I) f_k in span(f_1..f_(k-1)) for every U."""
    shifted = [mat_sub(m, identity(dim)) for m in mats]
    flag: list[Vector] = []
    while len(flag) < dim:
        forms = tuple(annihilator(flag, dim))
        system = tuple(row for s in shifted for row in matmul(forms, s))
        kernel = nullspace(system, dim) if system else standard_basis(dim)
        flag.append(next(v for v in kernel if not in_span(v, flag)))
    return flag


def flat_lattice(
    mats: Sequence[Sequence[Sequence[Fraction]]],
    place: PrimePlace,
    dim: int | None = None,
) -> Matrix:
    """Basis (as columns) of a lattice stable under every matrix and inverse.

    The matrices are put in upper unitriangular form along a common invariant
    flag, then the flag vectors are rescaled by powers of p until every
    off-diagonal entry becomes integral.
    """
    mats = [as_matrix(m) for m in mats]
    if mats:
        dim = len(mats[0])
    elif dim is None:
        raise ValidationError("dimension required for an empty set of matrices")
    _check_commuting_unipotent(mats)

    flag = common_invariant_flag(mats, dim)
    frame = from_columns(flag, dim)
    frame_inv = inverse(frame)
    triangular = []
    for m in mats:
        triangular.append(matmul(frame_inv, matmul(m, frame)))
        triangular.append(matmul(frame_inv, matmul(inverse(m), frame)))

    exponents = [0] * dim
    for k in range(dim):
        for tri in triangular:
            for j in range(k):
                if tri[j][k] != 0:
                    exponents[k] = max(
                        exponents[k], exponents[j] - place.valuation(tri[j][k])
                    )
    lattice = [vec_scale(Fraction(place.p) ** c, f) for c, f in zip(exponents, flag)]
    return from_columns(lattice, dim)


def lattice_is_stable(
    mats: Sequence[Matrix], lattice: Matrix, place: PrimePlace
) -> bool:
    """Every matrix and inverse is integral in the lattice basis."""
    lattice_inv = inverse(lattice)
    for m in mats:
        for g in (m, inverse(m)):
            image = matmul(lattice_inv, matmul(g, lattice))
            if any(place.valuation(x) < 0 for row in image for x in row):
                return False
    return True


# =============================================================================
# Weight filtrations
# =============================================================================


@dataclass(frozen=True)
class WeightFiltration:
    """W_k = span of the basis vectors of weight <= k.

    `vectors` is a basis adapted to the filtration, sorted by weight, so each
    W_k is spanned by an initial segment. W_k = 0 below -top and W_k = V
    from top on.
    """

    dim: int
    vectors: tuple[Vector, ...]
    weights: tuple[int, ...]
    top: int

    def subspace(self, k: int) -> list[Vector]:
        return [v for v, w in zip(self.vectors, self.weights) if w <= k]

    @property
    def levels(self) -> range:
        return range(-self.top - 1, self.top + 1)

    def as_dict(self) -> dict[int, list[Vector]]:
        return {k: self.subspace(k) for k in self.levels}

    def gr_dims(self) -> dict[int, int]:
        """Nonzero dimensions of the graded pieces."""
        dims = {k: self.weights.count(k) for k in range(-self.top, self.top + 1)}
        return {k: d for k, d in dims.items() if d}


def _jordan_chains(n: Matrix) -> list[tuple[Vector, int]]:
    """Tops of Jordan chains of a nilpotent n, with their lengths, longest first.

    Rational matrices go through sympy's jordan_form; number field entries use
    the kernels of the powers of n.
    """
    if not is_rational_matrix(n):
        return _kernel_chains(n)
    dim = len(n)
    sm = SympyMatrix([[to_sympy(Fraction(x)) for x in row] for row in n])
    p, j = sm.jordan_form()
    chains = []
    start = 0
    for i in range(dim):
        # blocks carry 1 on the superdiagonal; the last column generates one
        if i == dim - 1 or j[i, i + 1] == 0:
            top = tuple(from_sympy(p[k, i]) for k in range(dim))
            chains.append((top, i - start + 1))
            start = i + 1
    chains.sort(key=lambda chain: -chain[1])
    return chains


def _kernel_chains(n: Matrix) -> list[tuple[Vector, int]]:
    dim = len(n)
    powers = [identity(dim)]
    for _ in range(dim):
        powers.append(matmul(powers[-1], n))
    kernels = [nullspace(p, dim) for p in powers]
    longest = next(j for j, k in enumerate(kernels) if len(k) == dim)

    chains = []
    for length in range(longest, 0, -1):
        above = kernels[min(length + 1, dim)]
        span = independent_subset(
            list(kernels[length - 1]) + [matvec(n, v) for v in above]
        )
        for v in kernels[length]:
            if not in_span(v, span):
                chains.append((v, length))
                span.append(v)
    return chains


def _level(levels: Mapping[int, Sequence[Vector]], k: int, dim: int) -> list[Vector]:
    if k < min(levels):
        return []
    if k > max(levels):
        return standard_basis(dim)
    return list(levels[k])


def check_weight_filtration(
    n: Matrix, levels: Mapping[int, Sequence[Vector]]
) -> bool:
    """Exact check of the two defining axioms of the monodromy filtration.

    `levels` maps k to a spanning list of W_k; below its smallest key W is 0
    and above its largest key W is the whole space.
    """
    dim = len(n)
    lo, hi = min(levels), max(levels)
    if len(independent_subset(_level(levels, hi, dim))) != dim:
        return False
    if independent_subset(_level(levels, lo, dim)):
        return False

    def span_dim(k: int) -> int:
        return len(independent_subset(_level(levels, k, dim)))

    for k in range(lo, hi + 1):
        here = _level(levels, k, dim)
        if not contains(_level(levels, k + 1, dim), here):
            return False
        images = [matvec(n, v) for v in here]
        if not contains(_level(levels, k - 2, dim), images):
            return False

    top = max(abs(lo), abs(hi))
    power = identity(dim)
    for k in range(1, top + 1):
        power = matmul(power, n)
        gr_k = span_dim(k) - span_dim(k - 1)
        gr_minus_k = span_dim(-k) - span_dim(-k - 1)
        if gr_k != gr_minus_k:
            return False
        image = [matvec(power, v) for v in _level(levels, k, dim)]
        if not contains(image + _level(levels, -k - 1, dim), _level(levels, -k, dim)):
            return False
    return True


def weight_filtration(n: Sequence[Sequence[Scalar]]) -> WeightFiltration:
    """The monodromy weight filtration of a nilpotent endomorphism.

    Built from a Jordan basis: the vector N^i v of a chain of length l gets
    weight l - 1 - 2i. Both axioms are re-checked on the result.
    """
    n = as_matrix(n)
    if not is_square(n):
        raise ValidationError("N must be a square matrix")
    if not is_nilpotent(n):
        raise ValidationError("N is not nilpotent")
    dim = len(n)
    if dim == 0:
        return WeightFiltration(0, (), (), 0)

    tagged = []
    for top, length in _jordan_chains(n):
        v = top
        for i in range(length):
            tagged.append((length - 1 - 2 * i, v))
            v = matvec(n, v)
    tagged.sort(key=lambda item: item[0])
    vectors = tuple(v for _, v in tagged)
    if len(vectors) != dim or not is_independent(vectors):
        raise InvariantViolation("Jordan chains do not form a basis")

    top_weight = max(w for w, _ in tagged)
    result = WeightFiltration(dim, vectors, tuple(w for w, _ in tagged), top_weight)
    if not check_weight_filtration(n, result.as_dict()):
        raise InvariantViolation("weight filtration fails its defining axioms")
    return result


# =============================================================================
# Graded nearby cycles and semisimplification
# =============================================================================


def _block_diagonal_part(m: Matrix, tags: Sequence[int]) -> Matrix:
    return tuple(
        tuple(x if tags[i] == tags[j] else ZERO for j, x in enumerate(row))
        for i, row in enumerate(m)
    )


def graded_nearby_cycles(rep: GroupRep, gamma: Sequence[int]) -> GroupRep:
    """Representation induced on gr^W of W = W(rho(gamma) - I).

    The result is written in a basis adapted to W; gamma acts trivially on it.
    """
    gamma = reduce_word(gamma)
    t = rep.evaluate(gamma)
    dim = rep.rank
    if not is_unipotent(t):
        raise ValidationError(f"monodromy of {list(gamma)} is not unipotent")
    for i, m in enumerate(rep.matrices, start=1):
        if not commutes(t, m):
            raise ValidationError(
                f"{list(gamma)} is not central: it does not commute with "
                f"generator {i}"
            )

    w = weight_filtration(mat_sub(t, identity(dim)))
    frame = from_columns(w.vectors, dim)
    frame_inv = inverse(frame)
    graded = []
    for g, m in enumerate(rep.matrices, start=1):
        c = matmul(frame_inv, matmul(m, frame))
        for i, row in enumerate(c):
            for j, x in enumerate(row):
                if w.weights[i] > w.weights[j] and x != 0:
                    raise InvariantViolation(
                        f"weight filtration is not stable under generator {g}"
                    )
        graded.append(_block_diagonal_part(c, w.weights))
    logger.info(f"gr psi along {list(gamma)}: gr dims {w.gr_dims()}")
    return rep.with_matrices(graded)


def algebra_basis(mats: Sequence[Matrix], dim: int) -> list[Matrix]:
    """Basis of the unital algebra generated by the matrices."""
    basis = [identity(dim)]
    flat = [vec_matrix(basis[0])]
    frontier = list(basis)
    while frontier:
        grown = []
        for a in frontier:
            for g in mats:
                product = matmul(a, g)
                if not in_span(vec_matrix(product), flat):
                    basis.append(product)
                    flat.append(vec_matrix(product))
                    grown.append(product)
        frontier = grown
    return basis


def _combine(coeffs: Sequence[Scalar], mats: Sequence[Matrix], dim: int) -> Matrix:
    result = tuple((ZERO,) * dim for _ in range(dim))
    for c, m in zip(coeffs, mats):
        if c != 0:
            result = tuple(
                tuple(x + c * y for x, y in zip(r, s)) for r, s in zip(result, m)
            )
    return result


def algebra_radical(basis: Sequence[Matrix], dim: int) -> list[Matrix]:
    """Kernel of the trace form tr(a b); the Jacobson radical in characteristic 0."""
    gram = tuple(
        tuple(trace(matmul(a, b)) for b in basis) for a in basis
    )
    return [_combine(x, basis, dim) for x in nullspace(gram, len(basis))]


def _radical_layers(radical: Sequence[Matrix], dim: int) -> list[list[Vector]]:
    """V, JV, J^2 V, ... down to the last nonzero term."""
    layers = [standard_basis(dim)]
    while radical:
        deeper = independent_subset(
            matvec(j, v) for j in radical for v in layers[-1]
        )
        if not deeper:
            break
        if len(layers) > dim:
            raise InvariantViolation("radical of the algebra is not nilpotent")
        layers.append(deeper)
    return layers


def _central_split(mats: Sequence[Matrix], dim: int) -> Matrix | None:
    """Basis splitting a semisimple rational module along its center, if useful."""
    basis = algebra_basis(mats, dim)
    brackets = [
        [vec_matrix(mat_sub(matmul(a, g), matmul(g, a))) for a in basis]
        for g in mats
    ]
    equations = [
        tuple(b[k] for b in per_generator)
        for per_generator in brackets
        for k in range(dim * dim)
    ]
    center = [
        _combine(x, basis, dim) for x in nullspace(tuple(equations), len(basis))
    ]
    z = _combine([Fraction(k + 1) for k in range(len(center))], center, dim)
    _, factors = to_poly(charpoly(z)).factor_list()
    factors = sorted(
        (f.monic() for f, _ in factors),
        key=lambda f: (f.degree(), tuple(-c for c in from_poly(f)[1:])),
    )
    if len(factors) < 2:
        return None
    pieces = []
    for f in factors:
        pieces += nullspace(poly_at_matrix(from_poly(f), z), dim)
    if len(pieces) != dim:
        raise InvariantViolation("central idempotents do not split the module")
    return from_columns(pieces, dim)


def semisimplify(rep: GroupRep) -> GroupRep:
    """Direct sum of the Jordan-Holder factors, block diagonal.

    The radical series V > JV > J^2 V > ... of the generated algebra has
    semisimple layers; the blocks of the representation on those layers are
    kept. Rational representations are further split along the center of
    the resulting algebra.
    """
    dim = rep.rank
    basis = algebra_basis(rep.matrices, dim)
    radical = algebra_radical(basis, dim)
    layers = _radical_layers(radical, dim)

    frame_vectors: list[Vector] = []
    tags: list[int] = []
    for depth in range(len(layers) - 1, -1, -1):
        added = extend_basis(frame_vectors, layers[depth])
        frame_vectors += added
        tags += [depth] * len(added)
    frame = from_columns(frame_vectors, dim)
    frame_inv = inverse(frame)
    blocks = [
        _block_diagonal_part(matmul(frame_inv, matmul(m, frame)), tags)
        for m in rep.matrices
    ]
    logger.info(
        f"semisimplify: algebra dim {len(basis)}, radical dim {len(radical)}, "
        f"{len(layers)} layer(s)"
    )

    if rep.is_rational and blocks:
        split = _central_split(blocks, dim)
        if split is not None:
            split_inv = inverse(split)
            blocks = [matmul(split_inv, matmul(m, split)) for m in blocks]
    return rep.with_matrices(blocks)


# =============================================================================
# Characteristic polynomials, residues and local monodromy
# =============================================================================


def char_b(rep: GroupRep, word: Sequence[int]) -> tuple[Scalar, ...]:
    """Characteristic polynomial of rho(word), leading coefficient first."""
    return charpoly(rep.evaluate(reduce_word(word)))


def char_dr(residue: Sequence[Sequence[Fraction]]) -> tuple[Scalar, ...]:
    """Characteristic polynomial of a residue matrix."""
    return charpoly(as_matrix(residue))


def residue_exponential(residues: Sequence[Fraction]) -> tuple[Fraction, ...]:
    """exp(RESIDUE_EXP_SIGN * 2 pi i a) for each residue a.

    A root of unity exp(2 pi i e) is encoded by e in [0, 1), so k/m maps to
    ((-k) mod m)/m and integers map to 0, the encoding of 1.
    """
    return tuple((RESIDUE_EXP_SIGN * Fraction(a)) % 1 for a in residues)


def root_orders(roots: Sequence[Fraction]) -> tuple[int, ...]:
    return tuple(Fraction(e).denominator for e in roots)


def residues_quasiunipotent(
    residues: Sequence[Fraction], n: int, scale: Fraction = Fraction(1)
) -> bool:
    """Whether every residue lies in scale * ((1/n) Z intersected with (-1, 0])."""
    if n < 1:
        raise ValidationError(f"n must be positive, got {n}")
    if scale == 0:
        raise ValidationError("scale must be nonzero")
    for a in residues:
        b = Fraction(a) / scale
        if (b * n).denominator != 1 or not -1 < b <= 0:
            return False
    return True


def local_monodromies_conjugate(
    rep: GroupRep, w1: Sequence[int], w2: Sequence[int]
) -> bool:
    """Conjugacy of rho(w1) and rho(w2) in GL_r(Q), semisimple case only."""
    if not rep.is_rational:
        raise UnsupportedError("conjugacy is only decided over Q")
    a, b = rep.evaluate(w1), rep.evaluate(w2)
    if not (is_semisimple(a) and is_semisimple(b)):
        raise UnsupportedError(
            "conjugacy of non-semisimple local monodromies is not decided"
        )
    return charpoly(a) == charpoly(b)


# =============================================================================
# KMS rescaling
# =============================================================================


def kms_rescale(a: float, alpha: complex, lam: complex) -> tuple[float, complex]:
    """(a, alpha) -> (a + 2 Re(lam conj(alpha)), alpha - a lam - conj(alpha) lam^2)."""
    alpha, lam = complex(alpha), complex(lam)
    p = a + 2 * (lam * alpha.conjugate()).real
    e = alpha - a * lam - alpha.conjugate() * lam**2
    return p, e


GaussianRational = tuple[Fraction, Fraction]


def kms_rescale_exact(
    a: Fraction, alpha: GaussianRational, lam: GaussianRational
) -> tuple[Fraction, GaussianRational]:
    """Exact evaluation of kms_rescale on Gaussian rationals."""
    a_s = to_sympy(Fraction(a))
    alpha_s = to_sympy(Fraction(alpha[0])) + I * to_sympy(Fraction(alpha[1]))
    lam_s = to_sympy(Fraction(lam[0])) + I * to_sympy(Fraction(lam[1]))
    p = expand(a_s + 2 * re(lam_s * conjugate(alpha_s)))
    e = expand(alpha_s - a_s * lam_s - conjugate(alpha_s) * lam_s**2)
    return from_sympy(p), (from_sympy(re(e)), from_sympy(im(e)))


def kms_matrix(lam: GaussianRational) -> Matrix:
    """The real-linear map (a, Re alpha, Im alpha) -> (p, Re e, Im e)."""
    x, y = Fraction(lam[0]), Fraction(lam[1])
    s, t = x * x - y * y, 2 * x * y
    return (
        (Fraction(1), 2 * x, 2 * y),
        (-x, 1 - s, -t),
        (-y, -t, 1 + s),
    )


def kms_inverse_exact(
    p: Fraction, e: GaussianRational, lam: GaussianRational
) -> tuple[Fraction, GaussianRational]:
    """(a, alpha) with kms_rescale_exact(a, alpha, lam) = (p, e)."""
    x = solve(kms_matrix(lam), (Fraction(p), Fraction(e[0]), Fraction(e[1])))
    if x is None:
        raise InvariantViolation("KMS rescaling is not invertible")
    return x[0], (x[1], x[2])


def kms_inverse(p: float, e: complex, lam: complex) -> tuple[float, complex]:
    """Floating point inverse of kms_rescale."""
    lam = complex(lam)
    x, y = lam.real, lam.imag
    s, t = x * x - y * y, 2 * x * y
    system = np.array([[1.0, 2 * x, 2 * y], [-x, 1 - s, -t], [-y, -t, 1 + s]])
    a, u, w = np.linalg.solve(system, np.array([p, complex(e).real, complex(e).imag]))
    return float(a), complex(u, w)
