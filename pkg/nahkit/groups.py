"""Finitely presented groups and their matrix representations.

A word is a tuple of signed 1-based generator indices: (1, 2, -1, -2) is
g1 g2 g1^-1 g2^-1. Matrices may have rational or number field entries.
"""

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field
from functools import cached_property

from .exceptions import ValidationError
from .linalg import (
    Matrix,
    as_matrix,
    block_diag,
    det,
    identity,
    inverse,
    is_identity,
    is_square,
    matmul,
)
from .scalars import NumberField, NumberFieldElement

logger = logging.getLogger(__name__)

Word = tuple[int, ...]


def reduce_word(word: Sequence[int]) -> Word:
    """Free reduction: cancel adjacent x x^-1 pairs."""
    stack: list[int] = []
    for letter in word:
        if stack and stack[-1] == -letter:
            stack.pop()
        else:
            stack.append(letter)
    return tuple(stack)


def invert_word(word: Sequence[int]) -> Word:
    return tuple(-letter for letter in reversed(word))


def commutator(u: Sequence[int], v: Sequence[int]) -> Word:
    """u v u^-1 v^-1, reduced."""
    return reduce_word(tuple(u) + tuple(v) + invert_word(u) + invert_word(v))


def conjugate_word(u: Sequence[int], w: Sequence[int]) -> Word:
    """u w u^-1, reduced."""
    return reduce_word(tuple(u) + tuple(w) + invert_word(u))


@dataclass(frozen=True)
class GroupPresentation:
    """<g_1, ..., g_s | relators>, relators stored freely reduced."""

    generators: int
    relators: tuple[Word, ...] = ()

    def __post_init__(self):
        if self.generators < 0:
            raise ValidationError(
                f"generator count must be >= 0, got {self.generators}"
            )
        relators = tuple(reduce_word(r) for r in self.relators)
        for r in relators:
            self.check_word(r)
        object.__setattr__(self, "relators", relators)

    def check_word(self, word: Sequence[int]) -> None:
        for letter in word:
            if letter == 0 or abs(letter) > self.generators:
                raise ValidationError(
                    f"letter {letter} outside generators 1..{self.generators}"
                )


def free_group(n: int) -> GroupPresentation:
    return GroupPresentation(n)


def free_abelian_rank2() -> GroupPresentation:
    return GroupPresentation(2, (commutator((1,), (2,)),))


def surface_group(genus: int) -> GroupPresentation:
    """<a_1, b_1, ..., a_g, b_g | [a_1, b_1] ... [a_g, b_g]>."""
    relator: Word = ()
    for i in range(genus):
        a, b = 2 * i + 1, 2 * i + 2
        relator += (a, b, -a, -b)
    return GroupPresentation(2 * genus, (relator,) if genus else ())


def one_relator(generators: int, relator: Sequence[int]) -> GroupPresentation:
    return GroupPresentation(generators, (tuple(relator),))


@dataclass(frozen=True)
class GroupRep:
    """Assignment of invertible matrices to generators respecting the relators."""

    presentation: GroupPresentation
    matrices: tuple[Matrix, ...]
    number_field: NumberField | None = None
    rank_hint: int | None = field(default=None, compare=False)

    def __post_init__(self):
        matrices = tuple(as_matrix(m) for m in self.matrices)
        object.__setattr__(self, "matrices", matrices)
        s = self.presentation.generators
        if len(matrices) != s:
            raise ValidationError(f"{len(matrices)} matrices for {s} generators")
        sizes = {len(m) for m in matrices}
        if len(sizes) > 1:
            raise ValidationError(f"generator matrices of mixed sizes {sorted(sizes)}")
        for i, m in enumerate(matrices, start=1):
            if not is_square(m):
                raise ValidationError(f"matrix of generator {i} is not square")
            if m and det(m) == 0:
                raise ValidationError(f"matrix of generator {i} is singular")
            self._check_entries(m)
        for r in self.presentation.relators:
            if not is_identity(self.evaluate(r)):
                raise ValidationError(
                    f"relator {list(r)} does not evaluate to the identity"
                )

    def _check_entries(self, m: Matrix) -> None:
        for row in m:
            for x in row:
                if (
                    isinstance(x, NumberFieldElement)
                    and x.field != self.number_field
                ):
                    raise ValidationError(
                        "matrix entry lies outside the coefficient field"
                    )

    @property
    def rank(self) -> int:
        if self.matrices:
            return len(self.matrices[0])
        return self.rank_hint or 0

    @property
    def generators(self) -> int:
        return self.presentation.generators

    @property
    def is_rational(self) -> bool:
        return all(
            not isinstance(x, NumberFieldElement)
            for m in self.matrices
            for row in m
            for x in row
        )

    @cached_property
    def inverses(self) -> tuple[Matrix, ...]:
        return tuple(inverse(m) for m in self.matrices)

    def letter(self, letter: int) -> Matrix:
        if letter > 0:
            return self.matrices[letter - 1]
        return self.inverses[-letter - 1]

    def evaluate(self, word: Sequence[int]) -> Matrix:
        self.presentation.check_word(word)
        result = identity(self.rank)
        for letter in word:
            result = matmul(result, self.letter(letter))
        return result

    def with_matrices(self, matrices: Sequence[Matrix]) -> "GroupRep":
        return GroupRep(
            self.presentation, tuple(matrices), self.number_field, self.rank
        )

    def conjugate(self, p: Matrix) -> "GroupRep":
        """g -> p^-1 rho(g) p."""
        p_inv = inverse(as_matrix(p))
        return self.with_matrices(
            [matmul(p_inv, matmul(m, p)) for m in self.matrices]
        )

    def direct_sum(self, other: "GroupRep") -> "GroupRep":
        if other.presentation != self.presentation:
            raise ValidationError("direct sum of representations of different groups")
        return GroupRep(
            self.presentation,
            tuple(block_diag(a, b) for a, b in zip(self.matrices, other.matrices)),
            self.number_field or other.number_field,
            self.rank + other.rank,
        )


def trivial_rep(presentation: GroupPresentation, rank: int) -> GroupRep:
    return GroupRep(
        presentation, tuple(identity(rank) for _ in range(presentation.generators)),
        rank_hint=rank,
    )
