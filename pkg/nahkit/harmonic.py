"""
Discrete harmonic maps from weighted graphs into nonpositively curved targets.

A map assigns a target point to every vertex. Its energy is

    E(u) = sum over edges e = (s, t, w) of w * d(u(s), rho(g_e) u(t))^2

where rho(g_e) is the identity for plain graphs and the monodromy of the
edge label for voltage graphs. Relaxation replaces one value by the center
of mass of its (twisted) neighbors; solvers sweep the vertices in index
order until a sweep moves nothing by more than tol.
"""

import logging
from abc import ABC, abstractmethod
from collections import deque
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field, replace
from enum import Enum
from fractions import Fraction
from functools import cached_property
from typing import Any

from .consts import COM_MAX_SWEEPS, DEFAULT_MAX_SWEEPS, DEFAULT_TOL, GRID_BITS
from .exceptions import UnsupportedError, ValidationError
from .groups import GroupRep, Word, reduce_word
from .linalg import Matrix, Vector, as_vector, is_identity, matvec
from .norms import (
    DiagNorm,
    act,
    center_of_mass,
    distances,
    geodesic,
    is_orthogonal,
    norm_eval,
    round_norm,
)
from .scalars import PrimePlace, grid_round

logger = logging.getLogger(__name__)

Point = Any  # DiagNorm for buildings, tuple of Fractions for Euclidean space


class ETargetKind(Enum):
    EUCLIDEAN = "euclidean"
    BUILDING = "building"


# =============================================================================
# Targets
# =============================================================================


class NPCTarget(ABC):
    """A complete metric space of nonpositive curvature with exact d^2."""

    kind: ETargetKind

    @abstractmethod
    def check_point(self, x: Point) -> Point:
        """Coerce x to a point of this target or raise ValidationError."""

    @abstractmethod
    def distance_sq(self, a: Point, b: Point) -> Fraction:
        pass

    @abstractmethod
    def center_of_mass(
        self, points: Sequence[Point], masses: Sequence[Fraction]
    ) -> Point:
        pass

    @abstractmethod
    def act(self, g: Matrix, x: Point) -> Point:
        """Isometric action of an invertible rational matrix."""

    @abstractmethod
    def midpoint(self, a: Point, b: Point) -> Point:
        pass

    @abstractmethod
    def round(self, x: Point) -> Point:
        """Snap x to the dyadic grid."""


@dataclass
class EuclideanTarget(NPCTarget):
    """Q^dim with the standard flat metric; only trivial voltages act."""

    dim: int
    grid_bits: int = GRID_BITS
    kind: ETargetKind = field(default=ETargetKind.EUCLIDEAN, init=False)

    def check_point(self, x: Point) -> Point:
        if isinstance(x, DiagNorm):
            raise ValidationError("norm given where a Euclidean vector is expected")
        x = as_vector(Fraction(c) for c in x)
        if len(x) != self.dim:
            raise ValidationError(
                f"vector of length {len(x)} in a target of dimension {self.dim}"
            )
        return x

    def distance_sq(self, a: Point, b: Point) -> Fraction:
        return sum(((x - y) ** 2 for x, y in zip(a, b)), Fraction(0))

    def center_of_mass(
        self, points: Sequence[Point], masses: Sequence[Fraction]
    ) -> Point:
        total = sum(masses)
        return tuple(
            sum(m * p[i] for m, p in zip(masses, points)) / total
            for i in range(self.dim)
        )

    def act(self, g: Matrix, x: Point) -> Point:
        if not is_identity(g):
            raise UnsupportedError("Euclidean targets only carry trivial voltages")
        return x

    def midpoint(self, a: Point, b: Point) -> Point:
        return tuple((x + y) / 2 for x, y in zip(a, b))

    def round(self, x: Point) -> Point:
        return tuple(grid_round(c, self.grid_bits) for c in x)


@dataclass
class BuildingTarget(NPCTarget):
    """The space of norms on Q^dim at one prime place."""

    place: PrimePlace
    dim: int
    grid_bits: int = GRID_BITS
    tol: Fraction = DEFAULT_TOL
    com_max_sweeps: int = COM_MAX_SWEEPS
    kind: ETargetKind = field(default=ETargetKind.BUILDING, init=False)

    def check_point(self, x: Point) -> Point:
        if not isinstance(x, DiagNorm):
            raise ValidationError("vector given where a norm is expected")
        if x.place != self.place or x.dim != self.dim:
            raise ValidationError(
                f"norm of dimension {x.dim} at p={x.place.p} in the building of "
                f"dimension {self.dim} at p={self.place.p}"
            )
        return x

    def distance_sq(self, a: Point, b: Point) -> Fraction:
        return distances(a, b).d2_sq

    def center_of_mass(
        self, points: Sequence[Point], masses: Sequence[Fraction]
    ) -> Point:
        return center_of_mass(
            points, masses, self.tol, self.com_max_sweeps, self.grid_bits
        ).point

    def act(self, g: Matrix, x: Point) -> Point:
        if is_identity(g):
            return x
        return act(g, x)

    def midpoint(self, a: Point, b: Point) -> Point:
        return geodesic(a, b, Fraction(1, 2))

    def round(self, x: Point) -> Point:
        return round_norm(x, self.grid_bits)


def target_for(
    point: Point,
    grid_bits: int = GRID_BITS,
    tol: Fraction = DEFAULT_TOL,
    com_max_sweeps: int = COM_MAX_SWEEPS,
) -> NPCTarget:
    """The target a sample point lives in."""
    if isinstance(point, DiagNorm):
        return BuildingTarget(point.place, point.dim, grid_bits, tol, com_max_sweeps)
    return EuclideanTarget(len(point), grid_bits)


# =============================================================================
# Graphs
# =============================================================================


@dataclass(frozen=True)
class Edge:
    source: int
    target: int
    weight: Fraction

    @property
    def is_loop(self) -> bool:
        return self.source == self.target


@dataclass(frozen=True)
class WeightedGraph:
    """Connected graph on vertices 0..n_vertices-1 with positive edge weights."""

    n_vertices: int
    edges: tuple[Edge, ...]

    def __post_init__(self):
        edges = tuple(
            e if isinstance(e, Edge) else Edge(int(e[0]), int(e[1]), Fraction(e[2]))
            for e in self.edges
        )
        object.__setattr__(self, "edges", edges)
        if self.n_vertices < 1:
            raise ValidationError("graph must have at least one vertex")
        for k, e in enumerate(edges):
            for v in (e.source, e.target):
                if not 0 <= v < self.n_vertices:
                    raise ValidationError(f"edge {k} has unknown vertex {v}")
            if e.weight <= 0:
                raise ValidationError(f"edge {k} has nonpositive weight {e.weight}")
        if not self.is_connected():
            raise ValidationError("graph is not connected")

    @cached_property
    def incidence(self) -> tuple[tuple[int, ...], ...]:
        """Edge indices touching each vertex."""
        touching = [[] for _ in range(self.n_vertices)]
        for k, e in enumerate(self.edges):
            touching[e.source].append(k)
            if not e.is_loop:
                touching[e.target].append(k)
        return tuple(tuple(ks) for ks in touching)

    def is_connected(self) -> bool:
        seen = {0}
        queue = deque([0])
        neighbors = [[] for _ in range(self.n_vertices)]
        for e in self.edges:
            neighbors[e.source].append(e.target)
            neighbors[e.target].append(e.source)
        while queue:
            v = queue.popleft()
            for w in neighbors[v]:
                if w not in seen:
                    seen.add(w)
                    queue.append(w)
        return len(seen) == self.n_vertices

    @property
    def has_loops(self) -> bool:
        return any(e.is_loop for e in self.edges)


@dataclass(frozen=True)
class VoltageGraph:
    """A weighted graph whose edges carry reduced words in the group generators."""

    graph: WeightedGraph
    labels: tuple[Word, ...]

    def __post_init__(self):
        labels = tuple(tuple(w) for w in self.labels)
        object.__setattr__(self, "labels", labels)
        if len(labels) != len(self.graph.edges):
            raise ValidationError(
                f"{len(labels)} labels for {len(self.graph.edges)} edges"
            )
        for k, w in enumerate(labels):
            if reduce_word(w) != w:
                raise ValidationError(f"label of edge {k} is not a reduced word")

    @property
    def n_vertices(self) -> int:
        return self.graph.n_vertices

    @property
    def edges(self) -> tuple[Edge, ...]:
        return self.graph.edges


AnyGraph = WeightedGraph | VoltageGraph


# =============================================================================
# Map states
# =============================================================================


@dataclass(frozen=True)
class EquivMapState:
    """A map from the vertices into a target, plus solver bookkeeping."""

    values: tuple[Point, ...]
    target: NPCTarget
    fixed: frozenset[int] = frozenset()
    residual: Fraction = Fraction(0)
    sweeps: int = 0
    reason: str = "initial"
    energy_history: tuple[Fraction, ...] = ()

    @property
    def kind(self) -> ETargetKind:
        return self.target.kind

    def with_value(self, v: int, x: Point) -> "EquivMapState":
        values = list(self.values)
        values[v] = x
        return replace(self, values=tuple(values))


def make_state(
    values: Sequence[Point],
    target: NPCTarget | None = None,
    fixed: frozenset[int] = frozenset(),
) -> EquivMapState:
    if not values:
        raise ValidationError("a map needs at least one vertex value")
    target = target or target_for(values[0])
    return EquivMapState(tuple(target.check_point(x) for x in values), target, fixed)


class _Twists:
    """rho(g_e) and its inverse for every edge of a graph."""

    def __init__(self, graph: AnyGraph, rep: GroupRep | None):
        self.base = graph.graph if isinstance(graph, VoltageGraph) else graph
        self.forward: list[Matrix | None] = []
        self.backward: list[Matrix | None] = []
        if isinstance(graph, VoltageGraph):
            if rep is None:
                raise ValidationError("voltage graphs need a representation")
            if not rep.is_rational:
                raise UnsupportedError("voltage representations must be rational")
            for word in graph.labels:
                if word:
                    self.forward.append(rep.evaluate(word))
                    inverse_word = tuple(-x for x in reversed(word))
                    self.backward.append(rep.evaluate(inverse_word))
                else:
                    self.forward.append(None)
                    self.backward.append(None)
        else:
            self.forward = [None] * len(graph.edges)
            self.backward = [None] * len(graph.edges)

    def apply(self, target: NPCTarget, g: Matrix | None, x: Point) -> Point:
        return x if g is None else target.act(g, x)


def _check_state(graph: AnyGraph, u: EquivMapState) -> None:
    if len(u.values) != graph.n_vertices:
        raise ValidationError(
            f"map has {len(u.values)} values for {graph.n_vertices} vertices"
        )


def _edge_energy(
    tw: _Twists, u: EquivMapState, k: int, values: Sequence[Point]
) -> Fraction:
    e = tw.base.edges[k]
    twisted = tw.apply(u.target, tw.forward[k], values[e.target])
    return e.weight * u.target.distance_sq(values[e.source], twisted)


def energy(graph: AnyGraph, u: EquivMapState, rep: GroupRep | None = None) -> Fraction:
    """Exact energy of u."""
    _check_state(graph, u)
    tw = _Twists(graph, rep)
    return _total_energy(tw, u)


def _total_energy(tw: _Twists, u: EquivMapState) -> Fraction:
    return sum(
        (_edge_energy(tw, u, k, u.values) for k in range(len(tw.base.edges))),
        Fraction(0),
    )


def _local_energy(tw: _Twists, u: EquivMapState, v: int, x: Point) -> Fraction:
    values = list(u.values)
    values[v] = x
    return sum(
        (_edge_energy(tw, u, k, values) for k in tw.base.incidence[v]), Fraction(0)
    )


def _neighbor_values(
    tw: _Twists, u: EquivMapState, v: int
) -> tuple[list[Point], list[Fraction]]:
    """Twisted neighbor values of v and their masses.

    Out-edges contribute rho(g_e) u(t), in-edges rho(g_e)^-1 u(s); a loop
    contributes both translates of u(v).
    """
    points, masses = [], []
    for k in tw.base.incidence[v]:
        e = tw.base.edges[k]
        if e.source == v:
            points.append(tw.apply(u.target, tw.forward[k], u.values[e.target]))
            masses.append(e.weight)
        if e.target == v:
            points.append(tw.apply(u.target, tw.backward[k], u.values[e.source]))
            masses.append(e.weight)
    return points, masses


def _relax(
    tw: _Twists, u: EquivMapState, v: int
) -> tuple[EquivMapState, Fraction, Fraction]:
    """One guarded relaxation at v.

    Returns the new state, the d^2 move taken, and the d^2 move refused by
    the energy guard (zero when the move was taken).
    """
    points, masses = _neighbor_values(tw, u, v)
    if not points:
        return u, Fraction(0), Fraction(0)
    old = u.values[v]
    candidate = u.target.round(u.target.center_of_mass(points, masses))
    moved = u.target.distance_sq(old, candidate)
    if _local_energy(tw, u, v, candidate) > _local_energy(tw, u, v, old):
        return u, Fraction(0), moved
    if moved == 0:
        return u, moved, Fraction(0)
    return u.with_value(v, candidate), moved, Fraction(0)


def vertex_relax(
    graph: AnyGraph, u: EquivMapState, v: int, rep: GroupRep | None = None
) -> EquivMapState:
    """Replace u(v) by the center of mass of its twisted neighbors.

    The move is taken only when it does not increase the energy.
    """
    _check_state(graph, u)
    if not 0 <= v < graph.n_vertices:
        raise ValidationError(f"unknown vertex {v}")
    if v in u.fixed:
        raise ValidationError(f"vertex {v} is a boundary vertex")
    return _relax(_Twists(graph, rep), u, v)[0]


def _sweep_until_stable(
    tw: _Twists, u: EquivMapState, tol: Fraction, max_sweeps: int
) -> EquivMapState:
    if tol <= 0:
        raise ValidationError(f"tol must be positive, got {tol}")
    free = [v for v in range(tw.base.n_vertices) if v not in u.fixed]
    history = [_total_energy(tw, u)]
    sweeps = 0
    residual = Fraction(0)
    reason = "max_sweeps"
    for sweep in range(1, max_sweeps + 1):
        residual = Fraction(0)
        refused = Fraction(0)
        for v in free:
            u, moved, rejected = _relax(tw, u, v)
            residual = max(residual, moved)
            refused = max(refused, rejected)
        history.append(_total_energy(tw, u))
        if residual < tol * tol:
            # a refused move of at least tol leaves a vertex stuck off its center
            reason = "converged" if refused < tol * tol else "stalled"
            break
        sweeps = sweep
        if sweep % 100 == 0:
            logger.debug(
                f"sweep {sweep}: residual {float(residual):.3e}, "
                f"energy {float(history[-1]):.6g}"
            )
    logger.info(
        f"relaxation stopped ({reason}) after {sweeps} sweep(s), "
        f"energy {float(history[-1]):.6g}"
    )
    return replace(
        u,
        residual=residual,
        sweeps=sweeps,
        reason=reason,
        energy_history=tuple(history),
    )


def solve_dirichlet(
    graph: WeightedGraph,
    boundary: Mapping[int, Point],
    tol: Fraction = DEFAULT_TOL,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
    target: NPCTarget | None = None,
) -> EquivMapState:
    """Energy minimizer with prescribed values on the boundary vertices.

    Interior vertices start at the value of the lowest boundary vertex.
    `sweeps` counts the sweeps that still moved some value by at least tol.
    """
    if isinstance(graph, VoltageGraph):
        raise ValidationError("the Dirichlet problem takes a plain weighted graph")
    if not boundary:
        raise ValidationError("boundary must be nonempty")
    if tol <= 0:
        raise ValidationError(f"tol must be positive, got {tol}")
    if graph.has_loops:
        raise ValidationError("self-loops are not allowed in the Dirichlet problem")
    for v in boundary:
        if not 0 <= v < graph.n_vertices:
            raise ValidationError(f"boundary vertex {v} is not a vertex")

    first = boundary[min(boundary)]
    target = target or target_for(first)
    values = [boundary.get(v, first) for v in range(graph.n_vertices)]
    u = make_state(values, target, frozenset(boundary))
    logger.debug(
        f"Dirichlet problem: {graph.n_vertices} vertices, "
        f"{len(boundary)} on the boundary, {target.kind.value} target"
    )
    return _sweep_until_stable(_Twists(graph, None), u, tol, max_sweeps)


def solve_equivariant(
    graph: VoltageGraph,
    rep: GroupRep,
    init: EquivMapState,
    tol: Fraction = DEFAULT_TOL,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
) -> tuple[EquivMapState, Fraction]:
    """Least-energy rho-equivariant map by relaxation from `init`."""
    _check_state(graph, init)
    if init.kind is not ETargetKind.BUILDING:
        raise UnsupportedError("equivariant maps take values in a building")
    if init.target.dim != rep.rank:
        raise ValidationError(
            f"representation of rank {rep.rank} acting on norms of "
            f"dimension {init.target.dim}"
        )
    state = _sweep_until_stable(
        _Twists(graph, rep), replace(init, fixed=frozenset()), tol, max_sweeps
    )
    return state, state.energy_history[-1]


def is_harmonic(
    graph: AnyGraph,
    u: EquivMapState,
    rep: GroupRep | None = None,
    tol: Fraction = DEFAULT_TOL,
) -> bool:
    """Every free value lies within tol of the center of mass of its neighbors."""
    _check_state(graph, u)
    tw = _Twists(graph, rep)
    for v in range(graph.n_vertices):
        if v in u.fixed:
            continue
        points, masses = _neighbor_values(tw, u, v)
        if not points:
            continue
        center = u.target.center_of_mass(points, masses)
        if u.target.distance_sq(u.values[v], center) > tol * tol:
            return False
    return True


def distance_field(u1: EquivMapState, u2: EquivMapState) -> tuple[Fraction, ...]:
    """Per-vertex d(u1(v), u2(v))^2."""
    if len(u1.values) != len(u2.values) or u1.kind is not u2.kind:
        raise ValidationError("maps of different shapes")
    return tuple(
        u1.target.distance_sq(a, b) for a, b in zip(u1.values, u2.values)
    )


# =============================================================================
# Characteristic data
# =============================================================================


@dataclass(frozen=True)
class CharacteristicData:
    """Per edge: log-norm increments, their symmetric functions and the
    polynomial prod (T - w_i), leading coefficient first."""

    increments: tuple[tuple[Fraction, ...], ...]
    sigma: tuple[tuple[Fraction, ...], ...]
    char_poly: tuple[tuple[Fraction, ...], ...]

    @property
    def length_sq(self) -> tuple[Fraction, ...]:
        return tuple(sum((w * w for w in ws), Fraction(0)) for ws in self.increments)


def _poly_from_roots(roots: Sequence[Fraction]) -> tuple[Fraction, ...]:
    coeffs = [Fraction(1)]
    for r in roots:
        shifted = [Fraction(0)] + coeffs
        coeffs = [a - r * b for a, b in zip(coeffs + [Fraction(0)], shifted)]
    return tuple(coeffs)


def _proportional(u: Vector, v: Vector) -> bool:
    pairs = [(a, b) for a, b in zip(u, v) if a != 0 or b != 0]
    if not pairs or any(a == 0 or b == 0 for a, b in pairs):
        return False
    ratio = pairs[0][0] / pairs[0][1]
    return all(a == ratio * b for a, b in pairs)


def log_norm_increments(
    graph: VoltageGraph,
    u: EquivMapState,
    frame: Sequence[Sequence[Sequence[Fraction]]],
    rep: GroupRep,
) -> CharacteristicData:
    """Increments of log ||f_i|| along every edge for a flat orthogonal frame.

    `frame[v]` lists the frame vectors at v. Along e = (s, t) the vectors at s
    must be proportional to rho(g_e) applied to those at t, and orthogonal
    for both u(s) and rho(g_e) u(t).
    """
    _check_state(graph, u)
    if u.kind is not ETargetKind.BUILDING:
        raise UnsupportedError("characteristic data needs norm-valued maps")
    if len(frame) != graph.n_vertices:
        raise ValidationError(
            f"frame given at {len(frame)} of {graph.n_vertices} vertices"
        )
    frame = [[as_vector(Fraction(c) for c in f) for f in fv] for fv in frame]
    for v, (fv, x) in enumerate(zip(frame, u.values)):
        if len(fv) != x.dim or not is_orthogonal(x, fv):
            raise ValidationError(f"frame is not orthogonal at vertex {v}")

    tw = _Twists(graph, rep)
    increments, sigma, polys = [], [], []
    for k, e in enumerate(tw.base.edges):
        g = tw.forward[k]
        head = tw.apply(u.target, g, u.values[e.target])
        tail_frame = frame[e.source]
        moved = frame[e.target]
        if g is not None:
            moved = [matvec(g, f) for f in moved]
        if not all(_proportional(a, b) for a, b in zip(tail_frame, moved)):
            raise ValidationError(f"frame is not flat along edge {k}")
        if not is_orthogonal(head, tail_frame):
            raise ValidationError(f"frame is not orthogonal at vertex {e.target}")
        ws = tuple(
            sorted(
                norm_eval(head, f) - norm_eval(u.values[e.source], f)
                for f in tail_frame
            )
        )
        poly = _poly_from_roots(ws)
        increments.append(ws)
        polys.append(poly)
        sigma.append(tuple((-1) ** i * c for i, c in enumerate(poly) if i > 0))
    return CharacteristicData(tuple(increments), tuple(sigma), tuple(polys))


def subdivide_edge(
    graph: AnyGraph, u: EquivMapState, k: int, rep: GroupRep | None = None
) -> tuple[AnyGraph, EquivMapState]:
    """Split edge k at a new last vertex placed at the midpoint.

    Both halves get weight 2w, so the energy is unchanged. For voltage graphs
    the first half is unlabeled and the second keeps the label.
    """
    _check_state(graph, u)
    base = graph.graph if isinstance(graph, VoltageGraph) else graph
    if not 0 <= k < len(base.edges):
        raise ValidationError(f"unknown edge {k}")
    e = base.edges[k]
    new = base.n_vertices
    tw = _Twists(graph, rep)
    head = tw.apply(u.target, tw.forward[k], u.values[e.target])
    mid = u.target.midpoint(u.values[e.source], head)

    edges = list(base.edges)
    edges[k] = Edge(e.source, new, 2 * e.weight)
    edges.append(Edge(new, e.target, 2 * e.weight))
    new_base = WeightedGraph(new + 1, tuple(edges))
    state = replace(u, values=u.values + (mid,))
    if isinstance(graph, VoltageGraph):
        labels = list(graph.labels)
        labels.append(labels[k])
        labels[k] = ()
        return VoltageGraph(new_base, tuple(labels)), state
    return new_base, state

