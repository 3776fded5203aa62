"""Model file schemas.

Every input document is a JSON object with a `kind` tag and a
`schema_version`. Numbers are exact: rationals are strings "n" or "n/d",
number field elements are lists of rational strings (coefficients of
1, theta, theta^2, ...). Schema errors become ModelError with a dotted path
into the document.
"""

import json
from fractions import Fraction
from pathlib import Path
from typing import Annotated, Any, Literal, Union

from pydantic import (
    BaseModel,
    BeforeValidator,
    Field,
    PlainSerializer,
    TypeAdapter,
    field_validator,
)
from pydantic import ValidationError as PydanticValidationError

from .consts import DEFAULT_PLACE, SCHEMA_VERSION
from .exceptions import ModelError, NahError
from .groups import GroupPresentation, GroupRep
from .harmonic import VoltageGraph, WeightedGraph
from .linalg import Matrix
from .norms import DiagNorm
from .sanitize import format_rational, parse_rational, parse_word
from .scalars import NumberField, NumberFieldElement, PrimePlace


def parse_entry(value: Any) -> Fraction | tuple[Fraction, ...]:
    """A matrix entry: a rational, or a list of number field coefficients."""
    if isinstance(value, (list, tuple)):
        if not value:
            raise ValueError("number field entry needs at least one coefficient")
        return tuple(parse_rational(c) for c in value)
    return parse_rational(value)


def format_entry(value: Any) -> str | list[str]:
    if isinstance(value, NumberFieldElement):
        value = value.coeffs
    if isinstance(value, tuple):
        return [format_rational(c) for c in value]
    return format_rational(value)


Rational = Annotated[
    Fraction,
    BeforeValidator(parse_rational),
    PlainSerializer(format_rational, return_type=str),
]
Entry = Annotated[
    Any,
    BeforeValidator(parse_entry),
    PlainSerializer(format_entry),
]
WordField = Annotated[
    tuple[int, ...],
    BeforeValidator(parse_word),
    PlainSerializer(list, return_type=list),
]


class _Model(BaseModel):
    model_config = {
        "arbitrary_types_allowed": True,
        "extra": "forbid",
        "populate_by_name": True,
    }


class _Document(_Model):
    schema_version: int = SCHEMA_VERSION

    @field_validator("schema_version")
    @classmethod
    def schema_version_supported(cls, v: int) -> int:
        if v != SCHEMA_VERSION:
            raise ValueError(
                f"unsupported schema_version {v} (expected {SCHEMA_VERSION})"
            )
        return v


def _domain(path: str, build, *args, **kwargs):
    """Run a constructor, reporting library errors at `path`."""
    try:
        return build(*args, **kwargs)
    except ModelError:
        raise
    except NahError as e:
        raise ModelError(path, str(e)) from e


def _join(prefix: str, name: str) -> str:
    return f"{prefix}.{name}" if prefix else name


# =============================================================================
# Norms and points
# =============================================================================


class NormPayload(_Model):
    p: int | None = None
    basis: list[list[Rational]]
    weights: list[Rational]

    def to_domain(self, default_place: int, prefix: str = "") -> DiagNorm:
        place = _domain(_join(prefix, "p"), PrimePlace, self.p or default_place)
        return _domain(
            _join(prefix, "basis"), DiagNorm, place, self.basis, tuple(self.weights)
        )

    @classmethod
    def from_domain(cls, n: DiagNorm) -> "NormPayload":
        return cls(
            p=n.place.p,
            basis=[list(row) for row in n.basis],
            weights=list(n.weights),
        )


class NormModel(NormPayload, _Document):
    kind: Literal["norm"]


Point = Union[NormPayload, list[Rational]]


def point_to_domain(point: Point, default_place: int, prefix: str):
    if isinstance(point, NormPayload):
        return point.to_domain(default_place, prefix)
    return tuple(point)


def point_to_payload(point) -> Any:
    if isinstance(point, DiagNorm):
        return NormPayload.from_domain(point).model_dump(mode="json")
    return [format_rational(c) for c in point]


# =============================================================================
# Representations
# =============================================================================


class PresentationPayload(_Model):
    generators: int
    relators: list[WordField] = Field(default_factory=list)

    def to_domain(self, prefix: str = "") -> GroupPresentation:
        return _domain(
            _join(prefix, "presentation"),
            GroupPresentation,
            self.generators,
            tuple(self.relators),
        )


def _field(minpoly: list[Fraction] | None, prefix: str) -> NumberField | None:
    if minpoly is None:
        return None
    return _domain(_join(prefix, "minpoly"), NumberField, minpoly)


def _matrix(
    rows: list[list[Any]], field: NumberField | None, path: str
) -> Matrix:
    out = []
    for i, row in enumerate(rows):
        entries = []
        for j, x in enumerate(row):
            if isinstance(x, tuple):
                if field is None:
                    raise ModelError(
                        f"{path}.{i}.{j}", "number field entry without minpoly"
                    )
                x = _domain(f"{path}.{i}.{j}", field.element, x)
            entries.append(x)
        out.append(tuple(entries))
    return tuple(out)


class RepPayload(_Model):
    presentation: PresentationPayload
    matrices: list[list[list[Entry]]]
    minpoly: list[Rational] | None = None
    rank: int | None = None

    def to_domain(self, prefix: str = "") -> GroupRep:
        pres = self.presentation.to_domain(prefix)
        field = _field(self.minpoly, prefix)
        matrices = tuple(
            _matrix(m, field, _join(prefix, f"matrices.{g}"))
            for g, m in enumerate(self.matrices)
        )
        return _domain(
            _join(prefix, "matrices"),
            GroupRep,
            pres,
            matrices,
            field,
            rank_hint=self.rank,
        )

    @classmethod
    def from_domain(cls, rep: GroupRep) -> "RepPayload":
        return cls(
            presentation=PresentationPayload(
                generators=rep.generators,
                relators=list(rep.presentation.relators),
            ),
            matrices=[
                [[_entry_value(x) for x in row] for row in m] for m in rep.matrices
            ],
            minpoly=list(rep.number_field.minpoly) if rep.number_field else None,
            rank=rep.rank,
        )


def _entry_value(x: Any) -> Any:
    if isinstance(x, NumberFieldElement):
        return x.to_fraction() if x.is_rational else x.coeffs
    return x


class RepModel(RepPayload, _Document):
    kind: Literal["rep"]


class MatrixModel(_Document):
    kind: Literal["matrix"]
    matrix: list[list[Entry]]
    minpoly: list[Rational] | None = None

    def to_domain(self) -> Matrix:
        m = _matrix(self.matrix, _field(self.minpoly, ""), "matrix")
        if any(len(row) != len(m[0]) for row in m):
            raise ModelError("matrix", "rows of different lengths")
        return m


class CocycleModel(_Document):
    kind: Literal["cocycle"]
    values: list[list[list[Entry]]]
    minpoly: list[Rational] | None = None

    def to_domain(self, rep: GroupRep) -> tuple[Matrix, ...]:
        field = _field(self.minpoly, "") or rep.number_field
        if self.minpoly is not None and field != rep.number_field:
            raise ModelError(
                "minpoly", "cocycle and representation use different fields"
            )
        return tuple(
            _matrix(m, field, f"values.{i}") for i, m in enumerate(self.values)
        )


class ResiduesModel(_Document):
    kind: Literal["residues"]
    residues: list[Rational]
    n: int | None = None


# =============================================================================
# Graphs
# =============================================================================


class _GraphBase(_Document):
    vertices: int
    edges: list[tuple[int, int, Rational]]

    def graph(self) -> WeightedGraph:
        return _domain("edges", WeightedGraph, self.vertices, tuple(self.edges))


class GraphModel(_GraphBase):
    kind: Literal["graph"]
    boundary: dict[int, Point] = Field(default_factory=dict)

    def boundary_values(self, default_place: int) -> dict[int, Any]:
        return {
            v: point_to_domain(x, default_place, f"boundary.{v}")
            for v, x in sorted(self.boundary.items())
        }


class VoltageGraphModel(_GraphBase):
    kind: Literal["voltage-graph"]
    labels: dict[int, WordField] = Field(default_factory=dict)
    rep: Union[RepPayload, str]
    p: int | None = None
    init: dict[int, NormPayload] = Field(default_factory=dict)

    def voltage_graph(self) -> VoltageGraph:
        graph = self.graph()
        for k in self.labels:
            if not 0 <= k < len(graph.edges):
                raise ModelError(f"labels.{k}", f"no edge with index {k}")
        labels = tuple(self.labels.get(k, ()) for k in range(len(graph.edges)))
        return _domain("labels", VoltageGraph, graph, labels)

    def representation(self, base_dir: Path) -> GroupRep:
        if isinstance(self.rep, str):
            model = parse_model(base_dir / self.rep)
            if not isinstance(model, RepModel):
                raise ModelError("rep", f"{self.rep} is not a representation file")
            return model.to_domain()
        return self.rep.to_domain("rep")


ModelFile = Annotated[
    Union[
        NormModel,
        GraphModel,
        VoltageGraphModel,
        RepModel,
        MatrixModel,
        CocycleModel,
        ResiduesModel,
    ],
    Field(discriminator="kind"),
]

_adapter = TypeAdapter(ModelFile)


def _error_path(loc: tuple) -> str:
    """Dotted location with the discriminator tag removed."""
    return ".".join(str(part) for part in loc[1:])


def _error_reason(error: dict) -> str:
    message = error["msg"]
    for prefix in ("Value error, ", "Assertion failed, "):
        if message.startswith(prefix):
            return message[len(prefix) :]
    return message


def validate_model(data: Any):
    """Validate an already decoded document."""
    try:
        return _adapter.validate_python(data)
    except PydanticValidationError as e:
        first = e.errors()[0]
        loc = tuple(first["loc"])
        if first["type"].startswith("union_tag"):
            raise ModelError("kind", _error_reason(first)) from e
        raise ModelError(_error_path(loc), _error_reason(first)) from e


def parse_model(path: str | Path):
    """Read, decode and validate a model file.

    Domain checks (singular basis, non-prime p, relators, minimal polynomial)
    run here too, so a returned model always converts cleanly.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ModelError("", f"model file not found: {path}")
    except (OSError, UnicodeDecodeError) as e:
        raise ModelError("", f"cannot read model file {path}: {e}")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ModelError("", f"invalid JSON in {path}: {e}")

    model = validate_model(data)
    check_model(model, path.parent)
    return model


def check_model(model, base_dir: Path) -> None:
    if isinstance(model, NormModel):
        model.to_domain(DEFAULT_PLACE)
    elif isinstance(model, RepModel):
        model.to_domain()
    elif isinstance(model, MatrixModel):
        model.to_domain()
    elif isinstance(model, GraphModel):
        model.graph()
    elif isinstance(model, VoltageGraphModel):
        model.voltage_graph()
        model.representation(base_dir)
    elif isinstance(model, CocycleModel):
        field = _field(model.minpoly, "")
        for i, m in enumerate(model.values):
            _matrix(m, field, f"values.{i}")


def dump_model(model) -> str:
    """Canonical text: sorted keys, two-space indent, trailing newline."""
    data = model.model_dump(mode="json", exclude_none=True)
    return json.dumps(data, sort_keys=True, indent=2) + "\n"


def norm_document(n: DiagNorm) -> NormModel:
    payload = NormPayload.from_domain(n)
    return NormModel(kind="norm", **payload.model_dump())


def rep_document(rep: GroupRep) -> RepModel:
    payload = RepPayload.from_domain(rep)
    return RepModel(kind="rep", **payload.model_dump())
