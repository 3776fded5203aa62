"""
Tests for nahkit.models module.

Tests model file parsing, error paths and canonical dumps.
"""

import json
from fractions import Fraction

import pytest

from nahkit.exceptions import ModelError
from nahkit.groups import GroupRep, free_abelian_rank2
from nahkit.linalg import as_matrix
from nahkit.models import (
    GraphModel,
    MatrixModel,
    NormModel,
    RepModel,
    ResiduesModel,
    VoltageGraphModel,
    dump_model,
    norm_document,
    parse_model,
    rep_document,
    validate_model,
)
from nahkit.norms import norms_equal

NORM = {
    "kind": "norm",
    "schema_version": 1,
    "basis": [["1", "0"], ["1", "1"]],
    "weights": ["0", "1/2"],
}

REP = {
    "kind": "rep",
    "schema_version": 1,
    "presentation": {"generators": 2, "relators": ["1,2,-1,-2"]},
    "matrices": [[["1", "1"], ["0", "1"]], [["1", "3"], ["0", "1"]]],
}


def with_changes(document, **changes):
    out = dict(document)
    out.update(changes)
    return out


class TestParseModel:
    """Tests for reading model files."""

    def test_norm(self, write_model):
        """A norm file converts to a DiagNorm."""
        model = parse_model(write_model("n.json", NORM))
        assert isinstance(model, NormModel)
        n = model.to_domain(3)
        assert n.place.p == 3
        assert n.weights == (0, Fraction(1, 2))

    def test_norm_own_place(self, write_model):
        """A p in the file beats the default place."""
        model = parse_model(write_model("n.json", with_changes(NORM, p=5)))
        assert model.to_domain(2).place.p == 5

    def test_missing_file(self, temp_dir):
        with pytest.raises(ModelError, match="model file not found") as excinfo:
            parse_model(temp_dir / "absent.json")
        assert excinfo.value.path == ""

    def test_invalid_json(self, temp_dir):
        path = temp_dir / "broken.json"
        path.write_text("{not json")
        with pytest.raises(ModelError, match="invalid JSON in") as excinfo:
            parse_model(path)
        assert excinfo.value.path == ""

    def test_unknown_kind(self, write_model):
        """The kind tag selects the schema."""
        with pytest.raises(ModelError) as excinfo:
            parse_model(write_model("x.json", with_changes(NORM, kind="lattice")))
        assert excinfo.value.path == "kind"

    def test_missing_kind(self, write_model):
        document = {k: v for k, v in NORM.items() if k != "kind"}
        with pytest.raises(ModelError) as excinfo:
            parse_model(write_model("x.json", document))
        assert excinfo.value.path == "kind"

    def test_float_weight(self, write_model):
        """Decimal numbers are not exact rationals."""
        document = with_changes(NORM, weights=["0.5", "0"])
        with pytest.raises(ModelError, match="invalid rational") as excinfo:
            parse_model(write_model("x.json", document))
        assert excinfo.value.path == "weights.0"

    def test_json_number_weight(self, write_model):
        """JSON floats are refused as well."""
        document = with_changes(NORM, weights=[0.5, 0])
        with pytest.raises(ModelError) as excinfo:
            parse_model(write_model("x.json", document))
        assert excinfo.value.path == "weights.0"

    def test_singular_basis(self, write_model):
        """Domain checks run while parsing."""
        document = with_changes(NORM, basis=[["1", "2"], ["2", "4"]])
        with pytest.raises(ModelError, match="basis singular") as excinfo:
            parse_model(write_model("x.json", document))
        assert excinfo.value.path == "basis"

    def test_schema_version(self, write_model):
        document = with_changes(NORM, schema_version=2)
        with pytest.raises(ModelError, match="unsupported schema_version") as excinfo:
            parse_model(write_model("x.json", document))
        assert excinfo.value.path == "schema_version"

    def test_extra_field(self, write_model):
        """Unknown keys are refused."""
        document = with_changes(NORM, colour="blue")
        with pytest.raises(ModelError) as excinfo:
            parse_model(write_model("x.json", document))
        assert excinfo.value.path == "colour"

    def test_error_message_carries_path(self):
        """The path is prefixed to the reason."""
        err = ModelError("weights.0", "invalid rational '0.5'")
        assert str(err) == "weights.0: invalid rational '0.5'"


class TestRepModel:
    """Tests for representation documents."""

    def test_rep(self, write_model):
        """Relators may be written as strings."""
        model = parse_model(write_model("rep.json", REP))
        assert isinstance(model, RepModel)
        rep = model.to_domain()
        assert rep.presentation == free_abelian_rank2()
        assert rep.rank == 2

    def test_relator_violated(self, write_model):
        """Non-commuting matrices for Z^2 are reported at matrices."""
        document = with_changes(
            REP, matrices=[[["1", "1"], ["0", "1"]], [["1", "0"], ["1", "1"]]]
        )
        with pytest.raises(ModelError) as excinfo:
            parse_model(write_model("rep.json", document))
        assert excinfo.value.path == "matrices"

    def test_field_entry_needs_minpoly(self, write_model):
        """List entries are number field elements and need a field."""
        document = with_changes(
            REP,
            presentation={"generators": 1},
            matrices=[[[["0", "1"]]]],
        )
        with pytest.raises(ModelError, match="without minpoly") as excinfo:
            parse_model(write_model("rep.json", document))
        assert excinfo.value.path == "matrices.0.0.0"

    def test_field_entries(self, write_model):
        """[[i]] over Q(i)."""
        document = with_changes(
            REP,
            presentation={"generators": 1},
            matrices=[[[["0", "1"]]]],
            minpoly=["1", "0", "1"],
        )
        rep = parse_model(write_model("rep.json", document)).to_domain()
        assert not rep.is_rational

    def test_rep_document(self):
        """Domain representations serialize to valid rep documents."""
        rep = GroupRep(
            free_abelian_rank2(),
            (as_matrix([[1, 1], [0, 1]]), as_matrix([[1, Fraction(1, 2)], [0, 1]])),
        )
        data = json.loads(dump_model(rep_document(rep)))
        assert data["kind"] == "rep"
        assert data["matrices"][1] == [["1", "1/2"], ["0", "1"]]
        assert validate_model(data).to_domain() == rep


class TestGraphModels:
    """Tests for graph and voltage graph documents."""

    def test_graph_boundary(self, write_model):
        """Boundary values are vectors or norms keyed by vertex."""
        document = {
            "kind": "graph",
            "vertices": 3,
            "edges": [[0, 1, "1"], [1, 2, "2"]],
            "boundary": {"0": ["0"], "2": ["2"]},
        }
        model = parse_model(write_model("g.json", document))
        assert isinstance(model, GraphModel)
        assert model.boundary_values(2) == {0: (Fraction(0),), 2: (Fraction(2),)}
        assert model.graph().edges[1].weight == 2

    def test_graph_norm_boundary(self, write_model):
        document = {
            "kind": "graph",
            "vertices": 2,
            "edges": [[0, 1, "1"]],
            "boundary": {"0": {k: NORM[k] for k in ("basis", "weights")}},
        }
        model = parse_model(write_model("g.json", document))
        value = model.boundary_values(2)[0]
        expected = NormModel.model_validate(NORM).to_domain(2)
        assert norms_equal(value, expected)

    def test_graph_bad_weight(self, write_model):
        """Graph checks are reported at edges."""
        document = {"kind": "graph", "vertices": 2, "edges": [[0, 1, "0"]]}
        with pytest.raises(ModelError, match="nonpositive") as excinfo:
            parse_model(write_model("g.json", document))
        assert excinfo.value.path == "edges"

    def test_voltage_rep_path(self, write_model):
        """The representation may live in a sibling file."""
        write_model("rep.json", REP)
        document = {
            "kind": "voltage-graph",
            "vertices": 1,
            "edges": [[0, 0, "1"], [0, 0, "1"]],
            "labels": {"0": [1], "1": "2"},
            "rep": "rep.json",
        }
        path = write_model("vg.json", document)
        model = parse_model(path)
        assert isinstance(model, VoltageGraphModel)
        assert model.voltage_graph().labels == ((1,), (2,))
        assert model.representation(path.parent).rank == 2

    def test_voltage_rep_inline(self, write_model):
        """Unlabeled edges carry the empty word."""
        document = {
            "kind": "voltage-graph",
            "vertices": 2,
            "edges": [[0, 1, "1"], [1, 0, "1"]],
            "labels": {"1": [1]},
            "rep": {
                k: v for k, v in REP.items() if k not in ("kind", "schema_version")
            },
        }
        model = parse_model(write_model("vg.json", document))
        assert model.voltage_graph().labels == ((), (1,))

    def test_voltage_rep_wrong_kind(self, write_model):
        write_model("n.json", NORM)
        document = {
            "kind": "voltage-graph",
            "vertices": 1,
            "edges": [],
            "rep": "n.json",
        }
        with pytest.raises(ModelError, match="not a representation file"):
            parse_model(write_model("vg.json", document))

    def test_label_for_missing_edge(self, write_model):
        write_model("rep.json", REP)
        document = {
            "kind": "voltage-graph",
            "vertices": 1,
            "edges": [[0, 0, "1"]],
            "labels": {"5": [1]},
            "rep": "rep.json",
        }
        with pytest.raises(ModelError) as excinfo:
            parse_model(write_model("vg.json", document))
        assert excinfo.value.path == "labels.5"


class TestOtherKinds:
    """Tests for matrix and residue documents."""

    def test_ragged_matrix(self, write_model):
        document = {"kind": "matrix", "matrix": [["1", "2"], ["3"]]}
        with pytest.raises(ModelError, match="different lengths"):
            parse_model(write_model("m.json", document))

    def test_matrix(self, write_model):
        document = {"kind": "matrix", "matrix": [["0", "-1"], ["1", "0"]]}
        model = parse_model(write_model("m.json", document))
        assert isinstance(model, MatrixModel)
        assert model.to_domain() == as_matrix([[0, -1], [1, 0]])

    def test_residues(self):
        model = validate_model({"kind": "residues", "residues": ["1/2", "0"], "n": 2})
        assert isinstance(model, ResiduesModel)
        assert model.residues == [Fraction(1, 2), Fraction(0)]


class TestDump:
    """Tests for canonical output."""

    def test_dump_is_canonical(self, make_norm):
        """Sorted keys, two-space indent, trailing newline."""
        text = dump_model(norm_document(make_norm([1, Fraction(-1, 3)], p=3)))
        assert text.endswith("}\n")
        data = json.loads(text)
        assert list(data) == sorted(data)
        assert data["weights"] == ["1", "-1/3"]
        assert data["p"] == 3
        assert text == json.dumps(data, sort_keys=True, indent=2) + "\n"

    def test_dump_parses_back(self, make_norm, temp_dir):
        """A dumped norm reads back as the same norm."""
        n = make_norm([2, 0], [[1, 1], [0, 1]], p=5)
        path = temp_dir / "n.json"
        path.write_text(dump_model(norm_document(n)))
        assert norms_equal(parse_model(path).to_domain(2), n)
