"""
Tests for nahkit.cli module.

Runs subcommands end to end on model files written to a temporary directory.
"""

import json
import os
import subprocess
import sys

import pytest

from nahkit import cli
from nahkit.cli import COMMANDS, error_payload, parse_args, run
from nahkit.consts import EXIT_INTERNAL, EXIT_INVALID, EXIT_OK
from nahkit.exceptions import InvariantViolation, ModelError, ValidationError

STD = {"kind": "norm", "basis": [["1", "0"], ["0", "1"]], "weights": ["0", "0"]}
FAR = {"kind": "norm", "basis": [["1", "0"], ["0", "1"]], "weights": ["3", "1"]}
JORDAN = [["1", "1"], ["0", "1"]]
ROTATION = [["0", "-1"], ["1", "0"]]
IDENTITY = [["1", "0"], ["0", "1"]]


def rep_doc(generators, matrices, relators=()):
    return {
        "kind": "rep",
        "presentation": {"generators": generators, "relators": list(relators)},
        "matrices": matrices,
    }


@pytest.fixture(autouse=True)
def isolated_cwd(temp_dir, monkeypatch):
    """Run from an empty directory so no nahkit.yaml is picked up."""
    monkeypatch.chdir(temp_dir)


@pytest.fixture
def invoke(capsys):
    """Run the CLI; returns the exit code, parsed stdout and parsed stderr."""

    def _invoke(*argv):
        code = run([str(a) for a in argv])
        captured = capsys.readouterr()
        out = json.loads(captured.out) if captured.out else None
        err = json.loads(captured.err.splitlines()[-1]) if captured.err else None
        return code, out, err

    return _invoke


class TestParseArgs:
    """Tests for argument parsing."""

    def test_returns_dict(self):
        args = parse_args(["norm", "dist", "a.json", "b.json", "-p", "3"])
        assert args["group"] == "norm"
        assert args["action"] == "dist"
        assert args["inputs"] == ["a.json", "b.json"]
        assert args["place"] == 3

    def test_kms_has_no_action(self):
        args = parse_args(["kms", "--a", "1", "--alpha", "0", "1", "--lam", "1", "0"])
        assert args["action"] is None
        assert args["alpha"] == ["0", "1"]

    def test_every_command_registered(self):
        """Each parser leaf has a handler."""
        assert ("deform", "lift") in COMMANDS
        assert ("kms", None) in COMMANDS
        assert len(COMMANDS) == 16

    def test_missing_subcommand(self):
        with pytest.raises(SystemExit):
            parse_args(["norm"])


class TestNormCommands:
    """Tests for the norm subcommands."""

    def test_dist(self, invoke, write_model):
        code, out, _ = invoke(
            "norm", "dist", write_model("a.json", STD), write_model("b.json", FAR)
        )
        assert code == EXIT_OK
        assert out["d2_sq"] == "10"
        assert out["d_inf"] == "3"
        assert out["d2_approx"] == pytest.approx(10**0.5)

    def test_spectrum(self, invoke, write_model):
        """Relative spectrum, decreasing."""
        code, out, _ = invoke(
            "norm", "spectrum", write_model("a.json", STD), write_model("b.json", FAR)
        )
        assert code == EXIT_OK
        assert out["lambdas"] == ["-1", "-3"]

    def test_com(self, invoke, write_model):
        """Two norms in one apartment: exact barycenter."""
        far = dict(STD, weights=["2", "0"])
        code, out, _ = invoke(
            "norm", "com", write_model("a.json", STD), write_model("b.json", far)
        )
        assert code == EXIT_OK
        assert out["exact"] is True
        assert out["reason"] == "exact"
        assert out["objective"] == "2"
        assert out["center"]["p"] == 2

    def test_com_masses(self, invoke, write_model):
        far = dict(STD, weights=["2", "0"])
        code, out, _ = invoke(
            "norm",
            "com",
            write_model("a.json", STD),
            write_model("b.json", far),
            "--masses",
            "1,3",
        )
        assert code == EXIT_OK
        assert out["objective"] == "3"

    def test_com_bad_masses(self, invoke, write_model):
        code, _, err = invoke(
            "norm", "com", write_model("a.json", STD), "--masses", "0.5"
        )
        assert code == EXIT_INVALID
        assert "--masses" in err["message"]

    def test_quotient(self, invoke, write_model):
        sub = {"kind": "matrix", "matrix": [["1", "0"]]}
        code, out, _ = invoke(
            "norm", "quotient", write_model("a.json", STD), write_model("w.json", sub)
        )
        assert code == EXIT_OK
        assert out["norm"]["weights"] == ["0"]

    def test_wedge(self, invoke, write_model):
        code, out, _ = invoke("norm", "wedge", write_model("b.json", FAR), "-r", "2")
        assert code == EXIT_OK
        assert out["degree"] == 2
        assert out["norm"]["weights"] == ["4"]

    def test_place_flag(self, invoke, write_model):
        """Norm files without p take the place from the command line."""
        code, out, _ = invoke(
            "norm", "wedge", write_model("a.json", STD), "-r", "1", "-p", "5"
        )
        assert code == EXIT_OK
        assert out["norm"]["p"] == 5

    def test_text_format(self, capsys, write_model):
        """--format text renders the key/value listing."""
        code = run(
            [
                "norm",
                "dist",
                str(write_model("a.json", STD)),
                str(write_model("b.json", FAR)),
                "--format",
                "text",
            ]
        )
        lines = capsys.readouterr().out.splitlines()
        assert code == EXIT_OK
        assert lines[0] == "norm dist"
        assert "  d2_sq      10" in lines


class TestHarmonicCommand:
    """Tests for harmonic solve."""

    def test_dirichlet(self, invoke, write_model):
        document = {
            "kind": "graph",
            "vertices": 3,
            "edges": [[0, 1, "1"], [1, 2, "1"]],
            "boundary": {"0": ["0"], "2": ["2"]},
        }
        code, out, _ = invoke("harmonic", "solve", write_model("g.json", document))
        assert code == EXIT_OK
        assert out["kind"] == "euclidean"
        assert out["values"] == [["0"], ["1"], ["2"]]
        assert out["energy"] == "2"
        assert out["reason"] == "converged"
        assert out["sweeps"] == 1

    def test_equivariant(self, invoke, write_model):
        """One loop labeled [[2]] starting from the standard norm."""
        document = {
            "kind": "voltage-graph",
            "vertices": 1,
            "edges": [[0, 0, "1"]],
            "labels": {"0": [1]},
            "rep": {"presentation": {"generators": 1}, "matrices": [[["2"]]]},
        }
        code, out, _ = invoke("harmonic", "solve", write_model("vg.json", document))
        assert code == EXIT_OK
        assert out["kind"] == "building"
        assert out["energy"] == "1"
        assert out["energy_approx"] == 1.0

    def test_empty_boundary(self, invoke, write_model):
        document = {"kind": "graph", "vertices": 1, "edges": []}
        code, _, err = invoke("harmonic", "solve", write_model("g.json", document))
        assert code == EXIT_INVALID
        assert err["path"] == "boundary"


class TestRepCommands:
    """Tests for the rep subcommands."""

    def test_weightfilt_zero(self, invoke, write_model):
        """N = 0 is pure of weight 0."""
        doc = {"kind": "matrix", "matrix": [["0", "0"], ["0", "0"]]}
        code, out, _ = invoke("rep", "weightfilt", write_model("n.json", doc))
        assert code == EXIT_OK
        assert out["gr_dims"] == {"0": 2}

    def test_weightfilt_batch(self, invoke, write_model):
        """Several inputs give results in input order."""
        zero = {"kind": "matrix", "matrix": [["0", "0"], ["0", "0"]]}
        block = {"kind": "matrix", "matrix": [["0", "1"], ["0", "0"]]}
        code, out, _ = invoke(
            "rep",
            "weightfilt",
            write_model("a.json", block),
            write_model("b.json", zero),
        )
        assert code == EXIT_OK
        assert [r["gr_dims"] for r in out["results"]] == [
            {"-1": 1, "1": 1},
            {"0": 2},
        ]

    def test_batch_failure(self, invoke, write_model, temp_dir):
        """A failing input fails the batch and is named in the error."""
        zero = {"kind": "matrix", "matrix": [["0", "0"], ["0", "0"]]}
        missing = temp_dir / "missing.json"
        code, out, err = invoke(
            "rep", "weightfilt", write_model("a.json", zero), missing
        )
        assert code == EXIT_INVALID
        assert out is None
        assert err["error"] == "ModelError"
        assert err["input"] == str(missing)

    def test_ss(self, invoke, write_model):
        code, out, _ = invoke("rep", "ss", write_model("r.json", rep_doc(1, [JORDAN])))
        assert code == EXIT_OK
        assert out["rep"]["matrices"] == [IDENTITY]

    def test_qu(self, invoke, write_model):
        """The quarter turn needs the fourth power."""
        path = write_model("r.json", rep_doc(1, [ROTATION]))
        code, out, _ = invoke("rep", "qu", path)
        assert code == EXIT_OK
        assert out == {"exponent": 4, "loops": ["1"], "orders": [4]}

    def test_qu_loops_echoed(self, invoke, write_model):
        """Loops are echoed in the comma-separated word form."""
        path = write_model("r.json", rep_doc(1, [ROTATION]))
        code, out, _ = invoke("rep", "qu", path, "--loops", "1,1")
        assert code == EXIT_OK
        assert out == {"exponent": 2, "loops": ["1,1"], "orders": [2]}

    def test_charb(self, invoke, write_model):
        path = write_model("r.json", rep_doc(1, [ROTATION]))
        code, out, _ = invoke("rep", "charb", path, "--word", "1,1")
        assert code == EXIT_OK
        assert out["word"] == "1,1"
        assert out["charpoly"] == ["1", "2", "1"]

    def test_grpsi(self, invoke, write_model):
        """A single Jordan block becomes trivial."""
        path = write_model("r.json", rep_doc(1, [JORDAN]))
        code, out, _ = invoke("rep", "grpsi", path, "--gamma", "1")
        assert code == EXIT_OK
        assert out["gamma"] == "1"
        assert out["rep"]["matrices"] == [IDENTITY]

    def test_residues(self, invoke, write_model):
        doc = {"kind": "residues", "residues": ["-1/2", "0"]}
        code, out, _ = invoke("rep", "residues", write_model("res.json", doc), "--n", 2)
        assert code == EXIT_OK
        assert out["roots"] == ["1/2", "0"]
        assert out["orders"] == [2, 1]
        assert out["quasiunipotent"] is True

    def test_lattice(self, invoke, write_model):
        path = write_model("r.json", rep_doc(2, [JORDAN, JORDAN], ["1,2,-1,-2"]))
        code, out, _ = invoke("rep", "lattice", path)
        assert code == EXIT_OK
        assert out["p"] == 2
        assert len(out["lattice"]) == 2

    def test_wrong_kind(self, invoke, write_model):
        """A norm file is not a representation."""
        code, _, err = invoke("rep", "ss", write_model("n.json", STD))
        assert code == EXIT_INVALID
        assert err["path"] == "kind"
        assert err["message"] == "expected rep, got norm"


class TestDeformCommands:
    """Tests for the deform subcommands."""

    def test_tangent_free_group(self, invoke, write_model):
        """Every pair of 2x2 matrices is a cocycle on F_2."""
        path = write_model("r.json", rep_doc(2, [JORDAN, ROTATION]))
        code, out, _ = invoke("deform", "tangent", path)
        assert code == EXIT_OK
        assert out["dimZ1"] == 8
        assert out["dimH1"] == out["dimZ1"] - out["dimB1"]

    def test_lift_obstructed(self, invoke, write_model):
        """E12 and E21 on trivial Z^2 are obstructed at the second order."""
        rep = write_model(
            "r.json", rep_doc(2, [IDENTITY, IDENTITY], ["1,2,-1,-2"])
        )
        values = [[["0", "1"], ["0", "0"]], [["0", "0"], ["1", "0"]]]
        cocycle = write_model("c.json", {"kind": "cocycle", "values": values})
        code, out, _ = invoke("deform", "lift", rep, cocycle, "-k", 3)
        assert code == EXIT_OK
        assert out["dimZ1"] == 8
        assert out["lift"]["status"] == "obstructed"
        assert out["lift"]["order"] == 2
        assert out["lift"]["residuals"] == [[["1", "0"], ["0", "-1"]]]


class TestKMSCommand:
    """Tests for kms."""

    def test_forward(self, invoke):
        """a = 0, alpha = 1, lambda = i gives p = 0, e = 2."""
        code, out, _ = invoke("kms", "--a", "0", "--alpha", "1", "0", "--lam", "0", "1")
        assert code == EXIT_OK
        assert out["p"] == "0"
        assert out["e"] == ["2", "0"]
        assert out["e_approx"] == pytest.approx([2.0, 0.0])

    def test_inverse(self, invoke):
        code, out, _ = invoke(
            "kms", "--a", "0", "--alpha", "2", "0", "--lam", "0", "1", "--inverse"
        )
        assert code == EXIT_OK
        assert out == {"a": "0", "alpha": ["1", "0"]}

    def test_bad_rational(self, invoke):
        code, _, err = invoke("kms", "--a", "x", "--alpha", "1", "0", "--lam", "0", "1")
        assert code == EXIT_INVALID
        assert err["error"] == "ValidationError"
        assert err["message"].startswith("--a:")


class TestConfigHandling:
    """Tests for configuration resolution."""

    def test_config_flag(self, invoke, write_model, temp_dir):
        """--config supplies the default place."""
        config = temp_dir / "run.yaml"
        config.write_text("place: 3\n")
        code, out, _ = invoke(
            "norm", "wedge", write_model("a.json", STD), "-r", "1", "-c", config
        )
        assert code == EXIT_OK
        assert out["norm"]["p"] == 3

    def test_config_in_cwd(self, invoke, write_model, temp_dir):
        """nahkit.yaml in the working directory is picked up."""
        (temp_dir / "nahkit.yaml").write_text("place: 7\n")
        code, out, _ = invoke("norm", "wedge", write_model("a.json", STD), "-r", "1")
        assert code == EXIT_OK
        assert out["norm"]["p"] == 7

    def test_flag_beats_config(self, invoke, write_model, temp_dir):
        (temp_dir / "nahkit.yaml").write_text("place: 7\n")
        code, out, _ = invoke(
            "norm", "wedge", write_model("a.json", STD), "-r", "1", "-p", "3"
        )
        assert code == EXIT_OK
        assert out["norm"]["p"] == 3

    def test_bad_tol(self, invoke, write_model):
        code, _, err = invoke(
            "norm", "wedge", write_model("a.json", STD), "-r", "1", "--tol", "0"
        )
        assert code == EXIT_INVALID
        assert err["error"] == "ConfigError"


class TestErrors:
    """Tests for exit codes and error payloads."""

    def test_model_error_payload(self):
        code, body = error_payload(ModelError("basis", "basis singular"))
        assert code == EXIT_INVALID
        assert body == {
            "error": "ModelError",
            "message": "basis singular",
            "path": "basis",
        }

    def test_validation_error_payload(self):
        code, body = error_payload(ValidationError("p must be a prime"))
        assert code == EXIT_INVALID
        assert "path" not in body

    def test_internal_errors(self):
        """Broken invariants and unexpected exceptions exit with 1."""
        assert error_payload(InvariantViolation("x"))[0] == EXIT_INTERNAL
        assert error_payload(RuntimeError("x"))[0] == EXIT_INTERNAL

    def test_singular_norm_file(self, invoke, write_model):
        bad = dict(STD, basis=[["1", "2"], ["2", "4"]])
        code, out, err = invoke(
            "norm", "dist", write_model("a.json", bad), write_model("b.json", STD)
        )
        assert code == EXIT_INVALID
        assert out is None
        assert err == {
            "error": "ModelError",
            "message": "basis singular",
            "path": "basis",
        }

    def test_unexpected_failure(self, invoke, monkeypatch):
        """Crashes inside a handler exit with 1."""

        def boom(args, config):
            raise RuntimeError("boom")

        monkeypatch.setitem(cli.COMMANDS, ("kms", None), (boom, False))
        code, _, err = invoke("kms", "--a", "0", "--alpha", "1", "0", "--lam", "0", "1")
        assert code == EXIT_INTERNAL
        assert err["error"] == "RuntimeError"


@pytest.mark.integration
class TestEntryPoint:
    """Tests for the module entry point."""

    def test_subprocess(self, project_root):
        """python -m nahkit.cli prints one JSON line and exits 0."""
        env = {**os.environ, "PYTHONPATH": str(project_root)}
        proc = subprocess.run(
            [sys.executable, "-m", "nahkit.cli", "kms", "--a", "1"]
            + ["--alpha", "0", "1", "--lam", "1", "0"],
            cwd=project_root,
            env=env,
            capture_output=True,
            text=True,
        )
        assert proc.returncode == EXIT_OK
        assert json.loads(proc.stdout)["p"] == "1"

    def test_subprocess_error(self, project_root, temp_dir):
        """Errors go to stderr with exit code 2."""
        env = {**os.environ, "PYTHONPATH": str(project_root)}
        proc = subprocess.run(
            [sys.executable, "-m", "nahkit.cli", "rep", "ss"]
            + [str(temp_dir / "missing.json")],
            cwd=project_root,
            env=env,
            capture_output=True,
            text=True,
        )
        assert proc.returncode == EXIT_INVALID
        assert proc.stdout == ""
        assert json.loads(proc.stderr.splitlines()[-1])["error"] == "ModelError"
