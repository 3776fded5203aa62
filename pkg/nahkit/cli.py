"""
Command-line interface for nahkit.

Every subcommand goes through the same phases:
1. Configuration: nahkit.yaml (when present) merged with explicit flags
2. Model loading: each input file is parsed and validated
3. Computation
4. Rendering of the result to standard output

Batch subcommands accept several input files and may spread them over
worker processes with --jobs; results keep the input order.
"""

import argparse
import json
import logging
import multiprocessing
import sys
from collections.abc import Callable
from pathlib import Path
from typing import Any, get_args

from .config import RunConfig, load_config, merge_overrides
from .consts import CONFIG_FILE, EXIT_INTERNAL, EXIT_INVALID, EXIT_OK
from .deformation import FirstOrderDeformation, lift_order, tangent_dims
from .exceptions import InvariantViolation, ModelError, NahError, ValidationError
from .harmonic import (
    BuildingTarget,
    energy,
    make_state,
    solve_dirichlet,
    solve_equivariant,
    target_for,
)
from .local_systems import (
    char_b,
    flat_lattice,
    graded_nearby_cycles,
    kms_inverse_exact,
    kms_rescale,
    kms_rescale_exact,
    lattice_is_stable,
    residue_exponential,
    residues_quasiunipotent,
    root_orders,
    semisimplify,
    unipotent_reduction_exponent,
    weight_filtration,
)
from .models import (
    CocycleModel,
    GraphModel,
    MatrixModel,
    NormModel,
    RepModel,
    ResiduesModel,
    VoltageGraphModel,
    format_entry,
    norm_document,
    parse_model,
    point_to_payload,
    rep_document,
)
from .norms import (
    center_of_mass,
    common_orthogonal_basis,
    distances,
    quotient_coordinates,
    quotient_norm,
    relative_spectrum,
    standard_norm,
    wedge_norm,
)
from .polys import quasiunipotent_order
from .report import get_renderer
from .sanitize import format_rational, format_word, parse_rational, parse_word
from .scalars import PrimePlace

FORMAT = "%(levelname)s --- %(message)s"

logger = logging.getLogger("nahkit")


def _load(path: str | Path, *kinds: type):
    model = parse_model(path)
    if not isinstance(model, kinds):
        expected = " or ".join(
            get_args(k.model_fields["kind"].annotation)[0] for k in kinds
        )
        raise ModelError("kind", f"expected {expected}, got {model.kind}")
    return model


def _flag(parse: Callable, value: Any, flag: str):
    """Parse a command-line value, reporting bad input as a validation error."""
    try:
        return parse(value)
    except ValueError as e:
        raise ValidationError(f"--{flag}: {e}") from e


def _rationals(values) -> list[str]:
    return [format_rational(x) for x in values]


def _matrix_rows(m) -> list[list[Any]]:
    return [[format_entry(x) for x in row] for row in m]


def _norm_payload(n) -> dict:
    return norm_document(n).model_dump(mode="json", exclude_none=True)


def _rep_payload(rep) -> dict:
    return rep_document(rep).model_dump(mode="json", exclude_none=True)


# =============================================================================
# norm
# =============================================================================


def _load_norm(path: str, config: RunConfig):
    return _load(path, NormModel).to_domain(config.place)


def norm_dist(args: dict, config: RunConfig) -> dict:
    a, b = (_load_norm(p, config) for p in args["inputs"])
    d = distances(a, b)
    return {
        "d2_sq": format_rational(d.d2_sq),
        "d_inf": format_rational(d.d_inf),
        "d2_approx": d.d2_approx,
    }


def norm_spectrum(args: dict, config: RunConfig) -> dict:
    a, b = (_load_norm(p, config) for p in args["inputs"])
    common = common_orthogonal_basis(a, b)
    return {
        "lambdas": _rationals(relative_spectrum(a, b).lambdas),
        "basis": _matrix_rows(common.basis),
        "weights_a": _rationals(common.weights_a),
        "weights_b": _rationals(common.weights_b),
    }


def norm_com(args: dict, config: RunConfig) -> dict:
    points = [_load_norm(p, config) for p in args["inputs"]]
    masses = None
    if args.get("masses"):
        masses = [
            _flag(parse_rational, m, "masses") for m in args["masses"].split(",")
        ]
    result = center_of_mass(
        points, masses, config.tol, config.com_max_sweeps, config.grid_bits
    )
    return {
        "center": _norm_payload(result.point),
        "objective": format_rational(result.objective),
        "exact": result.exact,
        "sweeps": result.sweeps,
        "reason": result.reason,
    }


def norm_quotient(args: dict, config: RunConfig) -> dict:
    n = _load_norm(args["inputs"][0], config)
    w = _load(args["inputs"][1], MatrixModel).to_domain()
    return {
        "norm": _norm_payload(quotient_norm(n, w)),
        "coordinates": _matrix_rows(quotient_coordinates(w, n.dim)),
    }


def norm_wedge(args: dict, config: RunConfig) -> dict:
    n = _load_norm(args["inputs"][0], config)
    return {
        "degree": args["degree"],
        "norm": _norm_payload(wedge_norm(n, args["degree"])),
    }


# =============================================================================
# harmonic
# =============================================================================


def harmonic_solve(path: str, args: dict, config: RunConfig) -> dict:
    model = _load(path, GraphModel, VoltageGraphModel)
    if isinstance(model, GraphModel):
        graph = model.graph()
        boundary = model.boundary_values(config.place)
        if not boundary:
            raise ModelError("boundary", "boundary must be nonempty")
        target = target_for(
            next(iter(boundary.values())),
            config.grid_bits,
            config.tol,
            config.com_max_sweeps,
        )
        state = solve_dirichlet(
            graph, boundary, config.tol, config.max_sweeps, target
        )
        total = energy(graph, state)
    else:
        graph = model.voltage_graph()
        rep = model.representation(Path(path).parent)
        place = PrimePlace(model.p or config.place)
        target = BuildingTarget(
            place, rep.rank, config.grid_bits, config.tol, config.com_max_sweeps
        )
        values = [
            model.init[v].to_domain(place.p, f"init.{v}")
            if v in model.init
            else standard_norm(rep.rank, place)
            for v in range(graph.n_vertices)
        ]
        init = make_state(values, target)
        state, total = solve_equivariant(
            graph, rep, init, config.tol, config.max_sweeps
        )
    return {
        "kind": state.kind.value,
        "values": [point_to_payload(x) for x in state.values],
        "energy": format_rational(total),
        "energy_approx": float(total),
        "residual": format_rational(state.residual),
        "sweeps": state.sweeps,
        "reason": state.reason,
    }


# =============================================================================
# rep
# =============================================================================


def rep_weightfilt(path: str, args: dict, config: RunConfig) -> dict:
    n = _load(path, MatrixModel).to_domain()
    w = weight_filtration(n)
    return {
        "gr_dims": {str(k): d for k, d in w.gr_dims().items()},
        "basis": _matrix_rows(w.vectors),
        "weights": list(w.weights),
    }


def rep_grpsi(args: dict, config: RunConfig) -> dict:
    rep = _load(args["inputs"][0], RepModel).to_domain()
    gamma = _flag(parse_word, args["gamma"], "gamma")
    return {
        "gamma": format_word(gamma),
        "rep": _rep_payload(graded_nearby_cycles(rep, gamma)),
    }


def rep_ss(path: str, args: dict, config: RunConfig) -> dict:
    rep = _load(path, RepModel).to_domain()
    return {"rep": _rep_payload(semisimplify(rep))}


def rep_qu(path: str, args: dict, config: RunConfig) -> dict:
    rep = _load(path, RepModel).to_domain()
    if args.get("loops"):
        loops = [_flag(parse_word, w, "loops") for w in args["loops"]]
    else:
        loops = [(i,) for i in range(1, rep.generators + 1)]
    exponent = unipotent_reduction_exponent(rep, loops)
    return {
        "exponent": exponent,
        "loops": [format_word(w) for w in loops],
        "orders": [quasiunipotent_order(rep.evaluate(w)) for w in loops],
    }


def rep_charb(args: dict, config: RunConfig) -> dict:
    rep = _load(args["inputs"][0], RepModel).to_domain()
    word = _flag(parse_word, args.get("word") or "", "word")
    return {
        "word": format_word(word),
        "charpoly": [format_entry(c) for c in char_b(rep, word)],
    }


def rep_residues(path: str, args: dict, config: RunConfig) -> dict:
    model = _load(path, ResiduesModel)
    roots = residue_exponential(model.residues)
    result = {"roots": _rationals(roots), "orders": list(root_orders(roots))}
    n = args.get("n") or model.n
    if n is not None:
        result["quasiunipotent"] = residues_quasiunipotent(model.residues, n)
    return result


def rep_lattice(path: str, args: dict, config: RunConfig) -> dict:
    rep = _load(path, RepModel).to_domain()
    place = PrimePlace(config.place)
    lattice = flat_lattice(rep.matrices, place, rep.rank)
    if not lattice_is_stable(rep.matrices, lattice, place):
        raise InvariantViolation("flat lattice is not stable")
    return {"p": place.p, "lattice": _matrix_rows(lattice)}


# =============================================================================
# deform
# =============================================================================


def _dims(rep) -> dict:
    dims = tangent_dims(rep)
    return {"dimZ1": dims.z1, "dimB1": dims.b1, "dimH1": dims.h1}


def deform_tangent(path: str, args: dict, config: RunConfig) -> dict:
    return _dims(_load(path, RepModel).to_domain())


def deform_lift(args: dict, config: RunConfig) -> dict:
    rep = _load(args["inputs"][0], RepModel).to_domain()
    values = _load(args["inputs"][1], CocycleModel).to_domain(rep)
    result = lift_order(rep, FirstOrderDeformation(values), args["order"])
    lift = {"order": result.order, "status": result.status}
    if result.residuals is not None:
        lift["residuals"] = [_matrix_rows(m) for m in result.residuals]
    return {**_dims(rep), "lift": lift}


# =============================================================================
# kms
# =============================================================================


def kms(args: dict, config: RunConfig) -> dict:
    a = _flag(parse_rational, args["a"], "a")
    alpha = tuple(_flag(parse_rational, x, "alpha") for x in args["alpha"])
    lam = tuple(_flag(parse_rational, x, "lam") for x in args["lam"])
    if args.get("inverse"):
        x, (u, w) = kms_inverse_exact(a, alpha, lam)
        return {"a": format_rational(x), "alpha": _rationals((u, w))}
    p, e = kms_rescale_exact(a, alpha, lam)
    p_approx, e_approx = kms_rescale(
        float(a), complex(*map(float, alpha)), complex(*map(float, lam))
    )
    return {
        "p": format_rational(p),
        "e": _rationals(e),
        "p_approx": p_approx,
        "e_approx": [e_approx.real, e_approx.imag],
    }


# =============================================================================
# Dispatch
# =============================================================================

# (group, action) -> (handler, batch); batch handlers take one input path.
COMMANDS: dict[tuple[str, str | None], tuple[Callable, bool]] = {
    ("norm", "dist"): (norm_dist, False),
    ("norm", "spectrum"): (norm_spectrum, False),
    ("norm", "com"): (norm_com, False),
    ("norm", "quotient"): (norm_quotient, False),
    ("norm", "wedge"): (norm_wedge, False),
    ("harmonic", "solve"): (harmonic_solve, True),
    ("rep", "weightfilt"): (rep_weightfilt, True),
    ("rep", "grpsi"): (rep_grpsi, False),
    ("rep", "ss"): (rep_ss, True),
    ("rep", "qu"): (rep_qu, True),
    ("rep", "charb"): (rep_charb, False),
    ("rep", "residues"): (rep_residues, True),
    ("rep", "lattice"): (rep_lattice, True),
    ("deform", "tangent"): (deform_tangent, True),
    ("deform", "lift"): (deform_lift, False),
    ("kms", None): (kms, False),
}


def error_payload(exc: BaseException) -> tuple[int, dict]:
    """Exit code and JSON body for a failure."""
    if isinstance(exc, InvariantViolation) or not isinstance(exc, NahError):
        code = EXIT_INTERNAL
    else:
        code = EXIT_INVALID
    body = {"error": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, ModelError):
        body["message"] = exc.reason
        body["path"] = exc.path
    return code, body


def _batch_job(job: tuple) -> tuple[str, Any]:
    """Worker entry point; failures travel back as payloads."""
    key, path, args, config_data = job
    handler, _ = COMMANDS[key]
    try:
        config = RunConfig.model_validate(config_data)
        return "ok", handler(path, args, config)
    except Exception as e:
        code, body = error_payload(e)
        if code == EXIT_INTERNAL:
            logger.exception(f"unexpected failure on {path}")
        body["input"] = path
        return "error", (code, body)


def _run_batch(key, args: dict, config: RunConfig) -> tuple[int, Any]:
    jobs = [
        (key, path, args, config.model_dump()) for path in args["inputs"]
    ]
    if config.jobs > 1 and len(jobs) > 1:
        logger.info(f"running {len(jobs)} inputs on {config.jobs} workers")
        with multiprocessing.Pool(min(config.jobs, len(jobs))) as pool:
            outcomes = pool.map(_batch_job, jobs)
    else:
        outcomes = [_batch_job(job) for job in jobs]

    for status, value in outcomes:
        if status == "error":
            return value
    results = [value for _, value in outcomes]
    return EXIT_OK, results[0] if len(results) == 1 else {"results": results}


def _common_flags() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument(
        "--config",
        "-c",
        type=str,
        default=None,
        help=f"Configuration file, defaults to '{CONFIG_FILE}' when present.",
    )
    parent.add_argument("--place", "-p", type=int, default=None, help="Prime p.")
    parent.add_argument(
        "--tol", type=str, default=None, help="Solver tolerance as a rational."
    )
    parent.add_argument(
        "--max-sweeps", type=int, default=None, help="Sweep cap for solvers."
    )
    parent.add_argument(
        "--jobs",
        "-j",
        type=int,
        default=None,
        help="Worker processes for batch inputs.",
    )
    parent.add_argument(
        "--format",
        choices=["json", "text"],
        default=None,
        help="Output format.",
    )
    parent.add_argument(
        "--verbose",
        "-v",
        action="store_true",
        default=False,
        help="Log debugging output to stderr.",
    )
    return parent


def build_parser() -> argparse.ArgumentParser:
    common = _common_flags()
    parser = argparse.ArgumentParser(
        prog="nahkit",
        description="Exact computations with norms, harmonic maps and local systems.",
    )
    groups = parser.add_subparsers(dest="group", required=True)

    norm = groups.add_parser("norm", help="Norms at a prime place.")
    norm_actions = norm.add_subparsers(dest="action", required=True)
    for action, nargs, helptext in (
        ("dist", 2, "Distances between two norms."),
        ("spectrum", 2, "Relative spectrum of two norms."),
        ("com", "+", "Center of mass of norms."),
        ("quotient", 2, "Quotient norm by the span of matrix rows."),
        ("wedge", 1, "Induced norm on an exterior power."),
    ):
        sub = norm_actions.add_parser(action, parents=[common], help=helptext)
        sub.add_argument("inputs", nargs=nargs)
        if action == "com":
            sub.add_argument("--masses", type=str, default=None)
        if action == "wedge":
            sub.add_argument("--degree", "-r", type=int, required=True)

    harmonic = groups.add_parser("harmonic", help="Discrete harmonic maps.")
    harmonic_actions = harmonic.add_subparsers(dest="action", required=True)
    sub = harmonic_actions.add_parser(
        "solve", parents=[common], help="Dirichlet or equivariant problem."
    )
    sub.add_argument("inputs", nargs="+")

    rep = groups.add_parser("rep", help="Representations and monodromy.")
    rep_actions = rep.add_subparsers(dest="action", required=True)
    for action, nargs, helptext in (
        ("weightfilt", "+", "Weight filtration of a nilpotent matrix."),
        ("grpsi", 1, "Graded nearby cycles along a central unipotent word."),
        ("ss", "+", "Semisimplification."),
        ("qu", "+", "Unipotent reduction exponent."),
        ("charb", 1, "Characteristic polynomial of a word."),
        ("residues", "+", "Exponentials of residues."),
        ("lattice", "+", "Flat lattice for commuting unipotent matrices."),
    ):
        sub = rep_actions.add_parser(action, parents=[common], help=helptext)
        sub.add_argument("inputs", nargs=nargs)
        if action == "grpsi":
            sub.add_argument("--gamma", type=str, required=True)
        if action == "qu":
            sub.add_argument("--loops", nargs="*", default=None)
        if action == "charb":
            sub.add_argument("--word", type=str, default="")
        if action == "residues":
            sub.add_argument("--n", type=int, default=None)

    deform = groups.add_parser("deform", help="Deformations of representations.")
    deform_actions = deform.add_subparsers(dest="action", required=True)
    sub = deform_actions.add_parser(
        "tangent", parents=[common], help="Dimensions of Z1, B1 and H1."
    )
    sub.add_argument("inputs", nargs="+")
    sub = deform_actions.add_parser(
        "lift", parents=[common], help="Lift a cocycle order by order."
    )
    sub.add_argument("inputs", nargs=2)
    sub.add_argument("--order", "-k", type=int, default=2)

    sub = groups.add_parser("kms", parents=[common], help="KMS rescaling.")
    sub.add_argument("--a", type=str, required=True)
    sub.add_argument("--alpha", nargs=2, required=True, metavar=("RE", "IM"))
    sub.add_argument("--lam", nargs=2, required=True, metavar=("RE", "IM"))
    sub.add_argument("--inverse", action="store_true", default=False)
    sub.set_defaults(action=None)
    return parser


def parse_args(argv: list[str] | None = None) -> dict:
    """Parse command-line arguments."""
    return vars(build_parser().parse_args(argv))


def resolve_config(args: dict) -> RunConfig:
    """nahkit.yaml (or --config) with explicit flags on top."""
    if args.get("config"):
        config = load_config(args["config"])
    elif Path(CONFIG_FILE).is_file():
        config = load_config(CONFIG_FILE)
    else:
        config = RunConfig()
    return merge_overrides(
        config,
        {
            "place": args.get("place"),
            "tol": args.get("tol"),
            "max_sweeps": args.get("max_sweeps"),
            "jobs": args.get("jobs"),
            "format": args.get("format"),
        },
    )


def dispatch(args: dict, config: RunConfig) -> tuple[int, Any]:
    key = (args["group"], args.get("action"))
    handler, batch = COMMANDS[key]
    for _k, _v in args.items():
        logger.debug(f"Using argument {_k}={_v}")
    if batch:
        return _run_batch(key, args, config)
    return EXIT_OK, handler(args, config)


def run(argv: list[str] | None = None) -> int:
    """Run one subcommand; returns the process exit code."""
    args = parse_args(argv)
    if args.get("verbose"):
        logging.getLogger().setLevel(logging.DEBUG)
    command = " ".join(filter(None, (args["group"], args.get("action"))))
    try:
        config = resolve_config(args)
        code, result = dispatch(args, config)
        if code == EXIT_OK:
            output = get_renderer(config.format).render(command, result)
    except Exception as e:
        code, result = error_payload(e)
        if code == EXIT_INTERNAL:
            logger.exception(f"{command} failed")
    if code != EXIT_OK:
        sys.stderr.write(json.dumps(result, sort_keys=True) + "\n")
        return code
    sys.stdout.write(output)
    return EXIT_OK


def main() -> None:
    """Entry point for the CLI."""
    logging.basicConfig(format=FORMAT, level=logging.WARNING, stream=sys.stderr)
    sys.exit(run())


if __name__ == "__main__":
    main()
