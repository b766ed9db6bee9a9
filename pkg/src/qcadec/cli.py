"""Command-line front end.

Exit codes: 0 success, 2 check or verification failure, 3 unmet
precondition, 4 the two radius checks disagree.
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass
from fractions import Fraction
from importlib import resources
from pathlib import Path

import click
import numpy as np

from . import io, partition as part_mod, qca as qca_mod
from .config import set_settings
from .decompose import pipeline
from .errors import (
    DimensionMismatch,
    NotTranslationInvariant,
    PreconditionFailed,
    QcaDecError,
    RadiusCheckFailed,
)

EXIT_OK = 0
EXIT_FAIL = 2
EXIT_PRECONDITION = 3
EXIT_INCONSISTENT = 4
EXIT_USAGE = 64  # bad arguments; kept apart from the verification failure code

PRECONDITION_ERRORS = (PreconditionFailed, RadiusCheckFailed, DimensionMismatch, NotTranslationInvariant)


@dataclass
class RunConfig:
    tol: float
    seed: int
    max_dim: int
    json_errors: bool = False


class CommandFailed(click.ClickException):
    """Carries an exit code and an error kind for ``--json-errors``."""

    def __init__(self, message: str, code: int, kind: str = "error", **details):
        super().__init__(message)
        self.exit_code = code
        self.kind = kind
        self.details = details


def _fail(message: str, code: int, kind: str, **details):
    raise CommandFailed(message, code, kind, **details)


def _precondition(exc: Exception) -> CommandFailed:
    return CommandFailed(str(exc), EXIT_PRECONDITION, type(exc).__name__)


def fixture_path(name: str) -> Path:
    return Path(str(resources.files("qcadec") / "fixtures" / name))


def _parse_dims(raw: str, N: int) -> list[int]:
    parts = [int(x) for x in raw.split(",") if x.strip()]
    if len(parts) == 1:
        return parts * N
    if len(parts) != N:
        raise click.BadParameter(f"expected 1 or {N} dimensions, got {len(parts)}")
    return parts


# ----------------------------------------------------------------------


@click.group()
@click.option("--tol", type=float, envvar="QCD_TOL", default=None, help="Relative tolerance (env QCD_TOL).")
@click.option("--seed", type=int, default=None, help="Seed for randomised checks.")
@click.option("--max-dim", type=int, default=None, help="Largest ambient dimension accepted.")
@click.option("--json-errors", is_flag=True, help="Write errors to stderr as JSON.")
@click.pass_context
def main(ctx: click.Context, tol, seed, max_dim, json_errors):
    """Decompose quantum cellular automata into routed brick circuits."""
    changes = {k: v for k, v in (("tol", tol), ("seed", seed), ("max_dim", max_dim)) if v is not None}
    if "tol" in changes and changes["tol"] <= 0:
        raise click.BadParameter("tol must be positive", param_hint="--tol")
    s = set_settings(**changes)
    ctx.obj = RunConfig(s.tol, s.seed, s.max_dim, json_errors)


@main.command("decompose")
@click.argument("input", type=click.Path(exists=True, dir_okay=False))
@click.argument("output", type=click.Path(dir_okay=False))
@click.option("--ti", is_flag=True, help="Use identical gates within each layer.")
@click.option("--emit-intermediates", "emit_dir", type=click.Path(file_okay=False), default=None,
              help="Write every intermediate partition to this directory.")
def cmd_decompose(input, output, ti, emit_dir):
    """Decompose the map in INPUT and write the circuit to OUTPUT."""
    q = io.qca_from_json(io.load(input))
    try:
        if emit_dir is None:
            dec = pipeline.decompose(q, ti=ti)
        else:
            if ti and not qca_mod.is_translation_invariant(q):
                raise NotTranslationInvariant("the map does not commute with the cyclic shift")
            inter = pipeline.decompose_qca(q, ti=ti)
            out_dir = Path(emit_dir)
            out_dir.mkdir(parents=True, exist_ok=True)
            for k, item in enumerate(inter):
                p = item.partition
                io.save(io.partition_to_json(p, max_length=p.size // 2),
                        out_dir / f"{k:02d}_{item.kind}_{item.step}.json")
            dec = pipeline.extract_layers(inter, q)
        report = pipeline.verify_reconstruction(q, dec)
    except PRECONDITION_ERRORS as exc:
        raise _precondition(exc) from exc
    io.save(io.decomposition_to_json(dec), output)
    click.echo(f"layers: {dec.n_layers}  gates: {len(dec.gates())}  deviation: {report.max_deviation:.3e}")
    if not report.ok:
        _fail("reconstruction failed verification", EXIT_FAIL, "VerificationFailed", report=report.to_dict())


@main.command("verify")
@click.argument("qca_file", type=click.Path(exists=True, dir_okay=False))
@click.argument("dec_file", type=click.Path(exists=True, dir_okay=False))
def cmd_verify(qca_file, dec_file):
    """Check the decomposition in DEC_FILE against the map in QCA_FILE."""
    q = io.qca_from_json(io.load(qca_file))
    dec = io.decomposition_from_json(io.load(dec_file))
    try:
        report = pipeline.verify_reconstruction(q, dec)
    except DimensionMismatch as exc:
        raise _precondition(exc) from exc
    click.echo(f"deviation: {report.max_deviation:.3e}  fidelity: {report.fidelity:.12f}")
    if report.ok:
        return
    bad = [g.gate_id for g in report.bad_gates]
    for g in report.bad_gates:
        click.echo(f"gate {g.gate_id}: {g.status}")
    for n, m, why in report.causal_failures:
        click.echo(f"sites {n} -> {m}: {why}")
    msg = f"verification failed at gate {bad[0]}" if bad else "verification failed"
    _fail(msg, EXIT_FAIL, "VerificationFailed", gates=bad, report=report.to_dict())


@main.command("radius")
@click.argument("qca_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--r", "radius", type=str, default=None, help="Radius to test (defaults to the declared one).")
@click.option("--method", type=click.Choice(["algebraic", "channel", "both"]), default="both")
def cmd_radius(qca_file, radius, method):
    """Test whether the map has radius at most R."""
    q = io.qca_from_json(io.load(qca_file))
    r = q.radius if radius is None else Fraction(radius)
    try:
        results = {}
        witness = None
        if method in ("algebraic", "both"):
            ok, pairs = qca_mod.radius_check_algebraic(q, r)
            results["algebraic"] = ok
            bad = [p for p in pairs if p.violated]
            if bad:
                witness = (bad[0].input_site, bad[0].output_site)
        if method in ("channel", "both"):
            results["channel"] = qca_mod.radius_check_channel(q, r)
    except DimensionMismatch as exc:
        raise _precondition(exc) from exc
    if len(set(results.values())) > 1:
        _fail(f"radius checks disagree: {results}", EXIT_INCONSISTENT, "InternalInconsistency", results=results)
    if all(results.values()):
        click.echo(f"radius {r}: pass")
        return
    if witness is None:
        # the channel check alone does not name a pair; find one for the report
        _, pairs = qca_mod.radius_check_algebraic(q, r)
        bad = [p for p in pairs if p.violated]
        witness = (bad[0].input_site, bad[0].output_site) if bad else None
    msg = f"radius {r}: fail"
    if witness is not None:
        msg += f", input {witness[0]} influences output {witness[1]}"
    click.echo(msg)
    _fail(msg, EXIT_FAIL, "RadiusCheckFailed", witness=list(witness) if witness else None)


@main.command("validate")
@click.argument("partition_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--check", "check", default="partition",
              help="partition | connected | strong | corr-length=L")
def cmd_validate(partition_file, check):
    """Run one structural check on a partition."""
    p = io.partition_from_json(io.load(partition_file))
    if check == "partition":
        ok = part_mod.validate_partition(p).ok
    elif check == "connected":
        ok = part_mod.is_connected(p)
    elif check == "strong":
        ok = part_mod.is_strongly_connected(p)
    elif check.startswith("corr-length="):
        ok = part_mod.correlation_length_at_most(p, Fraction(check.split("=", 1)[1]))
    else:
        raise click.BadParameter(f"unknown check {check!r}", param_hint="--check")
    click.echo(f"{check}: {'pass' if ok else 'fail'}")
    if not ok:
        _fail(f"{check}: fail", EXIT_FAIL, "CheckFailed", check=check)


@main.command("gen")
@click.option("--kind", type=click.Choice(["brick", "shift", "random-ti"]), required=True)
@click.option("--N", "N", type=int, default=5, show_default=True)
@click.option("--dims", default="2", show_default=True, help="Site dimension, or one per site, comma separated.")
@click.option("--layers", type=int, default=1, show_default=True)
@click.option("--seed", type=int, default=None, help="Generator seed (defaults to the global seed).")
@click.argument("output", type=click.Path(dir_okay=False))
@click.pass_obj
def cmd_gen(cfg: RunConfig, kind, N, dims, layers, seed, output):
    """Write a seeded random or structured map to OUTPUT."""
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    site_dims = _parse_dims(dims, N)
    if kind == "brick":
        q, _ = qca_mod.random_brick(N, site_dims, layers, rng)
    elif kind == "shift":
        q = qca_mod.shift_qca(N, site_dims[0])
    else:
        q, _ = qca_mod.random_ti_brick(N, site_dims[0], layers, rng)
    io.save(io.qca_to_json(q), output)
    click.echo(f"wrote {output}: N={q.N} dim={q.dim} radius={q.radius}")


# ----------------------------------------------------------------------
# selftest


def _selftest_checks():
    def load_qca(name):
        return io.qca_from_json(io.load(fixture_path(name)))

    def load_part(name):
        return io.partition_from_json(io.load(fixture_path(name)))

    def brick():
        q = load_qca("brick_r05_N5_seed7.json")
        return pipeline.verify_reconstruction(q, pipeline.decompose(q)).ok

    def connected_not_strong():
        p = load_part("connected_not_strong_partition.json")
        return (part_mod.is_connected(p) and not part_mod.is_strongly_connected(p)
                and not part_mod.correlation_length_at_most(p, 0) and part_mod.correlation_length_at_most(p, 1))

    def product_obstruction():
        from .decompose.dense import inner_local_to_product

        p = load_part("product_obstruction_partition.json")
        u = io.matrix_from_json(io.load(fixture_path("product_obstruction_unitary.json"))["unitary"])
        return inner_local_to_product(u, p).dephasing.separable is False

    def nonlocal_dephasing():
        from .cstar import conjugate, span_distance

        p = load_part("nonlocal_dephasing_partition.json")
        u = io.matrix_from_json(io.load(fixture_path("nonlocal_dephasing_unitary.json"))["unitary"])
        a = p.interval_algebra(0, 4)
        return span_distance(conjugate(a, u), a) > 0.1

    def shift_radius():
        q = load_qca("shift_N4_d2.json")
        return qca_mod.radius_check_algebraic(q, Fraction(1, 2))[0] and not qca_mod.radius_check_algebraic(q, 0)[0]

    def identity():
        q = load_qca("identity_N5.json")
        return pipeline.decompose(q).n_layers == 0

    def small_ring():
        q = load_qca("brick_r1_N4_seed3.json")
        try:
            pipeline.decompose(q)
        except PreconditionFailed:
            return True
        return False

    return [
        ("brick fixture reconstructs", brick),
        ("connected but not strongly connected, correlation length 1", connected_not_strong),
        ("inner-local unitary with no product form", product_obstruction),
        ("dephasing unitary that is not local", nonlocal_dephasing),
        ("shift has radius 1/2, not 0", shift_radius),
        ("identity has no layers", identity),
        ("N <= 4r is refused", small_ring),
    ]


@main.command("selftest")
def cmd_selftest():
    """Run the bundled fixture checks."""
    failed = 0
    for name, check in _selftest_checks():
        try:
            ok = bool(check())
        except QcaDecError as exc:
            ok = False
            name = f"{name} ({type(exc).__name__}: {exc})"
        failed += not ok
        click.echo(f"{'PASS' if ok else 'FAIL'}  {name}")
    if failed:
        _fail(f"{failed} selftest check(s) failed", EXIT_FAIL, "SelftestFailed")


# ----------------------------------------------------------------------


def run(argv=None) -> int:
    """Invoke the CLI and return its exit code instead of exiting."""
    json_errors = "--json-errors" in (argv if argv is not None else sys.argv[1:])
    try:
        main.main(args=argv, standalone_mode=False)
    except CommandFailed as exc:
        _report(exc.kind, exc.message, exc.exit_code, exc.details, json_errors)
        return exc.exit_code
    except QcaDecError as exc:
        code = EXIT_PRECONDITION if isinstance(exc, PRECONDITION_ERRORS) else EXIT_FAIL
        _report(type(exc).__name__, str(exc), code, {}, json_errors)
        return code
    except click.UsageError as exc:
        if json_errors:
            _report(type(exc).__name__, exc.format_message(), EXIT_USAGE, {}, True)
        else:
            exc.show()
        return EXIT_USAGE
    except click.ClickException as exc:
        if json_errors:
            _report(type(exc).__name__, exc.format_message(), exc.exit_code, {}, True)
        else:
            exc.show()
        return exc.exit_code
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.Abort:
        return 1
    return EXIT_OK


def _report(kind: str, message: str, code: int, details: dict, as_json: bool) -> None:
    if as_json:
        payload = {"error": kind, "message": message, "exit_code": code}
        if details:
            payload["details"] = details
        click.echo(json.dumps(payload, default=str), err=True)
    else:
        click.echo(f"error: {message}", err=True)


def entry() -> None:
    sys.exit(run())


if __name__ == "__main__":
    entry()
