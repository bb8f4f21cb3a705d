"""``hoq`` command-line frontend.

Exit codes are a stable contract: 0 when everything checks out, 1 on a
semantic mismatch between the two semantics, 2 when a program fails to parse
or type-check (or cannot be read).
"""

from __future__ import annotations

import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from importlib import resources
from pathlib import Path
from typing import Optional

import click

from . import denotation, operational
from .syntax import BIT, ParseError, parse, print_type
from .typing import HoqTypeError, check_or_raise, infer_or_raise

SCHEMA = 1
DEFAULT_TOL = 1e-6
DEFAULT_FUEL = 10_000
DEFAULT_DEPTH = denotation.DEFAULT_DEPTH
SOUNDNESS_SLACK = 1e-9

EXIT_OK, EXIT_MISMATCH, EXIT_INPUT = 0, 1, 2


class InputError(Exception):
    """The program could not be read, parsed or typed."""


@dataclass
class RunReport:
    """Outcome of comparing both semantics on one closed ``bit`` program."""

    path: str
    type: str
    operational: tuple
    fuel: int
    denotational: tuple
    depth: int
    denote_fuel: int
    diff: float
    tol: float
    sound: bool
    passed: bool
    error: Optional[str] = None

    def to_json(self) -> dict:
        return {"schema": SCHEMA, **asdict(self)}


def load(path) -> tuple:
    """Parse and principal-type a file; returns ``(term, type)``."""
    try:
        source = Path(path).read_text()
    except OSError as e:
        raise InputError(f"cannot read {path}: {e.strerror or e}") from None
    try:
        m = parse(source)
        ty, _ = infer_or_raise((), m)
    except ParseError as e:
        raise InputError(f"{path}: parse error at {e}") from None
    except HoqTypeError as e:
        raise InputError(f"{path}: type error: {e}") from None
    return m, ty


def load_bit(path):
    m, ty = load(path)
    try:
        check_or_raise((), m, BIT)
    except HoqTypeError:
        raise InputError(f"{path}: has type {print_type(ty)}, not bit") from None
    return m, ty


def adequacy_report(path, tol: float = DEFAULT_TOL, fuel: int = DEFAULT_FUEL,
                    depth: int = DEFAULT_DEPTH, denote_fuel: int = denotation.DEFAULT_FUEL) -> RunReport:
    """Run both semantics and compare them.

    Besides the agreement at ``fuel``, every big-step approximant ``⇓^k``
    with ``k ≤ fuel`` must stay below the denotation.
    """
    m, ty = load_bit(path)
    chain = operational.approximants(m, fuel)
    op = chain[-1][1]
    den = denotation.denote(m, depth, denote_fuel)
    diff = max(abs(op.p - den.p), abs(op.q - den.q))
    bound = tol + SOUNDNESS_SLACK
    sound = all(b.p <= den.p + bound and b.q <= den.q + bound for _, b in chain)
    return RunReport(str(path), print_type(ty), (op.p, op.q), fuel, (den.p, den.q), depth,
                     denote_fuel, diff, tol, sound, diff <= tol and sound)


def _fmt_pair(pair) -> str:
    return f"({pair[0]:.9g}, {pair[1]:.9g})"


def _render(report: RunReport) -> str:
    status = "pass" if report.passed else "FAIL"
    if report.error:
        return f"{status}  {report.path}: {report.error}"
    extra = "" if report.sound else "  [soundness violated]"
    return (f"{status}  {report.path}: operational {_fmt_pair(report.operational)}"
            f"  denotational {_fmt_pair(report.denotational)}  diff {report.diff:.3g}{extra}")


def _emit(obj: dict, as_json: bool, text: str):
    click.echo(json.dumps(obj) if as_json else text)


def _die(e: InputError):
    click.echo(f"error: {e}", err=True)
    sys.exit(EXIT_INPUT)


_tol = click.option("--tol", type=float, default=DEFAULT_TOL, envvar="HOQ_TOL", show_default=True,
                    help="Agreement tolerance.")
_fuel = click.option("--fuel", type=int, default=DEFAULT_FUEL, envvar="HOQ_FUEL", show_default=True,
                     help="Reduction steps for the operational semantics.")
_depth = click.option("--depth", type=int, default=DEFAULT_DEPTH, envvar="HOQ_DEPTH", show_default=True,
                      help="Levels of the probability tree to explore.")
_tfuel = click.option("--token-fuel", "token_fuel", type=int, default=denotation.DEFAULT_FUEL,
                      show_default=True, help="Feedback budget per token run.")
_json = click.option("--json", "as_json", is_flag=True, help="Machine-readable output.")
_file = click.argument("file", type=click.Path(dir_okay=False))


@click.group()
@click.version_option(package_name="hoq")
def main():
    """Type-check and run programs of a higher-order quantum lambda calculus."""


@main.command()
@_file
@_json
def check(file, as_json):
    """Print the principal type of FILE."""
    try:
        _, ty = load(file)
    except InputError as e:
        _die(e)
    _emit({"schema": SCHEMA, "type": print_type(ty)}, as_json, print_type(ty))


@main.command()
@_file
@click.option("--max-steps", "--fuel", "fuel", type=int, default=DEFAULT_FUEL, envvar="HOQ_FUEL",
              show_default=True, help="Reduction steps.")
@click.option("--tree", "tree_out", type=click.Path(dir_okay=False), help="Write the reduction tree as DOT.")
def run(file, fuel, tree_out):
    """Big-step probabilities of a bit program under the reduction semantics."""
    try:
        m, _ = load_bit(file)
    except InputError as e:
        _die(e)
    r = operational.bigstep(m, fuel)
    if tree_out:
        Path(tree_out).write_text(operational.tree_to_dot(operational.reduction_tree(m, fuel)) + "\n")
    click.echo(json.dumps({"schema": SCHEMA, "p": r.p, "q": r.q, "fuel": fuel}))


@main.command()
@_file
@_depth
@click.option("--fuel", "token_fuel", type=int, default=denotation.DEFAULT_FUEL, show_default=True,
              help="Feedback budget per token run.")
@click.option("--dot", "dot_out", type=click.Path(dir_okay=False), help="Write the explored tree as DOT.")
def denote(file, depth, token_fuel, dot_out):
    """Probabilities read off the denotational tree of a bit program."""
    try:
        m, _ = load_bit(file)
    except InputError as e:
        _die(e)
    e = denotation.explore(denotation.tree_of(m), depth, token_fuel)
    if dot_out:
        Path(dot_out).write_text(denotation.explored_to_dot(e) + "\n")
    p, q = e.prob
    click.echo(json.dumps({"schema": SCHEMA, "p": p, "q": q, "depth": depth}))


@main.command()
@_file
@_tol
@_fuel
@_depth
@_tfuel
@_json
def adequacy(file, tol, fuel, depth, token_fuel, as_json):
    """Compare both semantics on FILE; exit 1 if they disagree."""
    try:
        report = adequacy_report(file, tol, fuel, depth, token_fuel)
    except InputError as e:
        _die(e)
    _emit(report.to_json(), as_json, _render(report))
    sys.exit(EXIT_OK if report.passed else EXIT_MISMATCH)


@main.command()
@_file
@click.option("--mode", type=click.Choice(["operational", "denotational"]), default="operational",
              show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), help="Output file (default: stdout).")
@_fuel
@_depth
def tree(file, mode, out, fuel, depth):
    """Draw the reduction tree or the denotational probability tree as DOT."""
    try:
        m, _ = load(file) if mode == "operational" else load_bit(file)
    except InputError as e:
        _die(e)
    if mode == "operational":
        dot = operational.tree_to_dot(operational.reduction_tree(m, fuel))
    else:
        dot = denotation.explored_to_dot(denotation.explore(denotation.tree_of(m), depth))
    if out:
        try:
            Path(out).write_text(dot + "\n")
        except OSError as e:
            _die(InputError(f"cannot write {out}: {e.strerror or e}"))
    else:
        click.echo(dot)


def _safe_report(path, tol, fuel, depth, token_fuel) -> RunReport:
    try:
        return adequacy_report(path, tol, fuel, depth, token_fuel)
    except InputError as e:
        return RunReport(str(path), "", (0.0, 0.0), fuel, (0.0, 0.0), depth, token_fuel,
                         float("inf"), tol, False, False, error=str(e))


def corpus_files(directory=None) -> list:
    if directory is None:
        root = resources.files("hoq").joinpath("corpus")
        return sorted(Path(str(p)) for p in root.iterdir() if p.name.endswith(".hoq"))
    return sorted(Path(directory).glob("*.hoq"))


@main.command()
@click.argument("directory", required=False, type=click.Path(file_okay=False, exists=True))
@_tol
@_fuel
@_depth
@_tfuel
@_json
@click.option("--jobs", type=int, default=4, show_default=True, help="Files checked concurrently.")
def corpus(directory, tol, fuel, depth, token_fuel, as_json, jobs):
    """Run the adequacy check on every .hoq file in DIRECTORY (default: bundled corpus)."""
    files = corpus_files(directory)
    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        reports = list(pool.map(lambda f: _safe_report(f, tol, fuel, depth, token_fuel), files))
    failed = sum(not r.passed for r in reports)
    if as_json:
        click.echo(json.dumps({"schema": SCHEMA, "files": len(reports), "failed": failed,
                               "reports": [r.to_json() for r in reports]}))
    else:
        for r in reports:
            click.echo(_render(r))
        click.echo(f"{len(reports) - failed}/{len(reports)} passed")
    if any(r.error for r in reports):
        sys.exit(EXIT_INPUT)
    sys.exit(EXIT_MISMATCH if failed else EXIT_OK)


if __name__ == "__main__":
    main()
