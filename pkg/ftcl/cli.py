"""The ``ftcl`` command line."""

import logging
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Optional

import typer

from .cache import Cache
from .config import FtclConfig, config
from .errors import FtclError
from .lfun import dump_coefficients_csv
from .report import EXIT_CODES, HYPOTHESIS_FAILURE, COMPUTATION_FAILURE
from .validation.validators import InputValidator
from .verify import curve_periods, evaluate_lvalue, lfunction_from_request, selftest, survey, verify

logger = logging.getLogger(__name__)

app = typer.Typer(help="Verify mod-3 congruences of twisted L-values over Q(mu_3, m^(1/3)).",
                  no_args_is_help=True)


def _settings(ctx: typer.Context) -> FtclConfig:
    return ctx.obj or config


def _write(text: str, path: Optional[Path]) -> None:
    if path is None:
        typer.echo(text, nl=False)
    else:
        path.write_text(text)
        typer.echo(f"wrote {path}")


def _fail(message: str, code: int) -> None:
    typer.echo(f"error: {message}", err=True)
    raise typer.Exit(code)


@app.callback()
def main(
    ctx: typer.Context,
    digits: Optional[int] = typer.Option(None, "--digits", help="Complex working precision in decimal digits."),
    precision: Optional[int] = typer.Option(None, "--precision", help="3-adic precision M."),
    verbose: int = typer.Option(0, "--verbose", "-v", count=True, help="-v for INFO, -vv for DEBUG."),
):
    try:
        ctx.obj = config.with_overrides(digits=digits, precision=precision)
    except ValueError as exc:
        _fail(str(exc), EXIT_CODES[COMPUTATION_FAILURE])
    level = {0: ctx.obj.log_level, 1: "INFO"}.get(verbose, "DEBUG")
    logging.basicConfig(level=level, format="%(asctime)s %(name)s %(levelname)s %(message)s")


@app.command("verify")
def verify_command(
    ctx: typer.Context,
    curve: str = typer.Option(..., "--curve", help="Label (11a1) or a-invariants a1,a2,a3,a4,a6."),
    m: int = typer.Option(..., "--m", help="Cube-free integer > 1 prime to 3N."),
    phi: Optional[str] = typer.Option(None, "--phi", help="Character of Z_3^x as tame,t,wild."),
    relaxed: bool = typer.Option(False, "--relaxed", help="Multiply in P_q(E, ., 1) for q in N_diff."),
    interpolation: bool = typer.Option(False, "--interpolation", help="Also check the interpolation formula."),
    json_path: Optional[Path] = typer.Option(None, "--json", help="Write the JSON report here."),
    timings: bool = typer.Option(False, "--timings", help="Include stage timings in the JSON report."),
):
    """Verify R(rho) = R(sigma) mod 3 for one curve and one m."""
    settings = _settings(ctx)
    try:
        report = verify(curve, m, phi, relaxed=relaxed, interpolation=interpolation, settings=settings,
                        cache=Cache(settings.cache_dir))
    except FtclError as exc:
        _fail(str(exc), EXIT_CODES[COMPUTATION_FAILURE])
    except ValueError as exc:
        _fail(str(exc), EXIT_CODES[HYPOTHESIS_FAILURE])
    typer.echo(report.summary_line())
    if json_path is not None:
        _write(report.to_json(timings), json_path)
    raise typer.Exit(report.exit_code)


@app.command("survey")
def survey_command(
    ctx: typer.Context,
    curves: str = typer.Option(..., "--curves", help="File of labels, comma separated labels, or a range A-B."),
    m_list: str = typer.Option("2,5,7,10,11,17", "--m-list", help="Comma separated values of m."),
    relaxed: bool = typer.Option(False, "--relaxed"),
    json_path: Optional[Path] = typer.Option(None, "--json"),
    timings: bool = typer.Option(False, "--timings"),
):
    """Verify every admissible (curve, m) pair of a battery."""
    settings = _settings(ctx)
    try:
        report = survey(curves, InputValidator.parse_m_list(m_list), relaxed=relaxed, settings=settings,
                        cache=Cache(settings.cache_dir))
    except ValueError as exc:
        _fail(str(exc), EXIT_CODES[HYPOTHESIS_FAILURE])
    for row in report.rows:
        typer.echo(row.summary_line())
    for pair in report.skipped:
        typer.echo(f"{pair.curve} m={pair.m}: skipped ({', '.join(pair.reasons)})")
    typer.echo(report.summary.message)
    if json_path is not None:
        _write(report.to_json(timings), json_path)
    raise typer.Exit(report.exit_code)


@app.command("lvalue")
def lvalue_command(
    ctx: typer.Context,
    spec: Path = typer.Option(..., "--spec", exists=True, dir_okay=False,
                              help="TOML file with kind, curve, character, m, side, s and optional csv."),
    json_path: Optional[Path] = typer.Option(None, "--json"),
):
    """Evaluate an L-function described by a TOML file."""
    settings = _settings(ctx)
    try:
        with spec.open("rb") as handle:
            request = tomllib.load(handle)
        lfunction = lfunction_from_request(request.get("kind", "curve"), request.get("curve"),
                                           request.get("character"), request.get("m"),
                                           request.get("side", "rho"), settings)
        if request.get("csv"):
            dump_coefficients_csv(lfunction, int(request.get("csv_terms", 1000)), spec.parent / request["csv"])
        report = evaluate_lvalue(lfunction, request.get("s", 1), settings.digits)
    except tomllib.TOMLDecodeError as exc:
        _fail(f"{spec}: {exc}", EXIT_CODES[HYPOTHESIS_FAILURE])
    except FtclError as exc:
        _fail(str(exc), EXIT_CODES[COMPUTATION_FAILURE])
    except ValueError as exc:
        _fail(str(exc), EXIT_CODES[HYPOTHESIS_FAILURE])
    typer.echo(f"{report.name} at s={report.s}: {report.value} "
               f"(sign {report.sign}, residual {report.fe_residual}, {report.terms} terms)")
    if json_path is not None:
        _write(report.to_json(), json_path)


@app.command("periods")
def periods_command(
    ctx: typer.Context,
    curve: str = typer.Option(..., "--curve"),
    json_path: Optional[Path] = typer.Option(None, "--json"),
):
    """Neron periods of a curve by the AGM."""
    settings = _settings(ctx)
    try:
        report = curve_periods(InputValidator.parse_curve(curve, settings.curve_table), settings.digits)
    except FtclError as exc:
        _fail(str(exc), EXIT_CODES[COMPUTATION_FAILURE])
    except ValueError as exc:
        _fail(str(exc), EXIT_CODES[HYPOTHESIS_FAILURE])
    typer.echo(f"{report.curve}: Omega+ = {report.omega_plus}, Omega- = {report.omega_minus}")
    if json_path is not None:
        _write(report.to_json(), json_path)


@app.command("selftest")
def selftest_command(
    ctx: typer.Context,
    suite: Optional[list[str]] = typer.Option(None, "--suite", help="Run only the named suites."),
    json_path: Optional[Path] = typer.Option(None, "--json"),
):
    """Run the built-in module suites."""
    settings = _settings(ctx)
    report = selftest(settings, Cache(settings.cache_dir), suite)
    for result in report.suites:
        typer.echo(f"{result.name:12s} {result.status:8s} {result.detail}")
    if json_path is not None:
        _write(report.to_json(), json_path)
    raise typer.Exit(0 if report.passed else EXIT_CODES[COMPUTATION_FAILURE])


if __name__ == "__main__":
    app()
