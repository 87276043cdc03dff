"""Orchestration: verify one pair, survey a battery, run the self test."""

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from fractions import Fraction
from pathlib import Path
from tempfile import TemporaryDirectory
from typing import Callable, Iterator

import mpmath as mp

from .artin import euler_data, g_sigma_coeffs, trace_congruence_defect
from .cache import Cache, dump_int_lines, parse_int_lines
from .config import FtclConfig, config
from .ellcurve import EllipticCurveQ, an_list, ap, hypothesis_filter, minimal_model, periods_agm
from .errors import ComputationFailure, FtclError, HypothesisFailure, NotOrdinary, SingularCurve
from .lfun import LFunctionSpec, curve_spec, dirichlet_spec, rankin_spec, twist_spec, value_afe
from .measures import (
    CharacterOnZ3Star,
    analytic_side,
    congruence_setup,
    congruence_verdict,
    exact_measure_value,
    generalized_bernoulli,
    katz_evaluation,
    reconcile_interpolation,
    unit_free_ratio,
)
from .modsym import (
    build_space,
    eigenvalues_on_line,
    idempotent_by_powers,
    neron_period_ratio,
    ordinary_idempotent,
    period_integrals,
    period_terms,
    sturm_bound,
    target_system,
)
from .report import (
    COMPUTATION_FAILURE,
    HYPOTHESIS_FAILURE,
    VERIFIED,
    VIOLATED,
    HypothesisResult,
    LValueReport,
    PeriodsReport,
    SelftestReport,
    SkippedPair,
    SuiteResult,
    SurveyReport,
    SurveySummary,
    VerificationReport,
)
from .rings import P, Padic3, hensel_unit_root, recognize_rational, v3
from .series import DirichletCharacter, QExpansion, hecke_T, prime_list
from .validation.validators import InputValidator

logger = logging.getLogger(__name__)

PRECISION_SENSITIVE_BELOW = 10
INTERPOLATION_TOLERANCE = 1e-10
INTERPOLATION_RESIDUALS = ("fe_curve", "unit_free_ratio", "interpolation_rho", "interpolation_sigma")


def curve_key(E: EllipticCurveQ) -> str:
    """Cache-safe name of a curve: its label, or its a-invariants."""
    return E.label or "ainv" + "_".join(str(a) for a in E.a_invariants)


def cached_an_list(E: EllipticCurveQ, bound: int, cache: Cache) -> list[int]:
    """a(0..bound) through the ``an_<label>_<B>.txt`` cache entry."""
    an = cache.get_or_create(f"an_{curve_key(E)}_{bound}.txt", parse_int_lines,
                             lambda: an_list(E, bound), dump_int_lines)
    if len(an) != bound + 1:
        raise ComputationFailure(f"cached a_n list for {E.name} has {len(an)} entries, expected {bound + 1}")
    return an


class _Stages:
    """Wall-clock timings per pipeline stage and the stage that was running last."""

    def __init__(self):
        self.timings: dict[str, float] = {}
        self.current: str | None = None

    @contextmanager
    def __call__(self, name: str) -> Iterator[None]:
        self.current = name
        start = time.perf_counter()
        try:
            yield
        finally:
            self.timings[name] = round(time.perf_counter() - start, 3)
        logger.info("stage %s done in %.2fs", name, self.timings[name])


def _float(x) -> float:
    return float(mp.re(x)) if isinstance(x, mp.mpc) else float(x)


def verify(curve: EllipticCurveQ | str, m: int, phi: CharacterOnZ3Star | str | None = None,
           relaxed: bool = False, interpolation: bool = False, settings: FtclConfig | None = None,
           cache: Cache | None = None) -> VerificationReport:
    """Compute R(rho) and R(sigma) by the exact route and decide the mod-3 congruence.

    Hypothesis failures and computation failures are reported in the
    returned report rather than raised; the report's ``exit_code`` carries
    the outcome.

    Args:
        curve: Curve label, a-invariant string or a curve.
        m: Cube-free integer > 1 prime to 3.
        phi: Character of Z_3^x; the trivial character if omitted.
        relaxed: Accept curves whose only failing hypothesis is 3 | i_q and
            multiply in the local factors at those primes.
        interpolation: Also reconcile the exact values with the analytic
            interpolation formula; a residual above INTERPOLATION_TOLERANCE
            makes the run a computation failure.
        settings: Configuration; the global configuration if omitted.
        cache: Cache for a_n lists and Hecke matrices.

    Returns:
        The verification report.
    """
    settings = settings or config
    cache = cache or Cache(settings.cache_dir)
    M, D = settings.precision, settings.digits
    stages = _Stages()
    if isinstance(phi, str) or phi is None:
        phi = InputValidator.parse_phi(phi)

    try:
        E = curve if isinstance(curve, EllipticCurveQ) else InputValidator.parse_curve(curve, settings.curve_table)
    except SingularCurve as exc:
        return VerificationReport(config_fingerprint=settings.fingerprint(), curve=str(curve), a_invariants=[],
                                  conductor=0, m=m, phi=phi.label(), precision=M, status=HYPOTHESIS_FAILURE,
                                  failed_stage="curve", error=str(exc))

    fields: dict = dict(config_fingerprint=settings.fingerprint(), curve=E.name, a_invariants=list(E.a_invariants),
                        conductor=E.conductor, m=m, phi=phi.label(), precision=M)

    def finish(status: str, **extra) -> VerificationReport:
        report = VerificationReport(**fields, **extra, status=status, timings=stages.timings)
        logger.info("%s", report.summary_line())
        return report

    with stages("hypotheses"):
        hypotheses = hypothesis_filter(E, m)
    fields["hypotheses"] = [HypothesisResult(name=c.name, passed=c.passed, detail=c.detail)
                            for c in hypotheses.conditions]
    relaxed_primes: list[int] = []
    if not hypotheses.passed:
        if relaxed and hypotheses.relaxable:
            relaxed_primes = list(hypotheses.n_diff)
            logger.info("%s: relaxed mode over N_diff = %s", E.name, relaxed_primes)
        else:
            return finish(HYPOTHESIS_FAILURE, failed_stage="hypotheses",
                          error="failed conditions: " + ", ".join(hypotheses.failures))
    fields["relaxed_primes"] = relaxed_primes

    try:
        with stages("setup"):
            data = euler_data(m)
            fields["r"] = data.r
            level = P * E.conductor * m * m
            an = cached_an_list(E, max(sturm_bound(level) + 1, 120), cache)
            setup = congruence_setup(E, m, M, cache, an)
        fields.update(u=setup.u.digits(), c_valuation=setup.c_valuation, t=setup.t)

        with stages("measure_rho"):
            rho = exact_measure_value(setup, data, "rho", phi)
        with stages("measure_sigma"):
            sigma = exact_measure_value(setup, data, "sigma", phi)
        rho_padic, sigma_padic = rho.to_padic(M), sigma.to_padic(M)
        fields.update(measure_rho=rho_padic.digits(), measure_sigma=sigma_padic.digits())

        with stages("verdict"):
            verdict = congruence_verdict(setup, rho_padic, sigma_padic, relaxed_primes)
        fields.update(r_rho=verdict.r_rho.digits(), r_sigma=verdict.r_sigma.digits(),
                      integral=verdict.integral, difference_valuation=verdict.difference_valuation)
    except (HypothesisFailure, NotOrdinary) as exc:
        conditions = getattr(exc, "conditions", None) or ["ordinary"]
        return finish(HYPOTHESIS_FAILURE, failed_stage=stages.current,
                      error=f"{exc} (failed conditions: {', '.join(conditions)})")
    except ComputationFailure as exc:
        logger.error("%s, m=%d failed at %s: %s", E.name, m, stages.current, exc)
        return finish(COMPUTATION_FAILURE, failed_stage=stages.current, error=str(exc))

    fields["residuals"] = {}
    if interpolation:
        with stages("interpolation"):
            fields["residuals"] = _interpolation_residuals(setup, data, rho, sigma, D)
        failures = _interpolation_failures(fields["residuals"])
        if failures:
            logger.error("interpolation does not reconcile for %s, m=%d: %s", E.name, m, ", ".join(failures))
            return finish(COMPUTATION_FAILURE, failed_stage="interpolation",
                          error=f"residuals above {INTERPOLATION_TOLERANCE:g}: " + ", ".join(failures))

    if not verdict.holds:
        logger.error("congruence violated for %s, m=%d: R(rho)=%s, R(sigma)=%s",
                     E.name, m, verdict.r_rho, verdict.r_sigma)
        return finish(VIOLATED)
    return finish(VERIFIED)


LFUNCTION_KINDS = ("curve", "dirichlet", "twist", "rankin")


def lfunction_from_request(kind: str, curve: str | None = None, character: str | None = None, m: int | None = None,
                           side: str = "rho", settings: FtclConfig | None = None) -> LFunctionSpec:
    """Build an L-function from the fields of an lvalue request.

    Args:
        kind: One of "curve", "dirichlet", "twist", "rankin".
        curve: Curve label or a-invariants (curve, twist, rankin).
        character: Dirichlet character label "modulus:order:k1,k2,..." (dirichlet, twist).
        m: Cube-free twist parameter (rankin).
        side: "rho" or "sigma" (rankin).
    """
    settings = settings or config
    if kind not in LFUNCTION_KINDS:
        raise ValueError(f"Unknown L-function kind {kind!r}; expected one of {', '.join(LFUNCTION_KINDS)}")
    if kind == "dirichlet":
        if not character:
            raise ValueError("A dirichlet L-function needs a character label")
        return dirichlet_spec(DirichletCharacter.from_label(character))
    if not curve:
        raise ValueError(f"A {kind} L-function needs a curve")
    E = InputValidator.parse_curve(curve, settings.curve_table)
    if kind == "curve":
        return curve_spec(E)
    if kind == "twist":
        if not character:
            raise ValueError("A twisted L-function needs a character label")
        return twist_spec(E, DirichletCharacter.from_label(character))
    if m is None:
        raise ValueError("A rankin L-function needs m")
    return rankin_spec(E, euler_data(m), side)


def evaluate_lvalue(spec: LFunctionSpec, s=1, digits: int | None = None) -> LValueReport:
    D = digits or config.digits
    result = value_afe(spec, s, D)
    return LValueReport(name=spec.name, s=str(s), value=mp.nstr(result.value, D), sign=mp.nstr(result.sign, 12),
                        fe_residual=mp.nstr(result.fe_residual, 3), terms=result.terms, digits=D)


def curve_periods(E: EllipticCurveQ, digits: int | None = None) -> PeriodsReport:
    D = digits or config.digits
    omega_plus, omega_minus = periods_agm(E, D)
    return PeriodsReport(curve=E.name, conductor=E.conductor, omega_plus=mp.nstr(omega_plus, D),
                         omega_minus=mp.nstr(omega_minus, D), digits=D)


def _interpolation_residuals(setup, data, rho, sigma, digits: int) -> dict[str, float | None]:
    """Analytic residuals; a failed evaluation is logged and recorded as a missing value."""
    residuals: dict[str, float | None] = dict.fromkeys(INTERPOLATION_RESIDUALS)
    try:
        residuals["fe_curve"] = _float(value_afe(curve_spec(setup.curve), 1, digits).fe_residual)
        with mp.workdps(digits + config.guard_digits):
            u = setup.theta.to_complex(0)
            sides = {side: analytic_side(setup.curve, data, side, u, digits) for side in ("rho", "sigma")}
            residuals["unit_free_ratio"] = _float(unit_free_ratio(rho, sigma, sides["rho"], sides["sigma"], u))
        result = reconcile_interpolation(setup, data, rho, sigma, digits=digits)
        residuals["interpolation_rho"] = _float(result.residual_rho)
        residuals["interpolation_sigma"] = _float(result.residual_sigma)
    except ComputationFailure as exc:
        logger.warning("interpolation incomplete: %s", exc)
    return residuals


def _interpolation_failures(residuals: dict[str, float | None]) -> list[str]:
    return [f"{name} = {value:.3g}" if value is not None else f"{name} missing"
            for name, value in residuals.items() if value is None or value > INTERPOLATION_TOLERANCE]


def survey(curves: list[str] | str, m_list: list[int], relaxed: bool = False,
           settings: FtclConfig | None = None, cache: Cache | None = None) -> SurveyReport:
    """Verify every admissible (curve, m) pair of a battery.

    ``curves`` is a list of labels or a selection string understood by
    ``InputValidator.parse_curve_selection`` (file, list or conductor range).
    """
    settings = settings or config
    cache = cache or Cache(settings.cache_dir)
    if isinstance(curves, str):
        curves = InputValidator.parse_curve_selection(curves, settings.curve_table)

    admissible: list[tuple[EllipticCurveQ, int]] = []
    skipped: list[SkippedPair] = []
    for label in curves:
        try:
            E = InputValidator.parse_curve(label, settings.curve_table)
        except ValueError as exc:
            skipped.extend(SkippedPair(curve=label, m=m, reasons=[str(exc)]) for m in m_list)
            continue
        for m in m_list:
            report = hypothesis_filter(E, m)
            if report.passed or relaxed and report.relaxable:
                admissible.append((E, m))
            else:
                skipped.append(SkippedPair(curve=E.name, m=m, reasons=report.failures))

    logger.info("survey: %d admissible pairs, %d skipped", len(admissible), len(skipped))
    with ThreadPoolExecutor(max_workers=settings.workers) as pool:
        rows = list(pool.map(lambda pair: verify(pair[0], pair[1], relaxed=relaxed, settings=settings,
                                                 cache=cache), admissible))

    verified = sum(row.status == VERIFIED for row in rows)
    violated = sum(row.status == VIOLATED for row in rows)
    failures = sum(row.status == COMPUTATION_FAILURE for row in rows)
    pairs = len(rows) + len(skipped)
    if not rows:
        message = f"no admissible pairs among {pairs}"
    elif verified == len(rows):
        message = f"all {verified} admissible pairs verified"
    else:
        message = f"{verified} of {len(rows)} admissible pairs verified, {violated} violated, {failures} failed"
    summary = SurveySummary(pairs=pairs, admissible=len(rows), verified=verified, violated=violated,
                            computation_failures=failures, message=message)
    return SurveyReport(rows=rows, skipped=skipped, summary=summary)


# Self test

def _check(condition: bool, message: str) -> None:
    if not condition:
        raise AssertionError(message)


def _suite_rings(settings: FtclConfig, cache: Cache) -> str:
    M = settings.precision
    u = hensel_unit_root(-1, M)
    w = Padic3.from_int(P, M) / u
    _check(u * w == Padic3.from_int(P, M), "u w != 3")
    _check((u * u + u + P).is_zero(), "u is not a root of X^2 + X + 3")
    return f"unit root of X^2 + X + 3 is {u.digits()}"


def _suite_series(settings: FtclConfig, cache: Cache) -> str:
    g = g_sigma_coeffs(20)
    _check(g[0] == Fraction(1, 6) and g[1] == 1 and g[4] == 1, "E_1(eps3) coefficients")
    E = InputValidator.parse_curve("11a1", settings.curve_table)
    f = QExpansion.from_list(cached_an_list(E, 200, cache), 2, 11)
    t2 = hecke_T(f, 2)
    _check(all(t2[n] == -2 * f[n] for n in range(t2.n_max + 1)), "f_11a1 is not a T_2 eigenform")
    return "E_1(eps3) and T_2 f = -2 f"


def _suite_ellcurve(settings: FtclConfig, cache: Cache) -> str:
    E = InputValidator.parse_curve("11a1", settings.curve_table)
    _check(E.conductor == 11, f"conductor {E.conductor}")
    _check(ap(E, 2) == -2 and ap(E, 3) == -1, "a_2, a_3 of 11a1")
    omega_plus, _ = periods_agm(E, 30)
    _check(abs(omega_plus - mp.mpf("1.2692093042795")) < mp.mpf(10) ** -12, f"Omega+ = {omega_plus}")
    singular = False
    try:
        minimal_model((0, 0, 0, 0, 0))
    except SingularCurve:
        singular = True
    _check(singular, "y^2 = x^3 was accepted")
    return "11a1 conductor, a_p and Omega+"


def _suite_artin(settings: FtclConfig, cache: Cache) -> str:
    bad = {m: trace_congruence_defect(m, 2000) for m in (2, 5, 7, 10, 11, 17)}
    _check(all(n is None for n in bad.values()), f"termwise congruence fails: {bad}")
    return "g_rho = g_sigma|iota_m mod 3 for n <= 2000"


def _suite_lfun(settings: FtclConfig, cache: Cache) -> str:
    digits = min(settings.digits, 30)
    result = value_afe(dirichlet_spec(DirichletCharacter.eps3()), 1, digits)
    with mp.workdps(digits):
        target = mp.pi / (3 * mp.sqrt(3))
        _check(abs(result.value - target) < mp.mpf(10) ** -(digits - 8), f"L(eps3, 1) = {result.value}")
    return f"L(eps3, 1) with residual {mp.nstr(result.fe_residual, 3)}"


def _suite_modsym(settings: FtclConfig, cache: Cache) -> str:
    space = build_space(11, 0)
    _check(space.manin_relations_hold(), "Manin relations at level 11")
    t2, t3 = space.hecke_matrix(2), space.hecke_matrix(3)
    _check((t2 @ t3 == t3 @ t2).all(), "T_2 and T_3 do not commute")
    E = InputValidator.parse_curve("11a1", settings.curve_table)
    target = target_system(E, 11)
    eigenvalues = eigenvalues_on_line(space, target, prime_list(50))
    wrong = [q for q, a in eigenvalues.items() if a != target.an[q]]
    _check(not wrong, f"eigenvalues on the target line differ from a_q at q = {wrong}")
    digits = min(settings.digits, 30)
    form = QExpansion.from_list(cached_an_list(E, period_terms(11, digits), cache), 2, 11)
    periods = period_integrals(space, form, target, digits)
    omega_plus, omega_minus = periods_agm(E, digits)
    with mp.workdps(digits):
        ratio = neron_period_ratio(periods.omega_sigma, omega_plus, omega_minus)
        _check(abs(ratio.real) < mp.mpf(10) ** -(digits // 2), f"period ratio {ratio} is not imaginary")
        rational = recognize_rational(ratio.imag, 10 ** 4, mp.mpf(10) ** -(digits // 2))
    _check(rational != 0 and v3(rational) == 0, f"period ratio {rational} is not a 3-adic unit")
    return f"level 11: dimension {space.dimension}, period ratio {rational}i"


def _suite_ordinary(settings: FtclConfig, cache: Cache) -> str:
    M = settings.precision
    u3 = build_space(33, 0).hecke_matrix(3)
    e = ordinary_idempotent(u3, M)
    modulus = P ** M
    _check(((e @ e - e) % modulus == 0).all(), "e^2 != e")
    _check(((e - idempotent_by_powers(u3, M)) % modulus == 0).all(), "projector constructions disagree")
    return f"ordinary idempotent at level 33 mod 3^{M}"


def _suite_measures(settings: FtclConfig, cache: Cache) -> str:
    _check(generalized_bernoulli(DirichletCharacter.eps3(), 1) == Fraction(-1, 3), "B_{1,eps3}")
    katz = katz_evaluation(1, 1, DirichletCharacter.eps3(), 10)
    _check(katz[0] == 0, f"interpolated constant term {katz[0]}")
    return "Bernoulli numbers and Katz evaluation"


def _suite_congruence(settings: FtclConfig, cache: Cache) -> str:
    report = verify("11a1", 2, settings=settings, cache=cache)
    _check(report.status == VERIFIED, report.summary_line())
    return report.summary_line()


def _suite_cache(settings: FtclConfig, cache: Cache) -> str:
    with TemporaryDirectory() as tmp:
        scratch = Cache(Path(tmp))
        E = InputValidator.parse_curve("11a1", settings.curve_table)
        scratch.write(f"an_{curve_key(E)}_50.txt", "not a number\n")
        an = cached_an_list(E, 50, scratch)
        _check(an == an_list(E, 50), "regenerated a_n list differs")
        _check(scratch.read(f"an_{curve_key(E)}_50.txt", parse_int_lines) == an, "entry was not rewritten")
    return "corrupt entry invalidated and regenerated"


# (name, function, precision sensitive)
SUITES: tuple[tuple[str, Callable[[FtclConfig, Cache], str], bool], ...] = (
    ("rings", _suite_rings, False),
    ("series", _suite_series, False),
    ("ellcurve", _suite_ellcurve, False),
    ("artin", _suite_artin, False),
    ("lfun", _suite_lfun, False),
    ("modsym", _suite_modsym, False),
    ("ordinary", _suite_ordinary, True),
    ("measures", _suite_measures, False),
    ("cache", _suite_cache, False),
    ("congruence", _suite_congruence, True),
)


def selftest(settings: FtclConfig | None = None, cache: Cache | None = None,
             only: list[str] | None = None) -> SelftestReport:
    """Run the module suites; precision-sensitive ones are skipped below 3^10."""
    settings = settings or config
    cache = cache or Cache(settings.cache_dir)
    results = []
    for name, suite, sensitive in SUITES:
        if only and name not in only:
            continue
        if sensitive and settings.precision < PRECISION_SENSITIVE_BELOW:
            results.append(SuiteResult(name=name, status="skipped",
                                       detail=f"needs precision >= {PRECISION_SENSITIVE_BELOW}"))
            continue
        try:
            detail = suite(settings, cache)
        except (AssertionError, FtclError) as exc:
            logger.error("suite %s failed: %s", name, exc)
            results.append(SuiteResult(name=name, status="failed", detail=str(exc)))
            continue
        results.append(SuiteResult(name=name, status="passed", detail=detail))
    return SelftestReport(precision=settings.precision, suites=results)
