"""Curve lookup tools for the ftcl MCP server."""

from typing import Any

from .base import ftcl_tool
from ..config import config
from ..ellcurve import ap, hypothesis_filter
from ..validation.validators import InputValidator
from ..verify import curve_periods as periods_report


@ftcl_tool
def lookup_curve(curve: str) -> dict[str, Any]:
    """Resolve a curve and return its minimal model and local data.

    Args:
        curve: Curve label such as 11a1, or five a-invariants a1,a2,a3,a4,a6.

    Returns:
        Minimal model, conductor, discriminant and per-prime reduction data.

    Raises:
        ValueError: If the label is unknown or the curve is singular.
    """
    E = InputValidator.parse_curve(curve, config.curve_table)
    return {
        "curve": E.name,
        "a_invariants": list(E.a_invariants),
        "conductor": E.conductor,
        "discriminant": E.discriminant,
        "a3": ap(E, 3) if E.conductor % 3 else None,
        "local_data": [
            {
                "prime": d.prime,
                "reduction": d.reduction,
                "kodaira": d.kodaira,
                "conductor_exponent": d.conductor_exponent,
                "tamagawa": d.tamagawa,
                "i_q": d.i_q,
            }
            for d in E.local_data
        ],
    }


@ftcl_tool
def check_hypotheses(curve: str, m: int) -> dict[str, Any]:
    """Check the standing hypotheses for a curve and a twist parameter m.

    Args:
        curve: Curve label or a-invariants.
        m: Cube-free integer > 1.

    Returns:
        Per-condition results, whether all pass, and whether relaxed mode applies.
    """
    E = InputValidator.parse_curve(curve, config.curve_table)
    report = hypothesis_filter(E, m)
    return {
        "curve": E.name,
        "m": m,
        "passed": report.passed,
        "relaxable": report.relaxable,
        "n_diff": list(report.n_diff),
        "conditions": [{"name": c.name, "passed": c.passed, "detail": c.detail} for c in report.conditions],
    }


@ftcl_tool
def curve_periods(curve: str, digits: int = 0) -> dict[str, Any]:
    """Compute the Neron periods of a curve by the AGM.

    Args:
        curve: Curve label or a-invariants.
        digits: Decimal digits; 0 means the configured precision.

    Returns:
        Omega+ and Omega- as decimal strings.
    """
    E = InputValidator.parse_curve(curve, config.curve_table)
    return periods_report(E, digits or config.digits).model_dump(by_alias=True)
