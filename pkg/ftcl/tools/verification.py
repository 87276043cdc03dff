"""Congruence verification tools for the ftcl MCP server."""

from typing import Any

from .base import ftcl_tool, get_current_workspace
from ..validation.validators import InputValidator
from ..verify import survey, verify


@ftcl_tool
def verify_congruence(curve: str, m: int, phi: str = "", relaxed: bool = False,
                      interpolation: bool = False) -> dict[str, Any]:
    """Verify the mod-3 congruence between R(rho) and R(sigma) for one curve and one m.

    Args:
        curve: Curve label or a-invariants.
        m: Cube-free integer > 1 prime to 3N.
        phi: Character of Z_3^x as tame,t,wild; empty for the trivial character.
        relaxed: Multiply in the local factors at the primes q with 3 | i_q.
        interpolation: Also reconcile with the analytic interpolation formula (slow);
            residuals above 1e-10 fail the run.

    Returns:
        The verification report; ``exit_code`` is 0 verified, 2 hypothesis
        failure, 3 computation failure, 4 congruence violated.
    """
    report = verify(curve, m, InputValidator.parse_phi(phi), relaxed=relaxed, interpolation=interpolation,
                    cache=get_current_workspace())
    return {**report.payload(include_timings=True), "exit_code": report.exit_code}


@ftcl_tool
def survey_congruences(curves: str, m_list: str = "2,5,7,10,11,17", relaxed: bool = False) -> dict[str, Any]:
    """Verify every admissible pair of a battery of curves and values of m.

    Args:
        curves: Comma separated labels or a conductor range such as 11-50.
        m_list: Comma separated values of m.
        relaxed: Admit pairs whose only failing hypothesis is 3 | i_q.

    Returns:
        Report rows, skipped pairs with reasons, and a summary.
    """
    report = survey(curves, InputValidator.parse_m_list(m_list), relaxed=relaxed, cache=get_current_workspace())
    return {
        "summary": report.summary.model_dump(),
        "rows": [row.payload() for row in report.rows],
        "skipped": [pair.model_dump() for pair in report.skipped],
        "exit_code": report.exit_code,
    }
