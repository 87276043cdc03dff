"""L-value tools for the ftcl MCP server."""

from typing import Any

import mpmath as mp

from .base import ftcl_tool
from ..config import config
from ..lfun import solve_sign
from ..verify import evaluate_lvalue, lfunction_from_request


@ftcl_tool
def l_value(kind: str, curve: str = "", character: str = "", m: int = 0, side: str = "rho",
            s: float = 1.0, digits: int = 0) -> dict[str, Any]:
    """Evaluate an L-function by the approximate functional equation.

    Args:
        kind: One of curve, dirichlet, twist, rankin.
        curve: Curve label or a-invariants (curve, twist and rankin).
        character: Dirichlet character label modulus:order:k1,k2,... (dirichlet and twist).
        m: Twist parameter (rankin).
        side: rho or sigma (rankin).
        s: Evaluation point.
        digits: Decimal digits; 0 means the configured precision.

    Returns:
        The value, the sign used and the functional equation residual.

    Raises:
        ValueError: If the request is incomplete or the evaluation fails.
    """
    spec = lfunction_from_request(kind, curve or None, character or None, m or None, side)
    point = int(s) if float(s).is_integer() else s
    return evaluate_lvalue(spec, point, digits or config.digits).model_dump(by_alias=True)


@ftcl_tool
def root_number(kind: str, curve: str = "", character: str = "", m: int = 0, side: str = "rho",
                digits: int = 0) -> dict[str, Any]:
    """Solve the sign of the functional equation numerically.

    Args:
        kind: One of curve, dirichlet, twist, rankin.
        curve: Curve label or a-invariants.
        character: Dirichlet character label.
        m: Twist parameter (rankin).
        side: rho or sigma (rankin).
        digits: Decimal digits; 0 means the configured precision.

    Returns:
        The L-function name and its root number.
    """
    spec = lfunction_from_request(kind, curve or None, character or None, m or None, side)
    spec.sign = None
    sign = solve_sign(spec, digits or config.digits)
    return {"name": spec.name, "root_number": mp.nstr(mp.mpmathify(sign), 12)}
