"""Main entry point for the ftcl MCP server."""

from mcp.server.fastmcp import FastMCP

from ftcl.tools import analytic, curves, verification

# Create the MCP server
mcp = FastMCP("ftcl")

tools_to_register = [
    # Curve tools
    curves.lookup_curve,
    curves.check_hypotheses,
    curves.curve_periods,

    # Analytic tools
    analytic.l_value,
    analytic.root_number,

    # Congruence tools
    verification.verify_congruence,
    verification.survey_congruences,
]

for tool in tools_to_register:
    mcp.tool()(tool)
