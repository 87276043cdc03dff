"""MCP tools for ftcl operations."""
