"""Parsing and validation of user supplied curves, twists and lists."""
