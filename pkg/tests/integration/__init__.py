"""Integration tests for the judge CLI."""
