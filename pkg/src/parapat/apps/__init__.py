"""Demonstration applications built on the parallel patterns."""
