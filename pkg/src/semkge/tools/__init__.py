"""Atomic tools behind the semkge-run commands."""
