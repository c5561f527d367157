"""Directed kernel fuzzing with LLM-style choice-table guidance on a synthetic kernel."""

__version__ = "0.1.0"
