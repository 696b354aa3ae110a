"""Approximate method of multipliers for distributed composite optimization.

Reference matrix-form engine, three distributed realizations (DAMM,
DAMM-SC, DAMM-SQ), presets for published special cases, a message-passing
harness, convergence instrumentation and an experiment CLI.
"""

__version__ = "0.1.0"
