"""Numerical laboratory for Lyapunov exponents of linear cocycles.

Computes finite-scale Lyapunov exponents of GL(d) cocycles over
Diophantine torus shifts, verifies the avalanche principle as a
deterministic matrix lemma, measures large-deviation sets empirically,
probes convergence rates and parameter regularity, and runs the random
matrix product counterpart.
"""

from __future__ import annotations

__version__ = "0.1.0"

from .errors import ConfigError, NumericalRefusal, ValidationError

__all__ = ["ConfigError", "NumericalRefusal", "ValidationError", "__version__"]
