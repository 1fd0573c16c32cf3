"""Exact dynamics of the two-site Bose-Hubbard dimer through dynamical Bethe equations."""

from __future__ import annotations

__version__ = "0.1.0"
