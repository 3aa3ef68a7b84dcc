"""Repeated-game solver for fully nonlinear PDEs with Neumann conditions."""
from __future__ import annotations

__version__ = "0.1.0"
