"""Observability-subspace distances for state space models."""

from ._core import *  # noqa: F401,F403
from ._core import ObsgrassError

__all__ = [name for name in dir() if not name.startswith("_")]
