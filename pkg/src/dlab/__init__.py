"""Discretized set calculus over normed division algebras."""

__version__ = "0.1.0"

from . import algebra, dset, energy, lab, setops, structure  # noqa: F401
