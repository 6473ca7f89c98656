"""Finite, exactly audited models of rigidity sets, recurrence and popular differences."""

__version__ = "0.1.0"
