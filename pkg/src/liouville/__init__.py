"""Exact-arithmetic tools for Liouville numbers: oracles, continued fractions,
witness certificates, class probes and constructions of Liouville-preserving maps."""

__version__ = "0.1.0"
