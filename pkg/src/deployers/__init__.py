"""Deployers - agent-based macroeconomic simulator.

This package deploys an agent-based economy from a Social Accounting Matrix
(or from per-country SAMs extracted from an inter-country input-output table),
calibrates it to a steady state, snapshots it and runs what-if scenarios,
optionally with several countries trading in lockstep.
"""

__version__ = "1.0.0"

__all__ = ["__version__"]
