"""
CBRT: cross-layer opportunistic routing for mobile ad hoc networks.

Fuzzy metric ranking, link lifetime prediction, opportunistic topology
control, a discrete-event simulator with CBRT and ExOR, and the experiment
harness that drives them.
"""

__version__ = "0.3.0"
