"""Loop-group (DPW) construction of harmonic maps into symmetric spaces and
their compact duals, with a worked Willmore-surface example."""

__version__ = "0.1.0"
