"""One-shot vertex detection with second-order topological derivatives."""

__version__ = "0.1.0"
