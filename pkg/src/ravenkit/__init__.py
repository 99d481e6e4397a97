"""Generation, auditing and solving of attribute-based Raven-style matrices."""

__version__ = "0.1.0"
