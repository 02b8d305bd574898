"""Incremental Datalog analysis engine with a stable-id fact extractor."""

__version__ = "0.1.0"
