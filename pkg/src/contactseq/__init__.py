"""Learning sequential-contact control with stage-aware rewards."""

__version__ = "0.1.0"
