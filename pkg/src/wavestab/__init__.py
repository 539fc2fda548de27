"""Output-feedback stabilization of 1-D wave equations with boundary disturbance."""

__version__ = "0.1.0"
