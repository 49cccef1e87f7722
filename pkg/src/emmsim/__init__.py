"""Energy-aware mobility management for MEC-enabled ultra-dense networks."""

__version__ = "0.1.0"
