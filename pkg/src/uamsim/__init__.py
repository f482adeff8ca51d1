"""Urban air mobility traffic simulator: hexagonal airspace routing with
congestion-aware guidance, reciprocal collision avoidance, and MFD analytics."""

__version__ = "0.1.0"
