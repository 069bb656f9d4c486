"""Current version of package fullstab."""

__version__ = "0.1.0"
