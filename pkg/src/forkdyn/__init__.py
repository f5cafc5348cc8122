"""Fork dynamics of a proof-of-work blockchain under propagation delay."""

__version__ = "0.1.0"
