"""Maximum-entropy solver for quantum state compatibility problems."""

__version__ = "0.1.0"
