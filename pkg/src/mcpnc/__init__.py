"""Joint iterative detection and phase-noise compensation for coded multichannel links."""

__version__ = "0.1.0"
