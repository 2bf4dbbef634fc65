"""Multi-bit quantized LMPT detection of sparse stochastic signals over binary symmetric channels."""

__version__ = "0.1.0"
