"""Measurement-based noiseless linear amplification simulator"""

__version__ = "0.1.0"
