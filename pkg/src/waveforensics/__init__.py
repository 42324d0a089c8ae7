"""Wavelet sub-band forensics toolkit.

Detects the up-sampling fingerprint of generated images by training a
compact CNN on wavelet sub-band mosaics instead of raw pixels.
"""

__version__ = "0.1.0"
