"""WBANet: wavelet-attention change detection for SAR image pairs."""

__version__ = "0.1.0"
