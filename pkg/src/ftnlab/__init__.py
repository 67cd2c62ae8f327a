"""Faster-than-Nyquist BPSK signaling laboratory."""

from .pulse import IsiTaps, PulseConfig, isi_taps, rc_value
from .isi import (
    FactorizationError,
    IsiMatrix,
    WhitenedTaps,
    build_isi_matrix,
    spectral_factorize,
    whiten_model,
)

__all__ = [
    "PulseConfig",
    "IsiTaps",
    "rc_value",
    "isi_taps",
    "FactorizationError",
    "WhitenedTaps",
    "IsiMatrix",
    "spectral_factorize",
    "build_isi_matrix",
    "whiten_model",
]

__version__ = "0.1.0"
