"""Correlated noise across the oversampled receive streams.

Matched filtering with a raised-cosine overall response correlates the ``G``
samples taken inside one symbol period. The covariance is Toeplitz in the
fractional offsets ``g/G``; samples at different symbol indices stay
independent.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import toeplitz

log = logging.getLogger(__name__)


def rc_pulse(t, rolloff: float):
    """Raised-cosine pulse with unit symbol period, ``rolloff`` in ``[0, 1]``."""
    t = np.asarray(t, dtype=float)
    base = np.sinc(t)
    if rolloff == 0:
        return base
    x = 2.0 * rolloff * t
    singular = np.isclose(np.abs(x), 1.0)
    denom = np.where(singular, 1.0, 1.0 - x * x)
    value = base * np.cos(np.pi * rolloff * t) / denom
    limit = (np.pi / 4.0) * np.sinc(1.0 / (2.0 * rolloff))
    return np.where(singular, limit, value)


@dataclass(frozen=True)
class NoiseShaper:
    """Stream covariance ``C_w`` and its lower Cholesky factor ``L_C``.

    ``L_C @ L_C^H == C_w`` so that ``L_C @ w_uc`` has covariance ``C_w`` when
    ``w_uc`` is white with unit variance.
    """

    G: int
    sigma_w_sq: float
    rolloff: float
    C_w: np.ndarray
    L_C: np.ndarray


@dataclass(frozen=True)
class NoiseBlock:
    streams: np.ndarray  # G x N

    def __getitem__(self, g: int) -> np.ndarray:
        return self.streams[g]

    def __len__(self) -> int:
        return self.streams.shape[0]


def build_shaper(G: int, sigma_w_sq: float, rolloff: float = 0.0) -> NoiseShaper:
    if G < 1:
        raise ValueError("G must be >= 1")
    first_row = 0.5 * sigma_w_sq * rc_pulse(np.arange(G) / G, rolloff)
    C = toeplitz(first_row).astype(complex)
    if sigma_w_sq == 0:
        return NoiseShaper(G, sigma_w_sq, rolloff, C, np.zeros_like(C))
    try:
        L = np.linalg.cholesky(C)
    except np.linalg.LinAlgError:
        log.warning(
            "stream covariance is not positive definite (G=%d, rolloff=%g); "
            "using an eigenvalue-clipped factor",
            G,
            rolloff,
        )
        w, V = np.linalg.eigh(C)
        B = V * np.sqrt(np.clip(w, 0.0, None))
        # lower-triangular factor of the clipped matrix via QR of B^H
        _, R = np.linalg.qr(B.conj().T)
        L = R.conj().T
    return NoiseShaper(G, sigma_w_sq, rolloff, C, L)


def sample_noise(shaper: NoiseShaper, N: int, rng: np.random.Generator) -> NoiseBlock:
    """Draw ``G`` correlated streams of length ``N``."""
    w_uc = (rng.standard_normal((shaper.G, N)) + 1j * rng.standard_normal((shaper.G, N))) / np.sqrt(2.0)
    return NoiseBlock(shaper.L_C @ w_uc)
