"""Discrete affine Fourier transform (DAFT) used as the AFDM modulator."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def chirp_diagonal(c: float, N: int) -> np.ndarray:
    """Diagonal of a chirp matrix: ``exp(-j 2 pi c n^2)`` for ``n = 0..N-1``."""
    n = np.arange(N, dtype=float)
    # reduce the phase mod 1 before exponentiating to keep precision at large n
    return np.exp(-2j * np.pi * np.mod(c * n * n, 1.0))


def cpp_phase(n, c1: float, N: int):
    """Chirp-periodic-prefix phase function ``c1 * (N^2 - 2 N n)``."""
    return c1 * (N * N - 2 * N * np.asarray(n, dtype=float))


@dataclass(frozen=True)
class AfdmTransform:
    """Unitary DAFT ``A = L2 F L1`` with chirp rates ``c1`` and ``c2``.

    ``modulate`` applies ``A^H`` and ``demodulate`` applies ``A``; both run as
    chirp scaling around a normalized FFT. :attr:`matrix` builds the dense
    ``N x N`` form for oracle checks and for the effective-channel sandwich.
    """

    N: int
    c1: float
    c2: float = 0.0
    lambda1: np.ndarray = field(init=False, repr=False, compare=False)
    lambda2: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.N < 1:
            raise ValueError("N must be >= 1")
        object.__setattr__(self, "lambda1", chirp_diagonal(self.c1, self.N))
        object.__setattr__(self, "lambda2", chirp_diagonal(self.c2, self.N))

    @classmethod
    def from_params(cls, params) -> "AfdmTransform":
        return cls(params.N, params.chirp_c1, params.c2)

    def _check(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v)
        if v.shape[0] != self.N:
            raise ValueError(f"expected leading dimension {self.N}, got {v.shape[0]}")
        return v

    def _bcast(self, d: np.ndarray, v: np.ndarray) -> np.ndarray:
        return d.reshape((-1,) + (1,) * (v.ndim - 1))

    def modulate(self, x: np.ndarray) -> np.ndarray:
        """IDAFT ``s = L1^H F^H L2^H x`` along axis 0."""
        x = self._check(x)
        u = np.fft.ifft(self._bcast(self.lambda2.conj(), x) * x, axis=0, norm="ortho")
        return self._bcast(self.lambda1.conj(), x) * u

    def demodulate(self, r: np.ndarray) -> np.ndarray:
        """DAFT ``y = L2 F L1 r`` along axis 0."""
        r = self._check(r)
        u = np.fft.fft(self._bcast(self.lambda1, r) * r, axis=0, norm="ortho")
        return self._bcast(self.lambda2, r) * u

    @property
    def matrix(self) -> np.ndarray:
        F = np.fft.fft(np.eye(self.N), axis=0, norm="ortho")
        return self.lambda2[:, None] * F * self.lambda1[None, :]

    def dft_matrix(self) -> np.ndarray:
        n = np.arange(self.N)
        return np.exp(-2j * np.pi * np.outer(n, n) / self.N) / np.sqrt(self.N)
