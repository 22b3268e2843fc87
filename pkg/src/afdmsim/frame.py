"""QPSK framing: pilot/data partition, Gray mapping and hard decisions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from afdmsim.config import SystemParams, pilot_rng


def qpsk_map(bits, E_S: float = 1.0) -> np.ndarray:
    """Gray-map bit pairs: the first bit sets the real sign, the second the imaginary.

    ``00 -> c(1+j)``, ``01 -> c(1-j)``, ``10 -> c(-1+j)``, ``11 -> c(-1-j)``
    with ``c = sqrt(E_S/2)``. Accepts any even-length bit sequence.
    """
    b = np.asarray(bits, dtype=np.int8).reshape(-1)
    if b.size % 2:
        raise ValueError("QPSK needs an even number of bits")
    c = np.sqrt(E_S / 2.0)
    return c * ((1 - 2 * b[0::2]) + 1j * (1 - 2 * b[1::2]))


def qpsk_demap(symbols) -> np.ndarray:
    """Inverse of :func:`qpsk_map` by sign; zero components map to bit 0."""
    s = np.asarray(symbols).reshape(-1)
    bits = np.empty(2 * s.size, dtype=np.int8)
    bits[0::2] = s.real < 0
    bits[1::2] = s.imag < 0
    return bits


def hard_decide(soft_symbols) -> np.ndarray:
    # nearest QPSK point is the quadrant, so sign detection is exact
    return qpsk_demap(soft_symbols)


def pilot_symbols(params: SystemParams) -> np.ndarray:
    """Pilot sequence shared by transmitter and receiver for this master seed."""
    rng = pilot_rng(params.seed)
    bits = rng.integers(0, 2, 2 * params.N)
    return qpsk_map(bits, params.E_S)[: params.N_P]


@dataclass(frozen=True)
class Frame:
    x: np.ndarray
    pilot_idx: np.ndarray
    data_idx: np.ndarray
    data_bits: np.ndarray

    @property
    def pilots(self) -> np.ndarray:
        return self.x[self.pilot_idx]

    @property
    def data(self) -> np.ndarray:
        return self.x[self.data_idx]


def build_frame(
    params: SystemParams, data_bits, rng: np.random.Generator | None = None
) -> Frame:
    """``N_P`` pilots at the head of the frame followed by Gray-mapped data.

    Pilots come from the pilot stream of the master seed, so ``rng`` is not
    consumed; it is accepted to keep a uniform builder signature.
    """
    data_bits = np.asarray(data_bits, dtype=np.int8).reshape(-1)
    n_data = params.N - params.N_P
    if data_bits.size != 2 * n_data:
        raise ValueError(f"expected {2 * n_data} data bits, got {data_bits.size}")
    x = np.empty(params.N, dtype=complex)
    pilot_idx = np.arange(params.N_P)
    data_idx = np.arange(params.N_P, params.N)
    x[pilot_idx] = pilot_symbols(params)
    x[data_idx] = qpsk_map(data_bits, params.E_S)
    return Frame(x=x, pilot_idx=pilot_idx, data_idx=data_idx, data_bits=data_bits)
