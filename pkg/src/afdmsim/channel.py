"""Doubly-dispersive channel generation and the oversampled matrix model.

The time-domain channel seen by sample stream ``g`` is the circulant-like

    Psi_g = sum_p h_p * Phi_p * Omega_g**f_p * Pi**ell_p

with ``Phi_p`` the prefix phase correction, ``Omega_g`` the per-stream
Doppler ramp and ``Pi`` the forward cyclic shift. Sandwiching each unit-gain
path term between the DAFT and its inverse gives the effective blocks that
the receiver knows; stacking the ``G`` blocks of a path gives a ``GN x N``
dictionary column.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from afdmsim.afdm import AfdmTransform, cpp_phase
from afdmsim.config import SystemParams

PhaseFunction = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class PathSet:
    """Ground-truth path gains, integer delays and normalized Dopplers."""

    gains: np.ndarray
    delays: np.ndarray
    dopplers: np.ndarray

    def __post_init__(self) -> None:
        gains = np.asarray(self.gains, dtype=complex).reshape(-1)
        delays = np.asarray(self.delays).reshape(-1)
        dopplers = np.asarray(self.dopplers, dtype=float).reshape(-1)
        if not (gains.size == delays.size == dopplers.size):
            raise ValueError("gains, delays and dopplers must have equal length")
        if np.any(delays != np.round(delays)) or np.any(delays < 0):
            raise ValueError("delays must be nonnegative integers")
        object.__setattr__(self, "gains", gains)
        object.__setattr__(self, "delays", delays.astype(int))
        object.__setattr__(self, "dopplers", dopplers)

    def __len__(self) -> int:
        return self.gains.size

    def to_records(self) -> list[dict]:
        return [
            {"p": p, "h_re": float(h.real), "h_im": float(h.imag), "ell": int(l), "f": float(f)}
            for p, (h, l, f) in enumerate(zip(self.gains, self.delays, self.dopplers))
        ]

    @classmethod
    def from_records(cls, records: Sequence[dict]) -> "PathSet":
        records = sorted(records, key=lambda r: r["p"])
        return cls(
            gains=[complex(r["h_re"], r["h_im"]) for r in records],
            delays=[r["ell"] for r in records],
            dopplers=[r["f"] for r in records],
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_records(), indent=2))

    @classmethod
    def load(cls, path: str | Path) -> "PathSet":
        return cls.from_records(json.loads(Path(path).read_text()))


def sample_paths(params: SystemParams, rng: np.random.Generator) -> PathSet:
    """Draw one LoS and ``P`` NLoS paths.

    Delays are uniform over ``[0, tau_max]`` and rounded to the sample grid,
    Dopplers follow the Jakes law ``nu_max cos(theta)`` and gains are
    ``CN(0, sigma_h^2)``. With ``params.distinct_delays`` the delay draw is
    repeated until no two paths share a delay bin.
    """
    n_paths = params.P + 1
    tau_max = params.ell_max * params.T_S
    while True:
        tau = rng.uniform(0.0, tau_max, n_paths)
        delays = np.rint(tau / params.T_S).astype(int)
        if not params.distinct_delays or np.unique(delays).size == n_paths:
            break

    nu_max = params.f_max / (params.N * params.T_S)
    theta = rng.uniform(-np.pi, np.pi, n_paths)
    nu = nu_max * np.cos(theta)
    dopplers = params.N * nu * params.T_S

    scale = np.sqrt(params.sigma_h_sq / 2.0)
    gains = scale * (rng.standard_normal(n_paths) + 1j * rng.standard_normal(n_paths))
    return PathSet(gains=gains, delays=delays, dopplers=dopplers)


def afdm_phase_function(params: SystemParams) -> PhaseFunction:
    c1, N = params.chirp_c1, params.N
    return lambda n: cpp_phase(n, c1, N)


def _cp_phase_diag(ell_p: int, phi_cp: PhaseFunction | None, N: int) -> np.ndarray:
    if not 0 <= ell_p < N:
        raise ValueError(f"delay {ell_p} outside [0, {N})")
    d = np.ones(N, dtype=complex)
    if phi_cp is not None and ell_p > 0:
        args = np.arange(ell_p, 0, -1)
        d[:ell_p] = np.exp(-2j * np.pi * np.mod(phi_cp(args), 1.0))
    return d


def _doppler_diag(g: int, G: int, N: int, f_p: float) -> np.ndarray:
    n = np.arange(N)
    return np.exp(-2j * np.pi * f_p * (g + n * G) / (N * G))


def cp_phase_matrix(ell_p: int, phi_cp: PhaseFunction | None, N: int) -> np.ndarray:
    """Diagonal prefix-phase matrix: ``ell_p`` phase terms, then ones."""
    return np.diag(_cp_phase_diag(ell_p, phi_cp, N))


def doppler_power_matrix(g: int, G: int, N: int, f_p: float) -> np.ndarray:
    """``Omega_g`` raised element-wise to the power ``f_p``."""
    if not 0 <= g < G:
        raise ValueError(f"stream index {g} outside [0, {G})")
    return np.diag(_doppler_diag(g, G, N, f_p))


def cyclic_shift_power(ell: int, N: int) -> np.ndarray:
    """``Pi**ell``: delays a vector cyclically by ``ell`` samples."""
    if ell < 0:
        raise ValueError("shift must be nonnegative")
    return np.roll(np.eye(N), ell, axis=0)


def _path_diag(g: int, p: int, paths: PathSet, phi_cp, params: SystemParams) -> np.ndarray:
    return _cp_phase_diag(int(paths.delays[p]), phi_cp, params.N) * _doppler_diag(
        g, params.G, params.N, paths.dopplers[p]
    )


def path_td_block(g: int, p: int, paths: PathSet, phi_cp, params: SystemParams) -> np.ndarray:
    """Unit-gain time-domain matrix ``Phi_p Omega_g**f_p Pi**ell_p`` of one path."""
    d = _path_diag(g, p, paths, phi_cp, params)
    return d[:, None] * np.roll(np.eye(params.N), int(paths.delays[p]), axis=0)


def td_channel_matrix(g: int, paths: PathSet, phi_cp, params: SystemParams) -> np.ndarray:
    psi = np.zeros((params.N, params.N), dtype=complex)
    for p in range(len(paths)):
        psi += paths.gains[p] * path_td_block(g, p, paths, phi_cp, params)
    return psi


def effective_channel_block(
    g: int, p: int, transform: AfdmTransform, paths: PathSet, params: SystemParams
) -> np.ndarray:
    """Unit-gain effective block ``A (Phi_p Omega_g**f_p Pi**ell_p) A^H``."""
    phi = afdm_phase_function(params)
    d = _path_diag(g, p, paths, phi, params)
    a_h = transform.modulate(np.eye(params.N, dtype=complex))
    inner = d[:, None] * np.roll(a_h, int(paths.delays[p]), axis=0)
    return transform.demodulate(inner)


@dataclass(frozen=True)
class ChannelDictionary:
    """Stacked effective matrices, ``gamma[p]`` is the ``GN x N`` stack of path ``p``.

    Rows ``g*N .. (g+1)*N - 1`` of every stack hold the block of stream ``g``.
    """

    gamma: np.ndarray
    G: int

    def __post_init__(self) -> None:
        if self.gamma.ndim != 3 or self.gamma.shape[1] != self.G * self.gamma.shape[2]:
            raise ValueError(f"dictionary of shape {self.gamma.shape} does not stack {self.G} blocks")

    @property
    def n_paths(self) -> int:
        return self.gamma.shape[0]

    @property
    def N(self) -> int:
        return self.gamma.shape[2]

    @property
    def GN(self) -> int:
        return self.gamma.shape[1]

    def stack(self, p: int) -> np.ndarray:
        return self.gamma[p]

    def block(self, p: int, g: int) -> np.ndarray:
        return self.gamma[p, g * self.N : (g + 1) * self.N]

    def effective(self, gains: np.ndarray) -> np.ndarray:
        """``sum_p h_p Gamma_p`` for the given gains."""
        return np.tensordot(np.asarray(gains), self.gamma, axes=(0, 0))

    def restrict(self, G: int) -> "ChannelDictionary":
        """Keep only the first ``G`` sample streams."""
        if not 1 <= G <= self.G:
            raise ValueError(f"cannot restrict {self.G} streams to {G}")
        return ChannelDictionary(self.gamma[:, : G * self.N], G)

    @cached_property
    def edges(self) -> np.ndarray:
        """Per-factor-node layout ``[n, p, m]`` used by the message passing engine."""
        return np.ascontiguousarray(self.gamma.transpose(1, 0, 2))

    @cached_property
    def edges_conj(self) -> np.ndarray:
        return self.edges.conj()

    @cached_property
    def edges_abs2(self) -> np.ndarray:
        e = self.edges
        return e.real**2 + e.imag**2


def stack_dictionary(
    paths: PathSet, transform: AfdmTransform, params: SystemParams
) -> ChannelDictionary:
    N, G = params.N, params.G
    gamma = np.empty((len(paths), G * N, N), dtype=complex)
    for p in range(len(paths)):
        for g in range(G):
            gamma[p, g * N : (g + 1) * N] = effective_channel_block(g, p, transform, paths, params)
    return ChannelDictionary(gamma, G)


def transmit_through(
    paths: PathSet,
    s: np.ndarray,
    noise_streams: np.ndarray | None,
    params: SystemParams,
    phi_cp: PhaseFunction | None = None,
) -> list[np.ndarray]:
    """Receive vectors ``r_g = Psi_g s + w_g`` for every stream ``g``.

    ``noise_streams`` is a ``G x N`` array (or ``None`` for a noiseless link).
    ``phi_cp`` defaults to the AFDM prefix phase of ``params``.
    """
    s = np.asarray(s)
    if s.shape != (params.N,):
        raise ValueError(f"signal must have shape ({params.N},), got {s.shape}")
    if noise_streams is not None and np.shape(noise_streams) != (params.G, params.N):
        raise ValueError(f"noise must have shape ({params.G}, {params.N})")
    if phi_cp is None:
        phi_cp = afdm_phase_function(params)
    out = []
    for g in range(params.G):
        r = np.zeros(params.N, dtype=complex)
        for p in range(len(paths)):
            d = _path_diag(g, p, paths, phi_cp, params)
            r += paths.gains[p] * d * np.roll(s, int(paths.delays[p]))
        if noise_streams is not None:
            r = r + noise_streams[g]
        out.append(r)
    return out
