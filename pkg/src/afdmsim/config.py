"""Scenario constants for the oversampled AFDM link.

Every other module reads its numbers from a :class:`SystemParams` instance.
Parameters are immutable; use :meth:`SystemParams.replace` (or
:meth:`SystemParams.with_snr`) to derive variants for a sweep.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Literal

import numpy as np

NoiseConvention = Literal["total", "per_real_dim"]
SnrReference = Literal["received", "symbol"]

# spawn-key namespaces for the master seed
PILOT_STREAM = 0
TRIAL_STREAM = 1


@dataclass(frozen=True)
class SystemParams:
    """All constants of one simulation scenario.

    Defaults reproduce the mmWave scenario: 128 subcarriers, 2x oversampling,
    one LoS plus four NLoS paths, 32 pilots, 70 GHz carrier, 20 MHz bandwidth,
    maximum delay index 20 and maximum normalized Doppler 0.25.
    """

    N: int = 128
    G: int = 2
    P: int = 4
    N_P: int = 32
    carrier_freq: float = 70e9
    bandwidth: float = 20e6
    ell_max: int = 20
    f_max: float = 0.25
    E_S: float = 1.0
    sigma_h_sq: float = 1.0
    N_0: float = 0.1
    beta_x: float = 0.3
    beta_h: float = 0.3
    i_max: int = 40
    c1: float | None = None
    c2: float = 0.0
    rolloff: float = 0.0
    seed: int = 0
    N_CP: int | None = None
    noise_variance_convention: NoiseConvention = "total"
    distinct_delays: bool = True
    snr_reference: SnrReference = "received"

    @property
    def f_S(self) -> float:
        return self.bandwidth

    @property
    def T_S(self) -> float:
        return 1.0 / self.bandwidth

    @property
    def GN(self) -> int:
        return self.G * self.N

    @property
    def cp_length(self) -> int:
        return self.ell_max if self.N_CP is None else self.N_CP

    @property
    def chirp_c1(self) -> float:
        """First chirp frequency; the Doppler-guard optimum unless overridden."""
        return optimal_c1(self.f_max, self.N) if self.c1 is None else self.c1

    @property
    def c_x(self) -> float:
        return math.sqrt(self.E_S / 2.0)

    @property
    def sigma_w_sq(self) -> float:
        # c_w(0) = sigma_w^2 / 2 is the per-stream complex variance
        if self.noise_variance_convention == "total":
            return 2.0 * self.N_0
        return self.N_0

    @property
    def snr_gain(self) -> float:
        """Average channel power gain folded into the SNR axis."""
        if self.snr_reference == "received":
            return (self.P + 1) * self.sigma_h_sq
        return 1.0

    @property
    def snr_db(self) -> float:
        return 10.0 * math.log10(self.snr_gain * self.E_S / self.N_0)

    def replace(self, **changes: Any) -> "SystemParams":
        return dataclasses.replace(self, **changes)

    def with_snr(self, snr_db: float) -> "SystemParams":
        return self.replace(N_0=n0_from_snr(snr_db, self.E_S * self.snr_gain))

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "SystemParams":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise KeyError(f"unknown parameter(s): {', '.join(sorted(unknown))}")
        return cls(**data)

    @classmethod
    def from_json(cls, path: str | Path) -> "SystemParams":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    violations: tuple[str, ...] = field(default_factory=tuple)

    def __bool__(self) -> bool:
        return self.ok

    def raise_if_failed(self) -> None:
        if not self.ok:
            raise ValueError("invalid SystemParams: " + "; ".join(self.violations))


def validate(params: SystemParams) -> ValidationReport:
    """Check every scenario invariant and collect the ones that fail."""
    bad: list[str] = []
    if params.N < 1:
        bad.append("subcarrier count N must be >= 1")
    if params.G < 1:
        bad.append("oversampling factor must be ≥ 1")
    if params.P < 0:
        bad.append("NLoS path count P must be >= 0")
    if params.N_P < 0:
        bad.append("pilot count must be nonnegative")
    if params.N_P > params.N:
        bad.append("pilot count exceeds frame")
    if params.bandwidth <= 0:
        bad.append("bandwidth must be positive")
    if params.ell_max < 0:
        bad.append("ell_max must be nonnegative")
    if params.ell_max >= params.N:
        bad.append("ell_max must be smaller than N")
    if params.cp_length < params.ell_max:
        bad.append("CP length must cover the maximum delay (N_CP >= ell_max)")
    if params.distinct_delays and params.P + 1 > params.ell_max + 1:
        bad.append("distinct delays need P + 1 <= ell_max + 1")
    if params.f_max < 0:
        bad.append("f_max must be nonnegative")
    if params.G >= 1 and params.f_max >= params.G / 2:
        bad.append("f_max must be below G/2 for unambiguous Doppler")
    for name in ("E_S", "sigma_h_sq", "N_0"):
        if not getattr(params, name) > 0:
            bad.append(f"{name} must be positive")
    for name in ("beta_x", "beta_h"):
        beta = getattr(params, name)
        # beta = 1 (no damping) is accepted for diagnostics
        if not 0 < beta <= 1:
            bad.append(f"{name} must lie in (0, 1]")
    if params.i_max < 0:
        bad.append("i_max must be nonnegative")
    if not 0 <= params.rolloff <= 1:
        bad.append("rolloff must lie in [0, 1]")
    if params.noise_variance_convention not in ("total", "per_real_dim"):
        bad.append("noise_variance_convention must be 'total' or 'per_real_dim'")
    if params.snr_reference not in ("received", "symbol"):
        bad.append("snr_reference must be 'received' or 'symbol'")
    if not 0 <= params.seed < 2**64:
        bad.append("seed must be a 64-bit unsigned integer")
    return ValidationReport(ok=not bad, violations=tuple(bad))


def optimal_c1(f_max: float, N: int) -> float:
    """Doppler-guarded chirp rate ``(2*ceil(f_max) + 1) / (2N)``."""
    return (2 * math.ceil(f_max) + 1) / (2 * N)


def n0_from_snr(snr_db: float, signal_power: float = 1.0) -> float:
    return signal_power / 10.0 ** (snr_db / 10.0)


def pilot_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(PILOT_STREAM,)))


def trial_seed(seed: int, *counters: int) -> np.random.SeedSequence:
    """Seed sequence of one trial, addressed by integer counters."""
    return np.random.SeedSequence(seed, spawn_key=(TRIAL_STREAM, *counters))


def trial_rng(seed: int, *counters: int) -> np.random.Generator:
    return np.random.default_rng(trial_seed(seed, *counters))
