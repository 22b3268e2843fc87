"""Quick oracle checks runnable from the command line (``afdmsim selftest``)."""

from __future__ import annotations

from typing import Callable

import numpy as np

from afdmsim import oracles
from afdmsim.afdm import AfdmTransform
from afdmsim.baselines import lmmse_channel_estimate
from afdmsim.channel import afdm_phase_function, sample_paths, stack_dictionary, td_channel_matrix
from afdmsim.config import SystemParams, optimal_c1
from afdmsim.noise import build_shaper, sample_noise
from afdmsim.pbigabp import extrinsic_combine, qpsk_denoise


def _unitarity():
    worst = 0.0
    for N in (4, 16, 128, 256):
        A = AfdmTransform(N, optimal_c1(0.25, N), 0.0).matrix
        worst = max(worst, np.linalg.norm(A @ A.conj().T - np.eye(N)))
    return worst < 1e-10, f"max ||AA^H - I||_F = {worst:.2e}"


def _channel_oracle():
    p = SystemParams(N=8, G=2, P=2, ell_max=3, f_max=0.25)
    rng = np.random.default_rng(1)
    phi = afdm_phase_function(p)
    worst = 0.0
    for _ in range(10):
        paths = sample_paths(p, rng)
        s = rng.standard_normal(8) + 1j * rng.standard_normal(8)
        for g in range(p.G):
            ref = oracles.received_samples(
                paths.gains, paths.delays, paths.dopplers, s, g, p.G, phi, p.cp_length
            )
            worst = max(worst, np.max(np.abs(td_channel_matrix(g, paths, phi, p) @ s - ref)))
    return worst < 1e-10, f"max abs error {worst:.2e}"


def _composition():
    p = SystemParams(N=32, G=2, P=2, ell_max=6)
    rng = np.random.default_rng(2)
    T = AfdmTransform.from_params(p)
    phi = afdm_phase_function(p)
    worst = 0.0
    for _ in range(5):
        paths = sample_paths(p, rng)
        d = stack_dictionary(paths, T, p)
        x = rng.standard_normal(32) + 1j * rng.standard_normal(32)
        for g in range(p.G):
            lhs = T.demodulate(td_channel_matrix(g, paths, phi, p) @ T.modulate(x))
            rhs = sum(paths.gains[q] * d.block(q, g) for q in range(len(paths))) @ x
            worst = max(worst, np.max(np.abs(lhs - rhs)))
    return worst < 1e-10, f"max abs error {worst:.2e}"


def _noise_covariance():
    shaper = build_shaper(2, 2.0, 0.0)
    w = sample_noise(shaper, 200_000, np.random.default_rng(3)).streams
    emp = (w @ w.conj().T).real / w.shape[1]
    target = np.array([[1.0, 2 / np.pi], [2 / np.pi, 1.0]])
    rel = np.max(np.abs(emp - target) / target)
    return rel < 0.02, f"max relative deviation {rel:.3%}"


def _lmmse_noiseless():
    p = SystemParams(N=32, G=2, P=3, ell_max=6, N_0=1e-14)
    rng = np.random.default_rng(4)
    paths = sample_paths(p, rng)
    d = stack_dictionary(paths, AfdmTransform.from_params(p), p)
    x = np.sqrt(0.5) * (rng.choice([-1, 1], 32) + 1j * rng.choice([-1, 1], 32))
    y = d.effective(paths.gains) @ x
    h = lmmse_channel_estimate(y, d, x, p)
    err = np.linalg.norm(h - paths.gains) / np.linalg.norm(paths.gains)
    return err < 1e-8, f"relative error {err:.2e}"


def _leave_one_out():
    rng = np.random.default_rng(5)
    num = rng.standard_normal((6, 3)) + 1j * rng.standard_normal((6, 3))
    prec = rng.uniform(0.5, 2.0, (6, 3))
    m1, v1 = extrinsic_combine(num, prec)
    m2, v2 = oracles.leave_one_out_loops(num, prec)
    err = max(np.max(np.abs(m1 - m2)), np.max(np.abs(v1 - v2)))
    return err < 1e-12, f"max abs error {err:.2e}"


def _denoiser():
    c = np.sqrt(0.5)
    got = qpsk_denoise(1.0 + 0j, 1.0, c)
    want = c * np.tanh(2 * c)
    return abs(got - want) < 1e-12, f"{got.real:.6f} vs {want:.6f}"


CHECKS: dict[str, Callable[[], tuple[bool, str]]] = {
    "daft_unitarity": _unitarity,
    "channel_vs_convolution": _channel_oracle,
    "effective_channel_composition": _composition,
    "noise_covariance": _noise_covariance,
    "lmmse_noiseless": _lmmse_noiseless,
    "leave_one_out": _leave_one_out,
    "qpsk_denoiser": _denoiser,
}


def run_all() -> list[tuple[str, bool, str]]:
    results = []
    for name, check in CHECKS.items():
        try:
            ok, detail = check()
        except Exception as exc:  # report, keep going
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        results.append((name, bool(ok), detail))
    return results
