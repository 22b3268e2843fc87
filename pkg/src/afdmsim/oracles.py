"""Slow reference computations used to check the fast paths.

Each routine evaluates its quantity straight from the scalar definitions with
explicit loops and shares no code with the matrix implementation it checks.
"""

from __future__ import annotations

import cmath
import math

import numpy as np


def daft_matrix_loops(N: int, c1: float, c2: float) -> np.ndarray:
    """Dense ``L2 F L1`` from entry formulas."""
    A = np.empty((N, N), dtype=complex)
    for k in range(N):
        for n in range(N):
            phase = c2 * k * k + k * n / N + c1 * n * n
            A[k, n] = cmath.exp(-2j * math.pi * phase) / math.sqrt(N)
    return A


def received_samples(
    gains, delays, dopplers, s, g: int, G: int, phi_cp, n_cp: int
) -> np.ndarray:
    """Stream ``g`` by direct convolution of a prefixed frame.

    The transmitted block is extended with ``n_cp`` prefix samples
    ``s[n'] = s[N + n'] exp(j 2 pi phi_cp(n'))`` for ``n' = -1..-n_cp``; each
    receive sample then sums ``s[n - l]`` over every delay tap ``l`` with the
    Doppler factor ``exp(-j 2 pi f_p (g + n G) / (N G))`` of the paths on that
    tap.
    """
    N = len(s)
    ext = {n: complex(s[n]) for n in range(N)}
    for n_neg in range(-1, -n_cp - 1, -1):
        ext[n_neg] = complex(s[N + n_neg]) * cmath.exp(2j * math.pi * float(phi_cp(n_neg)))
    r = np.zeros(N, dtype=complex)
    for n in range(N):
        acc = 0.0j
        for ell in range(n_cp + 1):
            tap = 0.0j
            for h, lp, fp in zip(gains, delays, dopplers):
                if lp == ell:
                    tap += h * cmath.exp(-2j * math.pi * fp * (g + n * G) / (N * G))
            if tap != 0:
                acc += ext[n - ell] * tap
        r[n] = acc
    return r


def leave_one_out_loops(num: np.ndarray, prec: np.ndarray):
    """Extrinsic mean and variance by explicit sums over ``q != n``."""
    n_nodes, n_vars = num.shape
    mean = np.empty_like(num)
    var = np.empty(prec.shape)
    for n in range(n_nodes):
        for k in range(n_vars):
            a = sum(num[q, k] for q in range(n_nodes) if q != n)
            b = sum(prec[q, k] for q in range(n_nodes) if q != n)
            mean[n, k] = a / b
            var[n, k] = 1.0 / b
    return mean, var


def arcsine_cdf(f, f_max: float):
    """CDF of ``f_max cos(theta)`` with ``theta`` uniform on ``[-pi, pi]``."""
    f = np.clip(np.asarray(f, dtype=float) / f_max, -1.0, 1.0)
    return 0.5 + np.arcsin(f) / np.pi
