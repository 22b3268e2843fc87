"""Genie-aided reference receivers and the symbol-rate (G = 1) receiver."""

from __future__ import annotations

import numpy as np

from afdmsim import pbigabp
from afdmsim.channel import ChannelDictionary
from afdmsim.config import SystemParams
from afdmsim.frame import Frame
from afdmsim.link import Realization


def regressor(dictionary: ChannelDictionary, x_known: np.ndarray) -> np.ndarray:
    """``GN x (P+1)`` matrix whose column ``p`` is ``Gamma_p x``."""
    return np.einsum("pnm,m->np", dictionary.gamma, x_known)


def lmmse_channel_estimate(
    y: np.ndarray,
    dictionary: ChannelDictionary,
    x_known: np.ndarray,
    params: SystemParams,
    return_cov: bool = False,
):
    """Ridge-regularized gain estimate with every symbol known.

    Solves ``(A^H A + N_0/sigma_h^2 I) h = A^H y``; ``return_cov`` also returns
    the posterior error covariance ``N_0 (A^H A + N_0/sigma_h^2 I)^{-1}``.
    """
    A = regressor(dictionary, x_known)
    gram = A.conj().T @ A + (params.N_0 / params.sigma_h_sq) * np.eye(A.shape[1])
    h = np.linalg.solve(gram, A.conj().T @ np.asarray(y))
    if return_cov:
        return h, params.N_0 * np.linalg.inv(gram)
    return h


def gabp_detect_known_channel(
    y: np.ndarray, effective_channel: np.ndarray, frame: Frame, params: SystemParams
) -> np.ndarray:
    """Data detection with the exact ``sum_p h_p Gamma_p`` supplied.

    The effective channel is treated as a one-path dictionary whose unit gain
    is pinned with zero variance, so only the data passes run. Returns the
    hard-decided data symbols.
    """
    G = effective_channel.shape[0] // effective_channel.shape[1]
    single = ChannelDictionary(np.asarray(effective_channel)[None], G)
    state = pbigabp.init_state(y, single, frame, params)
    state.h_hat[:] = 1.0
    state.var_h[:] = 0.0
    out = pbigabp.run(y, single, frame, params, state=state, estimate_channel=False)
    c_x = np.sqrt(params.E_S / 2.0)
    return c_x * (np.where(out.x_d.real < 0, -1.0, 1.0) + 1j * np.where(out.x_d.imag < 0, -1.0, 1.0))


def gabp_estimate_known_data(
    y: np.ndarray, dictionary: ChannelDictionary, x_known: np.ndarray, params: SystemParams
) -> np.ndarray:
    """Gain estimation by the channel passes with every symbol known.

    Replicas start from the LMMSE estimate and its posterior variances.
    """
    N = dictionary.N
    known = Frame(
        x=np.asarray(x_known, dtype=complex),
        pilot_idx=np.arange(N),
        data_idx=np.arange(0),
        data_bits=np.zeros(0, dtype=np.int8),
    )
    h0, cov = lmmse_channel_estimate(y, dictionary, x_known, params, return_cov=True)
    state = pbigabp.init_state(y, dictionary, known, params)
    state.h_hat[:] = h0
    state.var_h[:] = np.clip(np.real(np.diag(cov)), 0.0, params.sigma_h_sq)
    state.h_post = h0.copy()
    for i in range(1, params.i_max + 1):
        pbigabp.channel_estimation_pass(state, y, dictionary, params, readout=i == params.i_max)
        if not state.is_finite():
            raise pbigabp.MessagePassingError("non-finite gain message")
    return state.h_post.copy()


def nyquist_receiver(realization: Realization) -> pbigabp.JceddOutput:
    """PBiGaBP on the first sample stream only (symbol-spaced sampling)."""
    y, dictionary, params = realization.streams(1)
    return pbigabp.run(y, dictionary, realization.frame, params)
