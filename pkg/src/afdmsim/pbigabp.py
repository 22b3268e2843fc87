"""Parametric bilinear Gaussian belief propagation for joint channel estimation
and data detection (JCEDD) over the stacked oversampled observation.

The observation model is ``y_n = sum_p sum_m h_p gamma[p, n, m] x_m + w_n`` for
``n = 0..GN-1``. Every factor node ``n`` keeps its own replica of every symbol
and every path gain (per-edge messages), so the state holds ``GN x N`` and
``GN x (P+1)`` arrays. One iteration is a channel pass followed by a data pass;
each pass does soft interference cancellation, leave-one-out Gaussian belief
combining, denoising and damping.

All sums over a path or symbol index are evaluated as "total minus own term",
which keeps an iteration at ``O(GN * N * (P+1))`` operations.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from afdmsim.channel import ChannelDictionary
from afdmsim.config import SystemParams
from afdmsim.frame import Frame, hard_decide

VAR_FLOOR = 1e-15


class MessagePassingError(RuntimeError):
    """Raised when a message becomes non-finite."""


@dataclass
class BeliefState:
    x_hat: np.ndarray  # GN x N soft symbol replicas
    var_x: np.ndarray  # GN x N
    h_hat: np.ndarray  # GN x (P+1) soft gain replicas
    var_h: np.ndarray  # GN x (P+1)
    pilot_idx: np.ndarray
    pilot_values: np.ndarray
    iteration: int = 0
    # beliefs combined over all factor nodes, refreshed by every pass
    x_post: np.ndarray = field(default=None)
    x_post_var: np.ndarray = field(default=None)
    h_post: np.ndarray = field(default=None)
    h_post_var: np.ndarray = field(default=None)

    def lock_pilots(self) -> None:
        self.x_hat[:, self.pilot_idx] = self.pilot_values
        self.var_x[:, self.pilot_idx] = 0.0

    def is_finite(self) -> bool:
        # a single NaN or inf anywhere poisons the sum
        return all(
            np.isfinite(a.sum()) for a in (self.x_hat, self.var_x, self.h_hat, self.var_h)
        )


@dataclass
class JceddOutput:
    x_d: np.ndarray  # soft decoded data symbols
    h_est: np.ndarray  # channel gain estimates, length P+1
    x_full: np.ndarray  # all N symbol estimates, pilots included
    trace: list[tuple] = field(default_factory=list)
    iterations: int = 0


def qpsk_denoise(belief_mean, belief_var, c_x: float):
    """Posterior mean of a QPSK symbol given a Gaussian belief.

    A zero variance returns the sign-detected symbol.
    """
    mean = np.asarray(belief_mean, dtype=complex, order="C")
    var = np.asarray(belief_var, dtype=float)
    if np.all(var > 0):
        # one tanh pass over the interleaved real/imaginary parts
        shape = mean.shape
        scale = np.broadcast_to(2.0 * c_x / var, shape).reshape(-1, 1)
        f = mean.reshape(-1).view(np.float64).reshape(-1, 2) * scale
        np.tanh(f, out=f)
        f *= c_x
        out = f.reshape(-1).view(complex).reshape(shape)
        return out[()] if out.ndim == 0 else out
    with np.errstate(divide="ignore", invalid="ignore"):
        re = np.where(var > 0, np.tanh(2.0 * c_x * mean.real / var), np.sign(mean.real))
        im = np.where(var > 0, np.tanh(2.0 * c_x * mean.imag / var), np.sign(mean.imag))
    return c_x * (re + 1j * im)


def gaussian_denoise_gain(belief_mean, belief_var, sigma_h_sq: float):
    """Shrink a Gaussian gain belief toward the ``CN(0, sigma_h_sq)`` prior.

    Returns ``(mean, var)``. An infinite belief variance yields the prior.
    """
    mean = np.asarray(belief_mean)
    var = np.asarray(belief_var, dtype=float)
    finite = np.isfinite(var)
    v = np.where(finite, var, 0.0)
    post_mean = np.where(finite, sigma_h_sq * mean / (v + sigma_h_sq), 0.0)
    post_var = np.where(finite, sigma_h_sq * v / (v + sigma_h_sq), sigma_h_sq)
    return post_mean, post_var


def damp(new, old, beta: float):
    """``beta * new + (1 - beta) * old``; ``beta = 1`` returns ``new`` unchanged."""
    if beta == 1.0:
        return new
    out = np.subtract(new, old)
    out *= beta
    out += old
    return out


def _abs2(z: np.ndarray) -> np.ndarray:
    r, i = z.real, z.imag
    return r * r + i * i


def extrinsic_combine(num: np.ndarray, prec: np.ndarray):
    """Leave-one-out combination across factor nodes (axis 0).

    ``num[n, k]`` and ``prec[n, k]`` are the contributions of node ``n`` to
    variable ``k``. Returns the belief mean and variance at each node built
    from every other node.
    """
    ext_prec = prec.sum(axis=0) - prec
    np.maximum(ext_prec, VAR_FLOOR, out=ext_prec)
    ext_var = 1.0 / ext_prec
    ext_mean = num.sum(axis=0) - num
    ext_mean *= ext_var
    return ext_mean, ext_var


def _contributions(gain: np.ndarray, y_soft: np.ndarray, var_soft: np.ndarray):
    """Matched-filter numerator ``conj(a) y / v`` and precision ``|a|^2 / v`` per edge."""
    inv = 1.0 / var_soft
    num = gain.conj()
    num *= y_soft
    num *= inv
    prec = _abs2(gain)
    prec *= inv
    return num, prec


def consensus_combine(num: np.ndarray, prec: np.ndarray):
    tot = np.maximum(prec.sum(axis=0), VAR_FLOOR)
    return num.sum(axis=0) / tot, 1.0 / tot


def _matvec(M: np.ndarray, v: np.ndarray) -> np.ndarray:
    # M: (GN, a, b), v: (GN, b) -> (GN, a)
    return (M @ v[:, :, None])[:, :, 0]


def _vecmat(v: np.ndarray, M: np.ndarray) -> np.ndarray:
    # v: (GN, a), M: (GN, a, b) -> (GN, b)
    return (v[:, None, :] @ M)[:, 0, :]


def init_state(
    y: np.ndarray, dictionary: ChannelDictionary, frame: Frame, params: SystemParams
) -> BeliefState:
    GN, N, n_paths = dictionary.GN, dictionary.N, dictionary.n_paths
    if np.shape(y) != (GN,):
        raise ValueError(f"observation must have shape ({GN},), got {np.shape(y)}")
    if frame.x.shape != (N,):
        raise ValueError("frame length does not match the dictionary")
    pilot_values = frame.x[frame.pilot_idx]
    state = BeliefState(
        x_hat=np.zeros((GN, N), dtype=complex),
        var_x=np.full((GN, N), float(params.E_S)),
        h_hat=np.zeros((GN, n_paths), dtype=complex),
        var_h=np.full((GN, n_paths), float(params.sigma_h_sq)),
        pilot_idx=np.asarray(frame.pilot_idx),
        pilot_values=pilot_values,
    )
    state.lock_pilots()
    state.x_post = state.x_hat[0].copy()
    state.x_post_var = state.var_x[0].copy()
    state.h_post = np.zeros(n_paths, dtype=complex)
    state.h_post_var = np.full(n_paths, float(params.sigma_h_sq))
    return state


def channel_soft_ic(
    state: BeliefState, y: np.ndarray, dictionary: ChannelDictionary, params: SystemParams
):
    """Per-edge soft interference cancellation for the gains.

    Returns ``(y_h, y_soft, var_soft)``, each ``GN x (P+1)``: the channel-centric
    replica ``sum_m gamma[p, n, m] x_hat[n, m]``, the observation with every
    other path cancelled, and the variance of what remains besides path ``p``.
    """
    D, D2 = dictionary.edges, dictionary.edges_abs2
    xh, vx, hh, vh = state.x_hat, state.var_x, state.h_hat, state.var_h

    y_h = _matvec(D, xh)
    hy = hh * y_h
    y_soft = y[:, None] - (hy.sum(axis=1)[:, None] - hy)

    vy = vh * _abs2(y_h)
    var_soft = vy.sum(axis=1)[:, None] - vy + params.N_0
    if vx.any():  # all symbols known leaves only gain uncertainty
        g_x = _vecmat(hh, D)  # sum_p h_p gamma_p per (n, m)
        T = _matvec(D2, vx)  # sum_m var_x |gamma_p|^2
        C = _matvec(dictionary.edges_conj, vx * g_x)
        A = np.sum(vx * _abs2(g_x), axis=1)
        # sum_m var_x |g_x - h_p gamma_p|^2, expanded
        t_sym = np.maximum(A[:, None] - 2.0 * np.real(hh.conj() * C) + _abs2(hh) * T, 0.0)
        vT = vh * T
        t_cross = vT.sum(axis=1)[:, None] - vT
        t_own = params.sigma_h_sq * T
        var_soft = var_soft + t_sym + t_cross + t_own
    return y_h, y_soft, np.maximum(var_soft, VAR_FLOOR)


def channel_estimation_pass(
    state: BeliefState,
    y: np.ndarray,
    dictionary: ChannelDictionary,
    params: SystemParams,
    readout: bool = True,
) -> BeliefState:
    """Update every gain replica from the symbol replicas of the previous iteration.

    With ``readout`` the all-node gain posterior (``h_post``) is refreshed too.
    """
    y_h, y_soft, var_soft = channel_soft_ic(state, y, dictionary, params)
    num, prec = _contributions(y_h, y_soft, var_soft)
    h_ext, v_ext = extrinsic_combine(num, prec)
    h_raw, v_raw = gaussian_denoise_gain(h_ext, v_ext, params.sigma_h_sq)
    state.h_hat = damp(h_raw, state.h_hat, params.beta_h)
    state.var_h = damp(v_raw, state.var_h, params.beta_h)

    if readout:
        h_tot, v_tot = consensus_combine(num, prec)
        state.h_post, state.h_post_var = gaussian_denoise_gain(h_tot, v_tot, params.sigma_h_sq)
    return state


def data_soft_ic(
    state: BeliefState, y: np.ndarray, dictionary: ChannelDictionary, params: SystemParams
):
    """Per-edge soft interference cancellation for the symbols.

    Returns ``(g_x, y_soft, var_soft)``, each ``GN x N``: the soft effective
    gain ``sum_p h_hat[n, p] gamma[p, n, m]``, the observation with every other
    symbol cancelled, and the variance of what remains besides symbol ``m``.
    """
    D, D2 = dictionary.edges, dictionary.edges_abs2
    xh, vx, hh, vh = state.x_hat, state.var_x, state.h_hat, state.var_h

    y_h = _matvec(D, xh)
    g_x = _vecmat(hh, D)
    full = np.sum(hh * y_h, axis=1)
    y_soft = y[:, None] - full[:, None] + g_x * xh

    vg = vx * _abs2(g_x)
    var_soft = vg.sum(axis=1)[:, None] - vg + params.N_0
    if vh.any():  # a known channel leaves only symbol uncertainty
        S1 = np.sum(vh * _abs2(y_h), axis=1)
        B = _vecmat(vh, D2)  # sum_p var_h |gamma_p|^2
        E = _vecmat(vh * y_h, dictionary.edges_conj)
        # sum_p var_h |y_h - gamma_p x_m|^2, expanded
        t_gain = np.maximum(S1[:, None] - 2.0 * np.real(xh.conj() * E) + _abs2(xh) * B, 0.0)
        VT = np.sum(vh * _matvec(D2, vx), axis=1)
        t_cross = VT[:, None] - vx * B
        t_own = params.E_S * B
        var_soft = var_soft + t_gain + t_cross + t_own
    return g_x, y_soft, np.maximum(var_soft, VAR_FLOOR)


def data_detection_pass(
    state: BeliefState,
    y: np.ndarray,
    dictionary: ChannelDictionary,
    frame: Frame,
    params: SystemParams,
    readout: bool = True,
) -> BeliefState:
    """Update every data-symbol replica using the freshest gain replicas.

    With ``readout`` the all-node symbol posterior (``x_post``) is refreshed too.
    """
    c_x = np.sqrt(params.E_S / 2.0)
    g_x, y_soft, var_soft = data_soft_ic(state, y, dictionary, params)
    num, prec = _contributions(g_x, y_soft, var_soft)
    x_ext, v_ext = extrinsic_combine(num, prec)
    x_raw = qpsk_denoise(x_ext, v_ext, c_x)
    state.x_hat = damp(x_raw, state.x_hat, params.beta_x)
    # the variance follows the undamped denoiser output
    state.var_x = damp(params.E_S - _abs2(x_raw), state.var_x, params.beta_x)
    state.lock_pilots()

    if readout:
        x_tot, v_tot = consensus_combine(num, prec)
        x_post = qpsk_denoise(x_tot, v_tot, c_x)
        x_post[state.pilot_idx] = state.pilot_values
        state.x_post, state.x_post_var = x_post, v_tot
    return state


def _data_mask(N: int, frame: Frame) -> np.ndarray:
    mask = np.zeros(N, dtype=bool)
    mask[frame.data_idx] = True
    return mask


def run(
    y: np.ndarray,
    dictionary: ChannelDictionary,
    frame: Frame,
    params: SystemParams,
    truth_bits: np.ndarray | None = None,
    state: BeliefState | None = None,
    estimate_channel: bool = True,
) -> JceddOutput:
    """Alternate channel and data passes for ``params.i_max`` iterations.

    ``truth_bits`` (the frame's data bits) adds a running BER column to the
    trace. A prepared ``state`` may be passed in; with ``estimate_channel``
    false the gain replicas are left untouched (known-channel detection).
    """
    y = np.asarray(y)
    if state is None:
        state = init_state(y, dictionary, frame, params)
    mask = _data_mask(dictionary.N, frame)
    n_data = int(mask.sum())
    trace = []
    for i in range(1, params.i_max + 1):
        readout = truth_bits is not None or i == params.i_max
        if estimate_channel:
            channel_estimation_pass(state, y, dictionary, params, readout)
        data_detection_pass(state, y, dictionary, frame, params, readout)
        state.iteration = i
        if not state.is_finite():
            raise MessagePassingError(f"non-finite message at iteration {i}")
        # pilot columns hold zero variance, so the data mean is a plain sum
        mean_vx = float(state.var_x.sum()) / (state.var_x.shape[0] * n_data) if n_data else 0.0
        row = (i, mean_vx, float(state.var_h.mean()))
        if truth_bits is not None:
            errors = np.count_nonzero(hard_decide(state.x_post[mask]) != truth_bits)
            row += (errors / max(len(truth_bits), 1),)
        trace.append(row)
    return JceddOutput(
        x_d=state.x_post[mask].copy(),
        h_est=state.h_post.copy(),
        x_full=state.x_post.copy(),
        trace=trace,
        iterations=state.iteration,
    )
