"""One end-to-end link realization: paths, frame, waveform, channel and noise."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from afdmsim.afdm import AfdmTransform
from afdmsim.channel import ChannelDictionary, PathSet, sample_paths, stack_dictionary, transmit_through
from afdmsim.config import SystemParams
from afdmsim.frame import Frame, build_frame
from afdmsim.noise import build_shaper, sample_noise


@dataclass(frozen=True)
class Realization:
    params: SystemParams
    transform: AfdmTransform
    paths: PathSet
    frame: Frame
    dictionary: ChannelDictionary
    y: np.ndarray  # stacked demodulated observation, length G*N

    def streams(self, G: int):
        """Observation, dictionary and params seen by a receiver using ``G`` streams."""
        N = self.params.N
        return self.y[: G * N], self.dictionary.restrict(G), self.params.replace(G=G)


def simulate_link(params: SystemParams, seed: np.random.SeedSequence) -> Realization:
    """Run the transmitter, channel and receiver front end for one frame.

    Paths, data bits and noise use separate child streams of ``seed``, so the
    noise draw does not depend on how many data bits the frame carries.
    """
    # explicit child keys: SeedSequence.spawn() is stateful and would break reruns
    rng_paths, rng_bits, rng_noise = (
        np.random.default_rng(np.random.SeedSequence(seed.entropy, spawn_key=seed.spawn_key + (k,)))
        for k in range(3)
    )
    transform = AfdmTransform.from_params(params)
    paths = sample_paths(params, rng_paths)
    bits = rng_bits.integers(0, 2, 2 * (params.N - params.N_P), dtype=np.int8)
    frame = build_frame(params, bits)

    s = transform.modulate(frame.x)
    shaper = build_shaper(params.G, params.sigma_w_sq, params.rolloff)
    noise = sample_noise(shaper, params.N, rng_noise)
    received = transmit_through(paths, s, noise.streams, params)
    y = np.concatenate([transform.demodulate(r) for r in received])

    dictionary = stack_dictionary(paths, transform, params)
    return Realization(params, transform, paths, frame, dictionary, y)
