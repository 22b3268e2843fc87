"""Oversampled AFDM link simulation with joint channel estimation and detection."""

from afdmsim.config import SystemParams, ValidationReport, optimal_c1, validate
from afdmsim.afdm import AfdmTransform, chirp_diagonal, cpp_phase
from afdmsim.channel import ChannelDictionary, PathSet, sample_paths, stack_dictionary
from afdmsim.noise import NoiseShaper, build_shaper, rc_pulse, sample_noise
from afdmsim.frame import Frame, build_frame, hard_decide, qpsk_demap, qpsk_map
from afdmsim.pbigabp import BeliefState, JceddOutput, run

__all__ = [
    "AfdmTransform",
    "BeliefState",
    "ChannelDictionary",
    "Frame",
    "JceddOutput",
    "NoiseShaper",
    "PathSet",
    "SystemParams",
    "ValidationReport",
    "build_frame",
    "build_shaper",
    "chirp_diagonal",
    "cpp_phase",
    "hard_decide",
    "optimal_c1",
    "qpsk_demap",
    "qpsk_map",
    "rc_pulse",
    "run",
    "sample_noise",
    "sample_paths",
    "stack_dictionary",
    "validate",
]

__version__ = "0.1.0"
