import numpy as np
import pytest
from hypothesis import given, strategies as st

from afdmsim.config import SystemParams
from afdmsim.frame import build_frame, hard_decide, pilot_symbols, qpsk_demap, qpsk_map


def test_gray_map_literal():
    c = np.sqrt(0.5)
    np.testing.assert_allclose(
        qpsk_map([0, 0, 0, 1, 1, 0, 1, 1]),
        c * np.array([1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j]),
    )
    assert qpsk_map([0, 0], E_S=4.0)[0] == pytest.approx(np.sqrt(2) * (1 + 1j))
    with pytest.raises(ValueError):
        qpsk_map([0, 1, 1])


@given(st.lists(st.integers(0, 1), min_size=0, max_size=64).filter(lambda b: len(b) % 2 == 0))
def test_map_demap_round_trip(bits):
    np.testing.assert_array_equal(qpsk_demap(qpsk_map(bits)), np.asarray(bits, dtype=np.int8))


def test_unit_energy():
    bits = np.random.default_rng(0).integers(0, 2, 4000)
    assert np.mean(np.abs(qpsk_map(bits)) ** 2) == pytest.approx(1.0)


def test_demap_tie_goes_to_zero_bit():
    np.testing.assert_array_equal(qpsk_demap([0.0 + 0.0j]), [0, 0])
    np.testing.assert_array_equal(hard_decide([0.1 - 3j, -2 + 0.01j]), [0, 1, 1, 0])


def test_frame_layout():
    p = SystemParams(N=16, N_P=4)
    bits = np.random.default_rng(1).integers(0, 2, 24)
    f = build_frame(p, bits)
    np.testing.assert_array_equal(f.pilot_idx, np.arange(4))
    np.testing.assert_array_equal(f.data_idx, np.arange(4, 16))
    np.testing.assert_array_equal(f.pilots, pilot_symbols(p))
    np.testing.assert_array_equal(qpsk_demap(f.data), bits)
    np.testing.assert_allclose(np.abs(f.x) ** 2, 1.0)


def test_pilots_depend_only_on_seed():
    a = pilot_symbols(SystemParams(N_P=8))
    b = pilot_symbols(SystemParams(N_P=8, N_0=0.3))
    c = pilot_symbols(SystemParams(N_P=8, seed=1))
    np.testing.assert_array_equal(a, b)
    assert not np.allclose(a, c)
    # fewer pilots are a prefix of more pilots
    np.testing.assert_array_equal(pilot_symbols(SystemParams(N_P=4)), a[:4])


def test_edge_pilot_counts():
    p0 = SystemParams(N=8, N_P=0)
    assert build_frame(p0, np.zeros(16)).pilot_idx.size == 0
    pN = SystemParams(N=8, N_P=8)
    f = build_frame(pN, np.zeros(0))
    assert f.data_idx.size == 0 and f.data.size == 0


def test_bit_count_mismatch():
    with pytest.raises(ValueError, match="expected 24 data bits"):
        build_frame(SystemParams(N=16, N_P=4), np.zeros(22))
