import numpy as np
import pytest

from afdmsim.noise import build_shaper, rc_pulse, sample_noise


def test_rc_pulse_values():
    assert rc_pulse(0.0, 0.0) == 1.0
    assert rc_pulse(0.5, 0.0) == pytest.approx(2 / np.pi)
    np.testing.assert_allclose(rc_pulse(np.arange(1, 5), 0.3), 0.0, atol=1e-15)
    # singular point t = 1/(2 rolloff) takes its limit
    beta = 0.5
    t = 1 / (2 * beta)
    near = rc_pulse(t + 1e-7, beta)
    assert rc_pulse(t, beta) == pytest.approx(near, abs=1e-6)
    assert rc_pulse(0.25, 0.4) == pytest.approx(
        np.sinc(0.25) * np.cos(np.pi * 0.1) / (1 - (0.2) ** 2)
    )


def test_single_stream():
    s = build_shaper(1, 0.5)
    np.testing.assert_allclose(s.C_w, [[0.25]])
    np.testing.assert_allclose(s.L_C, [[0.5]])


def test_two_stream_covariance_literal():
    s = build_shaper(2, 2.0, 0.0)
    np.testing.assert_allclose(s.C_w, [[1, 2 / np.pi], [2 / np.pi, 1]], atol=1e-15)


@pytest.mark.parametrize("G, rolloff", [(2, 0.0), (3, 0.25), (4, 0.5), (8, 1.0)])
def test_factor_reproduces_covariance(G, rolloff):
    s = build_shaper(G, 0.7, rolloff)
    assert np.allclose(s.C_w, s.C_w.conj().T)
    assert np.all(np.linalg.eigvalsh(s.C_w) > -1e-12)
    np.testing.assert_allclose(s.L_C @ s.L_C.conj().T, s.C_w, atol=1e-12)
    np.testing.assert_allclose(np.triu(s.L_C, 1), 0.0)
    # Toeplitz layout
    for g in range(G):
        np.testing.assert_allclose(np.diag(s.C_w, g), s.C_w[0, g])


def test_rank_deficient_covariance_falls_back(caplog):
    # dense oversampling of a narrow pulse is numerically singular
    s = build_shaper(48, 1.0, 0.0)
    assert np.allclose(s.L_C @ s.L_C.conj().T, s.C_w, atol=1e-6)
    assert "not positive definite" in caplog.text


def test_zero_noise():
    s = build_shaper(2, 0.0)
    np.testing.assert_array_equal(s.L_C, 0.0)
    w = sample_noise(s, 8, np.random.default_rng(0))
    np.testing.assert_array_equal(w.streams, 0.0)


def test_empirical_covariance(rng):
    s = build_shaper(3, 1.2, 0.35)
    w = sample_noise(s, 400_000, rng).streams
    assert w.shape == (3, 400_000)
    emp = w @ w.conj().T / w.shape[1]
    # standard error of a covariance entry is about c(0)/sqrt(n)
    tol = 5 * s.C_w[0, 0].real / np.sqrt(w.shape[1])
    np.testing.assert_allclose(emp, s.C_w, atol=tol)


def test_samples_at_distinct_times_uncorrelated(rng):
    w = sample_noise(build_shaper(2, 2.0), 200_000, rng).streams
    lag = np.mean(w[0, 1:] * w[1, :-1].conj())
    assert abs(lag) < 5 / np.sqrt(200_000)


def test_noise_block_access(rng):
    block = sample_noise(build_shaper(2, 1.0), 5, rng)
    assert len(block) == 2
    np.testing.assert_array_equal(block[1], block.streams[1])


def test_invalid_G():
    with pytest.raises(ValueError):
        build_shaper(0, 1.0)


def test_single_stream_factor_is_root_variance():
    for s2 in (0.1, 2.0, 7.0):
        np.testing.assert_allclose(build_shaper(1, s2).L_C, [[np.sqrt(s2 / 2)]])
