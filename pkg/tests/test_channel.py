import numpy as np
import pytest
from scipy import stats

from afdmsim import oracles
from afdmsim.afdm import AfdmTransform
from afdmsim.channel import (
    ChannelDictionary,
    PathSet,
    afdm_phase_function,
    cp_phase_matrix,
    cyclic_shift_power,
    doppler_power_matrix,
    effective_channel_block,
    path_td_block,
    sample_paths,
    stack_dictionary,
    td_channel_matrix,
    transmit_through,
)
from afdmsim.config import SystemParams


def _cn(rng, n):
    return rng.standard_normal(n) + 1j * rng.standard_normal(n)


def test_sample_paths_support(rng):
    p = SystemParams()
    for _ in range(200):
        paths = sample_paths(p, rng)
        assert len(paths) == p.P + 1
        assert paths.delays.min() >= 0 and paths.delays.max() <= p.ell_max
        assert np.unique(paths.delays).size == p.P + 1
        assert np.all(np.abs(paths.dopplers) <= p.f_max)


def test_shared_delays_allowed_when_not_distinct(rng):
    p = SystemParams(P=4, ell_max=2, distinct_delays=False)
    shared = any(np.unique(sample_paths(p, rng).delays).size < 5 for _ in range(20))
    assert shared


def test_doppler_follows_jakes_law(rng):
    p = SystemParams()
    f = np.concatenate([sample_paths(p, rng).dopplers for _ in range(2000)])
    res = stats.kstest(f, lambda v: oracles.arcsine_cdf(v, p.f_max))
    assert res.pvalue > 1e-3


def test_gain_statistics(rng):
    p = SystemParams(sigma_h_sq=2.0)
    h = np.concatenate([sample_paths(p, rng).gains for _ in range(4000)])
    assert np.mean(np.abs(h) ** 2) == pytest.approx(2.0, rel=0.05)
    assert abs(np.mean(h)) < 0.05
    # circular: real and imaginary parts carry equal power
    assert np.var(h.real) == pytest.approx(np.var(h.imag), rel=0.1)


def test_delays_uniform_over_grid(rng):
    p = SystemParams(P=0, ell_max=4)
    d = np.concatenate([sample_paths(p, rng).delays for _ in range(8000)])
    counts = np.bincount(d, minlength=5) / d.size
    # rounding a uniform draw halves the weight of the edge bins
    np.testing.assert_allclose(counts, [0.125, 0.25, 0.25, 0.25, 0.125], atol=0.015)


def test_pathset_validation_and_json(tmp_path):
    with pytest.raises(ValueError):
        PathSet([1.0, 2.0], [0], [0.1, 0.2])
    with pytest.raises(ValueError):
        PathSet([1.0], [1.5], [0.0])
    with pytest.raises(ValueError):
        PathSet([1.0], [-1], [0.0])
    paths = PathSet([1 + 2j, -0.5j], [3, 0], [0.1, -0.2])
    paths.save(tmp_path / "paths.json")
    back = PathSet.load(tmp_path / "paths.json")
    np.testing.assert_array_equal(back.gains, paths.gains)
    np.testing.assert_array_equal(back.delays, paths.delays)
    np.testing.assert_array_equal(back.dopplers, paths.dopplers)
    assert paths.to_records()[0] == {"p": 0, "h_re": 1.0, "h_im": 2.0, "ell": 3, "f": 0.1}


def test_matrix_model_matches_direct_convolution(rng):
    p = SystemParams(N=8, G=2, P=2, ell_max=3)
    phi = afdm_phase_function(p)
    for _ in range(20):
        paths = sample_paths(p, rng)
        s = _cn(rng, 8)
        for g in range(p.G):
            ref = oracles.received_samples(
                paths.gains, paths.delays, paths.dopplers, s, g, p.G, phi, p.cp_length
            )
            np.testing.assert_allclose(td_channel_matrix(g, paths, phi, p) @ s, ref, atol=1e-10)


def test_channel_rebuilt_from_factors(rng):
    p = SystemParams(N=16, G=3, P=2, ell_max=5)
    phi = afdm_phase_function(p)
    paths = sample_paths(p, rng)
    for g in range(p.G):
        psi = sum(
            paths.gains[q]
            * cp_phase_matrix(paths.delays[q], phi, p.N)
            @ doppler_power_matrix(g, p.G, p.N, paths.dopplers[q])
            @ cyclic_shift_power(paths.delays[q], p.N)
            for q in range(len(paths))
        )
        np.testing.assert_allclose(td_channel_matrix(g, paths, phi, p), psi, atol=1e-12)


def test_single_static_path_is_identity():
    p = SystemParams(N=16, G=2, P=0, ell_max=3)
    paths = PathSet([1.0], [0], [0.0])
    T = AfdmTransform.from_params(p)
    for g in range(2):
        np.testing.assert_allclose(td_channel_matrix(g, paths, None, p), np.eye(16))
        np.testing.assert_allclose(effective_channel_block(g, 0, T, paths, p), np.eye(16), atol=1e-12)


def test_building_blocks():
    Pi = np.roll(np.eye(6), 1, axis=0)
    np.testing.assert_allclose(cyclic_shift_power(3, 6), np.linalg.matrix_power(Pi, 3))
    np.testing.assert_allclose(cyclic_shift_power(0, 6), np.eye(6))
    with pytest.raises(ValueError):
        cyclic_shift_power(-1, 6)
    # zero-delay paths get no prefix phase
    np.testing.assert_allclose(cp_phase_matrix(0, lambda n: n * 0.3, 6), np.eye(6))
    d = np.diag(cp_phase_matrix(2, lambda n: 0.1 * n, 6))
    np.testing.assert_allclose(d[:2], np.exp(-2j * np.pi * np.array([0.2, 0.1])))
    np.testing.assert_allclose(d[2:], 1.0)
    om = np.diag(doppler_power_matrix(1, 2, 4, 0.5))
    np.testing.assert_allclose(om, np.exp(-2j * np.pi * 0.5 * (1 + 2 * np.arange(4)) / 8))
    with pytest.raises(ValueError):
        doppler_power_matrix(2, 2, 4, 0.1)
    with pytest.raises(ValueError):
        cp_phase_matrix(6, None, 6)


def test_effective_composition(rng):
    p = SystemParams(N=32, G=2, P=3, ell_max=6)
    T = AfdmTransform.from_params(p)
    phi = afdm_phase_function(p)
    paths = sample_paths(p, rng)
    d = stack_dictionary(paths, T, p)
    x = _cn(rng, 32)
    H = d.effective(paths.gains)
    for g in range(p.G):
        lhs = T.demodulate(td_channel_matrix(g, paths, phi, p) @ T.modulate(x))
        np.testing.assert_allclose(lhs, H[g * 32 : (g + 1) * 32] @ x, atol=1e-10)
        for q in range(len(paths)):
            block = T.matrix @ path_td_block(g, q, paths, phi, p) @ T.matrix.conj().T
            np.testing.assert_allclose(d.block(q, g), block, atol=1e-12)


def test_streams_differ_by_a_doppler_phase(rng):
    p = SystemParams(N=16, G=4, P=2, ell_max=4)
    paths = sample_paths(p, rng)
    d = stack_dictionary(paths, AfdmTransform.from_params(p), p)
    for q in range(len(paths)):
        for g in range(1, 4):
            rot = np.exp(-2j * np.pi * paths.dopplers[q] * g / (16 * 4))
            np.testing.assert_allclose(d.block(q, g), rot * d.block(q, 0), atol=1e-12)


def test_dictionary_layouts(rng):
    p = SystemParams(N=16, G=3, P=2, ell_max=4)
    d = stack_dictionary(sample_paths(p, rng), AfdmTransform.from_params(p), p)
    assert (d.n_paths, d.N, d.GN) == (3, 16, 48)
    np.testing.assert_array_equal(d.edges, d.gamma.transpose(1, 0, 2))
    np.testing.assert_allclose(d.edges_abs2, np.abs(d.edges) ** 2, rtol=1e-12)
    np.testing.assert_array_equal(d.stack(1), d.gamma[1])
    r = d.restrict(2)
    assert r.G == 2 and r.GN == 32
    np.testing.assert_array_equal(r.gamma, d.gamma[:, :32])
    with pytest.raises(ValueError):
        d.restrict(4)
    with pytest.raises(ValueError):
        ChannelDictionary(np.zeros((2, 30, 16)), 2)


def test_transmit_through(rng):
    p = SystemParams(N=16, G=2, P=2, ell_max=4)
    phi = afdm_phase_function(p)
    paths = sample_paths(p, rng)
    s = _cn(rng, 16)
    w = _cn(rng, 32).reshape(2, 16)
    clean = transmit_through(paths, s, None, p)
    noisy = transmit_through(paths, s, w, p)
    for g in range(2):
        np.testing.assert_allclose(clean[g], td_channel_matrix(g, paths, phi, p) @ s, atol=1e-12)
        np.testing.assert_allclose(noisy[g] - clean[g], w[g], atol=1e-12)
    with pytest.raises(ValueError):
        transmit_through(paths, s[:8], None, p)
    with pytest.raises(ValueError):
        transmit_through(paths, s, w[:1], p)


def test_degenerate_bounds(rng):
    flat = SystemParams(ell_max=0, distinct_delays=False)
    static = SystemParams(f_max=0.0)
    for _ in range(20):
        np.testing.assert_array_equal(sample_paths(flat, rng).delays, 0)
        np.testing.assert_array_equal(sample_paths(static, rng).dopplers, 0.0)


def test_doppler_mean_is_zero(rng):
    p = SystemParams(P=0)
    f = np.array([sample_paths(p, rng).dopplers[0] for _ in range(20000)])
    # arcsine law on [-a, a] has variance a^2 / 2
    assert abs(f.mean()) < 3 * np.sqrt(p.f_max**2 / 2 / f.size)


def test_shift_and_doppler_examples():
    v = np.array([1.0, 2.0, 3.0, 4.0])
    np.testing.assert_array_equal(cyclic_shift_power(1, 4) @ v, [4.0, 1.0, 2.0, 3.0])
    np.testing.assert_array_equal(cyclic_shift_power(4, 4), np.eye(4))
    for k in range(5):
        np.testing.assert_array_equal(cyclic_shift_power(3, 5) @ np.eye(5)[k], np.eye(5)[(k + 3) % 5])
    om = np.diag(doppler_power_matrix(0, 1, 4, 1.0))
    np.testing.assert_allclose(om, [1, np.exp(-0.5j * np.pi), np.exp(-1j * np.pi), np.exp(-1.5j * np.pi)])
    np.testing.assert_allclose(doppler_power_matrix(1, 2, 4, 0.0), np.eye(4))


def test_prefix_phase_example():
    N = 4
    for c1 in (1 / 8, 1 / 16):
        phi = lambda n, c1=c1: c1 * (N * N - 2 * N * np.asarray(n, dtype=float))
        d = np.diag(cp_phase_matrix(2, phi, N))
        # phi(2) = 0 and phi(1) = 8 c1
        np.testing.assert_allclose(d, [1.0, np.exp(-2j * np.pi * 8 * c1), 1.0, 1.0], atol=1e-12)
    np.testing.assert_allclose(cp_phase_matrix(3, lambda n: 0 * n, 8), np.eye(8))


def test_effective_blocks_unitary(rng):
    p = SystemParams(N=64, G=2, P=4, ell_max=10)
    d = stack_dictionary(sample_paths(p, rng), AfdmTransform.from_params(p), p)
    for q in range(d.n_paths):
        for g in range(p.G):
            B = d.block(q, g)
            assert np.linalg.norm(B @ B.conj().T - np.eye(64)) < 1e-9


def test_static_channel_is_circulant_and_stream_independent(rng):
    p = SystemParams(N=16, G=3, P=2, ell_max=4, f_max=0.0)
    paths = sample_paths(p, rng)
    psi = [td_channel_matrix(g, paths, None, p) for g in range(p.G)]
    for g in range(1, p.G):
        np.testing.assert_allclose(psi[g], psi[0])
    first = psi[0][:, 0]
    for k in range(16):
        np.testing.assert_allclose(psi[0][:, k], np.roll(first, k))


def test_streams_differ_only_with_doppler(rng):
    p = SystemParams(N=16, G=2, P=0, ell_max=4)
    T = AfdmTransform.from_params(p)
    moving = stack_dictionary(PathSet([1.0], [2], [0.2]), T, p)
    still = stack_dictionary(PathSet([1.0], [2], [0.0]), T, p)
    assert np.linalg.norm(moving.block(0, 0) - moving.block(0, 1)) > 1e-3
    np.testing.assert_allclose(still.block(0, 0), still.block(0, 1), atol=1e-12)
    single = stack_dictionary(PathSet([1.0], [2], [0.2]), T, p.replace(G=1))
    np.testing.assert_allclose(single.stack(0), moving.block(0, 0), atol=1e-12)


def test_stacked_observation_matches_streams(rng):
    from afdmsim.config import trial_seed
    from afdmsim.link import simulate_link
    from afdmsim.noise import build_shaper, sample_noise

    p = SystemParams(N=32, G=2, P=2, N_P=8, ell_max=6).with_snr(10.0)
    seed = trial_seed(0, 3, 1)
    real = simulate_link(p, seed)
    # regenerate the noise stream the link used and push it through the DAFT
    noise_rng = np.random.default_rng(np.random.SeedSequence(seed.entropy, spawn_key=seed.spawn_key + (2,)))
    w = sample_noise(build_shaper(p.G, p.sigma_w_sq, p.rolloff), p.N, noise_rng).streams
    w_tilde = np.concatenate([real.transform.demodulate(w[g]) for g in range(p.G)])
    expected = real.dictionary.effective(real.paths.gains) @ real.frame.x + w_tilde
    np.testing.assert_allclose(real.y, expected, atol=1e-10)
