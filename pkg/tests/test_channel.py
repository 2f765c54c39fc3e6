"""Statistical and contract tests for the fading/noise channel."""

import numpy as np
import pytest

from cpmstc.cpm import CpmParams
from cpmstc.channel import ChannelRealization, NoiseParams, awgn, draw_channel, transmit


def test_gain_unit_mean_square():
    rng = np.random.default_rng(0)
    ch = draw_channel(rng, 2, 1, (100_000,))
    assert np.mean(np.abs(ch.alpha) ** 2) == pytest.approx(1.0, abs=0.02)


def test_gains_uncorrelated_across_antennas():
    rng = np.random.default_rng(1)
    ch = draw_channel(rng, 2, 1, (100_000,))
    a, b = ch.alpha[:, 0, 0], ch.alpha[:, 1, 0]
    corr = np.mean(a * np.conj(b))
    assert abs(corr) < 0.02


def test_gain_mean_is_zero():
    rng = np.random.default_rng(2)
    ch = draw_channel(rng, 2, 2, (50_000,))
    assert abs(np.mean(ch.alpha)) < 0.02


def test_fixed_seed_reproducible():
    a = draw_channel(np.random.default_rng(42), 2, 2, (16,)).alpha
    b = draw_channel(np.random.default_rng(42), 2, 2, (16,)).alpha
    np.testing.assert_array_equal(a, b)


def test_noiseless_identity_column_passes_first_antenna():
    s = np.exp(2j * np.pi * np.linspace(0, 1, 32))[None, :] * np.ones((2, 1))
    s[1] *= 1j
    ch = ChannelRealization(alpha=np.array([[1.0 + 0j], [0.0 + 0j]]))
    y = transmit(s, ch)
    np.testing.assert_array_equal(y[0], s[0])


def test_noiseless_zero_gains_silence():
    s = np.ones((2, 16), dtype=complex)
    ch = ChannelRealization(alpha=np.zeros((2, 1), dtype=complex))
    np.testing.assert_array_equal(transmit(s, ch), np.zeros((1, 16)))


def test_antenna_dimension_checked():
    s = np.ones((2, 16), dtype=complex)
    ch = ChannelRealization(alpha=np.ones((3, 1), dtype=complex))
    with pytest.raises(ValueError):
        transmit(s, ch)


def test_noise_needs_rng_and_dt():
    s = np.ones((1, 16), dtype=complex)
    ch = ChannelRealization(alpha=np.ones((1, 1), dtype=complex))
    noise = NoiseParams.from_ebn0(CpmParams(), 10.0)
    with pytest.raises(ValueError):
        transmit(s, ch, noise)


def test_noise_variance_calibration():
    """Per-sample complex variance must be N0/dt within 1%."""
    p = CpmParams(M=8)
    noise = NoiseParams.from_ebn0(p, 6.0)
    rng = np.random.default_rng(3)
    w = awgn(rng, (200_000,), noise.sigma2_per_sample(p.dt))
    measured = np.mean(np.abs(w) ** 2) * p.dt
    assert measured == pytest.approx(noise.n0, rel=0.01)


def test_noise_whiteness():
    rng = np.random.default_rng(4)
    w = awgn(rng, (100_000,), 1.0)
    for lag in (1, 2, 5, 17):
        r = np.mean(w[lag:] * np.conj(w[:-lag]))
        assert abs(r) < 0.01


def test_derived_n0_from_ebn0():
    p = CpmParams(M=8)  # Eb = Es/3
    noise = NoiseParams.from_ebn0(p, 0.0)
    assert noise.n0 == pytest.approx(p.es / 3)


def test_received_power_independent_of_tx_count():
    """With the total-energy split, average received signal power stays at
    Es/T * E[|alpha|^2] whether one or two antennas transmit."""
    from cpmstc.codes import encode_stream, scheme_by_name
    p = CpmParams(m0=1, p=4, M=4, gamma=2, samples_per_symbol=8)
    rng = np.random.default_rng(5)
    levels = [int(v) for v in rng.choice(np.arange(-3, 4, 2), size=64)]
    powers = {}
    for name in ("conventional", "parallel-l2"):
        scheme = scheme_by_name(name)
        wave, _, _ = encode_stream(scheme, p, levels)
        acc = 0.0
        n_draws = 4000
        ch = draw_channel(np.random.default_rng(6), scheme.n_tx, 1, (n_draws,))
        for k in range(n_draws):
            y = transmit(wave, ChannelRealization(ch.alpha[k]))
            acc += np.mean(np.abs(y) ** 2)
        powers[name] = acc / n_draws
    assert powers["parallel-l2"] == pytest.approx(powers["conventional"], rel=0.05)
    assert powers["conventional"] == pytest.approx(p.es / p.t_symbol, rel=0.05)
