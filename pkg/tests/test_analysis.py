"""Tests for the experiment harnesses: BER engine, slope fit, PSD tools."""

import numpy as np
import pytest

from cpmstc.cpm import CpmParams
from cpmstc.codes import encode_stream, initial_state, scheme_by_name
from cpmstc.receiver import ReceiverContext
from cpmstc.analysis import (BerConfig, BerRecord, ber_confidence_radius,
                             diversity_slope, psd_power_integral, psd_welch,
                             run_ber, run_psd, spectrum_shift, synthesize_batch)


def _record(ebn0, ber, errors):
    # back out a block count that makes .ber come out exactly
    bits_per_symbol = 2
    bits = errors / ber
    blocks = int(round(bits / (2 * bits_per_symbol)))
    return BerRecord(scheme="parallel-l2", n_tx=2, n_rx=1, ebn0_db=ebn0,
                     blocks=blocks, bit_errors=errors,
                     bits_per_symbol=bits_per_symbol)


class TestDiversitySlope:
    def test_exact_second_order_power_law(self):
        ebn0 = [4, 6, 8, 10, 12]
        bers = [1e-1 * 10 ** (-2 * e / 10) for e in ebn0]
        recs = [_record(e, b, 1000) for e, b in zip(ebn0, bers)]
        assert diversity_slope(recs) == pytest.approx(-2.0, abs=0.01)

    def test_exact_fourth_order_power_law(self):
        ebn0 = [2, 4, 6, 8]
        bers = [1e-1 * 10 ** (-4 * e / 10) for e in ebn0]
        recs = [_record(e, b, 500) for e, b in zip(ebn0, bers)]
        assert diversity_slope(recs) == pytest.approx(-4.0, abs=0.01)

    def test_only_top_decade_is_used(self):
        # shallow at low SNR, -3 per decade over the top 10 dB
        ebn0 = [0, 5, 10, 15, 20]
        bers = [0.3, 0.2, 1e-2, 10 ** (-2 - 1.5), 1e-5]
        recs = [_record(e, b, 500) for e, b in zip(ebn0, bers)]
        assert diversity_slope(recs) == pytest.approx(-3.0, abs=0.01)

    def test_unreliable_points_excluded(self):
        recs = [_record(e, 1e-3, 40) for e in (8, 10, 12)]
        with pytest.raises(ValueError):
            diversity_slope(recs)

    def test_needs_three_points(self):
        recs = [_record(e, 1e-3, 500) for e in (10, 12)]
        with pytest.raises(ValueError):
            diversity_slope(recs)


@pytest.fixture(scope="module")
def smoke_cfg():
    return BerConfig(scheme="parallel-l2", M=4, gamma=2,
                     samples_per_symbol=8, n_rx=1, ebn0_grid=(6.0,),
                     seed=11, target_errors=50, max_blocks=30_000)


class TestBerEngine:

    def test_deterministic_given_seed(self, smoke_cfg):
        assert run_ber(smoke_cfg) == run_ber(smoke_cfg)

    def test_effectively_noiseless_grid_point_has_zero_errors(self):
        cfg = BerConfig(scheme="parallel-l2", M=4, gamma=2,
                        samples_per_symbol=8, n_rx=1, ebn0_grid=(300.0,),
                        seed=1, target_errors=10, max_blocks=12_288)
        rec = run_ber(cfg)[0]
        assert rec.bit_errors == 0
        assert rec.ber == 0.0

    def test_stops_after_error_target(self, smoke_cfg):
        rec = run_ber(smoke_cfg)[0]
        assert rec.bit_errors >= smoke_cfg.target_errors
        assert rec.blocks <= smoke_cfg.max_blocks

    def test_grid_validation(self):
        with pytest.raises(ValueError):
            run_ber(BerConfig(ebn0_grid=(4.0, 2.0)))

    def test_ber_arithmetic(self):
        rec = BerRecord(scheme="x", n_tx=2, n_rx=1, ebn0_db=0.0, blocks=100,
                        bit_errors=30, bits_per_symbol=3)
        assert rec.bits == 600
        assert rec.ber == pytest.approx(0.05)

    def test_confidence_radius_shrinks_with_data(self):
        small = _record(0, 1e-2, 100)
        big = _record(0, 1e-2, 10_000)
        assert ber_confidence_radius(big) < ber_confidence_radius(small)

    def test_thread_count_does_not_change_results(self, smoke_cfg):
        from dataclasses import replace
        threaded = replace(smoke_cfg, threads=3)
        assert run_ber(threaded) == run_ber(smoke_cfg)

    def test_ber_monotone_and_rx_diversity_helps(self):
        """BER never increases with Eb/N0 (within 2 sigma), and a second
        receive antenna never hurts at matched grid points."""
        common = dict(scheme="parallel-l2", M=4, gamma=2, samples_per_symbol=8,
                      seed=13, target_errors=150, max_blocks=100_000,
                      ebn0_grid=(0.0, 4.0, 8.0))
        r21 = run_ber(BerConfig(n_rx=1, **common))
        r22 = run_ber(BerConfig(n_rx=2, **common))
        for recs in (r21, r22):
            for a, b in zip(recs, recs[1:]):
                margin = 2 * (ber_confidence_radius(a, z=1.0)
                              + ber_confidence_radius(b, z=1.0))
                assert b.ber <= a.ber + margin
        for a, b in zip(r21, r22):
            margin = ber_confidence_radius(a) + ber_confidence_radius(b)
            assert b.ber <= a.ber + margin


class TestBatchSynthesis:
    @pytest.mark.parametrize("name", ["conventional", "parallel-l2", "wang-xia"])
    def test_matches_reference_encoder(self, name):
        """The table-walk fast path must agree with the rational-arithmetic
        encoder it was built from."""
        p = CpmParams(m0=1, p=4, M=4, gamma=2, samples_per_symbol=8)
        scheme = scheme_by_name(name)
        ctx = ReceiverContext(scheme, p)
        rng = np.random.default_rng(2)
        idx = rng.integers(0, 4, size=(2, 16))
        fast = synthesize_batch(ctx, idx)
        for b in range(2):
            levels = [-3 + 2 * int(a) for a in idx[b]]
            tail = (-3,) * (p.gamma - 1)
            wave, _, _ = encode_stream(scheme, p, levels,
                                       initial_state(scheme, p, tail))
            np.testing.assert_allclose(fast[b].reshape(scheme.n_tx, -1), wave,
                                       atol=1e-12)


class TestPsd:
    def test_pure_tone_peaks_at_its_frequency(self):
        dt = 1 / 64
        t = np.arange(1 << 16) * dt
        f0 = 3.25
        f, pxx = psd_welch(np.exp(2j * np.pi * f0 * t), dt)
        assert abs(f[int(np.argmax(pxx))] - f0) <= (f[1] - f[0])

    def test_white_noise_is_flat(self):
        rng = np.random.default_rng(3)
        x = (rng.standard_normal(1 << 17) + 1j * rng.standard_normal(1 << 17))
        f, pxx = psd_welch(x, 1.0)
        db = 10 * np.log10(pxx)
        assert db.max() - db.min() < 2.0  # +-1 dB around the mean

    def test_stream_too_short(self):
        with pytest.raises(ValueError):
            psd_welch(np.ones(100, dtype=complex), 1.0)

    def test_power_conservation(self):
        p = CpmParams(m0=1, p=4, M=8, gamma=2, samples_per_symbol=64)
        rec = run_psd("conventional", p, n_blocks=1024, seed=4)
        assert psd_power_integral(rec) == pytest.approx(rec.power, rel=0.01)

    def test_record_layout(self):
        p = CpmParams(m0=1, p=4, M=8, gamma=2, samples_per_symbol=64)
        rec = run_psd("parallel-l2", p, n_blocks=512, seed=5)
        assert rec.psd_db.shape[0] == 2
        assert rec.f_td.shape == rec.psd_db[0].shape


class TestSpectrumShift:
    def test_identical_spectra_report_zero(self):
        rng = np.random.default_rng(6)
        psd = 10 * np.log10(rng.uniform(0.1, 1, size=512))
        assert spectrum_shift(psd, psd, 0.01) == pytest.approx(0.0, abs=1e-9)

    def test_constructed_shift_recovered(self):
        f = np.linspace(-4, 4, 1024)
        df = f[1] - f[0]
        base = -30 * (np.abs(f) ** 1.5) + 10 * np.exp(-(f / 0.3) ** 2)
        k = 26  # shift by an awkward number of bins
        shifted = np.roll(base, k)
        est = spectrum_shift(base, shifted, df)
        assert est == pytest.approx(k * df, abs=df)

    def test_fractional_shift_within_one_bin(self):
        f = np.linspace(-4, 4, 2048)
        df = float(f[1] - f[0])
        target = 0.2
        base = 10 * np.log10(np.exp(-(f / 0.5) ** 2) + 1e-6)
        moved = 10 * np.log10(np.exp(-((f - target) / 0.5) ** 2) + 1e-6)
        est = spectrum_shift(base, moved, df)
        assert est == pytest.approx(target, abs=df)

    def test_grid_mismatch_rejected(self):
        with pytest.raises(ValueError):
            spectrum_shift(np.zeros(8), np.zeros(9), 0.1)
