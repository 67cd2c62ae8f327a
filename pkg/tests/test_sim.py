import numpy as np
import pytest
from scipy.special import erfc

from ftnlab.isi import build_isi_matrix, whiten_model
from ftnlab.sim import (
    BerPoint,
    ChannelConfig,
    _chunk_blocks,
    ber_sweep,
    ebn0_to_sigma2,
    simulate_block,
    spectral_efficiency,
)


class TestNoiseMapping:
    def test_reference_points(self):
        assert ebn0_to_sigma2(0.0, 1.0, 1.0) == pytest.approx(0.5)
        assert ebn0_to_sigma2(3.0103, 1.0, 1.0) == pytest.approx(0.25, abs=1e-6)
        assert ebn0_to_sigma2(0.0, 0.8, 1.0) == pytest.approx(0.4)

    def test_es_policy_ignores_packing(self):
        assert ebn0_to_sigma2(0.0, 0.8, 1.0, policy="es") == pytest.approx(0.5)

    def test_validation(self):
        with pytest.raises(ValueError):
            ebn0_to_sigma2(0.0, 0.8, 0.0)
        with pytest.raises(ValueError):
            ebn0_to_sigma2(0.0, 0.8, 1.0, policy="watts")


class TestChannelConfig:
    def test_sigma2_property(self):
        config = ChannelConfig(ebn0_db=0.0, tau=0.8, beta=0.3, N=16)
        assert config.sigma2 == pytest.approx(0.4)

    def test_validation(self):
        with pytest.raises(ValueError):
            ChannelConfig(ebn0_db=0.0, tau=1.5, beta=0.3, N=16)
        with pytest.raises(ValueError):
            ChannelConfig(ebn0_db=0.0, tau=0.8, beta=0.3, N=0)
        with pytest.raises(ValueError):
            ChannelConfig(ebn0_db=0.0, tau=0.8, beta=0.3, N=4, eb_policy="bogus")


class TestSimulateBlock:
    def test_noise_free_is_exact_convolution(self):
        _, whitened = whiten_model(0.3, 0.8)
        G = build_isi_matrix(whitened, 16, 0.8, 1.0, "convolution")
        config = ChannelConfig(ebn0_db=300.0, tau=0.8, beta=0.3, N=16)
        a, y = simulate_block(config, G, np.random.default_rng(0))
        assert set(np.unique(a)) <= {-1.0, 1.0}
        assert y == pytest.approx(G.entries @ a, abs=1e-6)

    def test_nyquist_channel_is_identity_plus_noise(self):
        _, whitened = whiten_model(0.3, 1.0)
        G = build_isi_matrix(whitened, 8, 1.0, 1.0, "convolution")
        config = ChannelConfig(ebn0_db=0.0, tau=1.0, beta=0.3, N=8)
        rng = np.random.default_rng(1)
        a, y = simulate_block(config, G, rng)
        assert y.shape == (8,)

    def test_noise_moments(self):
        _, whitened = whiten_model(0.3, 0.8)
        N = 16
        G = build_isi_matrix(whitened, N, 0.8, 1.0, "convolution")
        config = ChannelConfig(ebn0_db=2.0, tau=0.8, beta=0.3, N=N)
        rng = np.random.default_rng(2)
        draws = 6000  # ~1e5 noise samples
        residuals = np.empty((draws, N))
        for i in range(draws):
            a, y = simulate_block(config, G, rng)
            residuals[i] = y - G.entries @ a
        samples = residuals.ravel()
        sigma2 = config.sigma2
        se_mean = np.sqrt(sigma2 / samples.size)
        assert abs(samples.mean()) < 3 * se_mean
        se_var = sigma2 * np.sqrt(2.0 / samples.size)
        assert abs(samples.var() - sigma2) < 3 * se_var

    def test_domain_check(self):
        from ftnlab.pulse import PulseConfig, isi_taps

        taps = isi_taps(PulseConfig(beta=0.3), 0.8)
        gram = build_isi_matrix(taps, 8, 0.8, 1.0, "gram")
        config = ChannelConfig(ebn0_db=0.0, tau=0.8, beta=0.3, N=8)
        with pytest.raises(ValueError):
            simulate_block(config, gram, np.random.default_rng(0))


class TestSpectralEfficiency:
    def test_reference_values(self):
        assert spectral_efficiency(0.3, 0.8) == pytest.approx(0.9615, abs=5e-4)
        assert spectral_efficiency(0.3, 0.7) == pytest.approx(1.0989, abs=5e-4)
        assert spectral_efficiency(0.0, 1.0) == 1.0

    def test_constellation_scaling(self):
        assert spectral_efficiency(0.3, 0.8, 4) == pytest.approx(2 / (1.3 * 0.8))
        with pytest.raises(ValueError):
            spectral_efficiency(0.3, 0.8, 1)


class TestBerSweep:
    def test_nyquist_matches_analytic_curve(self):
        points = ber_sweep(0.3, 1.0, 16, [4.0], "pda", seed=77,
                           min_errors=10**9, max_blocks=6250)  # 1e5 bits
        point = points[0]
        ratio = 10 ** 0.4
        expected = 0.5 * erfc(np.sqrt(ratio))
        se = np.sqrt(expected * (1 - expected) / point.bits)
        assert abs(point.ber - expected) < 3 * se

    def test_deterministic_and_paired(self):
        kwargs = dict(seed=5, min_errors=50, max_blocks=2000)
        first = ber_sweep(0.3, 1.0, 16, [2.0], ["pda", "successive"], **kwargs)
        second = ber_sweep(0.3, 1.0, 16, [2.0], ["pda", "successive"], **kwargs)
        assert [(p.detector, p.bit_errors, p.bits) for p in first] == \
               [(p.detector, p.bit_errors, p.bits) for p in second]
        # at tau = 1 every detector reduces to the sign rule on the same
        # paired blocks, so the error counts agree exactly
        by_name = {p.detector: p for p in first}
        assert by_name["pda"].bit_errors == by_name["successive"].bit_errors

    def test_stop_rule_error_floor(self):
        points = ber_sweep(0.3, 1.0, 16, [0.0], "successive", seed=1,
                           min_errors=30, max_blocks=50_000)
        point = points[0]
        assert point.bit_errors >= 30
        assert point.blocks < 50_000
        assert point.blocks % _chunk_blocks(16) == 0

    def test_stop_rule_block_cap(self):
        points = ber_sweep(0.3, 1.0, 16, [10.0], "successive", seed=1,
                           min_errors=10**9, max_blocks=300)
        assert points[0].blocks == 300
        assert points[0].bits == 300 * 16

    def test_update_count_semantics(self):
        points = ber_sweep(0.3, 0.8, 12, [6.0], ["pda", "successive", "mlse"],
                           seed=2, min_errors=1, max_blocks=256, sweeps=8)
        by_name = {p.detector: p for p in points}
        assert by_name["pda"].update_count_mean == pytest.approx(8 * 12)
        assert by_name["successive"].update_count_mean == pytest.approx(12)
        assert by_name["mlse"].update_count_mean == 0.0

    def test_pda_beats_baseline_with_isi(self):
        points = ber_sweep(0.3, 0.8, 32, [5.0], ["pda", "successive"],
                           seed=3, min_errors=150, max_blocks=4000)
        by_name = {p.detector: p for p in points}
        assert by_name["pda"].bit_errors <= by_name["successive"].bit_errors

    def test_worker_pool_matches_serial(self):
        kwargs = dict(seed=11, min_errors=10**9, max_blocks=1024)
        serial = ber_sweep(0.3, 1.0, 16, [3.0], "successive", workers=1, **kwargs)
        pooled = ber_sweep(0.3, 1.0, 16, [3.0], "successive", workers=2, **kwargs)
        assert [(p.bit_errors, p.bits, p.blocks) for p in serial] == \
               [(p.bit_errors, p.bits, p.blocks) for p in pooled]

    def test_llr_collector_rows(self):
        rows = []
        ber_sweep(0.3, 0.8, 8, [4.0], ["pda", "successive"], seed=4,
                  min_errors=10**9, max_blocks=16,
                  llr_collector=lambda *row: rows.append(row))
        assert len(rows) == 16  # soft rows come from the PDA only
        name, ebn0, block, llr = rows[0]
        assert name == "pda"
        assert llr.shape == (8,)

    def test_unknown_detector_rejected(self):
        with pytest.raises(ValueError):
            ber_sweep(0.3, 0.8, 8, [4.0], "viterbi")


class TestBerPoint:
    def test_ci95_normal_approximation(self):
        point = BerPoint(detector="pda", ebn0_db=4.0, bit_errors=100,
                         bits=10_000, blocks=100)
        p = 0.01
        assert point.ber == pytest.approx(p)
        assert point.ci95 == pytest.approx(1.96 * np.sqrt(p * (1 - p) / 10_000))

    def test_merge_is_additive(self):
        a = BerPoint(detector="pda", ebn0_db=4.0, bit_errors=5, bits=100,
                     blocks=10, update_count_total=50, wall_time=1.0)
        b = BerPoint(detector="pda", ebn0_db=4.0, bit_errors=7, bits=200,
                     blocks=20, update_count_total=100, wall_time=2.0)
        a.merge(b)
        assert (a.bit_errors, a.bits, a.blocks) == (12, 300, 30)
        assert a.update_count_mean == pytest.approx(5.0)

    def test_empty_point(self):
        point = BerPoint(detector="pda", ebn0_db=0.0)
        assert point.ber == 0.0
        assert point.ci95 == 0.0
        assert point.update_count_mean == 0.0
