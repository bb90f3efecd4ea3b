import numpy as np
import pytest

from gwxlab import (
    DegeneracyError,
    MfConfig,
    PowerSpectrum,
    TimeSeries,
    ValidationError,
    ccf_decorrelation_time,
    colored_noise,
    decorrelation_time,
    default_detector_model,
    derive_seed,
    inject,
    matched_filter,
    normalized_ccf,
    peak_ratio_r3,
    reweight_snr,
    rng_for,
    running_window_ccf,
    sigma_norm,
    stock_template,
)
from gwxlab.simulation import PsdModel, PsdSegment

FS = 4096.0
E_INV = 1.0 / np.e


def flat_psd(level=1.0, fs=FS):
    return PowerSpectrum(df=1.0, values=np.full(int(fs / 2) + 1, level))


def whitened_template_kernel(template, psd):
    """Independent construction of the cyclic-prefix detection kernel."""
    nt = template.n
    dt = 1.0 / template.fs
    htilde = np.fft.rfft(template.samples) * dt
    df = template.fs / nt
    grid = psd.interpolated(df, nt // 2 + 1)
    grid = np.maximum(grid, 1e-12 * np.median(grid[grid > 0]))
    g_freq = np.zeros(nt, dtype=complex)
    g_freq[1:nt // 2 + 1] = (htilde / grid)[1:]
    return np.fft.ifft(g_freq) * template.fs


def direct_linear_mf(strain, template, psd):
    """Brute-force oracle: per-lag dot products against the whitened kernel."""
    kernel = whitened_template_kernel(template, psd)
    n, nt = strain.n, template.n
    dt = 1.0 / strain.fs
    z = np.empty(n - nt + 1, dtype=complex)
    conj_kernel = np.conj(kernel)
    for lag in range(n - nt + 1):
        z[lag] = np.dot(strain.samples[lag:lag + nt], conj_kernel)
    z *= 4.0 * dt
    return np.abs(z) / np.sqrt(sigma_norm(template, psd))


class TestSigmaNorm:
    def test_quadratic_scaling(self):
        tpl = stock_template("gw150914", FS)
        psd = flat_psd()
        base = sigma_norm(tpl.base, psd)
        scaled = sigma_norm(tpl.base.with_samples(2.0 * tpl.base.samples), psd)
        assert scaled == pytest.approx(4.0 * base, rel=1e-10)

    def test_flat_psd_closed_form(self):
        # direct one-sided sum oracle, and the energy/level proportionality
        tpl = stock_template("gw150914", FS)
        level = 0.37
        psd = flat_psd(level)
        hh = sigma_norm(tpl.base, psd)
        htilde = np.fft.rfft(tpl.base.samples) / FS
        df = FS / tpl.base.n
        oracle = 4.0 * np.sum(np.abs(htilde[1:]) ** 2) / level * df
        assert hh == pytest.approx(oracle, rel=1e-10)
        assert sigma_norm(tpl.base, flat_psd(2 * level)) == pytest.approx(hh / 2, rel=1e-10)

    def test_zero_template(self):
        with pytest.raises(DegeneracyError):
            sigma_norm(TimeSeries(FS, 0.0, np.zeros(1024)), flat_psd())


class TestMatchedFilter:
    def test_self_match_peak(self):
        tpl = stock_template("gw150914", FS)
        psd = flat_psd()
        host = TimeSeries(FS, 0.0, np.zeros(int(2 * FS)))
        strain = inject(host, tpl.base, 0.0)
        snr = matched_filter(strain, tpl.base, psd,
                             MfConfig(block_len=2.0, mode="circular", reweight_bins=None))
        assert snr.peak.time == 0.0
        # substitution identity against the filter's own normalization
        assert snr.peak.value == pytest.approx(snr.sigma, rel=1e-6)
        # template-grid norm agrees with the block-grid one up to discretization
        assert snr.peak.value == pytest.approx(
            np.sqrt(sigma_norm(tpl.base, psd)), rel=1e-3
        )

    def test_injection_into_white_noise_at_rho20(self):
        psd = flat_psd(2.0 / FS)
        tpl = stock_template("gw150914", FS)
        amp = 20.0 / np.sqrt(sigma_norm(tpl.base, psd))
        noise = TimeSeries(FS, 0.0, rng_for(404).standard_normal(int(16 * FS)))
        strain = inject(noise, tpl.base.with_samples(amp * tpl.base.samples), 10.0)
        snr = matched_filter(strain, tpl.base, psd,
                             MfConfig(block_len=16.0, mode="circular",
                                      reweight_bins=None))
        assert abs(snr.peak.time - 10.0) <= 1.0 / FS + 1e-12
        assert snr.peak.value == pytest.approx(20.0, rel=0.2)

    def test_injection_recovery_time(self):
        model = default_detector_model()
        psd = model.to_power_spectrum(0.25, int(4 * FS) // 2 + 1)
        tpl = stock_template("gw150914", FS)
        amp = 20.0 / np.sqrt(sigma_norm(tpl.base, psd))
        noise = colored_noise(model, 4.0, FS, seed=77)
        strain = inject(noise, tpl.base.with_samples(amp * tpl.base.samples), 2.0)
        snr = matched_filter(strain, tpl.base, psd,
                             MfConfig(block_len=4.0, mode="circular", reweight_bins=None))
        assert abs(snr.peak.time - 2.0) <= 3.0 / FS
        assert snr.peak.value == pytest.approx(20.0, rel=0.25)

    def test_cyclic_prefix_equals_direct_correlation(self):
        rng = rng_for(2)
        strain = TimeSeries(FS, 0.0, rng.standard_normal(int(1.0 * FS)))
        template = TimeSeries(FS, 0.0, rng.standard_normal(int(0.25 * FS)))
        values = np.exp(0.5 * rng.standard_normal(65))
        psd = PowerSpectrum(df=32.0, values=values)
        snr = matched_filter(strain, template, psd,
                             MfConfig(block_len=1.0, mode="cyclic_prefix",
                                      reweight_bins=None))
        oracle = direct_linear_mf(strain, template, psd)
        assert snr.rho.size == oracle.size
        dev = np.max(np.abs(snr.rho - oracle)) / np.max(oracle)
        assert dev < 1e-6

    def test_circular_artifact_witness(self):
        tpl = stock_template("gw150914", FS)
        psd = flat_psd()
        n, nt = int(8 * FS), tpl.base.n
        x = rng_for(99).standard_normal(n) * 1e-3
        half = nt // 2
        x[n - half:] += tpl.base.samples[:half]
        x[:nt - half] += tpl.base.samples[half:]
        strain = TimeSeries(FS, 0.0, x)
        circ = matched_filter(strain, tpl.base, psd,
                              MfConfig(block_len=8.0, mode="circular", reweight_bins=None))
        cyc = matched_filter(strain, tpl.base, psd,
                             MfConfig(block_len=8.0, mode="cyclic_prefix",
                                      reweight_bins=None))
        wrap_time = (n - half) / FS
        assert abs(circ.peak.time - wrap_time) < 2.0 / FS
        assert abs(circ.peak.time - cyc.peak.time) > tpl.base.duration / 2

    def test_time_shift_equivariance(self):
        tpl = stock_template("gw170104", FS)
        psd = flat_psd()
        noise = rng_for(5).standard_normal(int(2 * FS)) * 1e-3
        cfg = MfConfig(block_len=2.0, mode="cyclic_prefix", reweight_bins=None)
        peaks = []
        for k in (1000, 1000 + 357):
            x = noise.copy()
            x[k:k + tpl.base.n] += tpl.base.samples
            snr = matched_filter(TimeSeries(FS, 0.0, x), tpl.base, psd, cfg)
            peaks.append(int(round(snr.peak.time * FS)))
        assert peaks[1] - peaks[0] == 357

    def test_template_scale_invariance(self):
        tpl = stock_template("gw150914", FS)
        psd = flat_psd()
        noise = TimeSeries(FS, 0.0, rng_for(6).standard_normal(int(1 * FS)))
        cfg = MfConfig(block_len=1.0, mode="circular", reweight_bins=None)
        a = matched_filter(noise, tpl.base, psd, cfg)
        b = matched_filter(noise, tpl.base.with_samples(250.0 * tpl.base.samples), psd, cfg)
        np.testing.assert_allclose(a.rho, b.rho, rtol=1e-9)

    def test_oracle_equivalence_many_triples(self):
        # 20 seeded (strain, template, psd) triples at machine-level agreement
        for seed in range(20):
            rng = rng_for(derive_seed(1000, seed))
            fs = 2048.0
            strain = TimeSeries(fs, 0.0, rng.standard_normal(2048))
            template = TimeSeries(fs, 0.0, rng.standard_normal(512))
            psd = PowerSpectrum(df=16.0, values=np.exp(rng.standard_normal(65)))
            snr = matched_filter(strain, template, psd,
                                 MfConfig(block_len=None, mode="cyclic_prefix",
                                          reweight_bins=None))
            oracle = direct_linear_mf(strain, template, psd)
            assert np.max(np.abs(snr.rho - oracle)) / np.max(oracle) < 1e-6

    def test_template_longer_than_strain(self):
        tpl = stock_template("gw150914", FS)
        short = TimeSeries(FS, 0.0, np.zeros(256))
        with pytest.raises(ValidationError):
            matched_filter(short, tpl.base, flat_psd(), MfConfig(block_len=None))

    def test_block_len_must_match(self):
        tpl = stock_template("gw150914", FS)
        strain = TimeSeries(FS, 0.0, rng_for(1).standard_normal(int(2 * FS)))
        with pytest.raises(ValidationError):
            matched_filter(strain, tpl.base, flat_psd(), MfConfig(block_len=4.0))


class TestReweightSnr:
    def test_perfect_match_not_suppressed(self):
        tpl = stock_template("gw150914", FS)
        psd = flat_psd()
        strain = inject(TimeSeries(FS, 0.0, np.zeros(int(2 * FS))), tpl.base, 1.0)
        snr = matched_filter(strain, tpl.base, psd,
                             MfConfig(block_len=2.0, mode="circular", reweight_bins=16))
        k = int(np.argmax(snr.rho))
        assert snr.chi2_reduced[k] <= 1.0
        assert snr.rho_reweighted[k] == snr.rho[k]

    def test_broadband_burst_suppressed(self):
        # mismatched noise burst: rho_hat < rho at the peak, 50 seeds
        tpl = stock_template("gw150914", FS)
        psd = flat_psd(2.0 / FS)
        wins = 0
        for s in range(50):
            noise = rng_for(derive_seed(3000, s)).standard_normal(int(2 * FS))
            burst = rng_for(derive_seed(3001, s)).standard_normal(int(0.25 * FS)) * 30.0
            strain = inject(TimeSeries(FS, 0.0, noise), TimeSeries(FS, 0.0, burst), 1.0)
            snr = matched_filter(strain, tpl.base, psd,
                                 MfConfig(block_len=2.0, mode="circular",
                                          reweight_bins=16))
            k = int(np.argmax(snr.rho))
            wins += snr.rho_reweighted[k] < snr.rho[k]
        assert wins == 50

    def test_reweight_standalone_matches_config_path(self):
        tpl = stock_template("gw150914", FS)
        psd = flat_psd(2.0 / FS)
        noise = TimeSeries(FS, 0.0, rng_for(8).standard_normal(int(2 * FS)))
        plain = matched_filter(noise, tpl.base, psd,
                               MfConfig(block_len=2.0, mode="circular",
                                        reweight_bins=None))
        via_cfg = matched_filter(noise, tpl.base, psd,
                                 MfConfig(block_len=2.0, mode="circular",
                                          reweight_bins=8))
        via_op = reweight_snr(plain, noise, tpl.base, psd, n_bins=8)
        np.testing.assert_allclose(via_op.rho_reweighted, via_cfg.rho_reweighted,
                                   rtol=1e-12)

    def test_tone_template_binning_fails(self):
        t = np.arange(1024) / FS
        tone = TimeSeries(FS, 0.0, np.sin(2 * np.pi * 512.0 * t))
        strain = TimeSeries(FS, 0.0, rng_for(4).standard_normal(4096))
        with pytest.raises(DegeneracyError):
            matched_filter(strain, tone, flat_psd(),
                           MfConfig(block_len=None, mode="circular", reweight_bins=16))

    def test_threshold_constant_exposed(self):
        from gwxlab import SNR_THRESHOLD
        assert SNR_THRESHOLD == 5.0


class TestDecorrelationTime:
    def test_white_noise_one_sample(self):
        noise = TimeSeries(FS, 0.0, rng_for(1).standard_normal(4096))
        assert decorrelation_time(noise) == pytest.approx(1.0 / FS)

    def test_pure_tone_never_decays(self):
        t = np.arange(4096) / FS
        tone = TimeSeries(FS, 0.0, np.sin(2 * np.pi * 64.0 * t))
        with pytest.raises(DegeneracyError):
            decorrelation_time(tone)

    def test_chirp_value_pinned_by_oracle(self):
        tpl = stock_template("gw150914", FS)
        tau0 = decorrelation_time(tpl.base)
        # independent oracle: dot-product autocorrelation, same envelope rule
        x = tpl.base.samples
        n = x.size
        r = np.array([
            np.dot(x[:n - k], x[k:]) / (n - k) for k in range(n)
        ])
        r = np.abs(r / r[0])
        w = int(round(FS / 60.0)) + 1
        expected = None
        for lag in range(1, n - w):
            if np.max(r[lag:lag + w]) < E_INV:
                expected = lag / FS
                break
        assert expected is not None
        assert tau0 == pytest.approx(expected, abs=1e-12)
        assert tau0 == pytest.approx(0.0107421875, abs=1e-9)

    def test_zero_input(self):
        with pytest.raises(DegeneracyError):
            decorrelation_time(TimeSeries(FS, 0.0, np.zeros(512)))


class TestNormalizedCcf:
    def test_self_correlation_unity(self):
        for name in ("gw150914", "gw151226", "gw170104"):
            tpl = stock_template(name, FS)
            max_lag = tpl.base.duration * 0.95
            ccf = normalized_ccf(tpl.base, tpl.base, max_lag=max_lag)
            zero = np.argmin(np.abs(ccf.lags))
            assert ccf.values[zero] == pytest.approx(1.0, abs=1e-9)
            assert ccf.r3 < E_INV
            assert ccf.peaky

    def test_independent_noise_rarely_peaky(self):
        peaky = 0
        for s in range(100):
            a = TimeSeries(FS, 0.0, rng_for(derive_seed(10, 2 * s)).standard_normal(819))
            b = TimeSeries(FS, 0.0, rng_for(derive_seed(10, 2 * s + 1)).standard_normal(819))
            ccf = normalized_ccf(a, b, max_lag=0.1)
            peaky += ccf.peaky
        assert peaky <= 5

    def test_bounded_by_cauchy_schwarz(self):
        for s in range(10):
            rng = rng_for(derive_seed(20, s))
            a = TimeSeries(FS, 0.0, rng.standard_normal(512))
            b = TimeSeries(FS, 0.0, rng.standard_normal(512))
            ccf = normalized_ccf(a, b, max_lag=0.12)
            assert np.all(np.abs(ccf.values) <= 1.0 + 1e-9)

    def test_symmetry(self):
        rng = rng_for(3)
        a = TimeSeries(FS, 0.0, rng.standard_normal(700))
        b = TimeSeries(FS, 0.0, rng.standard_normal(700))
        ab = normalized_ccf(a, b, max_lag=0.05)
        ba = normalized_ccf(b, a, max_lag=0.05)
        np.testing.assert_allclose(ab.values, ba.values[::-1], atol=1e-12)

    def test_scale_invariance(self):
        tpl = stock_template("gw150914", FS)
        noise = rng_for(9).standard_normal(tpl.base.n)
        a = TimeSeries(FS, 0.0, tpl.base.samples + 0.3 * noise)
        base = normalized_ccf(a, tpl.base, max_lag=0.15)
        scaled = normalized_ccf(
            a.with_samples(-7.0 * a.samples),
            tpl.base.with_samples(0.002 * tpl.base.samples),
            max_lag=0.15,
        )
        np.testing.assert_allclose(np.abs(scaled.values), np.abs(base.values), atol=1e-9)
        assert scaled.r3 == pytest.approx(base.r3, abs=1e-9)
        assert scaled.peaky == base.peaky
        assert scaled.tau0 == base.tau0

    def test_negative_peak_sign_recorded(self):
        tpl = stock_template("gw150914", FS)
        flipped = tpl.base.with_samples(-tpl.base.samples)
        ccf = normalized_ccf(flipped, tpl.base, max_lag=0.15)
        assert ccf.peak_value == pytest.approx(-1.0, abs=1e-9)
        assert ccf.peak_abs == pytest.approx(1.0, abs=1e-9)

    def test_zero_energy_window(self):
        tpl = stock_template("gw150914", FS)
        zero = TimeSeries(FS, 0.0, np.zeros(tpl.base.n))
        with pytest.raises(DegeneracyError):
            normalized_ccf(zero, tpl.base, max_lag=0.1)

    def test_unequal_windows_rejected(self):
        a = TimeSeries(FS, 0.0, np.ones(512))
        b = TimeSeries(FS, 0.0, np.ones(256))
        with pytest.raises(ValidationError):
            normalized_ccf(a, b, max_lag=0.05)

    def test_short_window_peakier_than_long(self):
        # band-limited template + noise: event-duration window beats 20 s
        from gwxlab import butterworth_bandpass
        model = PsdModel(segments=(PsdSegment(1.0, 1.0, 0.0),))
        tpl = stock_template("gw150914", FS)
        tplb = butterworth_bandpass(tpl.base, 43.0, 300.0)
        tau0 = decorrelation_time(tplb)
        wins = 0
        trials = 20
        for s in range(trials):
            noise = butterworth_bandpass(
                colored_noise(model, 20.0, FS, seed=derive_seed(30, s)), 43.0, 300.0)
            scale = 1.5 * np.std(noise.samples) / np.std(tplb.samples)
            strain = inject(noise, tplb.with_samples(scale * tplb.samples), 10.0)
            short_a = TimeSeries(FS, 0.0,
                                 strain.samples[int(10 * FS):int(10 * FS) + tplb.n])
            short = normalized_ccf(short_a, tplb, max_lag=0.19, tau0=tau0)
            padded = np.zeros(strain.n)
            padded[int(10 * FS):int(10 * FS) + tplb.n] = tplb.samples
            long = normalized_ccf(strain, TimeSeries(FS, 0.0, padded),
                                  max_lag=1.0, tau0=tau0)
            wins += short.r3 < long.r3
        assert wins >= int(0.9 * trials)


class TestPeakRatioR3:
    def test_flat_ccf_not_peaky(self):
        from gwxlab.detection import CcfResult
        lags = np.arange(-100, 101) / FS
        ccf = CcfResult(lags=lags, values=np.full(201, 0.5), tau0=1.0 / FS,
                        r3=1.0, peaky=False, window_T=0.25)
        r3, peaky = peak_ratio_r3(ccf, tau0=1.0 / FS)
        assert r3 == 1.0
        assert not peaky

    def test_insufficient_lag_range(self):
        tpl = stock_template("gw150914", FS)
        ccf = normalized_ccf(tpl.base, tpl.base, max_lag=0.15)
        with pytest.raises(ValidationError):
            peak_ratio_r3(ccf, tau0=0.1)

    def test_recompute_matches_stored(self):
        tpl = stock_template("gw150914", FS)
        ccf = normalized_ccf(tpl.base, tpl.base, max_lag=0.15)
        r3, peaky = peak_ratio_r3(ccf, ccf.tau0)
        assert r3 == ccf.r3
        assert peaky == ccf.peaky


class TestCcfDecorrelationTime:
    def test_reference_system_with_common_template(self):
        tpl = stock_template("gw150914", FS)
        h = tpl.base.samples
        hrms = np.sqrt(np.mean(h**2))
        tau0 = decorrelation_time(tpl.base)
        taus = []
        for s in range(10):
            na = rng_for(derive_seed(41, 2 * s)).standard_normal(h.size)
            nb = rng_for(derive_seed(41, 2 * s + 1)).standard_normal(h.size)
            a = TimeSeries(FS, 0.0, h + 0.5 * hrms * na)
            b = TimeSeries(FS, 0.0, h + 0.5 * hrms * nb)
            ccf = normalized_ccf(a, b, max_lag=0.19, tau0=tau0)
            assert ccf.peaky
            taus.append(ccf_decorrelation_time(ccf))
        mean_tau = np.mean(taus)
        # same scale as the template's own decorrelation time
        assert 0.2 * tau0 < mean_tau < 3.0 * tau0


class TestRunningWindowCcf:
    def test_tiled_template_every_window_unity(self):
        tpl = stock_template("gw150914", FS)
        tiled = TimeSeries(FS, 0.0, np.tile(tpl.base.samples, 10))
        stats = running_window_ccf(tiled, tpl.base, hop=tpl.base.duration)
        assert len(stats) == 10
        for s in stats:
            assert s.peak_abs_ccf == pytest.approx(1.0, abs=1e-9)

    def test_exclusions_skip_windows(self):
        tpl = stock_template("gw150914", FS)
        long_ts = TimeSeries(FS, 0.0, rng_for(12).standard_normal(int(4 * FS)))
        full = running_window_ccf(long_ts, tpl.base, hop=0.5)
        partial = running_window_ccf(long_ts, tpl.base, hop=0.5,
                                     exclusions=[(1.0, 2.0)])
        starts = [s.t_start for s in partial]
        assert all(not (1.0 - 0.2 < t < 2.0) for t in starts)
        assert len(partial) < len(full)

    def test_all_excluded_is_error(self):
        tpl = stock_template("gw150914", FS)
        long_ts = TimeSeries(FS, 0.0, rng_for(13).standard_normal(int(2 * FS)))
        with pytest.raises(ValidationError):
            running_window_ccf(long_ts, tpl.base, hop=0.5, exclusions=[(-1.0, 99.0)])

    def test_ordered_by_start(self):
        tpl = stock_template("gw170104", FS)
        long_ts = TimeSeries(FS, 0.0, rng_for(14).standard_normal(int(3 * FS)))
        stats = running_window_ccf(long_ts, tpl.base, hop=0.25)
        starts = [s.t_start for s in stats]
        assert starts == sorted(starts)
