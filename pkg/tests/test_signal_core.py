"""Waveform primitives: resampling, band-pass, Savitzky-Golay, normalization,
and the waveform CSV round trip."""

import numpy as np
import pytest

from ppgspoof.errors import (
    DataValidityError,
    DegenerateInputError,
    ParameterError,
)
from ppgspoof.signal_core import (
    SavGolSpec,
    SignalLabel,
    WaveSignal,
    bandpass,
    normalize_cycle,
    read_waveform_csv,
    resample,
    savgol_smooth,
    write_waveform_csv,
)


def _sig(samples, rate=65.0, label=SignalLabel.PPG):
    return WaveSignal(np.asarray(samples, float), rate, label)


class TestWaveSignal:
    def test_rejects_short_and_nonfinite(self):
        with pytest.raises(DataValidityError):
            _sig([1.0])
        with pytest.raises(DataValidityError):
            _sig([1.0, np.nan])
        with pytest.raises(ParameterError):
            WaveSignal(np.zeros(4), 0.0, SignalLabel.PPG)

    def test_samples_immutable(self):
        sig = _sig([0.0, 1.0, 2.0])
        with pytest.raises(ValueError):
            sig.samples[0] = 5.0


class TestResample:
    def test_constant_preserved(self):
        out = resample(_sig(np.full(35, 5.0), 35.0), 65.0)
        assert np.allclose(out.samples, 5.0)
        assert out.sample_rate_hz == 65.0

    def test_linear_midpoint(self):
        out = resample(_sig([0.0, 1.0], 1.0), 2.0)
        assert np.allclose(out.samples, [0.0, 0.5, 1.0])

    def test_sinusoid_against_analytic(self):
        t64 = np.arange(256) / 64.0
        out = resample(_sig(np.sin(2 * np.pi * 2 * t64), 64.0), 65.0)
        t65 = np.arange(out.samples.size) / 65.0
        assert np.max(np.abs(out.samples - np.sin(2 * np.pi * 2 * t65))) < 0.01

    def test_duration_preserved(self):
        sig = _sig(np.random.default_rng(0).normal(size=130), 65.0)
        out = resample(sig, 35.0)
        assert abs(out.duration_s - sig.duration_s) <= 1.0 / 35.0


class TestBandpass:
    def test_dc_removed(self):
        out = bandpass(_sig(np.full(650, 3.0)), 0.7, 4.0)
        trim = out.samples[65:-65]
        assert np.max(np.abs(trim)) < 1e-6

    def test_out_of_band_attenuated_20db(self):
        t = np.arange(65 * 30) / 65.0
        x = np.sin(2 * np.pi * 1.0 * t) + np.sin(2 * np.pi * 10.0 * t)
        out = bandpass(_sig(x), 0.7, 4.0)
        spec = np.abs(np.fft.rfft(out.samples))
        freqs = np.fft.rfftfreq(out.samples.size, 1 / 65.0)
        mag_1 = spec[np.argmin(np.abs(freqs - 1.0))]
        mag_10 = spec[np.argmin(np.abs(freqs - 10.0))]
        assert 20 * np.log10(mag_1 / mag_10) >= 20.0

    def test_in_band_preserved(self):
        from ppgspoof.metrics import pearson
        t = np.arange(65 * 20) / 65.0
        x = np.sin(2 * np.pi * 1.2 * t)
        out = bandpass(_sig(x), 0.7, 4.0)
        assert pearson(x[65:-65], out.samples[65:-65]) > 0.99

    def test_band_outside_nyquist_rejected(self):
        with pytest.raises(ParameterError):
            bandpass(_sig(np.zeros(100), rate=10.0), 0.7, 6.0)

    def test_idempotent_in_band(self):
        t = np.arange(65 * 20) / 65.0
        sig = _sig(np.sin(2 * np.pi * 1.5 * t))
        once = bandpass(sig, 0.7, 4.0)
        twice = bandpass(once, 0.7, 4.0)
        a = np.sqrt(np.mean(once.samples[65:-65] ** 2))
        b = np.sqrt(np.mean(twice.samples[65:-65] ** 2))
        assert abs(20 * np.log10(a / b)) < 0.5


class TestSavGol:
    def test_polynomial_reproduced(self):
        x = np.arange(50, dtype=float)
        poly = 0.3 * x**3 - x**2 + 2 * x - 5
        out = savgol_smooth(poly, SavGolSpec(9, 3))
        # mirror padding bends the fit inside the first/last half window
        assert np.max(np.abs(out[4:-4] - poly[4:-4])) < 1e-9

    def test_window5_order2_weights(self):
        # impulse response of the quadratic 5-point smoother
        imp = np.zeros(11)
        imp[5] = 1.0
        out = savgol_smooth(imp, SavGolSpec(5, 2))
        expected = np.array([-3, 12, 17, 12, -3]) / 35.0
        assert np.allclose(out[3:8], expected, atol=1e-12)

    def test_noise_variance_reduced(self):
        noise = np.random.default_rng(1).normal(size=500)
        out = savgol_smooth(noise, SavGolSpec(9, 3))
        assert np.var(out) < np.var(noise)

    def test_linearity(self):
        rng = np.random.default_rng(2)
        x, y = rng.normal(size=64), rng.normal(size=64)
        spec = SavGolSpec(9, 3)
        lhs = savgol_smooth(2.0 * x + 3.0 * y, spec)
        rhs = 2.0 * savgol_smooth(x, spec) + 3.0 * savgol_smooth(y, spec)
        assert np.max(np.abs(lhs - rhs)) < 1e-9

    def test_window_longer_than_signal_rejected(self):
        with pytest.raises(ParameterError):
            savgol_smooth(np.zeros(5), SavGolSpec(9, 3))

    def test_even_window_rejected(self):
        with pytest.raises(ParameterError):
            SavGolSpec(8, 3)


class TestNormalizeCycle:
    def test_affine_map(self):
        assert np.allclose(normalize_cycle([2, 4, 6]), [0, 0.5, 1])
        assert np.allclose(normalize_cycle([-1, 0, 3]), [0, 0.25, 1])

    def test_idempotent(self):
        x = np.array([0.0, 0.3, 1.0])
        assert np.allclose(normalize_cycle(x), x)

    def test_constant_rejected(self):
        with pytest.raises(DegenerateInputError):
            normalize_cycle([1.0, 1.0, 1.0])


class TestWaveformCsv:
    def test_roundtrip(self, tmp_path):
        sig = _sig(np.sin(np.arange(200) / 10.0), 65.0)
        path = tmp_path / "w.csv"
        write_waveform_csv(path, sig)
        back = read_waveform_csv(path, SignalLabel.PPG)
        assert np.allclose(back.samples, sig.samples, atol=1e-9)
        assert back.sample_rate_hz == pytest.approx(65.0, rel=1e-6)

    def test_jitter_rejected(self, tmp_path):
        path = tmp_path / "j.csv"
        t = np.cumsum(np.array([0.0, 1.0, 1.0, 2.0, 1.0]))
        with open(path, "w") as fh:
            fh.write("t_seconds,value\n")
            for ti in t:
                fh.write(f"{ti},1.0\n")
        with pytest.raises(DataValidityError):
            read_waveform_csv(path)
