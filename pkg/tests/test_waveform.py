import numpy as np
import pytest

from uavtwin.exceptions import InvalidParameterException, LengthMismatchException
from uavtwin.waveform import (CIRSnapshot, WaveformSpec, apply_delay, crest_factor_db, estimate_cir, estimate_cirs,
                              interpolate_peak, newman_phases, synth_symbol, unwrap_delay)


@pytest.fixture
def spec():
    return WaveformSpec(n_subcarriers=256, symbol_length=3.2e-6)


class TestNewman:
    def test_phases(self):
        phases = newman_phases(4)
        assert np.allclose(phases, [0.0, np.pi / 4, np.pi, np.pi / 4])
        assert np.all(phases >= 0) and np.all(phases < 2 * np.pi)

    def test_single_subcarrier(self):
        assert np.array_equal(newman_phases(1), [0.0])

    def test_no_subcarriers(self):
        with pytest.raises(InvalidParameterException):
            newman_phases(0)

    @pytest.mark.parametrize('n', [64, 512, 1280])
    def test_crest_factor(self, n):
        symbol = synth_symbol(WaveformSpec(n_subcarriers=n, symbol_length=n / 80e6))
        assert crest_factor_db(symbol.time_domain) <= 4.7

    def test_unit_rms(self, spec):
        symbol = synth_symbol(spec)
        assert np.sqrt(np.mean(np.abs(symbol.time_domain)**2)) == pytest.approx(1.0, rel=1e-12)
        assert np.allclose(np.abs(symbol.spectrum), 1.0)


class TestWaveformSpec:
    def test_defaults(self):
        spec = WaveformSpec()
        assert spec.sample_rate == pytest.approx(80e6)
        assert spec.delay_resolution == pytest.approx(12.5e-9)
        assert spec.wavelength == pytest.approx(0.08, rel=1e-3)

    def test_invalid(self):
        with pytest.raises(InvalidParameterException):
            WaveformSpec(n_subcarriers=1)
        with pytest.raises(InvalidParameterException):
            WaveformSpec(symbol_length=0.0)


class TestEstimateCir:
    def test_identity_channel(self, spec):
        symbol = synth_symbol(spec)
        cir = estimate_cir(symbol.time_domain, symbol, timestamp=2.0)
        assert abs(cir.taps[0] - 1.0) < 1e-9
        assert np.max(np.abs(cir.taps[1:])) < 1e-9
        assert cir.timestamp == 2.0
        assert cir.delay_resolution == pytest.approx(spec.delay_resolution)

    def test_energy(self, spec):
        symbol = synth_symbol(spec)
        received = 0.5 * apply_delay(symbol.time_domain, spec.sample_rate, 7 * spec.delay_resolution)
        cir = estimate_cir(received, symbol)
        energy = np.sum(np.abs(received)**2) / np.sum(np.abs(symbol.time_domain)**2)
        assert np.sum(np.abs(cir.taps)**2) == pytest.approx(energy, rel=1e-9)
        assert int(np.argmax(np.abs(cir.taps))) == 7

    def test_batch_matches_single(self, spec):
        symbol = synth_symbol(spec)
        rows = np.stack(
            [apply_delay(symbol.time_domain, spec.sample_rate, k * spec.delay_resolution) for k in range(3)])
        taps = estimate_cirs(rows, symbol)
        for row, expected in zip(rows, taps):
            assert np.allclose(estimate_cir(row, symbol).taps, expected)

    def test_length_mismatch(self, spec):
        symbol = synth_symbol(spec)
        with pytest.raises(LengthMismatchException):
            estimate_cir(symbol.time_domain[:-1], symbol)

    @pytest.mark.parametrize('delay_bins', [3.0, 10.25, 40.5, 77.9])
    def test_fractional_delay(self, spec, delay_bins):
        symbol = synth_symbol(spec)
        received = apply_delay(symbol.time_domain, spec.sample_rate, delay_bins / spec.sample_rate)
        cir = estimate_cir(received, symbol)
        position, amplitude = interpolate_peak(np.fft.fft(cir.taps), int(np.argmax(np.abs(cir.taps))))
        assert position == pytest.approx(delay_bins, abs=1e-3)
        assert abs(amplitude) == pytest.approx(1.0, rel=1e-3)


class TestCIRSnapshot:
    def test_invalid_resolution(self):
        with pytest.raises(InvalidParameterException):
            CIRSnapshot(taps=np.zeros(4, dtype=complex), delay_resolution=0.0)

    def test_with_taps(self):
        cir = CIRSnapshot(taps=np.zeros(4, dtype=complex), delay_resolution=1e-9, timestamp=1.0)
        copy = cir.with_taps(np.ones(4))
        assert copy.timestamp == 1.0
        assert np.array_equal(copy.taps, np.ones(4))
        assert cir.with_taps(np.ones(4), 3.0).timestamp == 3.0
        assert np.allclose(cir.delays, [0, 1e-9, 2e-9, 3e-9])


def test_unwrap_delay():
    period = 16e-6
    assert unwrap_delay(1e-6, 1e-6 + period, period) == pytest.approx(1e-6 + period)
    assert unwrap_delay(15e-6, -0.5e-6, period) == pytest.approx(-1e-6)
