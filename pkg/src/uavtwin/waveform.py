"""Newman-phase OFDM sounding symbols and channel impulse response estimation.

The sounding symbol is repeated back to back without cyclic prefix, so every channel acts
as a circular convolution on one symbol and fractional delays are exact phase ramps in the
frequency domain.
"""
import logging
from dataclasses import dataclass, replace
from typing import Optional, Tuple

import numpy as np
import numpy.typing as npt

from uavtwin.exceptions import InvalidParameterException, LengthMismatchException

LOG = logging.getLogger('waveform')

SPEED_OF_LIGHT = 299792458.0


@dataclass(frozen=True)
class WaveformSpec:
    """Critically sampled sounding signal, sample_rate = n_subcarriers / symbol_length."""
    center_frequency: float = 3.75e9
    n_subcarriers: int = 1280
    symbol_length: float = 16e-6

    def __post_init__(self):
        if self.n_subcarriers < 2:
            raise InvalidParameterException('n_subcarriers', self.n_subcarriers)
        if not self.symbol_length > 0:
            raise InvalidParameterException('symbol_length', self.symbol_length)
        if not self.center_frequency > 0:
            raise InvalidParameterException('center_frequency', self.center_frequency)

    @property
    def sample_rate(self) -> float:
        return self.n_subcarriers / self.symbol_length

    @property
    def delay_resolution(self) -> float:
        return self.symbol_length / self.n_subcarriers

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.center_frequency


@dataclass(frozen=True, eq=False)
class ReferenceSymbol:
    """Unit magnitude spectrum and its unit RMS time domain symbol."""
    spectrum: np.ndarray
    time_domain: np.ndarray
    sample_rate: float

    @property
    def n(self) -> int:
        return len(self.spectrum)


@dataclass(frozen=True, eq=False)
class CIRSnapshot:
    """Complex taps over delay bins of width delay_resolution."""
    taps: np.ndarray
    delay_resolution: float
    timestamp: float = 0.0

    def __post_init__(self):
        if not self.delay_resolution > 0:
            raise InvalidParameterException('delay_resolution', self.delay_resolution)

    @property
    def n(self) -> int:
        return len(self.taps)

    @property
    def delays(self) -> np.ndarray:
        return np.arange(self.n) * self.delay_resolution

    def with_taps(self, taps: npt.ArrayLike, timestamp: Optional[float] = None) -> 'CIRSnapshot':
        """Copy with new taps and optionally a new timestamp."""
        return replace(self,
                       taps=np.asarray(taps, dtype=complex),
                       timestamp=self.timestamp if timestamp is None else timestamp)


def newman_phases(n: int) -> np.ndarray:
    """Newman phases pi * k**2 / n for k = 0..n-1, reduced to [0, 2 pi)."""
    if n < 1:
        raise InvalidParameterException('n', n)
    k = np.arange(n, dtype=np.int64)
    # k**2 mod 2n keeps the reduction exact for large n
    return np.mod(k * k, 2 * n) * np.pi / n


def synth_symbol(spec: WaveformSpec) -> ReferenceSymbol:
    """Sounding symbol with flat spectrum and unit RMS in the time domain."""
    spectrum = np.exp(1j * newman_phases(spec.n_subcarriers))
    time_domain = np.fft.ifft(spectrum, norm='ortho')
    LOG.debug('Synthesized %d subcarrier symbol, crest factor %.2f dB', spec.n_subcarriers,
              crest_factor_db(time_domain))
    return ReferenceSymbol(spectrum=spectrum, time_domain=time_domain, sample_rate=spec.sample_rate)


def estimate_cir(received: npt.ArrayLike, reference: ReferenceSymbol, timestamp: float = 0.0) -> CIRSnapshot:
    """Matched filter in the frequency domain.

    An identity channel yields a single unit tap at bin 0. The tap energy equals the received
    energy divided by the energy of the reference symbol.
    """
    received = np.asarray(received)
    if received.shape[-1] != reference.n:
        raise LengthMismatchException(reference.n, received.shape[-1])
    taps = np.fft.ifft(np.fft.fft(received, norm='ortho') * np.conj(reference.spectrum))
    return CIRSnapshot(taps=taps, delay_resolution=1 / reference.sample_rate, timestamp=timestamp)


def estimate_cirs(received: npt.ArrayLike, reference: ReferenceSymbol) -> np.ndarray:
    """Taps of a stack of received symbols, one row per symbol."""
    received = np.atleast_2d(received)
    if received.shape[-1] != reference.n:
        raise LengthMismatchException(reference.n, received.shape[-1])
    return np.fft.ifft(np.fft.fft(received, norm='ortho', axis=-1) * np.conj(reference.spectrum), axis=-1)


def signed_bins(n: int) -> np.ndarray:
    """Signed frequency index of every FFT bin."""
    return np.fft.fftfreq(n) * n


def delay_spectrum(n: int, sample_rate: float, tau: npt.ArrayLike) -> np.ndarray:
    """Phase ramp exp(-j 2 pi f tau) over the signed FFT frequencies.

    A vector of delays gives one ramp per row.
    """
    freqs = np.fft.fftfreq(n, d=1 / sample_rate)
    tau = np.asarray(tau, dtype=float)
    return np.exp(-2j * np.pi * np.multiply.outer(tau, freqs))


def apply_delay(samples: npt.ArrayLike, sample_rate: float, tau: float) -> np.ndarray:
    """Circularly delay a symbol by tau seconds, fractional delays included."""
    samples = np.asarray(samples)
    return np.fft.ifft(np.fft.fft(samples) * delay_spectrum(samples.shape[-1], sample_rate, tau))


def evaluate_response(spectrum: npt.ArrayLike, positions: npt.ArrayLike) -> np.ndarray:
    """Band-limited time domain response of `spectrum` at fractional bin positions."""
    spectrum = np.asarray(spectrum)
    n = len(spectrum)
    kernel = np.exp(2j * np.pi * np.multiply.outer(np.asarray(positions, dtype=float), signed_bins(n)) / n)
    return kernel @ spectrum / n


def interpolate_peak(spectrum: npt.ArrayLike, coarse_bin: int, oversample: int = 16) -> Tuple[float, complex]:
    """Refine a peak near `coarse_bin` to a fractional bin.

    The response is evaluated on a 1/oversample grid around the coarse bin and a three-point
    parabola is fitted to the power of the finest grid maximum. Returns the refined position
    in bins and the complex response there.
    """
    if oversample < 1:
        raise InvalidParameterException('oversample', oversample)
    offsets = np.arange(-oversample, oversample + 1) / oversample
    grid = evaluate_response(spectrum, coarse_bin + offsets)
    power = np.abs(grid)**2
    i = int(np.clip(np.argmax(power), 1, len(power) - 2))
    left, mid, right = power[i - 1], power[i], power[i + 1]
    denominator = left - 2 * mid + right
    delta = 0.5 * (left - right) / denominator if denominator < 0 else 0.0
    position = coarse_bin + offsets[i] + delta / oversample
    amplitude = complex(evaluate_response(spectrum, [position])[0])
    return float(position), amplitude


def crest_factor_db(samples: npt.ArrayLike) -> float:
    """Peak over RMS amplitude in dB."""
    samples = np.asarray(samples)
    rms = np.sqrt(np.mean(np.abs(samples)**2))
    return float(20 * np.log10(np.max(np.abs(samples)) / rms))


def unwrap_delay(measured: float, expected: float, period: float) -> float:
    """Pick the alias of a circular delay measurement closest to an expected value."""
    return measured + period * np.round((expected - measured) / period)
