"""Baseband test signals and conditioning utilities.

Everything here is a pure function of its arguments. Generators take an
explicit integer seed and produce bit-identical output for the same inputs.
"""

from dataclasses import dataclass
import math

import numpy as np
from scipy import signal as sps

from ._validation import check_scalar, check_signal, raise_for_problems

DEFAULT_SAMPLE_RATE = 30.72e6
# Band-limiting filter for generated noise.
NOISE_FILTER_TAPS = 127
# LTE numerology used by the OFDM surrogate.
SUBCARRIER_SPACING_HZ = 15e3
OFDM_PAPR_CAP_DB = 9.0


@dataclass(frozen=True, eq=False)
class ComplexSignal:
    """Complex baseband samples tagged with their sample rate.

    ``samples`` is stored as a read-only complex128 array.  The object
    behaves as an array in numpy calls (``np.asarray(sig)`` returns the
    samples), so it can be handed directly to the model and PA functions.
    """

    samples: np.ndarray
    sample_rate_hz: float = DEFAULT_SAMPLE_RATE

    def __post_init__(self):
        arr = check_signal(self.samples, "samples", min_length=0).copy()
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)
        check_scalar(self.sample_rate_hz, "sample_rate_hz", min_val=0, include_min=False)
        object.__setattr__(self, "sample_rate_hz", float(self.sample_rate_hz))

    def __len__(self):
        return self.samples.shape[0]

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.samples
        return self.samples.astype(dtype)

    def __getitem__(self, item):
        if isinstance(item, slice):
            return self.with_samples(self.samples[item])
        return self.samples[item]

    def with_samples(self, samples):
        return ComplexSignal(samples, self.sample_rate_hz)

    @property
    def duration_s(self):
        return len(self) / self.sample_rate_hz

    def rms(self):
        return rms(self.samples)

    def papr_db(self):
        return papr_db(self.samples)


def rms(x):
    x = np.asarray(x)
    return float(np.sqrt(np.mean(np.abs(x) ** 2)))


def papr_db(x):
    p = np.abs(np.asarray(x)) ** 2
    return float(10 * np.log10(p.max() / p.mean()))


@dataclass(frozen=True)
class PulsedNoiseConfig:
    """Pulsed band-limited noise: subframes alternating between two power levels.

    ``high_rms`` fixes the absolute level of ``high`` subframes; ``low``
    subframes sit ``power_step_db`` below it.
    """

    sample_rate_hz: float = DEFAULT_SAMPLE_RATE
    noise_bandwidth_hz: float = 4e6
    subframe_duration_s: float = 2e-3
    num_subframes: int = 4
    power_step_db: float = 10.0
    pattern: tuple = ("low", "high", "low", "high")
    seed: int = 0
    high_rms: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "pattern", tuple(str(p).lower() for p in self.pattern))

    def validate(self):
        """Return a list of ``(field, message)`` problems; empty when valid."""
        problems = []
        for name in ("sample_rate_hz", "noise_bandwidth_hz", "subframe_duration_s", "high_rms"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                problems.append((name, f"must be a positive real, got {v!r}"))
        if not problems and self.noise_bandwidth_hz > self.sample_rate_hz / 2:
            problems.append(("noise_bandwidth_hz",
                             f"{self.noise_bandwidth_hz} exceeds Nyquist "
                             f"({self.sample_rate_hz / 2})"))
        if not isinstance(self.num_subframes, int) or self.num_subframes < 1:
            problems.append(("num_subframes", f"must be an integer >= 1, got {self.num_subframes!r}"))
        if len(self.pattern) == 0:
            problems.append(("pattern", "must not be empty"))
        elif len(self.pattern) != self.num_subframes:
            problems.append(("pattern", f"length {len(self.pattern)} != num_subframes "
                                        f"{self.num_subframes}"))
        bad = [p for p in self.pattern if p not in ("low", "high")]
        if bad:
            problems.append(("pattern", f"levels must be 'low' or 'high', got {bad}"))
        if not math.isfinite(self.power_step_db):
            problems.append(("power_step_db", "must be finite"))
        return problems


def _noise(rng, n):
    return (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2)


def gen_pulsed_noise(cfg):
    """Generate pulsed, band-limited complex Gaussian noise.

    Each subframe is rescaled to an exact RMS so the high/low power ratio
    equals ``cfg.power_step_db``.  Returns a :class:`ComplexSignal` of
    ``round(num_subframes * subframe_duration_s * sample_rate_hz)`` samples.
    """
    raise_for_problems(cfg.validate(), "pulsed noise config")
    fs = cfg.sample_rate_hz
    total = int(round(cfg.num_subframes * cfg.subframe_duration_s * fs))
    rng = np.random.default_rng(cfg.seed)
    half = (NOISE_FILTER_TAPS - 1) // 2
    taps = sps.firwin(NOISE_FILTER_TAPS, cfg.noise_bandwidth_hz, window="hamming", fs=fs)
    raw = _noise(rng, total + 2 * half)
    # 'valid' drops the transients at both ends; group delay is implicit.
    x = np.convolve(raw, taps, mode="valid")

    edges = np.round(np.arange(cfg.num_subframes + 1) * cfg.subframe_duration_s * fs).astype(int)
    edges[-1] = total
    low_rms = cfg.high_rms * 10 ** (-cfg.power_step_db / 20)
    for level, a, b in zip(cfg.pattern, edges[:-1], edges[1:]):
        if b <= a:
            continue
        target = cfg.high_rms if level == "high" else low_rms
        x[a:b] *= target / rms(x[a:b])
    return ComplexSignal(x, fs)


def gen_ofdm_surrogate(sample_rate_hz=DEFAULT_SAMPLE_RATE, occupied_bandwidth_hz=18e6,
                       num_symbols=140, seed=0):
    """QPSK-loaded OFDM with LTE-like numerology and cyclic prefix.

    FFT size is ``sample_rate_hz / 15 kHz`` (2048 at 30.72 MS/s) with the
    normal LTE cyclic prefix ratio 144/2048.  Peaks are clipped to
    ``OFDM_PAPR_CAP_DB`` above RMS, and the output is scaled to unit RMS.
    """
    check_scalar(sample_rate_hz, "sample_rate_hz", min_val=0, include_min=False)
    check_scalar(occupied_bandwidth_hz, "occupied_bandwidth_hz", min_val=0, include_min=False)
    # Two-sided band centred on DC: each edge must stay below Nyquist.
    if occupied_bandwidth_hz / 2 > sample_rate_hz / 2:
        raise ValueError(f"invalid config: occupied_bandwidth_hz {occupied_bandwidth_hz} "
                         f"exceeds the complex baseband span {sample_rate_hz}")
    check_scalar(num_symbols, "num_symbols", min_val=1, integer=True)
    nfft = int(round(sample_rate_hz / SUBCARRIER_SPACING_HZ))
    ncp = int(round(nfft * 144 / 2048))
    n_sc = int(occupied_bandwidth_hz // SUBCARRIER_SPACING_HZ) // 2 * 2
    if n_sc < 2:
        raise ValueError("invalid config: occupied bandwidth holds fewer than two subcarriers")
    # DC left empty; half the carriers on each side.
    bins = np.r_[np.arange(1, n_sc // 2 + 1), np.arange(nfft - n_sc // 2, nfft)]

    rng = np.random.default_rng(seed)
    bits = rng.integers(0, 2, size=(num_symbols, n_sc, 2))
    qpsk = ((1 - 2 * bits[..., 0]) + 1j * (1 - 2 * bits[..., 1])) / np.sqrt(2)
    grid = np.zeros((num_symbols, nfft), dtype=np.complex128)
    grid[:, bins] = qpsk
    body = np.fft.ifft(grid, axis=1)
    symbols = np.concatenate([body[:, -ncp:], body], axis=1)
    x = symbols.ravel()
    x /= rms(x)

    cap = 10 ** (OFDM_PAPR_CAP_DB / 20)
    mag = np.abs(x)
    over = mag > cap
    x[over] *= cap / mag[over]
    x /= rms(x)
    return ComplexSignal(x, sample_rate_hz)


def normalize_rms(signal, target_rms):
    """Scale ``signal`` so its RMS equals ``target_rms``; phases are untouched."""
    x = check_signal(signal, "signal")
    check_scalar(target_rms, "target_rms", min_val=0, include_min=False)
    current = rms(x)
    if current == 0:
        raise ValueError("zero-signal: cannot normalize a signal with zero RMS")
    out = x * (target_rms / current)
    if isinstance(signal, ComplexSignal):
        return signal.with_samples(out)
    return out


def lowpass_taps(cutoff_hz, sample_rate_hz):
    """Odd-length Hamming windowed-sinc with unit DC gain.

    Length is at least 127 and grows as ``4 * fs / cutoff`` so that the
    transition band stays narrower than one cutoff width.
    """
    n = max(NOISE_FILTER_TAPS, int(math.ceil(4 * sample_rate_hz / cutoff_hz)))
    n += 1 - n % 2
    return sps.firwin(n, cutoff_hz, window="hamming", fs=sample_rate_hz)


def fir_lowpass(values, cutoff_hz, sample_rate_hz):
    """Zero-phase FIR low-pass of a real or complex array, same length out.

    The group delay of ``(ntaps - 1) / 2`` is removed by trimming; the input
    is extended with its edge values so constants pass through unchanged.
    """
    check_scalar(cutoff_hz, "cutoff_hz", min_val=0, include_min=False)
    if cutoff_hz >= sample_rate_hz / 2:
        raise ValueError(f"invalid-cutoff: {cutoff_hz} Hz must be below Nyquist "
                         f"({sample_rate_hz / 2} Hz)")
    taps = lowpass_taps(cutoff_hz, sample_rate_hz)
    half = (len(taps) - 1) // 2
    padded = np.pad(values, half, mode="edge")
    out = sps.oaconvolve(padded, taps, mode="valid")
    return out


def lowpass_filter(signal, cutoff_hz, sample_rate_hz=None):
    """Low-pass a :class:`ComplexSignal` (or array plus ``sample_rate_hz``)."""
    if sample_rate_hz is None:
        if not isinstance(signal, ComplexSignal):
            raise TypeError("sample_rate_hz is required for plain arrays")
        sample_rate_hz = signal.sample_rate_hz
    x = check_signal(signal, "signal", allow_real=True)
    out = fir_lowpass(x, cutoff_hz, sample_rate_hz)
    if isinstance(signal, ComplexSignal):
        return signal.with_samples(out)
    return out


def time_align(reference, measured):
    """Integer lag ``k`` such that ``measured[n]`` best matches ``reference[n - k]``.

    Picks the peak of the magnitude of the cross-correlation, so the result
    is invariant to complex scaling of either input.
    """
    ref = check_signal(reference, "reference")
    meas = check_signal(measured, "measured")
    if min(len(ref), len(meas)) < 2:
        raise ValueError("time_align needs an overlap of at least 2 samples")
    if not np.any(ref) or not np.any(meas):
        raise ValueError("degenerate: cannot align an all-zero signal")
    corr = sps.correlate(meas, ref, mode="full", method="fft")
    lags = sps.correlation_lags(len(meas), len(ref), mode="full")
    return int(lags[np.argmax(np.abs(corr))])


def shift(x, lag):
    """Delay ``x`` by ``lag`` samples (advance if negative), zero filled."""
    x = np.asarray(x)
    out = np.zeros_like(x)
    if lag >= 0:
        out[lag:] = x[:len(x) - lag]
    else:
        out[:lag] = x[-lag:]
    return out
