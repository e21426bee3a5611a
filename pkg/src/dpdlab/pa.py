"""Simulated power amplifier with memory and a slow thermal state.

Per sample the thermal level follows the drive power through a one-pole
filter.  It scales the complex gain and deepens the third-order compression
coefficient.  The static AM/AM and AM/PM nonlinearity is followed by a short
FIR memory filter.  Drive above ``rated_input`` is clipped to it, so the
output stays finite at any input level.
"""

from dataclasses import dataclass, replace
import math

import numpy as np
from scipy.signal import lfilter

from ._validation import check_signal, raise_for_problems
from .signals import DEFAULT_SAMPLE_RATE


def _alpha_for(tau_s, fs=DEFAULT_SAMPLE_RATE):
    return 1.0 - math.exp(-1.0 / (tau_s * fs))


@dataclass(frozen=True)
class PaConfig:
    """Reference device defaults.

    ``am_am_poly`` holds the real coefficients of the r**3 and r**5 terms of
    ``A(r) = r * (1 + c3 r**2 + c5 r**4)``; the defaults give about 3 dB of
    gain compression at ``|x| = 1``.  ``am_pm_strength`` is radians per unit
    ``|x|**2``.  ``thermal_alpha`` is the per-sample update weight (0.5 ms time
    constant at 30.72 MS/s).  Set ``output_noise_floor_dbc`` to ``None`` for a
    noiseless device.
    """

    small_signal_gain: complex = 10.0 + 0j
    am_am_poly: tuple = (-0.35, 0.058)
    am_pm_strength: float = math.radians(10.0)
    memory_taps: tuple = (1.0 + 0j,
                          0.05 * np.exp(1j * math.radians(30.0)),
                          0.01 * np.exp(-1j * math.radians(45.0)))
    thermal_alpha: float = _alpha_for(0.5e-3)
    thermal_gain_sensitivity: complex = -2.8 + 0.8j
    thermal_compression_sensitivity: float = -2.0
    output_noise_floor_dbc: float = -70.0
    rated_input: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "small_signal_gain", complex(self.small_signal_gain))
        object.__setattr__(self, "am_am_poly", tuple(float(c) for c in self.am_am_poly))
        object.__setattr__(self, "memory_taps", tuple(complex(c) for c in self.memory_taps))
        object.__setattr__(self, "thermal_gain_sensitivity", complex(self.thermal_gain_sensitivity))
        problems = self.validate()
        raise_for_problems(problems, "PA config")

    def validate(self):
        problems = []
        if not 0 < self.thermal_alpha < 1:
            problems.append(("thermal_alpha", f"must be in (0, 1), got {self.thermal_alpha!r}"))
        if len(self.memory_taps) == 0:
            problems.append(("memory_taps", "must not be empty"))
        if len(self.am_am_poly) != 2:
            problems.append(("am_am_poly", "expects (c3, c5)"))
        elif not self._monotone():
            problems.append(("am_am_poly", "compression is not monotone over the rated range"))
        if not self.rated_input > 0:
            problems.append(("rated_input", "must be positive"))
        if self.output_noise_floor_dbc is not None and not math.isfinite(self.output_noise_floor_dbc):
            problems.append(("output_noise_floor_dbc", "must be finite or None"))
        return problems

    def _monotone(self):
        c3, c5 = self.am_am_poly
        r = np.linspace(0, self.rated_input, 513)
        return bool(np.all(1 + 3 * c3 * r**2 + 5 * c5 * r**4 >= 0))

    def time_invariant(self):
        """Same device with the thermal coupling switched off."""
        return replace(self, thermal_gain_sensitivity=0j, thermal_compression_sensitivity=0.0)

    def noiseless(self):
        return replace(self, output_noise_floor_dbc=None)


def reference_pa():
    return PaConfig()


@dataclass(frozen=True, eq=False)
class PaState:
    thermal_level: float
    filter_memory: np.ndarray

    def __post_init__(self):
        if not self.thermal_level >= 0:
            raise ValueError(f"thermal_level must be >= 0, got {self.thermal_level!r}")
        mem = np.array(self.filter_memory, dtype=np.complex128)
        mem.setflags(write=False)
        object.__setattr__(self, "filter_memory", mem)


def pa_initial_state(cfg):
    """Cold device: no thermal load, empty delay line."""
    return PaState(0.0, np.zeros(len(cfg.memory_taps) - 1, dtype=np.complex128))


def thermal_time_constant(cfg):
    """Thermal time constant in samples."""
    return -1.0 / math.log1p(-cfg.thermal_alpha)


def slowest_time_constant(cfg):
    """Thermal time constant plus the FIR span, in samples."""
    return thermal_time_constant(cfg) + len(cfg.memory_taps) - 1


def _thermal_track(power, alpha, t0):
    # t[n] = (1 - a) t[n-1] + a p[n], seeded from the carried thermal level.
    t, _ = lfilter([alpha], [1.0, -(1.0 - alpha)], power, zi=[(1.0 - alpha) * t0])
    return t


def pa_process(x, cfg, state=None, rng=None):
    """Run the device over ``x`` starting from ``state``.

    Returns ``(y, final_state)``.  ``rng`` (a numpy Generator or seed) drives
    the output noise floor; it is ignored when the floor is disabled.
    """
    x = check_signal(x, "x", min_length=0)
    if state is None:
        state = pa_initial_state(cfg)
    taps = np.asarray(cfg.memory_taps)
    L = len(taps)
    if state.filter_memory.shape[0] != L - 1:
        raise ValueError("state delay line does not match memory_taps")
    if len(x) == 0:
        return x.copy(), state

    # Heating follows the clipped drive, so dissipation stays bounded too.
    r = np.minimum(np.abs(x), cfg.rated_input)
    r2 = r * r
    thermal = _thermal_track(r2, cfg.thermal_alpha, state.thermal_level)

    c3, c5 = cfg.am_am_poly
    c3_eff = c3 + cfg.thermal_compression_sensitivity * thermal
    gain = cfg.small_signal_gain * (1.0 + cfg.thermal_gain_sensitivity * thermal)
    amp = r * (1.0 + c3_eff * r2 + c5 * r2 * r2)
    phase = np.exp(1j * (np.angle(x) + cfg.am_pm_strength * r2))
    v = gain * amp * phase

    line = np.concatenate([state.filter_memory, v])
    N = len(x)
    y = taps[0] * line[L - 1:]
    for k in range(1, L):
        y = y + taps[k] * line[L - 1 - k:L - 1 - k + N]

    if cfg.output_noise_floor_dbc is not None:
        p = np.mean(np.abs(y) ** 2)
        if p > 0:
            gen = np.random.default_rng(rng)
            sigma = np.sqrt(p * 10 ** (cfg.output_noise_floor_dbc / 10) / 2)
            y = y + sigma * (gen.standard_normal(N) + 1j * gen.standard_normal(N))

    new_state = PaState(float(max(thermal[-1], 0.0)), line[len(line) - (L - 1):] if L > 1 else np.zeros(0))
    return y, new_state
