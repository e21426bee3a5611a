"""Open-loop emulation of closed-loop DPD adaptation.

The original data is preceded by a known initialization block and sent to
the PA as a series of overlapping windows.  Each window restarts the device
from its cold state: the leading ``W - S`` samples replay what was already
transmitted so the PA reaches the state it would have in a continuous
loop, and only the final ``S`` samples (the analysis block) are evaluated
and used for the parameter update.
"""

from dataclasses import dataclass, field
import math
import os
from typing import NamedTuple

import numpy as np

from ._validation import check_same_length, check_signal, raise_for_problems
from .estimation import UpdateConfig, fit_proactive, ls_solve
from .estimators import Predistorter, ProactivePredistorter
from .io import read_csv, write_csv, write_parameters
from .models import (
    ParameterSet,
    StateConfig,
    build_regressor,
    compute_state,
    model_output,
    proactive_output,
)
from .pa import pa_initial_state, pa_process
from .signals import ComplexSignal

NMSE_FLOOR_DB = -300.0
MODES = ("reactive", "proactive", "frozen")
STEADY_FRACTION = 0.1


@dataclass(frozen=True)
class Schedule:
    """Window length ``W``, step (= analysis block) length ``S``, initialization length."""

    window_len: int = 120_000
    step_len: int = 4096
    init_len: int = 120_000 - 4096

    def validate(self):
        problems = []
        for name in ("window_len", "step_len", "init_len"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v < 1:
                problems.append((name, f"must be a positive integer, got {v!r}"))
        if problems:
            return problems
        if self.step_len > self.window_len:
            problems.append(("step_len", f"S={self.step_len} exceeds W={self.window_len}"))
        elif self.init_len < self.window_len - self.step_len:
            problems.append(("init_len", f"{self.init_len} < W - S = "
                                         f"{self.window_len - self.step_len}"))
        return problems

    @property
    def overlap(self):
        return self.window_len - self.step_len

    @classmethod
    def with_overlap(cls, step_len, overlap, init_len=None):
        """Schedule with ``W = S + overlap``; ``init_len`` defaults to the overlap
        (one block when the overlap is zero)."""
        if init_len is None:
            init_len = overlap if overlap > 0 else step_len
        return cls(step_len + overlap, step_len, init_len)


class Window(NamedTuple):
    window_start: int
    window_end: int
    analysis_start: int
    analysis_end: int


def plan_windows(total_len, schedule):
    """Enumerate upload windows over ``total_len`` samples (initialization included).

    Analysis blocks of length ``S`` tile ``[init_len, init_len + K*S)`` with
    ``K = (total_len - init_len) // S``; a trailing remainder shorter than one
    block is not analyzed.  Every window ends at its analysis block and has
    length ``W``.
    """
    raise_for_problems(schedule.validate(), "schedule")
    W, S, init = schedule.window_len, schedule.step_len, schedule.init_len
    if total_len < W:
        raise ValueError(f"signal of {total_len} samples is shorter than one window ({W})")
    n_blocks = (total_len - init) // S
    if n_blocks < 1:
        raise ValueError(f"no complete analysis block after the {init}-sample initialization")
    windows = []
    for k in range(n_blocks):
        a0 = init + k * S
        a1 = a0 + S
        windows.append(Window(a1 - W, a1, a0, a1))
    return windows


@dataclass(frozen=True)
class FeedbackImpairment:
    """Observation-path degradation applied only to data used for updates.

    ``kind`` is ``"none"``, ``"awgn"`` (``snr_db``; ``inf`` means none) or
    ``"quantizer"`` (``bits``).
    """

    kind: str = "none"
    snr_db: float = math.inf
    bits: int = None
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", str(self.kind).lower())

    def validate(self):
        problems = []
        if self.kind not in ("none", "awgn", "quantizer"):
            problems.append(("kind", f"must be none, awgn or quantizer, got {self.kind!r}"))
        if self.kind == "awgn" and (self.snr_db is None or math.isnan(self.snr_db)
                                    or self.snr_db == -math.inf):
            problems.append(("snr_db", f"must be a real number or +inf, got {self.snr_db!r}"))
        if self.kind == "quantizer" and not (isinstance(self.bits, (int, np.integer))
                                             and self.bits >= 1):
            problems.append(("bits", f"must be an integer >= 1, got {self.bits!r}"))
        return problems

    @classmethod
    def awgn(cls, snr_db, seed=0):
        return cls("awgn", snr_db=snr_db, seed=seed)

    @classmethod
    def quantizer(cls, bits, seed=0):
        return cls("quantizer", bits=bits, seed=seed)

    @property
    def is_identity(self):
        return self.kind == "none" or (self.kind == "awgn" and self.snr_db == math.inf)


def quantize(y, bits, loading=4.0):
    """Mid-rise uniform quantizer on I and Q over +-``loading`` sigma."""
    y = np.asarray(y)
    sigma = np.sqrt(np.mean(np.abs(y) ** 2) / 2)
    if sigma == 0:
        return y.copy()
    full = loading * sigma
    delta = 2 * full / 2 ** bits
    top = full - delta / 2

    def q(v):
        return np.clip(delta * (np.floor(v / delta) + 0.5), -top, top)

    return q(y.real) + 1j * q(y.imag)


def apply_feedback_impairment(y, imp, rng=None):
    """Degrade ``y`` per ``imp``; ``rng`` defaults to a generator seeded by ``imp.seed``."""
    raise_for_problems(imp.validate(), "impairment")
    x = check_signal(y, "y")
    if imp.is_identity:
        out = x.copy()
    elif imp.kind == "awgn":
        gen = np.random.default_rng(imp.seed if rng is None else rng)
        p = np.mean(np.abs(x) ** 2)
        sigma = np.sqrt(p * 10 ** (-imp.snr_db / 10) / 2)
        out = x + sigma * (gen.standard_normal(len(x)) + 1j * gen.standard_normal(len(x)))
    else:
        out = quantize(x, imp.bits)
    if isinstance(y, ComplexSignal):
        return y.with_samples(out)
    return out


def bits_to_snr_db(n):
    """Idealized quantizer SNR, 6.02 dB per bit."""
    if n < 0:
        raise ValueError(f"bit count must be >= 0, got {n}")
    return 602 * n / 100


def measured_snr_db(clean, degraded):
    clean = np.asarray(clean)
    err = np.sum(np.abs(np.asarray(degraded) - clean) ** 2)
    if err == 0:
        return math.inf
    return float(10 * np.log10(np.sum(np.abs(clean) ** 2) / err))


def nmse_db(reference, estimate):
    """``10 log10(sum|estimate - reference|^2 / sum|reference|^2)``, floored at -300 dB."""
    ref = check_signal(reference, "reference")
    est = check_signal(estimate, "estimate")
    check_same_length(("reference", ref), ("estimate", est))
    p = np.sum(np.abs(ref) ** 2)
    if p == 0:
        raise ValueError("zero-power reference")
    e = np.sum(np.abs(est - ref) ** 2)
    if e == 0:
        return NMSE_FLOOR_DB
    return max(float(10 * np.log10(e / p)), NMSE_FLOOR_DB)


def gain_normalized_nmse_db(reference, measured):
    """NMSE after fitting the best complex scalar gain from ``measured`` to ``reference``."""
    ref = check_signal(reference, "reference")
    meas = check_signal(measured, "measured")
    check_same_length(("reference", ref), ("measured", meas))
    denom = np.vdot(meas, meas)
    g = np.vdot(meas, ref) / denom if denom != 0 else 0.0
    return nmse_db(ref, g * meas)


@dataclass
class StepRecord:
    step_index: int
    time_s: float
    theta_snapshot: np.ndarray
    nmse_db: float
    feedback_snr_db: float


@dataclass
class AdaptationTrace:
    steps: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.steps)

    @property
    def times(self):
        return np.array([r.time_s for r in self.steps])

    @property
    def nmse(self):
        return np.array([r.nmse_db for r in self.steps])

    @property
    def thetas(self):
        return [r.theta_snapshot for r in self.steps]

    def to_csv(self, path, theta_dir=None, structure=None, timestamp=False):
        """Write ``step, time_s, nmse_db, feedback_snr_db, theta_file``.

        With ``theta_dir`` and ``structure`` each snapshot also goes to its own
        parameter CSV, referenced by relative path.
        """
        rows = []
        for r in self.steps:
            theta_file = ""
            if theta_dir is not None and structure is not None and r.theta_snapshot is not None:
                os.makedirs(theta_dir, exist_ok=True)
                name = f"theta_{r.step_index:05d}.csv"
                write_parameters(os.path.join(theta_dir, name),
                                 _snapshot_params(structure, r.theta_snapshot))
                theta_file = os.path.relpath(os.path.join(theta_dir, name),
                                             os.path.dirname(os.path.abspath(path)))
            rows.append((r.step_index, r.time_s, r.nmse_db, r.feedback_snr_db, theta_file))
        write_csv(path, ["step", "time_s", "nmse_db", "feedback_snr_db", "theta_file"],
                  rows, timestamp=timestamp)

    @classmethod
    def from_csv(cls, path):
        _, rows = read_csv(path)
        steps = [StepRecord(int(r[0]), float(r[1]), None, float(r[2]), float(r[3]))
                 for r in rows]
        return cls(steps)


def _snapshot_params(structure, theta):
    n = structure.n_coeff
    if len(theta) == 2 * n:
        return ParameterSet(structure, theta[:n], theta[n:])
    return ParameterSet(structure, theta)


def _extended(arr, start, stop):
    """``arr[start:stop]`` with zeros standing in for negative indices."""
    if start >= 0:
        return arr[start:stop]
    return np.concatenate([np.zeros(-start, dtype=arr.dtype), arr[:stop]])


def _dac_clip(z, full_scale):
    """Limit magnitudes to the converter full scale, keeping phase."""
    mag = np.abs(z)
    over = mag > full_scale
    if np.any(over):
        z = z.copy()
        z[over] *= full_scale / mag[over]
    return z


def _step_rng(seed, *keys):
    return np.random.default_rng([int(seed) & 0xFFFFFFFF, *keys])


def pretrain(data, structure, pa, *, target_gain=None, proactive=False, state_cfg=None,
             regularization=1e-10, passes=2, seed=0):
    """Identify initial parameters from continuous passes over the whole data.

    Each pass sends the full data through the currently predistorted chain
    from a cold PA and refits the postdistorter on all of it.
    """
    u = check_signal(data, "data")
    G = pa.small_signal_gain if target_gain is None else target_gain
    state_cfg = state_cfg or StateConfig()
    s_u = compute_state(u, state_cfg) if proactive else None
    x = u
    params = None
    for i in range(passes):
        y, _ = pa_process(x, pa, pa_initial_state(pa), rng=_step_rng(seed, 1, i))
        yn = y / G
        if proactive:
            params = fit_proactive(yn, x, compute_state(yn, state_cfg), structure, regularization)
            x = proactive_output(u, params, s_u)
        else:
            params = ParameterSet(structure, ls_solve(build_regressor(yn, structure), x,
                                                      regularization))
            x = model_output(u, params)
    return params


def run_adaptation(u, init_data, model, update, pa, schedule, impairment=None,
                   mode="reactive", *, init="pretrained", state_cfg=None, target_gain=None,
                   seed=0, pretrain_passes=2, record_theta=True):
    """Emulate closed-loop adaptation over ``u`` and return the per-step trace.

    ``mode`` is ``reactive`` (update after every block), ``proactive`` (state
    model, never updated) or ``frozen`` (fixed parameters).  ``init`` is
    ``"pretrained"``, ``"cold"`` or a :class:`ParameterSet`.  The trace NMSE
    compares the gain-normalized, impairment-free PA output of each analysis
    block with the original data; the impairment only touches the data the
    update sees.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    impairment = impairment or FeedbackImpairment()
    raise_for_problems(impairment.validate(), "impairment")
    update = update or UpdateConfig()
    fs = getattr(u, "sample_rate_hz", None) or getattr(init_data, "sample_rate_hz")
    u_arr = check_signal(u, "u")
    init_arr = check_signal(init_data, "init_data")
    L0 = schedule.init_len
    if len(init_arr) < L0:
        raise ValueError(f"init_data has {len(init_arr)} samples, schedule needs {L0}")
    full = np.concatenate([init_arr[len(init_arr) - L0:], u_arr])
    windows = plan_windows(len(full), schedule)
    G = pa.small_signal_gain if target_gain is None else target_gain
    state_cfg = state_cfg or StateConfig(sample_rate_hz=fs)
    proactive = mode == "proactive"
    M = model.memory_depth
    S = schedule.step_len

    if isinstance(init, ParameterSet):
        params = init
    elif init == "cold":
        params = ParameterSet.unit_linear(model, proactive=proactive)
    elif init == "pretrained":
        params = pretrain(full, model, pa, target_gain=G, proactive=proactive,
                          state_cfg=state_cfg, regularization=update.regularization,
                          passes=pretrain_passes, seed=seed)
    else:
        raise ValueError(f"init must be 'pretrained', 'cold' or a ParameterSet, got {init!r}")

    est_kw = dict(order=model.order, memory_depth=M, lag_terms=model.lag_terms,
                  lead_terms=model.lead_terms, regularization=update.regularization)
    if proactive:
        dpd = ProactivePredistorter(state_cutoff_hz=state_cfg.cutoff_hz,
                                    sample_rate_hz=state_cfg.sample_rate_hz,
                                    **est_kw).initialize(params)
        s_full = compute_state(full, state_cfg)
    else:
        if params.theta_dyn is not None:
            raise ValueError("a proactive ParameterSet needs mode='proactive'")
        algo = update.algorithm if update.algorithm in ("ila", "robust") else "ila"
        dpd = Predistorter(mu=update.mu, algorithm=algo, **est_kw).initialize(params)
    adapt = mode == "reactive" and update.algorithm in ("ila", "robust")

    # The PA clips its drive at rated_input anyway, so clipping the DPD output
    # there leaves the PA output unchanged and keeps the regressors bounded.
    def predistort(a, b):
        seg = _extended(full, a - M, b)
        if proactive:
            z = dpd.transform(seg, state=_extended(s_full, a - M, b), warmup=M)
        else:
            z = dpd.transform(seg, warmup=M)
        return _dac_clip(z, pa.rated_input)

    xs = np.zeros_like(full)
    xs[:L0] = predistort(0, L0)
    imp_rng = np.random.default_rng(impairment.seed)
    trace = AdaptationTrace(meta=dict(mode=mode, algorithm=update.algorithm, mu=update.mu,
                                      window_len=schedule.window_len, step_len=S,
                                      init_len=L0, sample_rate_hz=fs))
    for k, w in enumerate(windows):
        a0, a1 = w.analysis_start, w.analysis_end
        theta_now = dpd.coef_.copy() if record_theta else None
        xs[a0:a1] = predistort(a0, a1)
        y_win, _ = pa_process(xs[w.window_start:a1], pa, pa_initial_state(pa),
                              rng=_step_rng(seed, 2, k))
        nmse = gain_normalized_nmse_db(full[a0:a1], y_win[-S:])

        hist = min(M, schedule.window_len - S)
        y_tail = y_win[len(y_win) - S - hist:]
        y_obs = apply_feedback_impairment(y_tail, impairment, rng=imp_rng)
        snr = measured_snr_db(y_tail, y_obs)
        if adapt:
            dpd.partial_fit(xs[a0 - hist:a1], y_obs / G, warmup=hist)
        trace.steps.append(StepRecord(k, (a0 - L0) / fs, theta_now, nmse, snr))
    return trace


def windowed_vs_streaming_nmse(x, pa, schedule):
    """Per-block NMSE between cold-start windowed uploads and one continuous pass.

    ``x`` is an already predistorted stream (initialization included).  The
    PA noise floor is disabled so only state effects remain.
    """
    x = check_signal(x, "x")
    cfg = pa.noiseless()
    stream, _ = pa_process(x, cfg, pa_initial_state(cfg))
    out = []
    for w in plan_windows(len(x), schedule):
        y_win, _ = pa_process(x[w.window_start:w.window_end], cfg, pa_initial_state(cfg))
        S = w.analysis_end - w.analysis_start
        out.append(nmse_db(stream[w.analysis_start:w.analysis_end], y_win[-S:]))
    return np.array(out)


def steady_state_nmse(trace, fraction=STEADY_FRACTION):
    """Mean NMSE over the final ``fraction`` of steps (at least one step)."""
    nm = trace.nmse
    if len(nm) == 0:
        raise ValueError("empty trace")
    n = max(1, int(math.ceil(fraction * len(nm))))
    return float(np.mean(nm[-n:]))


def mean_nmse_db(trace):
    """Power average of the per-block NMSE, in dB.

    For blocks of equal reference energy this is the NMSE pooled over the
    whole trace; unlike the mean of dB values it is not pulled down by
    block-to-block scatter.
    """
    nm = trace.nmse
    if len(nm) == 0:
        raise ValueError("empty trace")
    return float(10 * np.log10(np.mean(10 ** (nm / 10))))


def running_median(values, size):
    """Centred running median; the window shrinks at the ends instead of padding."""
    values = np.asarray(values, dtype=float)
    h = size // 2
    return np.array([np.median(values[max(0, i - h):i + h + 1]) for i in range(len(values))])


def convergence_time(trace, tolerance_db=1.0, smooth=1):
    """Earliest step time after which NMSE never exceeds steady state + tolerance.

    Steady state is the mean over the last 10% of steps.  ``smooth`` > 1
    applies a centred running median of that many steps first, which stops
    a single outlier block from resetting the clock.  Returns ``inf`` when
    even the final step is outside the tolerance.
    """
    nm = trace.nmse
    if len(nm) == 0:
        raise ValueError("empty trace")
    if smooth > 1:
        nm = running_median(nm, int(smooth))
    n = max(1, int(math.ceil(STEADY_FRACTION * len(nm))))
    steady = float(np.mean(nm[-n:]))
    bad = np.nonzero(nm > steady + tolerance_db)[0]
    if len(bad) == 0:
        return float(trace.times[0])
    j = bad[-1] + 1
    if j >= len(nm):
        return math.inf
    return float(trace.times[j])


def degradation_db(trace_noisy, trace_clean):
    """Steady-state NMSE of the noisy run minus that of the clean run."""
    if len(trace_noisy) != len(trace_clean) or not np.allclose(trace_noisy.times,
                                                                trace_clean.times):
        raise ValueError("schedule mismatch: traces cover different steps")
    return steady_state_nmse(trace_noisy) - steady_state_nmse(trace_clean)


def step_excursion_db(trace, step_time_s, window_s=0.5e-3, baseline_s=0.5e-3):
    """Peak NMSE within ``window_s`` after a power step, above the pre-step level.

    A block belongs to the step neighbourhood when any of its samples falls
    inside ``[step_time_s, step_time_s + window_s)``.  The baseline is the
    median NMSE of the blocks that end within ``baseline_s`` before the step.
    """
    t, nm = trace.times, trace.nmse
    dur = trace.meta.get("step_len", 0) / trace.meta.get("sample_rate_hz", math.inf)
    end = t + dur
    after = (end > step_time_s) & (t < step_time_s + window_s)
    before = (end <= step_time_s) & (end > step_time_s - baseline_s)
    if not after.any() or not before.any():
        raise ValueError("trace does not cover the requested step neighbourhood")
    return float(nm[after].max() - np.median(nm[before]))
