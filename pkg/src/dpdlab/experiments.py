"""Configuration-driven experiments and their CSV artifacts.

A configuration is an INI file with the sections ``experiment``, ``signal``,
``model``, ``update``, ``pa``, ``schedule``, ``impairment`` and ``metrics``.
Every key is optional; missing keys take the defaults of the corresponding
dataclass.  Unknown sections or keys are reported as diagnostics, so a typo
cannot silently fall back to a default.

Sweep point ``i`` runs with seed ``seed + i``.  The test signal itself is
always generated from the base seed so all sweep points see the same data.
"""

from concurrent.futures import ProcessPoolExecutor
import configparser
from dataclasses import asdict, dataclass, field, replace
import logging
import math
import os
from typing import NamedTuple

import numpy as np

from ._validation import ConfigError
from .estimation import UpdateConfig
from .io import write_csv
from .models import ModelStructure, StateConfig, model_output
from .pa import PaConfig, _alpha_for, slowest_time_constant
from .signals import (
    DEFAULT_SAMPLE_RATE,
    SUBCARRIER_SPACING_HZ,
    PulsedNoiseConfig,
    gen_ofdm_surrogate,
    gen_pulsed_noise,
    normalize_rms,
)
from .testbed import (
    FeedbackImpairment,
    Schedule,
    bits_to_snr_db,
    convergence_time,
    degradation_db,
    mean_nmse_db,
    pretrain,
    run_adaptation,
    steady_state_nmse,
    windowed_vs_streaming_nmse,
)

log = logging.getLogger(__name__)

EXPERIMENTS = ("nmse_vs_time", "mu_sweep", "blocklen_sweep", "snr_sweep",
               "degradation_curve", "warmup_check")
SWEEP_EXPERIMENTS = EXPERIMENTS[1:]
# Seed offset for the initialization data, so it never repeats the test signal.
INIT_SEED_OFFSET = 1000


class Diagnostic(NamedTuple):
    """One configuration problem: dotted field name, rule, source line if known."""

    field: str
    message: str
    line: int = None

    def __str__(self):
        where = f"line {self.line}: " if self.line else ""
        return f"{where}{self.field}: {self.message}"


class ConfigParseError(ValueError):
    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("\n".join(str(d) for d in self.diagnostics))


@dataclass(frozen=True)
class SignalSpec:
    """Test signal recipe.

    ``kind`` is ``ofdm`` or ``pulsed``.  ``drive_rms`` is the RMS of the OFDM
    signal, or the RMS of the high subframes of the pulsed signal.
    """

    kind: str = "ofdm"
    sample_rate_hz: float = DEFAULT_SAMPLE_RATE
    drive_rms: float = 0.15
    occupied_bandwidth_hz: float = 18e6
    num_symbols: int = 140
    init_symbols: int = 60
    noise_bandwidth_hz: float = 4e6
    subframe_duration_s: float = 2e-3
    num_subframes: int = 4
    power_step_db: float = 10.0
    pattern: tuple = ("low", "high", "low", "high")

    def pulsed(self, seed):
        return PulsedNoiseConfig(self.sample_rate_hz, self.noise_bandwidth_hz,
                                 self.subframe_duration_s, self.num_subframes,
                                 self.power_step_db, self.pattern, seed, self.drive_rms)

    def validate(self):
        problems = []
        if self.kind not in ("ofdm", "pulsed"):
            return [("kind", f"must be ofdm or pulsed, got {self.kind!r}")]
        if not self.drive_rms > 0:
            problems.append(("drive_rms", f"must be positive, got {self.drive_rms!r}"))
        if self.kind == "pulsed":
            problems += self.pulsed(0).validate()
            return problems
        if not self.sample_rate_hz > 0:
            problems.append(("sample_rate_hz", "must be positive"))
        elif self.occupied_bandwidth_hz > self.sample_rate_hz:
            problems.append(("occupied_bandwidth_hz",
                             f"{self.occupied_bandwidth_hz} exceeds the complex baseband "
                             f"span {self.sample_rate_hz}"))
        for name in ("num_symbols", "init_symbols"):
            if getattr(self, name) < 1:
                problems.append((name, "must be >= 1"))
        return problems

    def lengths(self):
        """``(len(u), len(init_data))`` in samples."""
        fs = self.sample_rate_hz
        if self.kind == "pulsed":
            n = int(round(self.num_subframes * self.subframe_duration_s * fs))
            return n, n
        nfft = int(round(fs / SUBCARRIER_SPACING_HZ))
        sym = nfft + int(round(nfft * 144 / 2048))
        return self.num_symbols * sym, self.init_symbols * sym

    def generate(self, seed):
        """Test signal and initialization data."""
        if self.kind == "pulsed":
            return (gen_pulsed_noise(self.pulsed(seed)),
                    gen_pulsed_noise(self.pulsed(seed + INIT_SEED_OFFSET)))
        u = gen_ofdm_surrogate(self.sample_rate_hz, self.occupied_bandwidth_hz,
                               self.num_symbols, seed)
        init = gen_ofdm_surrogate(self.sample_rate_hz, self.occupied_bandwidth_hz,
                                  self.init_symbols, seed + INIT_SEED_OFFSET)
        return normalize_rms(u, self.drive_rms), normalize_rms(init, self.drive_rms)


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str = "nmse_vs_time"
    signal: SignalSpec = field(default_factory=SignalSpec)
    model: ModelStructure = field(default_factory=ModelStructure)
    proactive: bool = False
    state_cutoff_hz: float = 50e3
    update: UpdateConfig = field(default_factory=UpdateConfig)
    init: str = "pretrained"
    pa: PaConfig = field(default_factory=PaConfig)
    schedule: Schedule = field(default_factory=Schedule)
    impairment: FeedbackImpairment = field(default_factory=FeedbackImpairment)
    sweep_values: tuple = ()
    algorithms: tuple = ()
    output_dir: str = "dpdlab-out"
    seed: int = 0
    tolerance_db: float = 1.0
    smooth: int = 1
    save_theta: bool = False

    @property
    def mode(self):
        return "proactive" if self.proactive else "reactive"


# ---------------------------------------------------------------- parsing

def _bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _int(text):
    v = float(text)
    if not v.is_integer():
        raise ValueError(f"expected an integer, got {text!r}")
    return int(v)


def _optional_float(text):
    return None if text.strip().lower() == "none" else float(text)


def _complex(text):
    return complex(text.replace(" ", ""))


def _list(conv):
    def parse(text):
        return tuple(conv(v) for v in text.replace(";", ",").split(",") if v.strip())
    return parse


def _triples(text):
    out = []
    for chunk in text.split(";"):
        if chunk.strip():
            vals = chunk.replace(",", " ").split()
            if len(vals) != 3:
                raise ValueError(f"expected 'order memory shift' triples, got {chunk.strip()!r}")
            out.append(tuple(_int(v) for v in vals))
    return tuple(out)


def _words(text):
    return tuple(w.strip().lower() for w in text.replace(";", ",").split(",") if w.strip())


# section -> key -> converter
_SCHEMA = {
    "experiment": {"kind": str.strip, "seed": _int, "output_dir": str.strip,
                   "sweep_values": _list(float), "algorithms": _words,
                   "save_theta": _bool},
    "signal": {"kind": str.strip, "sample_rate_hz": float, "drive_rms": float,
               "occupied_bandwidth_hz": float, "num_symbols": _int, "init_symbols": _int,
               "noise_bandwidth_hz": float, "subframe_duration_s": float,
               "num_subframes": _int, "power_step_db": float, "pattern": _words},
    "model": {"kind": str.strip, "order": _int, "memory_depth": _int,
              "lag_terms": _triples, "lead_terms": _triples, "proactive": _bool,
              "state_cutoff_hz": float},
    "update": {"algorithm": str.strip, "mu": float, "regularization": float,
               "init": str.strip},
    "pa": {"small_signal_gain": _complex, "c3": float, "c5": float,
           "am_pm_deg": float, "memory_taps": _list(_complex), "thermal_tau_s": float,
           "thermal_alpha": float,
           "thermal_gain_sensitivity": _complex,
           "thermal_compression_sensitivity": float,
           "output_noise_floor_dbc": _optional_float, "rated_input": float,
           "time_invariant": _bool},
    "schedule": {"window_len": _int, "step_len": _int, "init_len": _int},
    "impairment": {"kind": str.strip, "snr_db": float, "bits": _int, "seed": _int},
    "metrics": {"tolerance_db": float, "smooth": _int},
}


def _key_lines(text):
    """Map ``(section, key)`` to its 1-based line number in ``text``."""
    lines, section = {}, None
    for i, raw in enumerate(text.splitlines(), 1):
        s = raw.strip()
        if not s or s[0] in "#;":
            continue
        if s.startswith("[") and s.endswith("]"):
            section = s[1:-1].strip().lower()
            lines.setdefault((section, None), i)
        elif section is not None:
            for sep in ("=", ":"):
                if sep in s:
                    lines.setdefault((section, s.split(sep, 1)[0].strip().lower()), i)
                    break
    return lines


def _pa_from(values, fs, diags, where):
    base = PaConfig()
    kw = {}
    poly = list(base.am_am_poly)
    if "c3" in values:
        poly[0] = values.pop("c3")
    if "c5" in values:
        poly[1] = values.pop("c5")
    kw["am_am_poly"] = tuple(poly)
    if "am_pm_deg" in values:
        kw["am_pm_strength"] = math.radians(values.pop("am_pm_deg"))
    if "thermal_tau_s" in values:
        tau = values.pop("thermal_tau_s")
        if not tau > 0:
            diags.append(Diagnostic("pa.thermal_tau_s", "must be positive",
                                    where("pa", "thermal_tau_s")))
            tau = 0.5e-3
        kw["thermal_alpha"] = _alpha_for(tau, fs)
    time_invariant = values.pop("time_invariant", False)
    kw.update(values)
    try:
        cfg = replace(base, **kw)
    except ConfigError as err:
        for f, m in err.problems:
            diags.append(Diagnostic(f"pa.{f}", m, where("pa", f)))
        return base
    return cfg.time_invariant() if time_invariant else cfg


def parse_config(text):
    """Parse INI text into an :class:`ExperimentConfig`.

    Raises :class:`ConfigParseError` listing every problem found, each with
    its field and, where possible, its line.  Cross-field rules are left to
    :func:`validate_config`.
    """
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    try:
        parser.read_string(text)
    except configparser.Error as err:
        line = getattr(err, "lineno", None)
        if line is None and getattr(err, "errors", None):
            line = err.errors[0][0]
        raise ConfigParseError([Diagnostic("config", str(err).splitlines()[0], line)])
    lines = _key_lines(text)

    def where(section, key=None):
        return lines.get((section, key)) or lines.get((section, None))

    diags, values = [], {}
    for section in parser.sections():
        sec = section.lower()
        if sec not in _SCHEMA:
            diags.append(Diagnostic(section, "unknown section", where(sec)))
            continue
        values[sec] = {}
        for key, raw in parser.items(section):
            conv = _SCHEMA[sec].get(key)
            if conv is None:
                diags.append(Diagnostic(f"{sec}.{key}", "unknown key", where(sec, key)))
                continue
            try:
                values[sec][key] = conv(raw)
            except ValueError as err:
                diags.append(Diagnostic(f"{sec}.{key}", str(err), where(sec, key)))

    def sec(name):
        return dict(values.get(name, {}))

    def build(name, cls, kw):
        try:
            return cls(**kw)
        except ConfigError as err:
            for f, m in err.problems:
                diags.append(Diagnostic(f"{name}.{f}", m, where(name, f)))
        except (TypeError, ValueError) as err:
            diags.append(Diagnostic(name, str(err), where(name)))
        return cls()

    exp, sig, mod, upd = sec("experiment"), sec("signal"), sec("model"), sec("update")
    sch, imp, met = sec("schedule"), sec("impairment"), sec("metrics")
    proactive = mod.pop("proactive", False)
    cutoff = mod.pop("state_cutoff_hz", 50e3)
    init = upd.pop("init", "pretrained")
    # A block-length sweep shares one initialization block across all S.
    W = sch.setdefault("window_len", Schedule.window_len)
    S = sch.setdefault("step_len", Schedule.step_len)
    if isinstance(W, int) and isinstance(S, int):
        # With S > W fall back to W so only the step_len rule fires.
        sch.setdefault("init_len", W if exp.get("kind") == "blocklen_sweep" or S > W
                       else W - S)
    if mod.get("lag_terms") or mod.get("lead_terms"):
        mod.setdefault("kind", "GMP")

    cfg = ExperimentConfig(
        experiment=exp.get("kind", "nmse_vs_time"),
        signal=build("signal", SignalSpec, sig),
        model=build("model", ModelStructure, mod),
        proactive=proactive,
        state_cutoff_hz=cutoff,
        update=build("update", UpdateConfig, upd),
        init=init,
        pa=_pa_from(sec("pa"), sig.get("sample_rate_hz", DEFAULT_SAMPLE_RATE), diags, where),
        schedule=build("schedule", Schedule, sch),
        impairment=build("impairment", FeedbackImpairment, imp),
        sweep_values=exp.get("sweep_values", ()),
        algorithms=exp.get("algorithms", ()),
        output_dir=exp.get("output_dir", "dpdlab-out"),
        seed=exp.get("seed", 0),
        tolerance_db=met.get("tolerance_db", 1.0),
        smooth=met.get("smooth", 1),
        save_theta=exp.get("save_theta", False),
    )
    if diags:
        raise ConfigParseError(diags)
    return cfg


def load_config(path):
    with open(path) as fh:
        return parse_config(fh.read())


def validate_config(cfg):
    """Every violated rule of ``cfg`` as a :class:`Diagnostic`; empty iff valid."""
    d = []

    def add(problems, prefix):
        d.extend(Diagnostic(f"{prefix}.{f}", m) for f, m in problems)

    if cfg.experiment not in EXPERIMENTS:
        d.append(Diagnostic("experiment.kind", f"must be one of {EXPERIMENTS}, "
                                               f"got {cfg.experiment!r}"))
    add(cfg.signal.validate(), "signal")
    add(cfg.model.validate(), "model")
    add(cfg.update.validate(), "update")
    add(cfg.pa.validate(), "pa")
    add(cfg.schedule.validate(), "schedule")
    imp_problems = cfg.impairment.validate()
    if cfg.experiment in ("snr_sweep", "degradation_curve"):
        # The sweep supplies the level; only the kind must make sense.
        imp_problems = [p for p in imp_problems if p[0] in ("kind", "seed")]
    add(imp_problems, "impairment")
    if cfg.init not in ("pretrained", "cold"):
        d.append(Diagnostic("update.init", f"must be pretrained or cold, got {cfg.init!r}"))
    if not cfg.state_cutoff_hz > 0 or cfg.state_cutoff_hz >= cfg.signal.sample_rate_hz / 2:
        d.append(Diagnostic("model.state_cutoff_hz", "must lie in (0, sample_rate/2)"))
    if cfg.proactive and cfg.update.algorithm not in ("ila", "proactive-static"):
        d.append(Diagnostic("update.algorithm",
                            "proactive models are never updated; use ila or proactive-static"))
    if not cfg.tolerance_db > 0:
        d.append(Diagnostic("metrics.tolerance_db", "must be positive"))
    if cfg.smooth < 1:
        d.append(Diagnostic("metrics.smooth", "must be >= 1"))
    if not isinstance(cfg.seed, int) or cfg.seed < 0:
        d.append(Diagnostic("experiment.seed", "must be a nonnegative integer"))

    sweep = cfg.experiment in SWEEP_EXPERIMENTS
    if sweep and not cfg.sweep_values:
        d.append(Diagnostic("experiment.sweep_values", f"{cfg.experiment} needs sweep values"))
    vals = cfg.sweep_values
    if cfg.experiment == "mu_sweep" and any(not 0 <= v <= 1 for v in vals):
        d.append(Diagnostic("experiment.sweep_values", "mu values must lie in [0, 1]"))
    if cfg.experiment == "blocklen_sweep":
        if any(v < 1 or not float(v).is_integer() for v in vals):
            d.append(Diagnostic("experiment.sweep_values", "block lengths must be positive integers"))
        elif vals:
            W, L0 = cfg.schedule.window_len, cfg.schedule.init_len
            if max(vals) > W:
                d.append(Diagnostic("experiment.sweep_values",
                                    f"block length {int(max(vals))} exceeds window_len {W}"))
            elif L0 < W - min(vals):
                d.append(Diagnostic("schedule.init_len",
                                    f"{L0} < window_len - smallest block = {W - int(min(vals))}"))
        bad = [a for a in cfg.algorithms if a not in ("ila", "robust", "proactive")]
        if bad:
            d.append(Diagnostic("experiment.algorithms", f"unknown algorithms {bad}"))
    if cfg.experiment == "snr_sweep":
        if cfg.impairment.kind == "none":
            d.append(Diagnostic("impairment.kind", "snr_sweep needs awgn or quantizer"))
        if cfg.impairment.kind == "quantizer" and any(v < 1 or not float(v).is_integer()
                                                      for v in vals):
            d.append(Diagnostic("experiment.sweep_values", "quantizer bits must be integers >= 1"))
    if cfg.experiment in ("snr_sweep", "degradation_curve") and any(math.isnan(v) for v in vals):
        d.append(Diagnostic("experiment.sweep_values", "SNR values must not be NaN"))
    if cfg.experiment == "warmup_check" and any(v < 0 for v in vals):
        d.append(Diagnostic("experiment.sweep_values", "overlap multiples must be >= 0"))

    if not any(x.field.startswith(("signal", "schedule")) for x in d):
        n_u, n_init = cfg.signal.lengths()
        if n_init < cfg.schedule.init_len:
            d.append(Diagnostic("signal.init_symbols",
                                f"initialization data has {n_init} samples, "
                                f"schedule.init_len needs {cfg.schedule.init_len}"))
        S = max(vals) if cfg.experiment == "blocklen_sweep" and vals else cfg.schedule.step_len
        if n_u < S:
            d.append(Diagnostic("signal", f"test signal of {n_u} samples is shorter than "
                                          f"one block ({int(S)})"))
    return d


# ---------------------------------------------------------------- writing

def config_to_ini(cfg):
    """Resolved configuration as INI text; parsing it gives ``cfg`` back."""

    def fmt(v):
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, complex):
            return repr(v).strip("()")
        if isinstance(v, float):
            return repr(v)
        return str(v)

    s, m, pa = cfg.signal, cfg.model, cfg.pa
    sections = {
        "experiment": dict(kind=cfg.experiment, seed=cfg.seed, output_dir=cfg.output_dir,
                           sweep_values=", ".join(fmt(float(v)) for v in cfg.sweep_values),
                           algorithms=", ".join(cfg.algorithms), save_theta=cfg.save_theta),
        "signal": {k: (", ".join(v) if k == "pattern" else v) for k, v in asdict(s).items()},
        "model": dict(kind=m.kind, order=m.order, memory_depth=m.memory_depth,
                      lag_terms="; ".join(" ".join(map(str, t)) for t in m.lag_terms),
                      lead_terms="; ".join(" ".join(map(str, t)) for t in m.lead_terms),
                      proactive=cfg.proactive, state_cutoff_hz=cfg.state_cutoff_hz),
        "update": dict(algorithm=cfg.update.algorithm, mu=cfg.update.mu,
                       regularization=cfg.update.regularization, init=cfg.init),
        "pa": dict(small_signal_gain=pa.small_signal_gain, c3=pa.am_am_poly[0],
                   c5=pa.am_am_poly[1], am_pm_deg=math.degrees(pa.am_pm_strength),
                   memory_taps=", ".join(fmt(t) for t in pa.memory_taps),
                   thermal_alpha=pa.thermal_alpha,
                   thermal_gain_sensitivity=pa.thermal_gain_sensitivity,
                   thermal_compression_sensitivity=pa.thermal_compression_sensitivity,
                   output_noise_floor_dbc=pa.output_noise_floor_dbc,
                   rated_input=pa.rated_input),
        "schedule": asdict(cfg.schedule),
        "impairment": dict(kind=cfg.impairment.kind, snr_db=cfg.impairment.snr_db,
                           bits=cfg.impairment.bits, seed=cfg.impairment.seed),
        "metrics": dict(tolerance_db=cfg.tolerance_db, smooth=cfg.smooth),
    }
    out = []
    for name, kv in sections.items():
        out.append(f"[{name}]")
        for k, v in kv.items():
            if v is None or v == "":
                continue
            out.append(f"{k} = {fmt(v)}")
        out.append("")
    return "\n".join(out)


# ---------------------------------------------------------------- running

@dataclass(frozen=True)
class RunSpec:
    index: int
    label: str
    algorithm: str = None
    mu: float = None
    step_len: int = None
    impairment: FeedbackImpairment = None
    proactive: bool = None


@dataclass
class ExperimentResult:
    status: int
    output_dir: str
    summary_path: str = None
    rows: list = field(default_factory=list)
    errors: list = field(default_factory=list)


def _plan(cfg):
    """The independent runs of ``cfg`` (none for ``warmup_check``)."""
    kind, vals, imp = cfg.experiment, cfg.sweep_values, cfg.impairment
    if kind == "nmse_vs_time":
        return [RunSpec(0, "run")]
    if kind == "mu_sweep":
        return [RunSpec(i, f"mu_{v:g}", mu=float(v)) for i, v in enumerate(vals)]
    if kind == "blocklen_sweep":
        algos = cfg.algorithms or ("proactive" if cfg.proactive else cfg.update.algorithm,)
        runs = []
        for a in algos:
            for v in vals:
                pro = a == "proactive"
                runs.append(RunSpec(len(runs), f"{a}_S{int(v)}", algorithm=None if pro else a,
                                    step_len=int(v), proactive=pro))
        return runs
    if kind == "snr_sweep":
        runs = [RunSpec(0, "clean", impairment=FeedbackImpairment())]
        for v in vals:
            i = len(runs)
            if imp.kind == "quantizer":
                one = FeedbackImpairment.quantizer(int(v), imp.seed + i)
                label = f"bits_{int(v)}"
            else:
                one = FeedbackImpairment.awgn(float(v), imp.seed + i)
                label = f"snr_{v:g}"
            runs.append(RunSpec(i, label, impairment=one))
        return runs
    if kind == "degradation_curve":
        runs = [RunSpec(0, "ila_clean", algorithm="ila", impairment=FeedbackImpairment()),
                RunSpec(1, "robust_clean", algorithm="robust", impairment=FeedbackImpairment())]
        for v in vals:
            for a in ("ila", "robust"):
                i = len(runs)
                runs.append(RunSpec(i, f"{a}_snr_{v:g}", algorithm=a,
                                    impairment=FeedbackImpairment.awgn(float(v), imp.seed + i)))
        return runs
    return []


def _execute(cfg, spec, u, init, out_dir, timestamp):
    """Run one sweep point and write its trace; returns ``(index, trace)``."""
    update = cfg.update
    if spec.algorithm is not None:
        update = replace(update, algorithm=spec.algorithm)
    if spec.mu is not None:
        update = replace(update, mu=spec.mu)
    schedule = cfg.schedule
    if spec.step_len is not None:
        schedule = replace(schedule, step_len=spec.step_len)
    proactive = cfg.proactive if spec.proactive is None else spec.proactive
    imp = cfg.impairment if spec.impairment is None else spec.impairment
    state_cfg = StateConfig(cfg.state_cutoff_hz, cfg.signal.sample_rate_hz)
    # The proactive model is never updated, so a cold start would stay linear.
    start = "pretrained" if proactive else cfg.init
    trace = run_adaptation(u, init, cfg.model, update, cfg.pa, schedule, imp,
                           "proactive" if proactive else "reactive", init=start,
                           state_cfg=state_cfg, seed=cfg.seed + spec.index,
                           record_theta=cfg.save_theta)
    os.makedirs(out_dir, exist_ok=True)
    trace.to_csv(os.path.join(out_dir, "trace.csv"),
                 theta_dir=os.path.join(out_dir, "theta") if cfg.save_theta else None,
                 structure=cfg.model, timestamp=timestamp)
    return spec.index, trace


# Signals reach pool workers once, through the initializer.  Tasks stay small:
# a worker that dies while large task payloads are still queued can leave
# the pool's feeder thread blocked on a full pipe, hanging shutdown.
_WORKER_SIGNALS = {}


def _init_worker(u, init):
    _WORKER_SIGNALS["data"] = (u, init)


def _execute_in_worker(cfg, spec, out_dir, timestamp):
    u, init = _WORKER_SIGNALS["data"]
    return _execute(cfg, spec, u, init, out_dir, timestamp)


def _run_dir(cfg, out, spec):
    if cfg.experiment == "nmse_vs_time":
        return out
    return os.path.join(out, f"run_{spec.index:03d}_{spec.label}")


def _metrics(cfg, trace):
    return (convergence_time(trace, cfg.tolerance_db, cfg.smooth),
            steady_state_nmse(trace), mean_nmse_db(trace))


def _summarize(cfg, runs, traces):
    kind = cfg.experiment
    by = {r.index: r for r in runs}
    if kind == "nmse_vs_time":
        return (["convergence_time_s", "steady_nmse_db", "mean_nmse_db"],
                [_metrics(cfg, traces[0])])
    if kind == "mu_sweep":
        return (["mu", "convergence_time_s", "steady_nmse_db"],
                [(by[i].mu, *_metrics(cfg, t)[:2]) for i, t in sorted(traces.items())])
    if kind == "blocklen_sweep":
        rows = []
        for i, t in sorted(traces.items()):
            r = by[i]
            rows.append(("proactive" if r.proactive else r.algorithm, r.step_len,
                         *_metrics(cfg, t)))
        return (["algorithm", "block_len", "convergence_time_s", "steady_nmse_db",
                 "mean_nmse_db"], rows)
    if kind == "snr_sweep":
        clean = traces[0]
        rows = []
        for i, t in sorted(traces.items()):
            if i == 0:
                continue
            imp = by[i].impairment
            nominal = bits_to_snr_db(imp.bits) if imp.kind == "quantizer" else imp.snr_db
            value = imp.bits if imp.kind == "quantizer" else imp.snr_db
            measured = float(np.mean([s.feedback_snr_db for s in t.steps]))
            rows.append((value, nominal, measured, steady_state_nmse(t),
                         degradation_db(t, clean)))
        return (["value", "nominal_snr_db", "measured_snr_db", "steady_nmse_db",
                 "degradation_db"], rows)
    if kind == "degradation_curve":
        clean = {"ila": traces[0], "robust": traces[1]}
        deg = {}
        for i, t in traces.items():
            r = by[i]
            if i > 1:
                deg[(r.impairment.snr_db, r.algorithm)] = degradation_db(t, clean[r.algorithm])
        rows = [(float(v), deg[(float(v), "ila")], deg[(float(v), "robust")])
                for v in cfg.sweep_values]
        return ["snr_db", "degradation_ila_db", "degradation_robust_db"], rows
    raise AssertionError(kind)


def _warmup(cfg, u, init):
    """Windowed cold-start vs streaming NMSE for each overlap multiple."""
    full = np.concatenate([np.asarray(init), np.asarray(u)])
    params = pretrain(full, cfg.model, cfg.pa, regularization=cfg.update.regularization,
                      seed=cfg.seed)
    x = model_output(full, params)
    tau = slowest_time_constant(cfg.pa)
    S = cfg.schedule.step_len
    rows = []
    for v in cfg.sweep_values:
        overlap = int(math.ceil(v * tau))
        sch = Schedule.with_overlap(S, overlap)
        if sch.window_len > len(full):
            raise ValueError(f"overlap of {overlap} samples needs a longer signal")
        nm = windowed_vs_streaming_nmse(x, cfg.pa, sch)
        rows.append((float(v), overlap, float(np.max(nm)), float(np.mean(nm))))
    return ["overlap_tau", "overlap_samples", "max_nmse_db", "mean_nmse_db"], rows


def run_experiment(cfg, jobs=1, timestamp=True):
    """Run ``cfg`` and write its artifacts under ``cfg.output_dir``.

    Returns an :class:`ExperimentResult`; ``status`` is nonzero when the
    config is invalid or any run failed.
    """
    diags = validate_config(cfg)
    if diags:
        return ExperimentResult(2, cfg.output_dir, errors=[str(x) for x in diags])
    out = cfg.output_dir
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "config.ini"), "w") as fh:
        fh.write(config_to_ini(cfg))

    u, init = cfg.signal.generate(cfg.seed)
    result = ExperimentResult(0, out)
    if cfg.experiment == "warmup_check":
        try:
            header, rows = _warmup(cfg, u, init)
        except (ValueError, ArithmeticError) as err:
            log.error("warmup_check failed: %s", err)
            return ExperimentResult(1, out, errors=[str(err)])
    else:
        runs = _plan(cfg)
        traces = {}
        args = [(cfg, r, _run_dir(cfg, out, r), timestamp) for r in runs]
        if jobs > 1 and len(runs) > 1:
            with ProcessPoolExecutor(max_workers=jobs, initializer=_init_worker,
                                     initargs=(u, init)) as pool:
                futures = [(r, pool.submit(_execute_in_worker, *a))
                           for r, a in zip(runs, args)]
                for r, fut in futures:
                    try:
                        i, t = fut.result()
                        traces[i] = t
                    except Exception as err:  # reported, then nonzero exit
                        result.errors.append(f"{r.label}: {err}")
        else:
            for r, a in zip(runs, args):
                try:
                    i, t = _execute(a[0], a[1], u, init, *a[2:])
                    traces[i] = t
                except Exception as err:
                    result.errors.append(f"{r.label}: {err}")
        for e in result.errors:
            log.error("run failed: %s", e)
        if result.errors:
            result.status = 1
            return result
        header, rows = _summarize(cfg, runs, traces)

    result.summary_path = os.path.join(out, "summary.csv")
    write_csv(result.summary_path, header, rows, timestamp=timestamp)
    result.rows = rows
    return result
