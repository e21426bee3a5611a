"""Memory-polynomial style behavioral models.

Regressor columns are ordered p-major: for the MP part, column
``(p - 1) * (M + 1) + m`` holds ``x[n-m] * |x[n-m]|**(p-1)``.  GMP cross
terms follow, lag terms first and then lead terms, in the order given.
Samples before the start of the signal are taken as zero.
"""

from dataclasses import dataclass

import numpy as np

from ._validation import check_same_length, check_scalar, check_signal, raise_for_problems
from .signals import DEFAULT_SAMPLE_RATE, ComplexSignal, fir_lowpass


@dataclass(frozen=True)
class ModelStructure:
    """MP or GMP basis description.

    ``lag_terms`` and ``lead_terms`` hold ``(order, memory, shift)`` triples
    with ``shift >= 1``.  A lag term is ``x[n-m] * |x[n-m-shift]|**(order-1)``
    and a lead term is ``x[n-m] * |x[n-m+shift]|**(order-1)``.  Envelope
    indices must stay within ``x[n-M..n]`` so every row is causal.
    """

    kind: str = "MP"
    order: int = 7
    memory_depth: int = 4
    lag_terms: tuple = ()
    lead_terms: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "kind", str(self.kind).upper())
        object.__setattr__(self, "lag_terms", tuple(tuple(int(v) for v in t) for t in self.lag_terms))
        object.__setattr__(self, "lead_terms", tuple(tuple(int(v) for v in t) for t in self.lead_terms))
        problems = self.validate()
        raise_for_problems(problems, "model structure")

    def validate(self):
        problems = []
        if self.kind not in ("MP", "GMP"):
            problems.append(("kind", f"must be MP or GMP, got {self.kind!r}"))
        if not isinstance(self.order, int) or self.order < 1:
            problems.append(("order", f"must be an integer >= 1, got {self.order!r}"))
        if not isinstance(self.memory_depth, int) or self.memory_depth < 0:
            problems.append(("memory_depth", f"must be an integer >= 0, got {self.memory_depth!r}"))
        if problems:
            return problems
        if self.kind == "MP" and (self.lag_terms or self.lead_terms):
            problems.append(("kind", "MP structures take no cross terms; use GMP"))
        M = self.memory_depth
        for name, terms, sign in (("lag_terms", self.lag_terms, 1), ("lead_terms", self.lead_terms, -1)):
            for t in terms:
                if len(t) != 3:
                    problems.append((name, f"{t} is not an (order, memory, shift) triple"))
                    continue
                p, m, g = t
                if p < 2:
                    problems.append((name, f"{t}: cross-term order must be >= 2"))
                if not 0 <= m <= M:
                    problems.append((name, f"{t}: memory must be in 0..{M}"))
                if not 1 <= g <= M:
                    problems.append((name, f"{t}: shift must be in 1..{M}"))
                if not 0 <= m + sign * g <= M:
                    problems.append((name, f"{t}: envelope index falls outside x[n-{M}..n]"))
        return problems

    @property
    def n_mp(self):
        return self.order * (self.memory_depth + 1)

    @property
    def n_coeff(self):
        return self.n_mp + len(self.lag_terms) + len(self.lead_terms)

    def linear_index(self):
        """Column of the ``x[n]`` term."""
        return 0

    def mp_part(self):
        return ModelStructure("MP", self.order, self.memory_depth)


@dataclass(frozen=True, eq=False)
class ParameterSet:
    """Coefficients bound to a structure; ``theta_dyn`` only for proactive models."""

    structure: ModelStructure
    theta: np.ndarray
    theta_dyn: np.ndarray = None

    def __post_init__(self):
        n = self.structure.n_coeff
        theta = np.array(self.theta, dtype=np.complex128).ravel()
        if theta.shape[0] != n:
            raise ValueError(f"theta has {theta.shape[0]} entries, structure needs {n}")
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)
        if self.theta_dyn is not None:
            dyn = np.array(self.theta_dyn, dtype=np.complex128).ravel()
            if dyn.shape[0] != n:
                raise ValueError(f"theta_dyn has {dyn.shape[0]} entries, structure needs {n}")
            dyn.setflags(write=False)
            object.__setattr__(self, "theta_dyn", dyn)

    @property
    def is_proactive(self):
        return self.theta_dyn is not None

    def stacked(self):
        if self.theta_dyn is None:
            return self.theta.copy()
        return np.concatenate([self.theta, self.theta_dyn])

    @classmethod
    def unit_linear(cls, structure, proactive=False):
        """All-zero except a unit linear tap (the ``cold`` initialization)."""
        theta = np.zeros(structure.n_coeff, dtype=np.complex128)
        theta[structure.linear_index()] = 1.0
        dyn = np.zeros(structure.n_coeff, dtype=np.complex128) if proactive else None
        return cls(structure, theta, dyn)


@dataclass(frozen=True)
class StateConfig:
    """Low-pass corner for the proactive state signal."""

    cutoff_hz: float = 50e3
    sample_rate_hz: float = DEFAULT_SAMPLE_RATE

    def __post_init__(self):
        check_scalar(self.cutoff_hz, "cutoff_hz", min_val=0, include_min=False)
        check_scalar(self.sample_rate_hz, "sample_rate_hz", min_val=0, include_min=False)
        if self.cutoff_hz >= self.sample_rate_hz / 2:
            raise ValueError(f"cutoff_hz {self.cutoff_hz} must be below sample_rate/2")


def _delayed(x, d):
    """``x[n-d]`` with zeros for negative indices (``d`` may be 0)."""
    if d == 0:
        return x
    out = np.zeros_like(x)
    if d < len(x):
        out[d:] = x[:len(x) - d]
    return out


def build_regressor(x, structure):
    """Regressor matrix ``H_x`` (N x n_coeff) for ``structure``."""
    x = check_signal(x, "x")
    M, P = structure.memory_depth, structure.order
    if len(x) <= M:
        raise ValueError(f"signal of {len(x)} samples is shorter than memory depth {M} + 1")
    N = len(x)
    H = np.empty((N, structure.n_coeff), dtype=np.complex128)
    delayed = [_delayed(x, m) for m in range(M + 1)]
    mags = [np.abs(d) for d in delayed]
    col = 0
    for p in range(1, P + 1):
        for m in range(M + 1):
            H[:, col] = delayed[m] if p == 1 else delayed[m] * mags[m] ** (p - 1)
            col += 1
    for p, m, g in structure.lag_terms:
        H[:, col] = delayed[m] * mags[m + g] ** (p - 1)
        col += 1
    for p, m, g in structure.lead_terms:
        H[:, col] = delayed[m] * mags[m - g] ** (p - 1)
        col += 1
    return H


def _like(template, out):
    if isinstance(template, ComplexSignal):
        return template.with_samples(out)
    return out


def model_output(x, params):
    """Static model output ``H_x @ theta``; also the predistorter."""
    if params.theta_dyn is not None:
        raise ValueError("model_output takes a static ParameterSet; use proactive_output")
    H = build_regressor(x, params.structure)
    return _like(x, H @ params.theta)


def compute_state(x, cfg=None):
    """Proactive state: low-passed instantaneous power ``|x[n]|**2``.

    The sample rate is taken from ``x`` when it is a :class:`ComplexSignal`,
    otherwise from ``cfg``.
    """
    if cfg is None:
        cfg = StateConfig(sample_rate_hz=getattr(x, "sample_rate_hz", DEFAULT_SAMPLE_RATE))
    fs = x.sample_rate_hz if isinstance(x, ComplexSignal) else cfg.sample_rate_hz
    if cfg.cutoff_hz >= fs / 2:
        raise ValueError(f"invalid-cutoff: {cfg.cutoff_hz} Hz must be below {fs / 2} Hz")
    power = np.abs(check_signal(x, "x")) ** 2
    return fir_lowpass(power, cfg.cutoff_hz, fs)


def proactive_output(x, params, s):
    """``y[n] = row_n(H_x) @ (theta + s[n] * theta_dyn)``."""
    if params.theta_dyn is None:
        raise ValueError("proactive_output needs a ParameterSet with theta_dyn")
    s = check_signal(s, "s", allow_real=True)
    check_same_length(("x", x), ("s", s))
    H = build_regressor(x, params.structure)
    return _like(x, H @ params.theta + s * (H @ params.theta_dyn))


def build_proactive_regressor(x, s, structure):
    """``[H_x | diag(s) H_x]``; least squares over it yields stacked (theta, theta_dyn)."""
    s = check_signal(s, "s", allow_real=True)
    check_same_length(("x", x), ("s", s))
    H = build_regressor(x, structure)
    return np.hstack([H, s[:, None] * H])
