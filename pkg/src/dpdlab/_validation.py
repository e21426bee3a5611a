"""Input checking helpers shared by the estimators and the functional API."""

import numbers

import numpy as np


class ConfigError(ValueError):
    """Invalid configuration; ``problems`` lists ``(field, message)`` pairs."""

    def __init__(self, what, problems):
        self.problems = list(problems)
        super().__init__(f"invalid {what}: "
                         + "; ".join(f"{f}: {m}" for f, m in self.problems))


def raise_for_problems(problems, what):
    if problems:
        raise ConfigError(what, problems)


def check_signal(x, name="x", min_length=1, allow_real=False):
    """Return ``x`` as a contiguous 1-D complex128 (or float64) array.

    Accepts anything array-like, including :class:`dpdlab.signals.ComplexSignal`.
    Raises ``ValueError`` for wrong rank, too few samples or non-finite values.
    """
    arr = np.asarray(x)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if arr.shape[0] < min_length:
        raise ValueError(
            f"{name} needs at least {min_length} samples, got {arr.shape[0]}"
        )
    if allow_real and not np.iscomplexobj(arr):
        arr = np.ascontiguousarray(arr, dtype=np.float64)
    else:
        arr = np.ascontiguousarray(arr, dtype=np.complex128)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or Inf")
    return arr


def check_matrix(H, name="H"):
    H = np.asarray(H)
    if H.ndim != 2:
        raise ValueError(f"{name} must be two-dimensional, got shape {H.shape}")
    H = np.asarray(H, dtype=np.complex128)
    if not np.all(np.isfinite(H)):
        raise ValueError(f"{name} contains NaN or Inf")
    return H


def check_same_length(*pairs):
    """Raise if the named arrays differ in length. ``pairs`` is (name, array)."""
    lengths = {name: len(a) for name, a in pairs}
    if len(set(lengths.values())) > 1:
        desc = ", ".join(f"len({k})={v}" for k, v in lengths.items())
        raise ValueError(f"length mismatch: {desc}")


def check_scalar(value, name, *, min_val=None, max_val=None,
                 include_min=True, include_max=True, integer=False):
    kind = numbers.Integral if integer else numbers.Real
    if isinstance(value, bool) or not isinstance(value, kind):
        raise TypeError(f"{name} must be {'an integer' if integer else 'a real number'}, "
                        f"got {value!r}")
    if not np.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value!r}")
    if min_val is not None:
        bad = value < min_val if include_min else value <= min_val
        if bad:
            op = ">=" if include_min else ">"
            raise ValueError(f"{name} must be {op} {min_val}, got {value!r}")
    if max_val is not None:
        bad = value > max_val if include_max else value >= max_val
        if bad:
            op = "<=" if include_max else "<"
            raise ValueError(f"{name} must be {op} {max_val}, got {value!r}")
    return value
