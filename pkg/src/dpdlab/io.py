"""File formats: binary/CSV signals, parameter CSV and trace CSV."""

import csv
import datetime as _dt
import struct

import numpy as np

from .signals import ComplexSignal

SIGNAL_MAGIC = b"CSIG"
SIGNAL_VERSION = 1
_HEADER = struct.Struct("<4sId")


def write_signal(path, signal):
    """Write a 16-byte header then little-endian float64 interleaved I/Q."""
    x = np.asarray(signal, dtype=np.complex128)
    iq = np.empty(2 * len(x), dtype="<f8")
    iq[0::2] = x.real
    iq[1::2] = x.imag
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(SIGNAL_MAGIC, SIGNAL_VERSION, signal.sample_rate_hz))
        fh.write(iq.tobytes())


def read_signal(path):
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) != _HEADER.size:
            raise ValueError(f"{path}: truncated header")
        magic, version, fs = _HEADER.unpack(head)
        if magic != SIGNAL_MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}")
        if version != SIGNAL_VERSION:
            raise ValueError(f"{path}: unsupported version {version}")
        payload = fh.read()
    if len(payload) % 16:
        raise ValueError(f"{path}: payload is not a whole number of I/Q pairs")
    iq = np.frombuffer(payload, dtype="<f8")
    return ComplexSignal(iq[0::2] + 1j * iq[1::2], fs)


def _header_lines(timestamp):
    if timestamp:
        return [f"# generated {_dt.datetime.now(_dt.timezone.utc).isoformat()}"]
    return []


def write_csv(path, header, rows, timestamp=False):
    """Write rows with ``repr`` floats so re-reading gives the same values."""
    with open(path, "w", newline="") as fh:
        for line in _header_lines(timestamp):
            fh.write(line + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return v


def read_csv(path):
    """Return ``(header, rows)``; comment lines starting with ``#`` are skipped."""
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.reader(lines)
    header = next(reader)
    return header, [row for row in reader]


def export_signal_csv(path, signal, timestamp=False):
    x = np.asarray(signal)
    rows = ((i, v.real, v.imag) for i, v in enumerate(x))
    write_csv(path, ["index", "re", "im"], rows, timestamp=timestamp)


def import_signal_csv(path, sample_rate_hz):
    _, rows = read_csv(path)
    x = np.array([float(r[1]) + 1j * float(r[2]) for r in rows], dtype=np.complex128)
    return ComplexSignal(x, sample_rate_hz)


def write_parameters(path, params, timestamp=False):
    """ParameterSet to CSV: ``index, re, im, block`` with block static/dynamic."""
    rows = [(i, c.real, c.imag, "static") for i, c in enumerate(params.theta)]
    if params.theta_dyn is not None:
        rows += [(i, c.real, c.imag, "dynamic") for i, c in enumerate(params.theta_dyn)]
    write_csv(path, ["index", "re", "im", "block"], rows, timestamp=timestamp)


def read_parameters(path, structure):
    from .models import ParameterSet

    _, rows = read_csv(path)
    blocks = {"static": {}, "dynamic": {}}
    for r in rows:
        idx, re, im, block = int(r[0]), float(r[1]), float(r[2]), r[3].strip()
        if block not in blocks:
            raise ValueError(f"{path}: unknown block {block!r}")
        blocks[block][idx] = complex(re, im)

    def vec(d):
        if not d:
            return None
        if sorted(d) != list(range(len(d))):
            raise ValueError(f"{path}: parameter indices are not contiguous")
        return np.array([d[i] for i in range(len(d))], dtype=np.complex128)

    return ParameterSet(structure, vec(blocks["static"]), vec(blocks["dynamic"]))
