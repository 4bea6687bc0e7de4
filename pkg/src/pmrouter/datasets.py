"""Dataset containers and their CSV + JSON-sidecar persistence.

Each dataset is written as ``<name>.csv`` (one record per row, header row,
UTF-8, '.' decimal separator) next to ``<name>.json`` holding
``schema_version``, ``kind`` and free-form ``metadata`` (config echo, seed).
Floats are written with ``repr`` so a save/load round trip is exact.
"""

import csv
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .errors import FormatError
from .polarization import STATE_LABELS

SCHEMA_VERSION = "1"

_COLUMNS = {
    "sweep": ("input", "voltage_V", "repeat", "p1", "p2"),
    "tomography": ("input", "port", "projector", "repeat", "intensity"),
    "waveform": ("t_ns", "p1"),
}


@dataclass
class SweepDataset:
    """Normalized port powers for one input polarization over a voltage grid.

    ``p1`` and ``p2`` have shape ``(n_voltages, repeats)``.
    """

    input_label: str
    voltages: np.ndarray
    p1: np.ndarray
    p2: np.ndarray
    metadata: dict = field(default_factory=dict)

    kind = "sweep"

    @property
    def repeats(self):
        return self.p1.shape[1]

    def mean(self, port):
        return self._data(port).mean(axis=1)

    def std(self, port):
        data = self._data(port)
        if data.shape[1] < 2:
            return np.zeros(data.shape[0])
        return data.std(axis=1, ddof=1)

    def _data(self, port):
        if port not in (1, 2):
            raise ValueError(f"port must be 1 or 2, got {port}")
        return self.p1 if port == 1 else self.p2


@dataclass
class TomographyDataset:
    """Normalized intensities at one output port.

    ``intensities[s, m, k]`` is the reading for input state ``STATE_LABELS[s]``,
    analyzer projector ``STATE_LABELS[m]`` and repeat ``k``.
    ``frame_corrected`` marks port-2 data whose H axis has been re-inverted.
    """

    port: int
    intensities: np.ndarray
    frame_corrected: bool = False
    metadata: dict = field(default_factory=dict)

    kind = "tomography"

    @property
    def repeats(self):
        return self.intensities.shape[2]

    def slice(self, input_label):
        return self.intensities[STATE_LABELS.index(input_label)]


@dataclass
class WaveformDataset:
    t_ns: np.ndarray
    p1: np.ndarray
    metadata: dict = field(default_factory=dict)

    kind = "waveform"


def _f(x):
    return repr(float(x))


def _rows(ds):
    if isinstance(ds, SweepDataset):
        for i, u in enumerate(ds.voltages):
            for k in range(ds.repeats):
                yield (ds.input_label, _f(u), k, _f(ds.p1[i, k]), _f(ds.p2[i, k]))
    elif isinstance(ds, TomographyDataset):
        for s, sl in enumerate(STATE_LABELS):
            for m, ml in enumerate(STATE_LABELS):
                for k in range(ds.repeats):
                    yield (sl, ds.port, ml, k, _f(ds.intensities[s, m, k]))
    elif isinstance(ds, WaveformDataset):
        for t, p in zip(ds.t_ns, ds.p1):
            yield (_f(t), _f(p))
    else:
        raise TypeError(f"unsupported dataset type {type(ds).__name__}")


def sidecar_path(path):
    return Path(path).with_suffix(".json")


def save_dataset(ds, path, timestamp=False):
    """Write ``ds`` to ``path`` (CSV) and its JSON sidecar; returns both paths.

    ``timestamp=True`` adds a ``created_utc`` field to the sidecar only.
    """
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(_COLUMNS[ds.kind])
        writer.writerows(_rows(ds))
    meta = dict(ds.metadata)
    if isinstance(ds, TomographyDataset):
        meta["frame_corrected"] = ds.frame_corrected
    side = {"schema_version": SCHEMA_VERSION, "kind": ds.kind, "metadata": meta}
    if timestamp:
        side["created_utc"] = datetime.now(timezone.utc).isoformat(timespec="seconds")
    side_path = sidecar_path(path)
    side_path.write_text(json.dumps(side, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path, side_path


def _read_sidecar(path):
    side_path = sidecar_path(path)
    try:
        side = json.loads(side_path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise FormatError(f"{side_path}: metadata sidecar not found") from None
    except json.JSONDecodeError as exc:
        raise FormatError(f"{side_path}: line {exc.lineno}: invalid JSON ({exc.msg})") from None
    for key in ("schema_version", "kind"):
        if key not in side:
            raise FormatError(f"{side_path}: missing field {key!r}")
    version = str(side["schema_version"])
    if version != SCHEMA_VERSION:
        raise FormatError(
            f"{side_path}: unsupported schema_version {version!r}; this reader understands "
            f"version {SCHEMA_VERSION!r} only (re-export the dataset with a matching pmrouter release "
            "or convert it to the version-1 layout)"
        )
    if side["kind"] not in _COLUMNS:
        raise FormatError(f"{side_path}: unknown dataset kind {side['kind']!r}")
    return side


class _Reader:
    def __init__(self, path, columns):
        self.path = path
        self.columns = columns

    def records(self):
        with open(self.path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise FormatError(f"{self.path}: line 1: empty file, expected a header row") from None
            header = [h.strip() for h in header]
            for col in self.columns:
                if col not in header:
                    raise FormatError(f"{self.path}: line 1: missing column {col!r}")
            extra = [h for h in header if h not in self.columns]
            if extra:
                raise FormatError(f"{self.path}: line 1: unexpected column(s) {extra}")
            index = [header.index(c) for c in self.columns]
            for row in reader:
                line = reader.line_num
                if not row:
                    continue
                if len(row) != len(header):
                    raise FormatError(
                        f"{self.path}: line {line}: expected {len(header)} fields, got {len(row)}"
                    )
                yield line, {c: row[i] for c, i in zip(self.columns, index)}

    def error(self, line, col, msg):
        return FormatError(f"{self.path}: line {line}, field {col!r}: {msg}")

    def number(self, line, rec, col, kind=float):
        text = rec[col]
        try:
            return kind(text)
        except ValueError:
            raise self.error(line, col, f"cannot parse {text!r} as {kind.__name__}") from None

    def label(self, line, rec, col):
        text = rec[col]
        if text not in STATE_LABELS:
            raise self.error(line, col, f"unknown polarization label {text!r}")
        return text


def _load_sweep(reader, meta):
    by_voltage = {}
    labels = set()
    for line, rec in reader.records():
        labels.add(reader.label(line, rec, "input"))
        u = reader.number(line, rec, "voltage_V")
        k = reader.number(line, rec, "repeat", int)
        by_voltage.setdefault(u, {})[k] = (
            reader.number(line, rec, "p1"),
            reader.number(line, rec, "p2"),
        )
    if len(labels) != 1:
        raise FormatError(f"{reader.path}: expected exactly one input polarization, found {sorted(labels)}")
    voltages = list(by_voltage)
    repeats = {len(v) for v in by_voltage.values()}
    if len(repeats) != 1:
        raise FormatError(f"{reader.path}: voltage points have unequal repeat counts {sorted(repeats)}")
    n_rep = repeats.pop()
    p = np.empty((2, len(voltages), n_rep))
    for i, u in enumerate(voltages):
        cells = by_voltage[u]
        if sorted(cells) != list(range(n_rep)):
            raise FormatError(f"{reader.path}: repeat indices at {u} V are not 0..{n_rep - 1}")
        for k, (a, b) in cells.items():
            p[0, i, k], p[1, i, k] = a, b
    return SweepDataset(labels.pop(), np.array(voltages), p[0], p[1], metadata=meta)


def _load_tomography(reader, meta):
    cells = {}
    ports = set()
    for line, rec in reader.records():
        s = reader.label(line, rec, "input")
        m = reader.label(line, rec, "projector")
        port = reader.number(line, rec, "port", int)
        if port not in (1, 2):
            raise reader.error(line, "port", f"port must be 1 or 2, got {port}")
        ports.add(port)
        k = reader.number(line, rec, "repeat", int)
        cells[(s, m, k)] = reader.number(line, rec, "intensity")
    if len(ports) != 1:
        raise FormatError(f"{reader.path}: expected exactly one output port, found {sorted(ports)}")
    n_rep = 1 + max((k for _, _, k in cells), default=-1)
    if n_rep == 0 or len(cells) != 36 * n_rep:
        raise FormatError(f"{reader.path}: incomplete 6x6 input/projector grid ({len(cells)} records)")
    data = np.empty((6, 6, n_rep))
    for (s, m, k), v in cells.items():
        data[STATE_LABELS.index(s), STATE_LABELS.index(m), k] = v
    frame = bool(meta.pop("frame_corrected", False))
    return TomographyDataset(ports.pop(), data, frame_corrected=frame, metadata=meta)


def _load_waveform(reader, meta):
    t, p = [], []
    for line, rec in reader.records():
        t.append(reader.number(line, rec, "t_ns"))
        p.append(reader.number(line, rec, "p1"))
    return WaveformDataset(np.array(t), np.array(p), metadata=meta)


def load_dataset(path):
    """Read a dataset written by :func:`save_dataset`.

    Raises:
        FormatError: with file, line and field context for any defect.
    """
    path = Path(path)
    side = _read_sidecar(path)
    kind = side["kind"]
    meta = dict(side.get("metadata", {}))
    reader = _Reader(path, _COLUMNS[kind])
    loader = {"sweep": _load_sweep, "tomography": _load_tomography, "waveform": _load_waveform}[kind]
    try:
        return loader(reader, meta)
    except FileNotFoundError:
        raise FormatError(f"{path}: dataset file not found") from None
