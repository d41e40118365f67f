"""European Data Format (EDF) reading and writing.

Plain EDF only: 256-byte fixed header, 256 bytes of per-signal header fields
stored field-major, then data records of 16-bit little-endian two's-complement
samples.  EDF+ annotation signals are dropped with a warning; discontinuous
EDF+D files are rejected.
"""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .channels import CHANNELS
from .errors import ArgumentError, IngestError, ParseError

ANNOTATION_LABEL = "EDF Annotations"
DIGITAL_MIN = -32768
DIGITAL_MAX = 32767


@dataclass(frozen=True)
class Recording:
    """Multichannel signal in physical units with one shared sample rate."""

    samples: np.ndarray  # (n_channels, n_samples)
    sample_rate: float
    channel_labels: tuple[str, ...]
    recording_id: str = ""
    subject_id: str = ""

    def __post_init__(self):
        arr = np.array(self.samples, dtype=np.float64, order="C")
        if arr.ndim != 2:
            raise ArgumentError(f"samples must be 2-D, got ndim={arr.ndim}")
        if not np.all(np.isfinite(arr)):
            raise ArgumentError("samples must be finite")
        if self.sample_rate <= 0:
            raise ArgumentError(f"sample_rate must be positive, got {self.sample_rate}")
        labels = tuple(self.channel_labels)
        if len(labels) != arr.shape[0]:
            raise ArgumentError(
                f"{len(labels)} labels for {arr.shape[0]} channels"
            )
        arr.flags.writeable = False
        object.__setattr__(self, "samples", arr)
        object.__setattr__(self, "channel_labels", labels)

    @property
    def n_channels(self) -> int:
        return self.samples.shape[0]

    @property
    def duration(self) -> float:
        return self.samples.shape[1] / self.sample_rate


# ---------------------------------------------------------------------------
# header decoding helpers

def _ascii(data: bytes, offset: int, size: int, field: str) -> str:
    if len(data) < offset + size:
        raise ParseError("file truncated", field=field, offset=len(data))
    return data[offset : offset + size].decode("latin-1").strip()


def _int_field(data: bytes, offset: int, size: int, field: str) -> int:
    text = _ascii(data, offset, size, field)
    try:
        return int(text)
    except ValueError:
        raise ParseError(f"non-numeric value {text!r}", field=field, offset=offset) from None


def _float_field(data: bytes, offset: int, size: int, field: str) -> float:
    text = _ascii(data, offset, size, field)
    try:
        return float(text)
    except ValueError:
        raise ParseError(f"non-numeric value {text!r}", field=field, offset=offset) from None


def read_edf(data: bytes) -> Recording:
    """Parse an EDF byte stream into physical-unit signals.

    Digital samples are mapped to physical units with the per-channel linear
    map phys = (dig - dig_min) * (phys_max - phys_min) / (dig_max - dig_min)
    + phys_min.  Channels with differing rates are resampled to the fastest
    channel rate by linear interpolation.
    """
    if len(data) < 256:
        raise ParseError("file truncated before fixed header", field="header", offset=len(data))

    patient = _ascii(data, 8, 80, "patient_id")
    recording_field = _ascii(data, 88, 80, "recording_id")
    reserved = _ascii(data, 192, 44, "reserved")
    if reserved.startswith("EDF+D"):
        raise ParseError("EDF+D discontinuous records are not supported", field="reserved", offset=192)
    n_records = _int_field(data, 236, 8, "number_of_records")
    record_duration = _float_field(data, 244, 8, "record_duration")
    ns = _int_field(data, 252, 4, "number_of_signals")
    if ns <= 0:
        raise ParseError(f"number of signals must be positive, got {ns}", field="number_of_signals", offset=252)

    header_bytes = 256 + ns * 256
    if len(data) < header_bytes:
        raise ParseError("file truncated inside signal headers", field="signal_headers", offset=len(data))

    # per-signal fields are stored field-major
    pos = 256
    labels = [_ascii(data, pos + 16 * i, 16, f"label[{i}]") for i in range(ns)]
    pos += ns * 16
    pos += ns * 80  # transducer
    pos += ns * 8  # physical dimension
    phys_min = [_float_field(data, pos + 8 * i, 8, f"physical_min[{i}]") for i in range(ns)]
    pos += ns * 8
    phys_max = [_float_field(data, pos + 8 * i, 8, f"physical_max[{i}]") for i in range(ns)]
    pos += ns * 8
    dig_min_off = pos
    dig_min = [_int_field(data, pos + 8 * i, 8, f"digital_min[{i}]") for i in range(ns)]
    pos += ns * 8
    dig_max = [_int_field(data, pos + 8 * i, 8, f"digital_max[{i}]") for i in range(ns)]
    pos += ns * 8
    pos += ns * 80  # prefiltering
    n_samples = [_int_field(data, pos + 8 * i, 8, f"samples_per_record[{i}]") for i in range(ns)]

    for i in range(ns):
        if dig_max[i] == dig_min[i]:
            raise ParseError(
                f"digital_max equals digital_min ({dig_max[i]}) for signal {i}",
                field=f"digital_min[{i}]",
                offset=dig_min_off + 8 * i,
            )
        if n_samples[i] <= 0:
            raise ParseError(
                f"samples_per_record must be positive, got {n_samples[i]}",
                field=f"samples_per_record[{i}]",
                offset=pos + 8 * i,
            )
    if record_duration <= 0:
        raise ParseError(
            f"record duration must be positive, got {record_duration}",
            field="record_duration",
            offset=244,
        )

    per_record = sum(n_samples)
    record_bytes = 2 * per_record
    if n_records < 0:
        # unknown record count: infer from the remaining byte count
        n_records = (len(data) - header_bytes) // record_bytes
    needed = header_bytes + n_records * record_bytes
    if len(data) < needed:
        raise ParseError(
            f"file holds {len(data)} bytes but {needed} are declared",
            field="number_of_records",
            offset=len(data),
        )
    if n_records == 0:
        raise ParseError("file contains no data records", field="number_of_records", offset=236)

    raw = np.frombuffer(data, dtype="<i2", offset=header_bytes, count=n_records * per_record)
    raw = raw.reshape(n_records, per_record)

    keep = [i for i in range(ns) if labels[i] != ANNOTATION_LABEL]
    if len(keep) < ns:
        warnings.warn("EDF+ annotation signals skipped", stacklevel=2)
    if not keep:
        raise ParseError("file contains only annotation signals", field="label[0]", offset=256)

    rates = {i: n_samples[i] / record_duration for i in keep}
    target_rate = max(rates.values())
    target_len = int(round(n_records * record_duration * target_rate))

    offsets = np.concatenate([[0], np.cumsum(n_samples)])
    signals = np.empty((len(keep), target_len), dtype=np.float64)
    resampled = False
    for row, i in enumerate(keep):
        dig = raw[:, offsets[i] : offsets[i + 1]].reshape(-1).astype(np.float64)
        scale = (phys_max[i] - phys_min[i]) / (dig_max[i] - dig_min[i])
        phys = (dig - dig_min[i]) * scale + phys_min[i]
        if len(phys) == target_len:
            signals[row] = phys
        else:
            resampled = True
            t_old = np.arange(len(phys)) / rates[i]
            t_new = np.arange(target_len) / target_rate
            signals[row] = np.interp(t_new, t_old, phys)

    recording_id = recording_field
    if resampled:
        recording_id = (recording_id + " [resampled]").strip()
    subject_id = patient.split()[0] if patient else ""
    return Recording(
        samples=signals,
        sample_rate=target_rate,
        channel_labels=tuple(labels[i] for i in keep),
        recording_id=recording_id,
        subject_id=subject_id,
    )


def read_edf_file(path) -> Recording:
    return read_edf(Path(path).read_bytes())


# ---------------------------------------------------------------------------
# writing

def _fmt_number(value: float, width: int) -> str:
    """ASCII-format a number into at most ``width`` chars, exactly parseable."""
    for prec in (10, 8, 6, 5, 4, 3, 2, 1):
        s = f"{value:.{prec}g}"
        if len(s) <= width:
            return s
    raise ArgumentError(f"cannot format {value} in {width} chars")


def _phys_bounds(x: np.ndarray) -> tuple[float, float]:
    """Formattable physical bounds that enclose all samples of one channel."""
    lo, hi = float(np.min(x)), float(np.max(x))
    if lo == hi:
        lo, hi = lo - 1.0, hi + 1.0
    pad = (hi - lo) * 1e-3
    lo_s = _fmt_number(lo - pad, 8)
    hi_s = _fmt_number(hi + pad, 8)
    # rounding of the ASCII field must not push a bound inside the data range
    while float(lo_s) > lo:
        pad *= 10.0
        lo_s = _fmt_number(lo - pad, 8)
    while float(hi_s) < hi:
        pad *= 10.0
        hi_s = _fmt_number(hi + pad, 8)
    return float(lo_s), float(hi_s)


def write_edf(r: Recording) -> bytes:
    """Serialize a Recording as EDF; read_edf round-trips within 1 LSB."""
    if r.n_channels == 0:
        raise ArgumentError("cannot write an EDF with no channels")
    for label in r.channel_labels:
        if len(label) > 16 or not label.isascii():
            raise ArgumentError(f"channel label {label!r} exceeds 16 ASCII chars")

    n_total = r.samples.shape[1]
    rate = r.sample_rate
    # one-second records when the rate divides evenly, otherwise one big record
    if abs(rate - round(rate)) < 1e-9 and n_total % int(round(rate)) == 0:
        spr = int(round(rate))
        n_records = n_total // spr
        duration = 1.0
    else:
        spr = n_total
        n_records = 1
        duration = n_total / rate
    if spr > 99999999:
        raise ArgumentError("too many samples per record for the EDF header")

    bounds = [_phys_bounds(r.samples[i]) for i in range(r.n_channels)]
    dig = np.empty((r.n_channels, n_total), dtype="<i2")
    for i, (lo, hi) in enumerate(bounds):
        scale = (hi - lo) / (DIGITAL_MAX - DIGITAL_MIN)
        q = np.rint((r.samples[i] - lo) / scale) + DIGITAL_MIN
        dig[i] = np.clip(q, DIGITAL_MIN, DIGITAL_MAX).astype("<i2")

    def pad(text: str, size: int) -> bytes:
        b = text.encode("ascii")
        if len(b) > size:
            raise ArgumentError(f"header field {text!r} exceeds {size} bytes")
        return b.ljust(size)

    ns = r.n_channels
    head = b"".join(
        [
            pad("0", 8),
            pad(r.subject_id[:80], 80),
            pad(r.recording_id[:80], 80),
            pad("01.01.00", 8),
            pad("00.00.00", 8),
            pad(str(256 + ns * 256), 8),
            pad("", 44),
            pad(str(n_records), 8),
            pad(_fmt_number(duration, 8), 8),
            pad(str(ns), 4),
        ]
    )
    sig = b"".join(
        [
            b"".join(pad(lbl, 16) for lbl in r.channel_labels),
            b"".join(pad("", 80) for _ in range(ns)),
            b"".join(pad("uV", 8) for _ in range(ns)),
            b"".join(pad(_fmt_number(lo, 8), 8) for lo, _ in bounds),
            b"".join(pad(_fmt_number(hi, 8), 8) for _, hi in bounds),
            b"".join(pad(str(DIGITAL_MIN), 8) for _ in range(ns)),
            b"".join(pad(str(DIGITAL_MAX), 8) for _ in range(ns)),
            b"".join(pad("", 80) for _ in range(ns)),
            b"".join(pad(str(spr), 8) for _ in range(ns)),
            b"".join(pad("", 32) for _ in range(ns)),
        ]
    )
    # data records: per record, each channel's samples in sequence
    body = dig.reshape(ns, n_records, spr).transpose(1, 0, 2).tobytes()
    return head + sig + body


# ---------------------------------------------------------------------------
# channel selection

def _normalize_label(label: str) -> str:
    s = label.strip().upper()
    if s.startswith("EEG "):
        s = s[4:]
    for suffix in ("-REF", "-LE"):
        if s.endswith(suffix):
            s = s[: -len(suffix)]
    return s.strip()


def select_channels(r: Recording, order=CHANNELS) -> Recording:
    """Reorder channels to ``order`` (default: the 19-channel montage).

    Matching is case-insensitive after stripping the "EEG " prefix and
    "-REF"/"-LE" suffixes; output labels are the canonical requested names.
    """
    available = {}
    for i, label in enumerate(r.channel_labels):
        available.setdefault(_normalize_label(label), i)
    indices, missing = [], []
    for want in order:
        idx = available.get(_normalize_label(want))
        if idx is None:
            missing.append(want)
        else:
            indices.append(idx)
    if missing:
        raise IngestError(
            f"recording {r.recording_id or '<unnamed>'} lacks channels: {', '.join(missing)}"
        )
    return Recording(
        samples=r.samples[indices],
        sample_rate=r.sample_rate,
        channel_labels=tuple(order),
        recording_id=r.recording_id,
        subject_id=r.subject_id,
    )


# ---------------------------------------------------------------------------
# cohort manifest

VALID_LABELS = ("CN", "MCI", "AD")


@dataclass(frozen=True)
class ManifestEntry:
    path: Path
    subject_id: str
    label: str | None  # None for the unlabeled population set


def read_manifest(path) -> list[ManifestEntry]:
    """Cohort manifest CSV with columns path,subject_id,label."""
    path = Path(path)
    entries = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        required = {"path", "subject_id", "label"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise ParseError(
                f"manifest must have columns path,subject_id,label, got {reader.fieldnames}",
                field="header",
            )
        for lineno, row in enumerate(reader, start=2):
            label = (row["label"] or "").strip() or None
            if label is not None and label not in VALID_LABELS:
                raise ParseError(
                    f"label must be one of {VALID_LABELS} or empty, got {label!r}",
                    field=f"label (line {lineno})",
                )
            entry_path = Path(row["path"])
            if not entry_path.is_absolute():
                entry_path = path.parent / entry_path
            entries.append(ManifestEntry(entry_path, row["subject_id"].strip(), label))
    if not entries:
        raise ParseError("manifest contains no rows", field="body")
    return entries
