"""Recording-to-spectrum preprocessing chain and tensor assembly.

The chain per recording: zero-phase band-pass, contiguous 10-s epoching with
high-power Cz rejection, awake-epoch selection by posterior alpha, Welch power
spectral densities on a fixed 1.0-45.0 Hz grid, and stacking into the
population tensor.  Power-in-bands (PIB) baseline features live here too.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal as sps

from .channels import CHANNELS, CZ_INDEX, O1_INDEX, O2_INDEX
from .edf import Recording
from .errors import ArgumentError, IngestError
from .tensor import Tensor3

# fixed spectral grid: 1.0 .. 45.0 Hz in 0.5 Hz steps
FREQ_GRID = np.linspace(1.0, 45.0, 89)
FREQ_GRID.flags.writeable = False

# integration tiles for PIB; shared edges are half-counted by the trapezoids,
# so the five bands partition the full 1-45 Hz power exactly
BANDS = (
    ("delta", 1.0, 4.0),
    ("theta", 4.0, 8.0),
    ("alpha", 8.0, 13.0),
    ("beta", 13.0, 25.0),
    ("gamma", 25.0, 45.0),
)


@dataclass(frozen=True)
class Epoch:
    """One contiguous multichannel segment, canonical 19-channel order."""

    samples: np.ndarray  # (19, n)
    sample_rate: float
    recording_id: str
    subject_id: str
    index: int  # ordinal within the recording, before any rejection

    def __post_init__(self):
        arr = np.array(self.samples, dtype=np.float64, order="C")
        if arr.ndim != 2:
            raise ArgumentError("epoch samples must be 2-D")
        arr.flags.writeable = False
        object.__setattr__(self, "samples", arr)


@dataclass(frozen=True)
class EpochSpectrum:
    """Per-channel PSD on the fixed grid, with provenance."""

    psd: np.ndarray  # (19, 89), uV^2/Hz
    recording_id: str
    subject_id: str
    index: int

    def __post_init__(self):
        arr = np.array(self.psd, dtype=np.float64, order="C")
        if arr.shape != (len(CHANNELS), len(FREQ_GRID)):
            raise ArgumentError(
                f"psd must have shape {(len(CHANNELS), len(FREQ_GRID))}, got {arr.shape}"
            )
        if not np.all(np.isfinite(arr)) or np.any(arr < 0):
            raise ArgumentError("psd must be finite and nonnegative")
        arr.flags.writeable = False
        object.__setattr__(self, "psd", arr)


@dataclass(frozen=True)
class PibVector:
    """Relative band powers, channel-major: 19 channels x 5 bands = 95."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.array(self.values, dtype=np.float64, order="C")
        if arr.shape != (len(CHANNELS) * len(BANDS),):
            raise ArgumentError(f"expected {len(CHANNELS) * len(BANDS)} values, got {arr.shape}")
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    @staticmethod
    def names() -> list[str]:
        return [f"{ch}_{band}" for ch in CHANNELS for band, _, _ in BANDS]


def bandpass(r: Recording, lo: float = 0.5, hi: float = 45.0, order: int = 8) -> Recording:
    """Zero-phase Butterworth band-pass (cascaded biquads, forward-backward)."""
    if r.sample_rate <= 2.0 * hi:
        raise ArgumentError(
            f"sample rate {r.sample_rate} Hz cannot support a {hi} Hz band edge"
        )
    sos = sps.butter(order, [lo, hi], btype="bandpass", fs=r.sample_rate, output="sos")
    filtered = sps.sosfiltfilt(sos, r.samples, axis=1)
    return Recording(
        samples=filtered,
        sample_rate=r.sample_rate,
        channel_labels=r.channel_labels,
        recording_id=r.recording_id,
        subject_id=r.subject_id,
    )


def epoch_and_reject(
    r: Recording, epoch_seconds: float = 10.0, sigma: float = 2.0
) -> list[Epoch]:
    """Cut contiguous non-overlapping epochs, dropping high-power Cz epochs.

    An epoch is dropped when its Cz total power exceeds mean + sigma*std of
    the per-epoch Cz powers of this recording (strictly greater, one-sided).
    The sub-epoch remainder at the end of the recording is discarded.
    """
    try:
        cz = r.channel_labels.index("Cz")
    except ValueError:
        raise IngestError(
            f"recording {r.recording_id or '<unnamed>'} has no Cz channel; "
            "run channel selection first"
        ) from None
    if cz != CZ_INDEX and len(r.channel_labels) == len(CHANNELS):
        raise IngestError(f"channels of {r.recording_id} are not in canonical order")
    n_per = int(round(epoch_seconds * r.sample_rate))
    n_epochs = r.samples.shape[1] // n_per
    if n_epochs < 2:
        raise IngestError(
            f"recording {r.recording_id or '<unnamed>'} holds fewer than 2 epochs "
            f"({r.duration:.1f} s)"
        )
    segments = r.samples[:, : n_epochs * n_per].reshape(r.n_channels, n_epochs, n_per)
    power = np.sum(segments[cz] ** 2, axis=1)
    threshold = power.mean() + sigma * power.std()
    epochs = []
    for k in range(n_epochs):
        if power[k] > threshold:
            continue
        epochs.append(
            Epoch(
                samples=segments[:, k, :],
                sample_rate=r.sample_rate,
                recording_id=r.recording_id,
                subject_id=r.subject_id,
                index=k,
            )
        )
    return epochs


def _band_integral(psd_row: np.ndarray, lo: float, hi: float) -> float:
    mask = (FREQ_GRID >= lo) & (FREQ_GRID <= hi)
    return float(np.trapezoid(psd_row[mask], FREQ_GRID[mask]))


def select_awake_epochs(
    epochs: list[Epoch], min_epochs: int = 2, max_epochs: int = 6
) -> list[Epoch]:
    """Keep the top-k epochs by posterior relative alpha power.

    The score is the mean over O1 and O2 of (8-12 Hz power) / (1-45 Hz power);
    k = clamp(len(epochs), min_epochs, max_epochs).  Recordings with fewer
    than ``min_epochs`` epochs are rejected.  Output preserves temporal order.
    """
    if not epochs:
        raise ArgumentError("empty epoch list")
    if len(epochs) < min_epochs:
        raise IngestError(
            f"recording {epochs[0].recording_id or '<unnamed>'}: "
            f"{len(epochs)} epochs after rejection, need at least {min_epochs}"
        )
    scores = np.empty(len(epochs))
    for i, e in enumerate(epochs):
        psd = welch(e).psd
        alpha = [_band_integral(psd[ch], 8.0, 12.0) for ch in (O1_INDEX, O2_INDEX)]
        total = [_band_integral(psd[ch], 1.0, 45.0) for ch in (O1_INDEX, O2_INDEX)]
        shares = [a / t if t > 0 else 0.0 for a, t in zip(alpha, total)]
        scores[i] = np.mean(shares)
    k = min(max(len(epochs), min_epochs), max_epochs)
    picked = np.argsort(-scores, kind="stable")[:k]
    return [epochs[i] for i in sorted(picked)]


def welch(e: Epoch) -> EpochSpectrum:
    """Welch PSD per channel: 2-s Hamming segments, 50% overlap, density
    scaling, linearly interpolated onto the fixed 1.0-45.0 Hz grid."""
    fs = e.sample_rate
    if fs < 96.0:
        raise ArgumentError(f"sample rate {fs} Hz cannot support the 45 Hz grid")
    nperseg = int(round(2.0 * fs))
    if e.samples.shape[1] < nperseg:
        raise ArgumentError("epoch shorter than one Welch segment")
    freqs, psd = sps.welch(
        e.samples,
        fs=fs,
        window="hamming",
        nperseg=nperseg,
        noverlap=nperseg // 2,
        detrend="constant",
        scaling="density",
        axis=1,
    )
    on_grid = np.empty((e.samples.shape[0], len(FREQ_GRID)))
    for ch in range(e.samples.shape[0]):
        on_grid[ch] = np.interp(FREQ_GRID, freqs, psd[ch])
    return EpochSpectrum(
        psd=on_grid,
        recording_id=e.recording_id,
        subject_id=e.subject_id,
        index=e.index,
    )


@dataclass(frozen=True)
class ProvenanceRow:
    epoch_row: int
    subject_id: str
    recording_id: str
    epoch_index: int


def build_tensor(spectra: list[EpochSpectrum]) -> tuple[Tensor3, list[ProvenanceRow]]:
    """Stack spectra along mode 0 in input order; returns the epoch map."""
    if not spectra:
        raise ArgumentError("no spectra to stack")
    data = np.stack([s.psd for s in spectra], axis=0)
    provenance = [
        ProvenanceRow(i, s.subject_id, s.recording_id, s.index)
        for i, s in enumerate(spectra)
    ]
    return Tensor3(data), provenance


def pib(x: EpochSpectrum) -> PibVector:
    """Relative power in the five canonical bands, per channel.

    Band integrals are trapezoids on the grid; shared band edges contribute
    half to each side so the five shares of a channel sum to exactly 1.
    """
    values = np.empty(len(CHANNELS) * len(BANDS))
    for ch in range(len(CHANNELS)):
        total = _band_integral(x.psd[ch], 1.0, 45.0)
        if total <= 0.0:
            raise IngestError(f"zero total power in channel {CHANNELS[ch]}")
        for b, (_, lo, hi) in enumerate(BANDS):
            values[ch * len(BANDS) + b] = _band_integral(x.psd[ch], lo, hi) / total
    return PibVector(values)
