"""Seeded synthetic fixtures: planted-factor tensors, spectra cohorts, and
time-domain recordings for exercising every pipeline stage without clinical
data."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .channels import CHANNELS
from .edf import Recording
from .errors import ArgumentError
from .preprocess import FREQ_GRID, EpochSpectrum
from .tensor import FactorSet, Tensor3

_STYLES = ("random", "physiological")


@dataclass(frozen=True)
class SynthSpec:
    dims: tuple[int, int, int]
    rank: int
    snr_db: float = math.inf
    factor_style: str = "random"
    class_weight_params: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.rank < 1:
            raise ArgumentError(f"rank must be >= 1, got {self.rank}")
        if math.isnan(self.snr_db):
            raise ArgumentError("snr_db must not be NaN")
        if self.factor_style not in _STYLES:
            raise ArgumentError(f"factor_style must be one of {_STYLES}")
        if self.factor_style == "physiological":
            _, S, F = self.dims
            if S != len(CHANNELS) or F != len(FREQ_GRID):
                raise ArgumentError(
                    f"physiological style requires dims (*, {len(CHANNELS)}, {len(FREQ_GRID)})"
                )
            if self.rank != 3:
                raise ArgumentError("physiological style describes exactly 3 components")


def _spatial_profile(strong, medium=(), strong_val=1.0, medium_val=0.6, floor=0.1):
    v = np.full(len(CHANNELS), floor)
    for ch in strong:
        v[CHANNELS.index(ch)] = strong_val
    for ch in medium:
        v[CHANNELS.index(ch)] = medium_val
    return v / np.linalg.norm(v)


def physiological_factors() -> tuple[np.ndarray, np.ndarray]:
    """Three spatiospectral component pairs (spatial 19 x 3, spectral 89 x 3):

    1. bilateral frontotemporal topography, power rising above 25 Hz
       (muscle-artifact-like);
    2. diffuse topography with low-frequency (<10 Hz) emphasis (slowing-like);
    3. central-posterior topography with alpha and beta peaks.
    """
    f = FREQ_GRID
    spatial = np.column_stack(
        [
            _spatial_profile(("Fp1", "Fp2", "F7", "F8", "T7", "T8"), ("F3", "F4")),
            np.full(len(CHANNELS), 1.0) / math.sqrt(len(CHANNELS)),
            _spatial_profile(
                ("C3", "C4", "Cz", "P3", "P4", "Pz"), ("P7", "P8", "O1", "O2"), medium_val=0.8
            ),
        ]
    )
    high = 0.05 + 1.0 / (1.0 + np.exp(-(f - 30.0) / 3.0))
    slow = 0.05 + np.exp(-f / 4.0)
    alpha_beta = 0.05 + np.exp(-0.5 * ((f - 10.0) / 1.5) ** 2) + 0.6 * np.exp(
        -0.5 * ((f - 20.0) / 3.0) ** 2
    )
    spectral = np.column_stack([v / np.linalg.norm(v) for v in (high, slow, alpha_beta)])
    return spatial, spectral


def _noise_scaled(rng, shape, signal_norm: float, snr_db: float) -> np.ndarray:
    noise = rng.standard_normal(shape)
    n_norm = np.linalg.norm(noise)
    if n_norm == 0.0:
        return noise
    return noise * (signal_norm / (n_norm * 10.0 ** (snr_db / 20.0)))


def make_tensor(spec: SynthSpec) -> tuple[Tensor3, FactorSet]:
    """Planted-factor tensor plus its ground truth (normalized) FactorSet."""
    E, S, F = spec.dims
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed & (2**63 - 1), 1]))
    A = rng.uniform(0.0, 1.0, size=(E, spec.rank))
    if spec.factor_style == "physiological":
        B, C = physiological_factors()
        weights = np.array([3.0, 2.0, 1.5])
    else:
        B = rng.uniform(0.0, 1.0, size=(S, spec.rank))
        C = rng.uniform(0.0, 1.0, size=(F, spec.rank))
        weights = np.sort(rng.uniform(1.0, 2.0, size=spec.rank))[::-1]
    A /= np.linalg.norm(A, axis=0)
    if spec.factor_style == "random":
        B /= np.linalg.norm(B, axis=0)
        C /= np.linalg.norm(C, axis=0)
    truth = FactorSet(spec.rank, A, B, C, weights).normalized()
    signal = np.einsum(
        "r,er,sr,fr->esf", truth.weights, truth.A, truth.B, truth.C, optimize=True
    )
    if math.isinf(spec.snr_db):
        data = signal
    else:
        data = signal + _noise_scaled(rng, signal.shape, np.linalg.norm(signal), spec.snr_db)
    return Tensor3(data), truth


@dataclass(frozen=True)
class SynthCohort:
    """Labeled spectra with the per-epoch component weights that made them."""

    spectra: list[EpochSpectrum]
    labels: dict[str, str]  # subject_id -> class label
    weights: np.ndarray  # (n_epochs, rank), row-aligned with spectra
    truth: FactorSet


def make_cohort(
    spec: SynthSpec, subjects_per_class: dict[str, int], epochs_per_subject: int = 4
) -> SynthCohort:
    """Class-conditional cohort: per-epoch component weights drawn from each
    class's Gaussian in ``spec.class_weight_params`` (label -> (means, stds)),
    clipped at 0; spectra are the weighted spatiospectral sums plus noise,
    clipped at 0."""
    if not spec.class_weight_params:
        raise ArgumentError("class_weight_params must define at least one class")
    for label, count in subjects_per_class.items():
        if count < 2:
            raise ArgumentError(f"class {label} needs at least 2 subjects, got {count}")
        if label not in spec.class_weight_params:
            raise ArgumentError(f"no weight parameters for class {label}")
    if epochs_per_subject < 1:
        raise ArgumentError("epochs_per_subject must be >= 1")

    _, truth = make_tensor(spec)
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed & (2**63 - 1), 2]))
    spectra: list[EpochSpectrum] = []
    labels: dict[str, str] = {}
    rows = []
    for label in sorted(subjects_per_class):
        means, stds = (np.asarray(v, dtype=np.float64) for v in spec.class_weight_params[label])
        if means.shape != (spec.rank,) or stds.shape != (spec.rank,):
            raise ArgumentError(
                f"class {label} weight parameters must have length {spec.rank}"
            )
        for s in range(subjects_per_class[label]):
            subject = f"{label}{s:03d}"
            labels[subject] = label
            for k in range(epochs_per_subject):
                w = np.maximum(rng.normal(means, stds), 0.0)
                x = np.einsum("r,sr,fr->sf", w, truth.B, truth.C)
                if not math.isinf(spec.snr_db):
                    x = x + _noise_scaled(rng, x.shape, np.linalg.norm(x), spec.snr_db)
                    x = np.maximum(x, 0.0)
                rows.append(w)
                spectra.append(
                    EpochSpectrum(
                        psd=x,
                        recording_id=f"{subject}_r0",
                        subject_id=subject,
                        index=k,
                    )
                )
    return SynthCohort(spectra, labels, np.array(rows), truth)


def make_recording(
    seed: int = 0,
    sample_rate: float = 256.0,
    duration: float = 60.0,
    tones: tuple[tuple[float, float], ...] = ((10.0, 30.0),),
    noise_uv: float = 2.0,
    subject_id: str = "SYN000",
    recording_id: str = "SYN000_r0",
) -> Recording:
    """19-channel sinusoid-mix recording for signal-chain and EDF tests."""
    rng = np.random.default_rng(np.random.SeedSequence([seed & (2**63 - 1), 3]))
    n = int(round(sample_rate * duration))
    t = np.arange(n) / sample_rate
    base = np.zeros((len(CHANNELS), n))
    for freq, amp in tones:
        phases = rng.uniform(0.0, 2.0 * np.pi, size=len(CHANNELS))
        base += amp * np.sin(2.0 * np.pi * freq * t[None, :] + phases[:, None])
    base += noise_uv * rng.standard_normal(base.shape)
    return Recording(
        samples=base,
        sample_rate=sample_rate,
        channel_labels=CHANNELS,
        recording_id=recording_id,
        subject_id=subject_id,
    )
