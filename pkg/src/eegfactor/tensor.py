"""Dense third-order tensors and the multilinear kernels used by the CPD solvers.

Layout convention: a tensor with dims (E, S, F) stores entry (e, s, f) at flat
row-major index e*S*F + s*F + f, i.e. a C-contiguous numpy array of shape
(E, S, F).  Mode-n unfoldings follow the same ordering:

    mode 0: E x (S*F), column s*F + f
    mode 1: S x (E*F), column e*F + f
    mode 2: F x (E*S), column e*S + s
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError, ParseError

_MODES = (0, 1, 2)


@dataclass(frozen=True)
class Tensor3:
    """Immutable dense third-order tensor of float64 values."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.array(self.data, dtype=np.float64, order="C")
        if arr.ndim != 3:
            raise ArgumentError(f"Tensor3 requires a 3-D array, got ndim={arr.ndim}")
        if not np.all(np.isfinite(arr)):
            raise ArgumentError("Tensor3 entries must be finite")
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.data.shape

    def norm(self) -> float:
        """Frobenius norm."""
        return float(np.linalg.norm(self.data))


@dataclass(frozen=True)
class FactorSet:
    """CPD factors: per-mode matrices plus per-component scales.

    ``weights`` holds the column scales (the "lambda" vector of the JSON
    serialization).  A normalized FactorSet has unit-norm columns, nonnegative
    weights in descending order, and the largest-magnitude entry of every
    spatial (B) column positive.
    """

    rank: int
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        if self.rank < 1:
            raise ArgumentError(f"rank must be >= 1, got {self.rank}")
        for name in ("A", "B", "C"):
            m = np.array(getattr(self, name), dtype=np.float64, order="C")
            if m.ndim != 2 or m.shape[1] != self.rank:
                raise ArgumentError(
                    f"factor {name} must be 2-D with {self.rank} columns, got shape {m.shape}"
                )
            m.flags.writeable = False
            object.__setattr__(self, name, m)
        w = np.array(self.weights, dtype=np.float64, order="C")
        if w.shape != (self.rank,):
            raise ArgumentError(f"weights must have shape ({self.rank},), got {w.shape}")
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)

    @property
    def dims(self) -> tuple[int, int, int]:
        return (self.A.shape[0], self.B.shape[0], self.C.shape[0])

    def normalized(self) -> FactorSet:
        """Return the canonical form: unit columns, scale in ``weights``,
        positive-max-entry sign on B, components sorted by descending weight."""
        A, B, C = self.A.copy(), self.B.copy(), self.C.copy()
        w = self.weights.copy()
        for j in range(self.rank):
            for M in (A, B, C):
                nj = np.linalg.norm(M[:, j])
                if nj > 0.0:
                    M[:, j] /= nj
                    w[j] *= nj
                else:
                    # degenerate column: component contributes nothing
                    M[:, j] = 0.0
                    M[0, j] = 1.0
                    w[j] = 0.0
            if w[j] < 0.0:
                w[j] = -w[j]
                A[:, j] = -A[:, j]
            if B[np.argmax(np.abs(B[:, j])), j] < 0.0:
                B[:, j] = -B[:, j]
                A[:, j] = -A[:, j]
        # stable sort keeps equal-weight components in original order
        order = np.argsort(-w, kind="stable")
        return FactorSet(self.rank, A[:, order], B[:, order], C[:, order], w[order])


def unfold(t: Tensor3, mode: int) -> np.ndarray:
    """Mode-n matricization of ``t`` (see module docstring for column order)."""
    if mode not in _MODES:
        raise ArgumentError(f"mode must be one of {_MODES}, got {mode}")
    E, S, F = t.dims
    if mode == 0:
        return t.data.reshape(E, S * F)
    if mode == 1:
        return np.ascontiguousarray(t.data.transpose(1, 0, 2)).reshape(S, E * F)
    return np.ascontiguousarray(t.data.transpose(2, 0, 1)).reshape(F, E * S)


def refold(m: np.ndarray, mode: int, dims: tuple[int, int, int]) -> Tensor3:
    """Inverse of :func:`unfold` for the given mode and target dims."""
    if mode not in _MODES:
        raise ArgumentError(f"mode must be one of {_MODES}, got {mode}")
    E, S, F = dims
    m = np.asarray(m, dtype=np.float64)
    if mode == 0:
        return Tensor3(m.reshape(E, S, F))
    if mode == 1:
        return Tensor3(m.reshape(S, E, F).transpose(1, 0, 2))
    return Tensor3(m.reshape(F, E, S).transpose(1, 2, 0))


def khatri_rao(m: np.ndarray, n: np.ndarray) -> np.ndarray:
    """Column-wise Kronecker product; row i*n_rows + k holds m[i, j] * n[k, j]."""
    m = np.asarray(m, dtype=np.float64)
    n = np.asarray(n, dtype=np.float64)
    if m.ndim != 2 or n.ndim != 2 or m.shape[1] != n.shape[1]:
        raise ArgumentError(
            f"khatri_rao requires equal column counts, got shapes {m.shape} and {n.shape}"
        )
    r = m.shape[1]
    return np.einsum("ir,kr->ikr", m, n).reshape(m.shape[0] * n.shape[0], r)


def _check_factor_shapes(t: Tensor3, fs: FactorSet):
    if fs.dims != t.dims:
        raise ArgumentError(f"factor dims {fs.dims} do not match tensor dims {t.dims}")


def mttkrp(t: Tensor3, fs: FactorSet, mode: int) -> np.ndarray:
    """Matricized-tensor times Khatri-Rao product for the given mode.

    Computed fused (the Khatri-Rao product is never materialized); equals
    unfold(t, mode) @ khatri_rao(of the other two factors) to 1e-12 relative.
    """
    if mode not in _MODES:
        raise ArgumentError(f"mode must be one of {_MODES}, got {mode}")
    _check_factor_shapes(t, fs)
    X = t.data
    if mode == 0:
        return np.einsum("esf,sr,fr->er", X, fs.B, fs.C, optimize=True)
    if mode == 1:
        return np.einsum("esf,er,fr->sr", X, fs.A, fs.C, optimize=True)
    return np.einsum("esf,er,sr->fr", X, fs.A, fs.B, optimize=True)


def reconstruct(fs: FactorSet) -> Tensor3:
    """Sum of rank-1 tensors: entry (e,s,f) = sum_i w_i * A[e,i]*B[s,i]*C[f,i]."""
    data = np.einsum("r,er,sr,fr->esf", fs.weights, fs.A, fs.B, fs.C, optimize=True)
    return Tensor3(data)


def relative_error(t: Tensor3, fs: FactorSet) -> float:
    """||t - reconstruct(fs)||_F / ||t||_F.

    The fit used by DIFFIT is 1 - relative_error**2 (explained sum of squares).
    """
    _check_factor_shapes(t, fs)
    nrm = t.norm()
    if nrm == 0.0:
        raise ArgumentError("relative_error is undefined for a zero-norm tensor")
    approx = np.einsum("r,er,sr,fr->esf", fs.weights, fs.A, fs.B, fs.C, optimize=True)
    return float(np.linalg.norm(t.data - approx) / nrm)


# ---------------------------------------------------------------------------
# serialization

_HEADER = struct.Struct("<QQQ")


def save_tensor(t: Tensor3, path):
    """Write the flat binary format: 3 LE uint64 dims then row-major LE float64."""
    E, S, F = t.dims
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(E, S, F))
        fh.write(t.data.astype("<f8", copy=False).tobytes(order="C"))


def load_tensor(path) -> Tensor3:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise ParseError("tensor file truncated before header", field="dims", offset=len(raw))
    E, S, F = _HEADER.unpack_from(raw, 0)
    expected = _HEADER.size + E * S * F * 8
    if len(raw) != expected:
        raise ParseError(
            f"tensor file has {len(raw)} bytes, expected {expected} for dims ({E},{S},{F})",
            field="data",
            offset=min(len(raw), expected),
        )
    data = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size).reshape(E, S, F)
    try:
        return Tensor3(data)
    except ArgumentError as exc:
        raise ParseError(f"tensor file contains invalid values: {exc}", field="data") from exc


def save_factors(fs: FactorSet, path):
    """FactorSet as JSON: rank, lambda, and row-major nested factor matrices."""
    doc = {
        "rank": fs.rank,
        "lambda": fs.weights.tolist(),
        "A": fs.A.tolist(),
        "B": fs.B.tolist(),
        "C": fs.C.tolist(),
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def load_factors(path) -> FactorSet:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"factor file is not valid JSON: {exc}") from exc
    try:
        return FactorSet(
            rank=int(doc["rank"]),
            A=np.asarray(doc["A"], dtype=np.float64),
            B=np.asarray(doc["B"], dtype=np.float64),
            C=np.asarray(doc["C"], dtype=np.float64),
            weights=np.asarray(doc["lambda"], dtype=np.float64),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"factor file missing or malformed field: {exc}") from exc
