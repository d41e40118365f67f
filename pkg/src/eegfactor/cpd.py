"""CPD fitting: alternating least squares and damped Gauss-Newton.

Both solvers share seeded uniform(0,1) multi-start initialization, stop on
relative fit change, and return canonically normalized factors.  The
Gauss-Newton path is Levenberg-Marquardt on the stacked factor vector with
the approximate Hessian assembled from factor Gramians; the Jacobian over
all tensor entries is never materialized.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import ArgumentError
from .tensor import FactorSet, Tensor3, mttkrp

_COND_LIMIT = 1e12
_GRAM_RIDGE = 1e-10
_MU_MAX = 1e12
_MU_MIN = 1e-14


@dataclass(frozen=True)
class CpdOptions:
    rank: int
    max_iters: int = 500
    tol: float = 1e-8
    n_starts: int = 5
    seed: int = 0
    solver: str = "ALS"
    gn_damping_init: float = 1e-2

    def __post_init__(self):
        if self.rank < 1:
            raise ArgumentError(f"rank must be >= 1, got {self.rank}")
        if self.tol <= 0:
            raise ArgumentError(f"tol must be positive, got {self.tol}")
        if self.n_starts < 1:
            raise ArgumentError(f"n_starts must be >= 1, got {self.n_starts}")
        if self.max_iters < 1:
            raise ArgumentError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.solver not in ("ALS", "GN"):
            raise ArgumentError(f"solver must be 'ALS' or 'GN', got {self.solver!r}")
        if self.gn_damping_init <= 0:
            raise ArgumentError("gn_damping_init must be positive")


@dataclass(frozen=True)
class CpdResult:
    factors: FactorSet
    rel_error: float
    fit: float
    iterations: int
    converged: bool
    trace: tuple[float, ...]
    gram_regularized: bool = False
    start_index: int = 0


def _validate_problem(t: Tensor3, rank: int):
    E, S, F = t.dims
    cap = min(S * F, E * F, E * S)
    if rank > cap:
        raise ArgumentError(f"rank {rank} exceeds the identifiable cap {cap} for dims {t.dims}")
    if t.norm() == 0.0:
        raise ArgumentError("cannot decompose a zero tensor")


def _uniform_init(dims, rank: int, seed: int, start: int):
    rng = np.random.default_rng(np.random.SeedSequence([seed & (2**63 - 1), start]))
    return tuple(rng.uniform(0.0, 1.0, size=(d, rank)) for d in dims)


def _rel_error(X: np.ndarray, normX: float, A, B, C) -> float:
    approx = np.einsum("er,sr,fr->esf", A, B, C, optimize=True)
    return float(np.linalg.norm(X - approx) / normX)


def _rebalance(A, B, C):
    """Equalize per-component column norms; reconstruction is unchanged."""
    for j in range(A.shape[1]):
        na, nb, nc = (np.linalg.norm(M[:, j]) for M in (A, B, C))
        scale = na * nb * nc
        if scale == 0.0:
            continue
        target = scale ** (1.0 / 3.0)
        A[:, j] *= target / na
        B[:, j] *= target / nb
        C[:, j] *= target / nc
    return A, B, C


def _finalize(t: Tensor3, rank: int, A, B, C, run) -> CpdResult:
    fs = FactorSet(rank, A, B, C, np.ones(rank)).normalized()
    approx = np.einsum(
        "r,er,sr,fr->esf", fs.weights, fs.A, fs.B, fs.C, optimize=True
    )
    rel = float(np.linalg.norm(t.data - approx) / t.norm())
    return CpdResult(
        factors=fs,
        rel_error=rel,
        fit=1.0 - rel * rel,
        iterations=run["iterations"],
        converged=run["converged"],
        trace=tuple(run["trace"]),
        gram_regularized=run["regularized"],
        start_index=run["start"],
    )


def _pick_best(t: Tensor3, rank: int, runs: list) -> CpdResult:
    best = runs[0]
    for run in runs[1:]:
        if run["fit"] > best["fit"]:
            best = run
    return _finalize(t, rank, best["A"], best["B"], best["C"], best)


# ---------------------------------------------------------------------------
# ALS

def _als_single(t: Tensor3, rank: int, opts: CpdOptions, init, start: int) -> dict:
    X = t.data
    normX = t.norm()
    A, B, C = (np.array(M, dtype=np.float64) for M in init)
    err = _rel_error(X, normX, A, B, C)
    fit = 1.0 - err * err
    trace = [err]
    regularized = False
    converged = False
    iterations = 0
    ones = np.ones(rank)
    for it in range(1, opts.max_iters + 1):
        for mode in (0, 1, 2):
            fs = FactorSet(rank, A, B, C, ones)
            if mode == 0:
                G = (B.T @ B) * (C.T @ C)
            elif mode == 1:
                G = (A.T @ A) * (C.T @ C)
            else:
                G = (A.T @ A) * (B.T @ B)
            cond = np.linalg.cond(G)
            if not np.isfinite(cond) or cond > _COND_LIMIT:
                G = G + _GRAM_RIDGE * np.eye(rank)
                regularized = True
            M = mttkrp(t, fs, mode)
            update = M @ np.linalg.pinv(G)
            if mode == 0:
                A = update
            elif mode == 1:
                B = update
            else:
                C = update
        A, B, C = _rebalance(A, B, C)
        new_err = _rel_error(X, normX, A, B, C)
        new_fit = 1.0 - new_err * new_err
        trace.append(new_err)
        iterations = it
        if abs(new_fit - fit) < opts.tol * max(new_fit, 1e-12):
            converged = True
        err, fit = new_err, new_fit
        if converged:
            break
    return {
        "A": A, "B": B, "C": C, "fit": fit, "trace": trace,
        "iterations": iterations, "converged": converged,
        "regularized": regularized, "start": start,
    }


def cpd_als(t: Tensor3, opts: CpdOptions, init=None) -> CpdResult:
    """Best-of-n-starts ALS fit; ``init`` (A, B, C) forces a single run."""
    _validate_problem(t, opts.rank)
    if init is not None:
        runs = [_als_single(t, opts.rank, opts, init, 0)]
    else:
        runs = [
            _als_single(t, opts.rank, opts, _uniform_init(t.dims, opts.rank, opts.seed, s), s)
            for s in range(opts.n_starts)
        ]
    return _pick_best(t, opts.rank, runs)


# ---------------------------------------------------------------------------
# Gauss-Newton (Levenberg-Marquardt)

def _gn_gradient(t, fs_ones, A, B, C, ZA, ZB, ZC):
    GA = ZB * ZC
    GB = ZA * ZC
    GC = ZA * ZB
    MA = mttkrp(t, fs_ones, 0)
    MB = mttkrp(t, fs_ones, 1)
    MC = mttkrp(t, fs_ones, 2)
    return (A @ GA - MA, B @ GB - MB, C @ GC - MC), (GA, GB, GC)


def _assemble_hessian(A, B, C, ZA, ZB, ZC, GA, GB, GC, mu):
    E, r = A.shape
    S, F = B.shape[0], C.shape[0]
    N = r * (E + S + F)
    H = np.zeros((N, N))
    ea, eb = E * r, E * r + S * r
    H[:ea, :ea] = np.kron(np.eye(E), GA)
    H[ea:eb, ea:eb] = np.kron(np.eye(S), GB)
    H[eb:, eb:] = np.kron(np.eye(F), GC)
    HAB = np.einsum("ej,si,ij->eisj", A, B, ZC).reshape(E * r, S * r)
    HAC = np.einsum("ej,fi,ij->eifj", A, C, ZB).reshape(E * r, F * r)
    HBC = np.einsum("sj,fi,ij->sifj", B, C, ZA).reshape(S * r, F * r)
    H[:ea, ea:eb] = HAB
    H[ea:eb, :ea] = HAB.T
    H[:ea, eb:] = HAC
    H[eb:, :ea] = HAC.T
    H[ea:eb, eb:] = HBC
    H[eb:, ea:eb] = HBC.T
    H[np.diag_indices(N)] += mu
    return H


def _gn_matvec(v, A, B, C, ZA, ZB, ZC, GA, GB, GC, mu):
    E, r = A.shape
    S, F = B.shape[0], C.shape[0]
    dA = v[: E * r].reshape(E, r)
    dB = v[E * r : E * r + S * r].reshape(S, r)
    dC = v[E * r + S * r :].reshape(F, r)
    WA = dA.T @ A
    WB = dB.T @ B
    WC = dC.T @ C
    outA = dA @ GA + A @ (WB * ZC) + A @ (WC * ZB)
    outB = dB @ GB + B @ (WA * ZC) + B @ (WC * ZA)
    outC = dC @ GC + C @ (WA * ZB) + C @ (WB * ZA)
    out = np.concatenate([outA.ravel(), outB.ravel(), outC.ravel()])
    return out + mu * v


def _gn_solve_cg(rhs, A, B, C, ZA, ZB, ZC, GA, GB, GC, mu, rel_tol=1e-6, max_iter=300):
    """Preconditioned CG on the damped normal equations (block-Jacobi)."""
    E, r = A.shape
    S, F = B.shape[0], C.shape[0]
    eye = np.eye(r)
    PA = np.linalg.inv(GA + mu * eye)
    PB = np.linalg.inv(GB + mu * eye)
    PC = np.linalg.inv(GC + mu * eye)

    def precond(v):
        pa = v[: E * r].reshape(E, r) @ PA
        pb = v[E * r : E * r + S * r].reshape(S, r) @ PB
        pc = v[E * r + S * r :].reshape(F, r) @ PC
        return np.concatenate([pa.ravel(), pb.ravel(), pc.ravel()])

    x = np.zeros_like(rhs)
    res = rhs.copy()
    rhs_norm = np.linalg.norm(rhs)
    if rhs_norm == 0.0:
        return x
    z = precond(res)
    p = z.copy()
    rz = float(res @ z)
    for _ in range(max_iter):
        Hp = _gn_matvec(p, A, B, C, ZA, ZB, ZC, GA, GB, GC, mu)
        denom = float(p @ Hp)
        if denom <= 0.0:
            break
        alpha = rz / denom
        x += alpha * p
        res -= alpha * Hp
        if np.linalg.norm(res) <= rel_tol * rhs_norm:
            break
        z = precond(res)
        rz_new = float(res @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    return x


def _gn_single(t: Tensor3, rank: int, opts: CpdOptions, init, start: int) -> dict:
    X = t.data
    normX = t.norm()
    E, S, F = t.dims
    A, B, C = (np.array(M, dtype=np.float64) for M in init)
    err = _rel_error(X, normX, A, B, C)
    fit = 1.0 - err * err
    trace = [err]
    converged = err < 1e-13
    iterations = 0
    mu = opts.gn_damping_init
    ones = np.ones(rank)
    N = rank * (E + S + F)
    direct = N <= 2000
    while not converged and iterations < opts.max_iters:
        ZA, ZB, ZC = A.T @ A, B.T @ B, C.T @ C
        fs_ones = FactorSet(rank, A, B, C, ones)
        (gA, gB, gC), (GA, GB, GC) = _gn_gradient(t, fs_ones, A, B, C, ZA, ZB, ZC)
        rhs = -np.concatenate([gA.ravel(), gB.ravel(), gC.ravel()])
        accepted = False
        best_trial = np.inf
        while mu <= _MU_MAX:
            if direct:
                H = _assemble_hessian(A, B, C, ZA, ZB, ZC, GA, GB, GC, mu)
                try:
                    delta = np.linalg.solve(H, rhs)
                except np.linalg.LinAlgError:
                    mu *= 10.0
                    continue
            else:
                delta = _gn_solve_cg(rhs, A, B, C, ZA, ZB, ZC, GA, GB, GC, mu)
            A2 = A + delta[: E * rank].reshape(E, rank)
            B2 = B + delta[E * rank : E * rank + S * rank].reshape(S, rank)
            C2 = C + delta[E * rank + S * rank :].reshape(F, rank)
            err2 = _rel_error(X, normX, A2, B2, C2)
            best_trial = min(best_trial, err2)
            if err2 <= err:
                A, B, C = A2, B2, C2
                mu = max(mu / 10.0, _MU_MIN)
                iterations += 1
                trace.append(err2)
                fit2 = 1.0 - err2 * err2
                if abs(fit2 - fit) < opts.tol * max(fit2, 1e-12):
                    converged = True
                err, fit = err2, fit2
                accepted = True
                break
            mu *= 10.0
        if not accepted:
            # damping floor hit: stalled at the numerical accuracy limit or
            # genuinely unable to descend
            converged = best_trial <= err * (1.0 + 1e-12)
            break
    return {
        "A": A, "B": B, "C": C, "fit": fit, "trace": trace,
        "iterations": iterations, "converged": converged,
        "regularized": False, "start": start,
    }


def cpd_gn(t: Tensor3, opts: CpdOptions, init=None) -> CpdResult:
    """Levenberg-Marquardt CPD fit; shares the ALS seeding scheme so both
    solvers explore identical starts for a given seed."""
    _validate_problem(t, opts.rank)
    if init is not None:
        runs = [_gn_single(t, opts.rank, opts, init, 0)]
    else:
        runs = [
            _gn_single(t, opts.rank, opts, _uniform_init(t.dims, opts.rank, opts.seed, s), s)
            for s in range(opts.n_starts)
        ]
    return _pick_best(t, opts.rank, runs)


def cpd(t: Tensor3, opts: CpdOptions) -> CpdResult:
    """Dispatch on opts.solver."""
    if opts.solver == "GN":
        return cpd_gn(t, opts)
    return cpd_als(t, opts)


# ---------------------------------------------------------------------------
# stability diagnostics

def _abs_cosines(Ma: np.ndarray, Mb: np.ndarray) -> np.ndarray:
    na = np.linalg.norm(Ma, axis=0)
    nb = np.linalg.norm(Mb, axis=0)
    dots = np.abs(Ma.T @ Mb)
    denom = np.outer(na, nb)
    out = np.zeros_like(dots)
    nz = denom > 0
    out[nz] = dots[nz] / denom[nz]
    return out


def factor_match_score(a: FactorSet, b: FactorSet) -> float:
    """Permutation-optimal mean over components of |cosA|*|cosB|*|cosC|.

    The best matching is found exhaustively for rank <= 8 and by optimal
    assignment above that; both give the exact optimum.
    """
    if a.rank != b.rank:
        raise ArgumentError(f"rank mismatch: {a.rank} vs {b.rank}")
    if a.dims != b.dims:
        raise ArgumentError(f"dimension mismatch: {a.dims} vs {b.dims}")
    P = (
        _abs_cosines(a.A, b.A)
        * _abs_cosines(a.B, b.B)
        * _abs_cosines(a.C, b.C)
    )
    r = a.rank
    if r <= 8:
        best = max(
            sum(P[i, perm[i]] for i in range(r))
            for perm in itertools.permutations(range(r))
        )
    else:
        rows, cols = linear_sum_assignment(-P)
        best = float(P[rows, cols].sum())
    return float(best / r)
