"""Subject-disjoint cross-validated cohort classification.

Models are deliberately small and fully deterministic: Gaussian naive Bayes
with floored variances and a Pegasos-style linear SVM trained by seeded
stochastic subgradient with tail-averaged iterates.  Epoch scores are
averaged per subject before the Mann-Whitney AUC.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError

TASKS = {
    "CNvsMCI": ("CN", "MCI"),
    "CNvsAD": ("CN", "AD"),
}


@dataclass(frozen=True)
class CohortDataset:
    """Epoch-level feature rows with subject provenance and class labels."""

    features: np.ndarray  # (n_rows, feature_dim)
    subject_ids: tuple[str, ...]
    labels: tuple[str, ...]

    def __post_init__(self):
        X = np.array(self.features, dtype=np.float64, order="C")
        if X.ndim != 2:
            raise ArgumentError("features must be 2-D")
        if not np.all(np.isfinite(X)):
            raise ArgumentError("features must be finite")
        subj = tuple(self.subject_ids)
        labs = tuple(self.labels)
        if len(subj) != X.shape[0] or len(labs) != X.shape[0]:
            raise ArgumentError("features, subject_ids, and labels must align")
        seen: dict[str, str] = {}
        for s, l in zip(subj, labs):
            if seen.setdefault(s, l) != l:
                raise ArgumentError(f"subject {s} carries conflicting labels")
        X.flags.writeable = False
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "subject_ids", subj)
        object.__setattr__(self, "labels", labs)

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    def subject_labels(self) -> dict[str, str]:
        out: dict[str, str] = {}
        for s, l in zip(self.subject_ids, self.labels):
            out.setdefault(s, l)
        return out


@dataclass(frozen=True)
class CVReport:
    task: str
    model: str
    fold_aucs: tuple  # float per valid fold, None where skipped
    mean_auc: float
    std_auc: float  # population std over valid folds
    fold_assignments: dict[str, int]  # subject -> fold index
    skipped_folds: tuple[int, ...]

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "model": self.model,
            "fold_aucs": [a if a is None else float(a) for a in self.fold_aucs],
            "mean_auc": float(self.mean_auc),
            "std_auc": float(self.std_auc),
            "fold_assignments": dict(sorted(self.fold_assignments.items())),
            "skipped_folds": list(self.skipped_folds),
        }


# ---------------------------------------------------------------------------
# Gaussian naive Bayes

@dataclass(frozen=True)
class GnbModel:
    priors: np.ndarray  # (2,)
    means: np.ndarray  # (2, d)
    variances: np.ndarray  # (2, d), floored


def gnb_fit(X: np.ndarray, y: np.ndarray) -> GnbModel:
    """Per-class Gaussians with variances floored at 1e-9 * max feature
    variance (tiny absolute floor when every feature is constant)."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    classes = np.unique(y)
    if len(classes) != 2 or set(classes) != {0, 1}:
        raise ArgumentError("gnb_fit requires both classes 0 and 1 present")
    global_var = X.var(axis=0, ddof=0)
    floor = max(1e-9 * float(global_var.max()), 1e-12)
    priors = np.empty(2)
    means = np.empty((2, X.shape[1]))
    variances = np.empty((2, X.shape[1]))
    for c in (0, 1):
        rows = X[y == c]
        priors[c] = len(rows) / len(X)
        means[c] = rows.mean(axis=0)
        variances[c] = np.maximum(rows.var(axis=0, ddof=0), floor)
    return GnbModel(priors, means, variances)


def gnb_score(m: GnbModel, X: np.ndarray) -> np.ndarray:
    """log p(class 1 | x) - log p(class 0 | x); monotone in the posterior."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    ll = np.empty((2, X.shape[0]))
    for c in (0, 1):
        z = (X - m.means[c]) ** 2 / m.variances[c]
        ll[c] = np.log(m.priors[c]) - 0.5 * np.sum(
            np.log(2.0 * np.pi * m.variances[c]) + z, axis=1
        )
    return ll[1] - ll[0]


# ---------------------------------------------------------------------------
# linear SVM (Pegasos-style primal subgradient)

@dataclass(frozen=True)
class SvmModel:
    w: np.ndarray
    b: float
    C: float
    degenerate: bool = False


def svm_objective(m: SvmModel, X: np.ndarray, y: np.ndarray) -> float:
    """(1/2)||w||^2 + C * sum hinge; y in {0,1}."""
    sgn = np.where(np.asarray(y) == 1, 1.0, -1.0)
    margins = sgn * (X @ m.w + m.b)
    return 0.5 * float(m.w @ m.w) + m.C * float(np.sum(np.maximum(0.0, 1.0 - margins)))


def svm_fit(X: np.ndarray, y: np.ndarray, C: float = 1.0, epochs: int = 200, seed: int = 0) -> SvmModel:
    """Seeded stochastic subgradient on the scaled primal, iterates averaged
    over the second half of the trajectory.

    Minimizing (1/2)||w||^2 + C sum_i hinge_i equals minimizing
    (lam/2)||w||^2 + mean_i hinge_i with lam = 1/(C n); steps are the classic
    1/(lam t) schedule.  The bias is unregularized.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if set(np.unique(y)) != {0, 1}:
        raise ArgumentError("svm_fit requires both classes 0 and 1 present")
    if C < 0:
        raise ArgumentError(f"C must be nonnegative, got {C}")
    n, d = X.shape
    if C == 0.0:
        return SvmModel(w=np.zeros(d), b=0.0, C=0.0, degenerate=True)
    sgn = np.where(y == 1, 1.0, -1.0)
    lam = 1.0 / (C * n)
    total = max(1, epochs) * n
    rng = np.random.default_rng(np.random.SeedSequence([seed & (2**63 - 1), 4]))
    picks = rng.integers(0, n, size=total)
    w = np.zeros(d)
    b = 0.0
    w_sum = np.zeros(d)
    b_sum = 0.0
    half = total // 2
    n_avg = 0
    for t in range(1, total + 1):
        i = picks[t - 1]
        eta = 1.0 / (lam * t)
        margin = sgn[i] * (X[i] @ w + b)
        w *= 1.0 - eta * lam
        if margin < 1.0:
            w += eta * sgn[i] * X[i]
            b += eta * sgn[i]
        if t > half:
            w_sum += w
            b_sum += b
            n_avg += 1
    return SvmModel(w=w_sum / n_avg, b=b_sum / n_avg, C=float(C))


def svm_score(m: SvmModel, X: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    return X @ m.w + m.b


# ---------------------------------------------------------------------------
# metrics and cross-validation

def auc(scores, labels) -> float:
    """Mann-Whitney AUC: P(score_pos > score_neg) with ties counting 1/2."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    if len(pos) == 0 or len(neg) == 0:
        raise ArgumentError("auc requires both classes present")
    # average ranks make tied pairs contribute exactly 1/2
    order = np.argsort(scores, kind="stable")
    ranks = np.empty(len(scores))
    sorted_scores = scores[order]
    i = 0
    while i < len(scores):
        j = i
        while j + 1 < len(scores) and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    r_pos = float(np.sum(ranks[labels == 1]))
    n_pos, n_neg = len(pos), len(neg)
    return (r_pos - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def assign_folds(subjects_by_class: dict[str, list[str]], k: int, seed: int) -> dict[str, int]:
    """Stratified round-robin: shuffle each class's subjects, deal into folds."""
    rng = np.random.default_rng(np.random.SeedSequence([seed & (2**63 - 1), 5]))
    assignment: dict[str, int] = {}
    for label in sorted(subjects_by_class):
        subjects = sorted(subjects_by_class[label])
        perm = rng.permutation(len(subjects))
        for pos, idx in enumerate(perm):
            assignment[subjects[idx]] = pos % k
    return assignment


def _standardizer(X_train: np.ndarray):
    mean = X_train.mean(axis=0)
    std = X_train.std(axis=0, ddof=0)
    std = np.where(std > 0, std, 1.0)
    return lambda X: (X - mean) / std


def cross_validate(
    ds: CohortDataset,
    task: str,
    model: str,
    k: int = 15,
    seed: int = 0,
    svm_c: float = 1.0,
    svm_epochs: int = 200,
) -> CVReport:
    """Subject-disjoint k-fold CV scored by subject-level AUC.

    The impaired class of the task scores positive.  Folds whose test split
    lacks a class are excluded from the mean/std and listed as skipped.
    """
    if task not in TASKS:
        raise ArgumentError(f"task must be one of {sorted(TASKS)}, got {task!r}")
    if model not in ("GNB", "SVM"):
        raise ArgumentError(f"model must be 'GNB' or 'SVM', got {model!r}")
    neg_label, pos_label = TASKS[task]
    mask = np.array([l in (neg_label, pos_label) for l in ds.labels])
    if not mask.any():
        raise ArgumentError(f"no rows labeled {neg_label} or {pos_label}")
    X = ds.features[mask]
    y = np.array([1 if l == pos_label else 0 for l, m in zip(ds.labels, mask) if m])
    subjects = [s for s, m in zip(ds.subject_ids, mask) if m]
    subject_label = {s: l for s, l, m in zip(ds.subject_ids, ds.labels, mask) if m}
    by_class: dict[str, list[str]] = {neg_label: [], pos_label: []}
    for s, l in subject_label.items():
        by_class[l].append(s)
    if len(by_class[neg_label]) < 2 or len(by_class[pos_label]) < 2:
        raise ArgumentError(f"task {task} needs at least 2 subjects per class")

    assignment = assign_folds(by_class, k, seed)
    folds = np.array([assignment[s] for s in subjects])

    fold_aucs: list = []
    skipped: list[int] = []
    for f in range(k):
        test = folds == f
        train = ~test
        train_subjects = {s for s, m in zip(subjects, train) if m}
        test_subjects = {s for s, m in zip(subjects, test) if m}
        assert not (train_subjects & test_subjects), "subject leak across folds"
        if not test.any():
            fold_aucs.append(None)
            skipped.append(f)
            continue
        test_classes = {subject_label[s] for s in test_subjects}
        if len(test_classes) < 2 or len(set(y[train])) < 2:
            fold_aucs.append(None)
            skipped.append(f)
            continue
        transform = _standardizer(X[train])
        Xtr, Xte = transform(X[train]), transform(X[test])
        if model == "GNB":
            m = gnb_fit(Xtr, y[train])
            scores = gnb_score(m, Xte)
        else:
            m = svm_fit(Xtr, y[train], C=svm_c, epochs=svm_epochs, seed=seed + f)
            scores = svm_score(m, Xte)
        # average epoch scores per subject
        per_subject: dict[str, list[float]] = {}
        test_idx = np.flatnonzero(test)
        for local, idx in enumerate(test_idx):
            per_subject.setdefault(subjects[idx], []).append(float(scores[local]))
        subj_sorted = sorted(per_subject)
        subj_scores = [float(np.mean(per_subject[s])) for s in subj_sorted]
        subj_labels = [1 if subject_label[s] == pos_label else 0 for s in subj_sorted]
        fold_aucs.append(auc(subj_scores, subj_labels))
    valid = [a for a in fold_aucs if a is not None]
    if not valid:
        raise ArgumentError("every fold was skipped; cohort too small for k")
    return CVReport(
        task=task,
        model=model,
        fold_aucs=tuple(fold_aucs),
        mean_auc=float(np.mean(valid)),
        std_auc=float(np.std(valid)),
        fold_assignments=assignment,
        skipped_folds=tuple(skipped),
    )
