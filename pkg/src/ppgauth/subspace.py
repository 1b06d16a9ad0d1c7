"""Subspace learning on labelled feature vectors.

Linear methods (LDA, Direct-LDA, PCA) store a projection matrix ``W`` and map
``z -> W.T @ z``. Kernel methods (KPCA, KDDA) store the training vectors and
expansion coefficients and project through Gaussian kernel evaluations.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from scipy.spatial.distance import cdist, pdist

from .errors import (
    ContractViolationError,
    DegenerateTrainingError,
    InvalidConfigError,
    SmallSampleSizeError,
)

log = logging.getLogger(__name__)

REL_EPS = 1e-10

LINEAR_METHODS = ("lda", "dlda", "pca")
KERNEL_METHODS = ("kpca", "kdda")


@dataclass(frozen=True)
class TrainingSet:
    """Feature vectors ``X`` (one per row) with their class labels."""

    X: np.ndarray
    labels: np.ndarray
    strict: bool = True

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        labels = np.asarray(self.labels).astype(str)
        if X.ndim != 2 or X.shape[0] != labels.shape[0]:
            raise InvalidConfigError("X must be (n_samples, L) with one label per row")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "labels", labels)
        classes, counts = np.unique(labels, return_counts=True)
        if classes.size < 2:
            raise DegenerateTrainingError("need at least two classes")
        if self.strict and counts.min() < 2:
            bad = classes[counts < 2]
            raise InvalidConfigError(f"classes with fewer than two vectors: {list(bad)}")

    @classmethod
    def from_groups(cls, groups: dict, strict: bool = True) -> "TrainingSet":
        keys = list(groups)
        X = np.vstack([np.atleast_2d(groups[k]) for k in keys])
        labels = np.concatenate([[str(k)] * len(np.atleast_2d(groups[k])) for k in keys])
        return cls(X, labels, strict)

    @property
    def classes(self) -> list[str]:
        return list(np.unique(self.labels))

    @property
    def L(self) -> int:
        return self.X.shape[1]

    def class_index(self):
        classes = self.classes
        return classes, np.searchsorted(classes, self.labels)


@dataclass(frozen=True)
class ScatterPair:
    S_b: np.ndarray
    S_w: np.ndarray
    class_means: dict
    grand_mean: np.ndarray


def _class_factors(ts: TrainingSet):
    """Factors with ``S_b = Pb @ Pb.T`` and ``S_w = Pw @ Pw.T``."""
    classes, idx = ts.class_index()
    mu = ts.X.mean(axis=0)
    means = np.vstack([ts.X[idx == k].mean(axis=0) for k in range(len(classes))])
    counts = np.bincount(idx, minlength=len(classes)).astype(float)
    Pb = ((means - mu) * np.sqrt(counts)[:, None]).T
    Pw = (ts.X - means[idx]).T
    return classes, means, mu, Pb, Pw


def scatter_matrices(ts: TrainingSet) -> ScatterPair:
    """Between-class and within-class scatter of a training set."""
    classes, means, mu, Pb, Pw = _class_factors(ts)
    S_b = Pb @ Pb.T
    S_w = Pw @ Pw.T
    S_b = 0.5 * (S_b + S_b.T)
    S_w = 0.5 * (S_w + S_w.T)
    return ScatterPair(S_b, S_w, dict(zip(classes, means)), mu)


def fix_signs(W: np.ndarray) -> np.ndarray:
    """Flip columns so each one's largest-magnitude entry is positive."""
    W = np.array(W, dtype=float, copy=True)
    if W.size == 0:
        return W
    rows = np.argmax(np.abs(W), axis=0)
    signs = np.sign(W[rows, np.arange(W.shape[1])])
    signs[signs == 0] = 1.0
    return W * signs


def gaussian_kernel(A, B, sigma: float) -> np.ndarray:
    d2 = cdist(np.atleast_2d(A), np.atleast_2d(B), "sqeuclidean")
    return np.exp(-d2 / (2.0 * sigma**2))


def linear_kernel(A, B, sigma: float = 1.0) -> np.ndarray:
    return np.atleast_2d(A) @ np.atleast_2d(B).T


_KERNELS = {"gaussian": gaussian_kernel, "linear": linear_kernel}


def median_heuristic(X: np.ndarray) -> float:
    """Median pairwise Euclidean distance between rows, a default kernel width."""
    d = pdist(X)
    d = d[d > 0]
    if d.size == 0:
        return 1.0
    return float(np.median(d))


@dataclass
class SubspaceModel:
    method: str
    L: int
    m: int
    classes: list
    W: np.ndarray | None = None
    mean: np.ndarray | None = None
    train_X: np.ndarray | None = None
    coef: np.ndarray | None = None
    sigma: float | None = None
    kernel: str = "gaussian"
    gram_col_mean: np.ndarray | None = None
    gram_mean: float | None = None
    eigenvalues: np.ndarray | None = None
    templates: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    @property
    def is_kernel(self) -> bool:
        return self.method in KERNEL_METHODS

    def project(self, v) -> np.ndarray:
        """Project one feature vector of length ``L``."""
        v = np.asarray(v, dtype=float)
        if v.ndim != 1 or v.shape[0] != self.L:
            raise ContractViolationError(f"expected a vector of length {self.L}, got shape {v.shape}")
        if self.method == "identity":
            return v.copy()
        if not self.is_kernel:
            return self.W.T @ v
        k = _KERNELS[self.kernel](self.train_X, v[None, :], self.sigma)[:, 0]
        if self.method == "kpca":
            k = k - self.gram_col_mean - k.mean() + self.gram_mean
        return self.coef.T @ k

    def project_many(self, V) -> np.ndarray:
        """Row-wise ``project``; results are bit-identical to single calls."""
        V = np.atleast_2d(np.asarray(V, dtype=float))
        if V.shape[0] == 0:
            return np.empty((0, self.m))
        return np.vstack([self.project(v) for v in V])

    def enroll(self, ts: TrainingSet) -> "SubspaceModel":
        """Store projected training vectors as the per-class gallery."""
        P = self.project_many(ts.X)
        self.templates = {c: P[ts.labels == c] for c in ts.classes}
        return self


def _default_m(ts: TrainingSet, m):
    return len(ts.classes) - 1 if m is None else int(m)


def fit_lda(ts: TrainingSet, m: int | None = None) -> SubspaceModel:
    """Fisher LDA: leading eigenvectors of ``inv(S_w) @ S_b``, unit-normalised.

    Raises SmallSampleSizeError when ``S_w`` is singular, which is always the
    case when there are fewer samples than ``L + K``.
    """
    m = _default_m(ts, m)
    K, L, N = len(ts.classes), ts.L, ts.X.shape[0]
    if not 1 <= m <= min(K - 1, L):
        raise InvalidConfigError(f"LDA dimension must lie in 1..{min(K - 1, L)}, got {m}")
    if N - K < L:
        raise SmallSampleSizeError(
            f"within-class scatter is singular ({N} samples, {K} classes, {L} features); use DLDA"
        )
    sc = scatter_matrices(ts)
    w_eigs = linalg.eigvalsh(sc.S_w)
    if w_eigs[-1] <= 0 or w_eigs[0] <= REL_EPS * w_eigs[-1]:
        raise SmallSampleSizeError("within-class scatter is numerically singular; use DLDA")
    evals, evecs = linalg.eigh(sc.S_b, sc.S_w)
    order = np.argsort(evals)[::-1][:m]
    W = evecs[:, order]
    W = fix_signs(W / np.linalg.norm(W, axis=0))
    model = SubspaceModel("lda", L, m, ts.classes, W=W, eigenvalues=evals[order])
    return model.enroll(ts)


def _direct_lda(Pb_gram, Pb_apply, Pw_apply, m, K):
    """Shared Direct-LDA core.

    ``Pb_gram`` is ``Pb.T @ Pb``; ``Pb_apply(E)`` returns the coefficients of
    ``Pb @ E`` in whatever representation the caller uses; ``Pw_apply(A)``
    returns ``Pw.T @ (representation A)``.
    """
    lam, E = linalg.eigh(0.5 * (Pb_gram + Pb_gram.T))
    if lam[-1] <= 0:
        raise DegenerateTrainingError("between-class scatter is zero; classes are indistinguishable")
    keep = lam > REL_EPS * lam[-1]
    lam, E = lam[keep][::-1], E[:, keep][:, ::-1]
    # whitening of S_b restricted to its range: Z.T S_b Z = I
    Z = Pb_apply(E / lam)
    Y = Pw_apply(Z)
    Sw_t = Y.T @ Y
    dw, U = linalg.eigh(0.5 * (Sw_t + Sw_t.T))
    m = min(m, dw.size, K - 1)
    dw, U = dw[:m], U[:, :m]
    floor = REL_EPS * dw.max() if dw.max() > 0 else REL_EPS
    dw = np.maximum(dw, floor)
    return Z @ (U / np.sqrt(dw)), dw


def fit_dlda(ts: TrainingSet, m: int | None = None) -> SubspaceModel:
    """Direct LDA, usable when ``L`` far exceeds the number of samples.

    Diagonalises the between-class scatter first (dropping its null space),
    whitens it, then diagonalises the within-class scatter inside that space
    and keeps the ``m`` directions with the smallest within-class spread,
    scaled by the inverse square root of that spread.
    """
    K = len(ts.classes)
    m = _default_m(ts, m)
    if m < 1:
        raise InvalidConfigError("DLDA dimension must be at least 1")
    _, _, _, Pb, Pw = _class_factors(ts)
    W, dw = _direct_lda(
        Pb.T @ Pb,
        lambda E: Pb @ E,
        lambda Z: Pw.T @ Z,
        m,
        K,
    )
    W = fix_signs(W)
    model = SubspaceModel("dlda", ts.L, W.shape[1], ts.classes, W=W, eigenvalues=dw)
    return model.enroll(ts)


def fit_pca(ts: TrainingSet, m: int | None = None) -> SubspaceModel:
    """Leading principal axes of the grand-mean-centred training vectors."""
    m = _default_m(ts, m)
    mu = ts.X.mean(axis=0)
    Xc = ts.X - mu
    _, s, Vt = np.linalg.svd(Xc, full_matrices=False)
    rank = int(np.sum(s > REL_EPS * s[0])) if s.size and s[0] > 0 else 0
    if rank == 0:
        raise DegenerateTrainingError("training vectors are all identical")
    if m > rank:
        warnings.warn(f"PCA dimension {m} exceeds data rank {rank}; using {rank}", stacklevel=2)
        m = rank
    W = fix_signs(Vt[:m].T)
    evals = s[:m] ** 2 / max(ts.X.shape[0] - 1, 1)
    model = SubspaceModel("pca", ts.L, m, ts.classes, W=W, mean=mu, eigenvalues=evals)
    return model.enroll(ts)


def fit_kpca(ts: TrainingSet, m: int | None = None, sigma: float | None = None) -> SubspaceModel:
    """Kernel PCA with a Gaussian kernel on the double-centred Gram matrix."""
    m = _default_m(ts, m)
    sigma = median_heuristic(ts.X) if sigma is None else float(sigma)
    if sigma <= 0:
        raise InvalidConfigError("kernel width must be positive")
    G = gaussian_kernel(ts.X, ts.X, sigma)
    col_mean = G.mean(axis=0)
    g_mean = float(G.mean())
    Gc = G - col_mean[None, :] - col_mean[:, None] + g_mean
    lam, V = linalg.eigh(0.5 * (Gc + Gc.T))
    lam, V = lam[::-1], V[:, ::-1]
    if lam[0] <= 0:
        raise DegenerateTrainingError("centred Gram matrix is zero")
    if lam.min() < -REL_EPS * lam[0]:
        warnings.warn("centred Gram matrix has negative eigenvalues; clipping at 0", stacklevel=2)
    lam = np.clip(lam, 0.0, None)
    rank = int(np.sum(lam > REL_EPS * lam[0]))
    if m > rank:
        warnings.warn(f"KPCA dimension {m} exceeds kernel rank {rank}; using {rank}", stacklevel=2)
        m = rank
    coef = fix_signs(V[:, :m]) / np.sqrt(lam[:m])
    model = SubspaceModel(
        "kpca", ts.L, m, ts.classes,
        train_X=ts.X.copy(), coef=coef, sigma=sigma,
        gram_col_mean=col_mean, gram_mean=g_mean, eigenvalues=lam[:m],
    )
    return model.enroll(ts)


def fit_kdda(
    ts: TrainingSet,
    m: int | None = None,
    sigma: float | None = None,
    kernel: str = "gaussian",
) -> SubspaceModel:
    """Kernel direct discriminant analysis.

    Runs the Direct-LDA construction in the kernel feature space: the
    between-class factor is ``Phi @ C`` with ``C[i, k] = sqrt(N_k) *
    (1[y_i = k] / N_k - 1 / N)`` and the within-class factor is ``Phi @ M``
    with ``M = I - P`` (``P`` averages each sample's class), so every scatter
    product reduces to Gram-matrix algebra. ``kernel="linear"`` reproduces
    ``fit_dlda`` exactly and exists for verification.
    """
    if kernel not in _KERNELS:
        raise InvalidConfigError(f"unknown kernel {kernel!r}")
    K = len(ts.classes)
    m = _default_m(ts, m)
    sigma = median_heuristic(ts.X) if sigma is None else float(sigma)
    if sigma <= 0:
        raise InvalidConfigError("kernel width must be positive")
    classes, idx = ts.class_index()
    N = ts.X.shape[0]
    counts = np.bincount(idx, minlength=K).astype(float)
    onehot = np.zeros((N, K))
    onehot[np.arange(N), idx] = 1.0
    C = np.sqrt(counts)[None, :] * (onehot / counts[None, :] - 1.0 / N)
    P = onehot @ (onehot / counts[None, :]).T
    M = np.eye(N) - P
    G = _KERNELS[kernel](ts.X, ts.X, sigma)
    G = 0.5 * (G + G.T)
    coef, dw = _direct_lda(
        C.T @ G @ C,
        lambda E: C @ E,
        lambda A: M.T @ (G @ A),
        m,
        K,
    )
    model = SubspaceModel(
        "kdda", ts.L, coef.shape[1], ts.classes,
        train_X=ts.X.copy(), coef=fix_signs(coef), sigma=sigma, kernel=kernel, eigenvalues=dw,
    )
    return model.enroll(ts)


FITTERS = {
    "lda": fit_lda,
    "dlda": fit_dlda,
    "pca": fit_pca,
    "kpca": fit_kpca,
    "kdda": fit_kdda,
}
