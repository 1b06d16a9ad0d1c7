"""Pearson-distance template matching and threshold decisions."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidConfigError, UndefinedCorrelationError, UnknownIdentityError

NO_MATCH = 2.0

AGGREGATIONS = {
    # (over templates, over test vectors)
    "min-mean": (np.min, np.mean),
    "mean-mean": (np.mean, np.mean),
    "min-min": (np.min, np.min),
}


@dataclass(frozen=True)
class MatchScore:
    value: float
    claimed_id: str
    genuine: bool | None = None


def pearson_distance(a, b) -> float:
    """``1 - cov(a, b) / sqrt(cov(a, a) * cov(b, b))``; lies in [0, 2].

    Raises UndefinedCorrelationError if either vector is constant.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1 or a.size < 2:
        raise InvalidConfigError("pearson_distance needs two 1-D vectors of equal length >= 2")
    ac = a - a.mean()
    bc = b - b.mean()
    saa = float(ac @ ac)
    sbb = float(bc @ bc)
    if saa <= 0 or sbb <= 0:
        raise UndefinedCorrelationError("correlation is undefined for a constant vector")
    r = float(ac @ bc) / np.sqrt(saa * sbb)
    return 1.0 - min(1.0, max(-1.0, r))


def pearson_distance_matrix(A, B) -> np.ndarray:
    """Pairwise Pearson distances between rows of ``A`` and rows of ``B``.

    Pairs involving a constant row get ``NO_MATCH``.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    Ac = A - A.mean(axis=1, keepdims=True)
    Bc = B - B.mean(axis=1, keepdims=True)
    na = np.sqrt(np.einsum("ij,ij->i", Ac, Ac))
    nb = np.sqrt(np.einsum("ij,ij->i", Bc, Bc))
    with np.errstate(divide="ignore", invalid="ignore"):
        r = (Ac @ Bc.T) / np.outer(na, nb)
    d = 1.0 - np.clip(r, -1.0, 1.0)
    d[(na == 0)[:, None] | (nb == 0)[None, :]] = NO_MATCH
    return d


def euclidean_distance_matrix(A, B) -> np.ndarray:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    d2 = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2 * A @ B.T
    return np.sqrt(np.clip(d2, 0.0, None))


DISTANCES = {"pearson": pearson_distance_matrix, "euclidean": euclidean_distance_matrix}


def class_distances(projected_tests, templates: dict, metric: str = "pearson", over_templates=np.min):
    """Distance of every test vector to every class: shape (n_tests, n_classes).

    Returns the matrix and the list of class labels (column order).
    """
    dist = DISTANCES[metric]
    labels = list(templates)
    cols = [over_templates(dist(projected_tests, templates[c]), axis=1) for c in labels]
    return np.column_stack(cols), labels


def claim_score(model, claimed_id, test_vectors, agg: str = "min-mean", metric: str = "pearson") -> MatchScore:
    """Score a claim from one or more (unprojected) feature vectors."""
    claimed_id = str(claimed_id)
    if claimed_id not in model.templates:
        raise UnknownIdentityError(claimed_id)
    if agg not in AGGREGATIONS:
        raise InvalidConfigError(f"unknown aggregation {agg!r}")
    tests = np.atleast_2d(np.asarray(test_vectors, dtype=float))
    if tests.shape[0] < 1:
        raise InvalidConfigError("a claim needs at least one test vector")
    over_templates, over_tests = AGGREGATIONS[agg]
    projected = model.project_many(tests)
    per_vector = over_templates(DISTANCES[metric](projected, model.templates[claimed_id]), axis=1)
    return MatchScore(float(over_tests(per_vector)), claimed_id)


def decide(score, threshold: float) -> str:
    """``"accept"`` if the score is at or below the threshold, else ``"reject"``."""
    value = score.value if isinstance(score, MatchScore) else float(score)
    return "accept" if value <= threshold else "reject"
