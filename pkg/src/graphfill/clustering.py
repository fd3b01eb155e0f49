"""k-means clustering and the clustering quality metrics (ACC/NMI/ARI/F1).

The k-means here is deliberately boring and fully deterministic: k-means++
initialization from an explicit seed, Lloyd iterations until the labels
reach a fixpoint (or max_iter), equidistant points assigned to the lowest
centroid index, empty clusters reseeded to the point farthest from its
current centroid. Same seed and input always produce bit-identical labels.

ACC is computed under the optimal prediction-to-truth label matching
(assignment problem on the contingency table); macro-F1 is computed after
that same matching. NMI uses arithmetic-mean normalization; ARI is the
usual permutation-model adjusted index.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from sklearn.metrics import adjusted_rand_score, f1_score, normalized_mutual_info_score

from .errors import InputError, NumericError
from .graph import ClusterAssignment

DEFAULT_MAX_ITER = 300


def _check_labels(pred, truth) -> tuple[np.ndarray, np.ndarray]:
    pred = np.asarray(pred, dtype=np.int64)
    truth = np.asarray(truth, dtype=np.int64)
    if pred.shape != truth.shape:
        raise InputError(f"label length mismatch: {pred.shape[0]} vs {truth.shape[0]}")
    return pred, truth


def _sq_dists(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    # (n, k) squared Euclidean distances; clip tiny negatives from the expansion
    d = (
        np.sum(points * points, axis=1)[:, None]
        - 2.0 * points @ centroids.T
        + np.sum(centroids * centroids, axis=1)[None, :]
    )
    return np.maximum(d, 0.0)


def _kmeanspp_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    centroids = np.empty((k, points.shape[1]))
    centroids[0] = points[rng.integers(n)]
    closest = _sq_dists(points, centroids[:1]).ravel()
    for c in range(1, k):
        total = closest.sum()
        if total > 0:
            idx = rng.choice(n, p=closest / total)
        else:
            idx = rng.integers(n)  # all remaining points coincide with a centroid
        centroids[c] = points[idx]
        np.minimum(closest, _sq_dists(points, centroids[c:c + 1]).ravel(), out=closest)
    return centroids


def _cluster_means(
    points: np.ndarray, labels: np.ndarray, k: int, fallback: np.ndarray
) -> np.ndarray:
    """Mean of each cluster's member rows; empty clusters keep their fallback row.

    bincount accumulates in point-index order, so the result is deterministic.
    """
    counts = np.bincount(labels, minlength=k).astype(np.float64)
    means = np.empty((k, points.shape[1]))
    for f in range(points.shape[1]):
        means[:, f] = np.bincount(labels, weights=points[:, f], minlength=k)
    nonempty = counts > 0
    means[nonempty] /= counts[nonempty, None]
    means[~nonempty] = fallback[~nonempty]
    return means


def kmeans(
    features: np.ndarray,
    k: int,
    seed: int,
    max_iter: int = DEFAULT_MAX_ITER,
) -> ClusterAssignment:
    """Lloyd's algorithm from a seeded k-means++ initialization.

    Terminates at a label fixpoint or after ``max_iter`` update/assign
    rounds; inertia is non-increasing across rounds (checked).
    """
    points = np.asarray(features, dtype=np.float64)
    if points.ndim != 2:
        raise InputError("features must be a 2-d matrix")
    if not np.isfinite(points).all():
        raise InputError("features contain non-finite values")
    n = points.shape[0]
    if k < 1:
        raise InputError(f"k must be >= 1, got {k}")
    if k > n:
        raise InputError(f"k={k} exceeds the number of points n={n}")
    if max_iter < 1:
        raise InputError(f"max_iter must be >= 1, got {max_iter}")

    rng = np.random.default_rng(seed)
    centroids = _kmeanspp_init(points, k, rng)
    labels = np.argmin(_sq_dists(points, centroids), axis=1)
    prev_inertia = np.inf

    for _ in range(max_iter):
        # Update step: means over members, then repair empty clusters
        centroids = _cluster_means(points, labels, k, centroids)
        counts = np.bincount(labels, minlength=k)
        empties = np.flatnonzero(counts == 0)
        if empties.size:
            dist_to_own = _sq_dists(points, centroids)[np.arange(n), labels]
            for cluster in empties:
                far = int(np.argmax(dist_to_own))
                centroids[cluster] = points[far]
                labels[far] = cluster
                dist_to_own[far] = -1.0  # do not reuse for another empty cluster

        dists = _sq_dists(points, centroids)
        new_labels = np.argmin(dists, axis=1)
        inertia = float(dists[np.arange(n), new_labels].sum())
        if inertia > prev_inertia * (1 + 1e-9) + 1e-12:
            raise NumericError(
                f"k-means inertia increased from {prev_inertia} to {inertia}"
            )
        prev_inertia = inertia
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels

    # A final means pass keeps "centroid == mean of members" exact even when
    # an empty-cluster repair fired on the last round.
    centroids = _cluster_means(points, labels, k, centroids)
    dists = _sq_dists(points, centroids)
    inertia = float(dists[np.arange(n), labels].sum())
    return ClusterAssignment(labels=labels, centroids=centroids, inertia=inertia)


def contingency_table(pred: np.ndarray, truth: np.ndarray) -> np.ndarray:
    """Counts[p, t] = number of samples with predicted label p and true label t."""
    kp = int(pred.max()) + 1 if pred.size else 1
    kt = int(truth.max()) + 1 if truth.size else 1
    table = np.zeros((kp, kt), dtype=np.int64)
    np.add.at(table, (pred, truth), 1)
    return table


def best_label_matching(pred, truth) -> dict[int, int]:
    """Optimal bijection from predicted labels to truth labels (assignment problem)."""
    pred, truth = _check_labels(pred, truth)
    table = contingency_table(pred, truth)
    rows, cols = linear_sum_assignment(-table)
    return {int(p): int(t) for p, t in zip(rows, cols)}


def clustering_accuracy(pred, truth) -> float:
    """Fraction matched under the best prediction-to-truth label bijection."""
    pred, truth = _check_labels(pred, truth)
    if pred.size == 0:
        raise InputError("cannot score empty label vectors")
    table = contingency_table(pred, truth)
    rows, cols = linear_sum_assignment(-table)
    return float(table[rows, cols].sum()) / pred.size


def match_labels(pred, truth) -> np.ndarray:
    """Relabel ``pred`` through the optimal matching; unmatched labels become -1."""
    pred, truth = _check_labels(pred, truth)
    mapping = best_label_matching(pred, truth)
    return np.array([mapping.get(int(p), -1) for p in pred], dtype=np.int64)


def nmi(pred, truth) -> float:
    """Normalized mutual information with arithmetic-mean normalization.

    Two single-cluster partitions score 1.0 (identical); a single-cluster
    partition against a split one scores 0.0.
    """
    pred, truth = _check_labels(pred, truth)
    return float(normalized_mutual_info_score(truth, pred, average_method="arithmetic"))


def ari(pred, truth) -> float:
    """Adjusted Rand index under the permutation model."""
    pred, truth = _check_labels(pred, truth)
    return float(adjusted_rand_score(truth, pred))


def macro_f1(pred_after_matching, truth) -> float:
    """Macro-averaged F1 over the truth classes; apply match_labels first."""
    pred, truth = _check_labels(pred_after_matching, truth)
    classes = np.unique(truth)
    return float(f1_score(truth, pred, labels=classes, average="macro", zero_division=0))


@dataclass(frozen=True)
class MetricsReport:
    """Per-metric mean and standard deviation over n_runs evaluation seeds.

    The per-run values are kept so downstream comparisons can use medians
    or paired differences; to_json() emits only the mean/std/runs summary.
    """

    acc_runs: tuple[float, ...]
    nmi_runs: tuple[float, ...]
    ari_runs: tuple[float, ...]
    f1_runs: tuple[float, ...]

    @property
    def n_runs(self) -> int:
        return len(self.acc_runs)

    def _summary(self, values: tuple[float, ...]) -> dict:
        arr = np.asarray(values)
        return {"mean": float(arr.mean()), "std": float(arr.std()), "runs": len(values)}

    def to_json(self) -> dict:
        return {
            "acc": self._summary(self.acc_runs),
            "nmi": self._summary(self.nmi_runs),
            "ari": self._summary(self.ari_runs),
            "f1": self._summary(self.f1_runs),
        }

    @property
    def acc(self) -> float:
        return float(np.mean(self.acc_runs))

    @property
    def nmi(self) -> float:
        return float(np.mean(self.nmi_runs))

    @property
    def ari(self) -> float:
        return float(np.mean(self.ari_runs))

    @property
    def f1(self) -> float:
        return float(np.mean(self.f1_runs))


def score_partition(pred, truth) -> tuple[float, float, float, float]:
    """(acc, nmi, ari, f1) for one predicted partition."""
    matched = match_labels(pred, truth)
    return (
        clustering_accuracy(pred, truth),
        nmi(pred, truth),
        ari(pred, truth),
        macro_f1(matched, truth),
    )


def evaluate_clustering(
    features: np.ndarray,
    truth,
    k: int,
    runs: int,
    seed: int,
    max_iter: int = DEFAULT_MAX_ITER,
) -> MetricsReport:
    """Score k-means on ``features`` against ``truth`` over ``runs`` seeds.

    Run j uses seed ``seed + j``; accumulation is in seed order so the
    report is reproducible.
    """
    if runs < 1:
        raise InputError(f"evaluation runs must be >= 1, got {runs}")
    truth = np.asarray(truth, dtype=np.int64)
    accs, nmis, aris, f1s = [], [], [], []
    for j in range(runs):
        assignment = kmeans(features, k, seed=seed + j, max_iter=max_iter)
        a, m, r, f = score_partition(assignment.labels, truth)
        accs.append(a)
        nmis.append(m)
        aris.append(r)
        f1s.append(f)
    return MetricsReport(tuple(accs), tuple(nmis), tuple(aris), tuple(f1s))
