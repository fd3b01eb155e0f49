"""Stage 2: tiered imputation of missing nodes.

Missing nodes are classified by how much of their 1-hop neighborhood is
attribute-complete:

* all-known  -- every neighbor complete; the node's propagated estimate is
  a (sub-)convex combination of known rows, so it is promoted to complete
  as-is.
* some-known -- mixed neighborhood. If all complete neighbors share the
  node's cluster, the estimate is trusted and the node promoted; if they
  all disagree, the estimate is pulled toward the complete neighbors'
  mean by an exponential moving average; a split verdict leaves the node
  untouched for this round.
* all-unknown -- no complete neighbor yet. These wait: each promotion of
  a neighbor lifts them into some-known, so the frontier of known
  attributes advances inward over iterations. Whatever remains at the end
  is nudged toward its some-known neighbors once.

Every promotion permanently enlarges the complete set, which is what makes
tier counts monotone across iterations.

All rule evaluations within one sweep read the pre-sweep features and
partition; promotions and feature updates commit at sweep end, so the
outcome does not depend on node iteration order.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, NamedTuple

import numpy as np
import scipy.sparse as sp

from .clustering import kmeans
from .errors import ConfigError, InputError
from .graph import ClusterAssignment, Graph, NormalizedAdjacency


@dataclass(frozen=True)
class TierPartition:
    """Disjoint node sets: complete plus the three missing-node tiers."""

    complete: frozenset
    all_known: frozenset
    some_known: frozenset
    all_unknown: frozenset

    def counts(self) -> tuple[int, int, int]:
        return len(self.all_known), len(self.some_known), len(self.all_unknown)

    def tier_sets(self) -> tuple[frozenset, frozenset, frozenset]:
        return self.all_known, self.some_known, self.all_unknown


@dataclass(frozen=True)
class ImputationConfig:
    """Stage-2 hyperparameters: outer iteration cap, EMA smoothing, clusters."""

    i_max: int = 10
    gamma: float = 0.9
    k: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.i_max < 1:
            raise ConfigError(f"i_max must be >= 1, got {self.i_max}")
        if not 0.0 < self.gamma < 1.0:
            raise ConfigError(f"gamma must lie in (0, 1), got {self.gamma}")
        if self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")


class ImputationResult(NamedTuple):
    values: np.ndarray
    partition: TierPartition
    assignment: ClusterAssignment
    tier_trace: list


def _as_mask(nodes: Iterable[int] | np.ndarray, n: int) -> np.ndarray:
    if isinstance(nodes, np.ndarray) and nodes.dtype == bool:
        if nodes.shape != (n,):
            raise InputError(f"mask length {nodes.shape} does not match n={n}")
        return nodes.copy()
    mask = np.zeros(n, dtype=bool)
    idx = np.fromiter((int(v) for v in nodes), dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise InputError("complete set references a node outside [0, n)")
    mask[idx] = True
    return mask


def _complete_neighbor_counts(graph: Graph, complete_mask: np.ndarray) -> np.ndarray:
    src = np.repeat(np.arange(graph.node_count), graph.degrees)
    return np.bincount(
        src, weights=complete_mask[graph.indices].astype(np.float64),
        minlength=graph.node_count,
    ).astype(np.int64)


def classify_missing(graph: Graph, complete) -> TierPartition:
    """Partition the non-complete nodes into the three neighborhood tiers.

    Degree-0 missing nodes land in all_unknown ("no neighbor is complete"
    holds vacuously).
    """
    mask = _as_mask(complete, graph.node_count)
    known = _complete_neighbor_counts(graph, mask)
    missing = ~mask
    deg = graph.degrees

    all_known = missing & (deg > 0) & (known == deg)
    some_known = missing & (known > 0) & (known < deg)
    all_unknown = missing & (known == 0)

    to_set = lambda m: frozenset(np.flatnonzero(m).tolist())
    return TierPartition(
        complete=to_set(mask),
        all_known=to_set(all_known),
        some_known=to_set(some_known),
        all_unknown=to_set(all_unknown),
    )


def promote_all_known(partition: TierPartition) -> TierPartition:
    """Move every all-known node into the complete set; features stand as-is."""
    return TierPartition(
        complete=partition.complete | partition.all_known,
        all_known=frozenset(),
        some_known=partition.some_known,
        all_unknown=partition.all_unknown,
    )


def _neighbor_stats(
    graph: Graph,
    features: np.ndarray,
    labels: np.ndarray,
    member_mask: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per node: count of member neighbors, count of those sharing the node's
    cluster, and the mean feature over member neighbors (zeros where none)."""
    n = graph.node_count
    src = np.repeat(np.arange(n), graph.degrees)
    dst = graph.indices
    member_edge = member_mask[dst]
    counts = np.bincount(src, weights=member_edge.astype(np.float64), minlength=n)
    same_edge = member_edge & (labels[src] == labels[dst])
    same_counts = np.bincount(src, weights=same_edge.astype(np.float64), minlength=n)

    weights = member_edge.astype(np.float64)
    pattern = sp.csr_matrix((weights, dst, graph.indptr), shape=(n, n), copy=False)
    sums = pattern @ features
    means = np.zeros_like(sums)
    has = counts > 0
    means[has] = sums[has] / counts[has, None]
    return counts.astype(np.int64), same_counts.astype(np.int64), means


def apply_some_known_rules(
    graph: Graph,
    features: np.ndarray,
    partition: TierPartition,
    assignment: ClusterAssignment,
    gamma: float,
) -> tuple[np.ndarray, frozenset]:
    """One batch sweep over the some-known tier.

    Nodes whose complete neighbors unanimously share their cluster are
    queued for promotion; nodes whose complete neighbors unanimously
    disagree get an EMA pull toward those neighbors' mean; split
    neighborhoods are left untouched. Reads use pre-sweep values only.
    """
    n = graph.node_count
    some_known = np.fromiter(partition.some_known, dtype=np.int64)
    if some_known.size == 0:
        return features.copy(), frozenset()

    complete_mask = _as_mask(partition.complete, n)
    labels = np.asarray(assignment.labels)
    counts, same_counts, means = _neighbor_stats(graph, features, labels, complete_mask)

    if (counts[some_known] == 0).any():
        offender = int(some_known[counts[some_known] == 0][0])
        raise InputError(
            f"stale partition: some-known node {offender} has no complete neighbor"
        )

    agree = same_counts[some_known] == counts[some_known]
    disagree = same_counts[some_known] == 0

    out = features.copy()
    correct = some_known[disagree]
    out[correct] = gamma * features[correct] + (1.0 - gamma) * means[correct]
    return out, frozenset(some_known[agree].tolist())


def impute_all_unknown(
    graph: Graph,
    features: np.ndarray,
    partition: TierPartition,
    assignment: ClusterAssignment,
    gamma: float,
) -> np.ndarray:
    """Final pass for nodes still lacking complete neighbors.

    A node whose some-known neighbors all sit in other clusters is pulled
    toward their mean; nodes without some-known neighbors keep their
    propagated values.
    """
    n = graph.node_count
    targets = np.fromiter(partition.all_unknown, dtype=np.int64)
    if targets.size == 0:
        return features.copy()

    some_known_mask = _as_mask(partition.some_known, n)
    labels = np.asarray(assignment.labels)
    counts, same_counts, means = _neighbor_stats(graph, features, labels, some_known_mask)

    eligible = (counts[targets] > 0) & (same_counts[targets] == 0)
    chosen = targets[eligible]
    out = features.copy()
    out[chosen] = gamma * features[chosen] + (1.0 - gamma) * means[chosen]
    return out


def run_tiered_imputation(
    graph: Graph,
    features: np.ndarray,
    adjacency: NormalizedAdjacency,
    initial_assignment: ClusterAssignment,
    config: ImputationConfig,
    complete=None,
) -> ImputationResult:
    """Iterate classify -> promote -> some-known rules -> cluster refresh.

    ``complete`` is the original attribute-complete node set (bool mask or
    iterable). The loop stops early once an iteration changes no tier
    membership and moves no feature entry by more than 1e-12; the
    all-unknown pass then runs once on whatever is left.

    ``tier_trace`` rows are (iteration, |all_known|, |some_known|,
    |all_unknown|); row 0 is the classification of the inputs, row i the
    state after iteration i.
    """
    if complete is None:
        raise InputError("run_tiered_imputation requires the complete node set")
    n = graph.node_count
    if features.shape[0] != n:
        raise InputError(f"features have {features.shape[0]} rows, graph has {n} nodes")

    values = np.array(features, dtype=np.float64)
    assignment = initial_assignment
    partition = classify_missing(graph, complete)
    trace = [(0, *partition.counts())]

    for i in range(1, config.i_max + 1):
        promoted = promote_all_known(partition)
        new_values, promotions = apply_some_known_rules(
            graph, values, promoted, assignment, config.gamma
        )
        new_complete = promoted.complete | promotions
        assignment = kmeans(new_values, config.k, seed=config.seed + i)
        new_partition = classify_missing(graph, new_complete)
        trace.append((i, *new_partition.counts()))

        feature_change = float(np.max(np.abs(new_values - values), initial=0.0))
        membership_same = (
            new_partition.complete == partition.complete
            and new_partition.tier_sets() == partition.tier_sets()
        )
        values, partition = new_values, new_partition
        if membership_same and feature_change <= 1e-12:
            break

    values = impute_all_unknown(graph, values, partition, assignment, config.gamma)
    return ImputationResult(values, partition, assignment, trace)
