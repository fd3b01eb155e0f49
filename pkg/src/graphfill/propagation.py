"""Stage 1: iterative feature propagation with cluster-aware reweighting.

Each iteration diffuses features along the normalized adjacency and then
restores the attribute-complete rows to their original values, so known
information never degrades. Every ``t_period`` iterations the current
feature estimates are clustered with k-means and edge weights are boosted
(alpha) inside clusters and damped (beta) across clusters, compounding
across rounds with a row-sum cap that keeps propagation contractive.

Setting alpha = beta = 1 disables the reweighting machinery entirely and
yields plain feature propagation.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional

import numpy as np

from .clustering import kmeans
from .errors import ConfigError, InputError, NumericError
from .graph import ClusterAssignment, Graph, NormalizedAdjacency, normalize, reweight_edges

TelemetryCallback = Callable[[int, float, bool], None]


@dataclass(frozen=True, eq=False, init=False)
class FeatureMatrix:
    """Dense n x d feature matrix plus the per-node completeness mask.

    Rows flagged complete are frozen: after every propagation step they
    are restored to the values captured at construction.
    """

    values: np.ndarray
    complete_mask: np.ndarray
    original_complete_rows: np.ndarray

    def __init__(self, values, complete_mask, original_complete_rows=None):
        values = np.array(values, dtype=np.float64)
        if values.ndim != 2:
            raise InputError("feature matrix must be 2-d")
        complete_mask = np.asarray(complete_mask, dtype=bool)
        if complete_mask.shape != (values.shape[0],):
            raise InputError(
                f"complete_mask length {complete_mask.shape} does not match "
                f"{values.shape[0]} feature rows"
            )
        if not np.isfinite(values).all():
            raise InputError("feature matrix contains non-finite values")
        if original_complete_rows is None:
            original_complete_rows = values[complete_mask].copy()
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "complete_mask", complete_mask)
        object.__setattr__(self, "original_complete_rows", original_complete_rows)

    @property
    def node_count(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class PropagationConfig:
    """Stage-1 hyperparameters.

    ``f_max`` total propagation iterations; every ``t_period`` of them a
    k-means pass (seeded with ``seed + t``) drives one reweighting round.
    alpha > 1 > beta > 0, or alpha = beta = 1 for the neutral variant.
    """

    f_max: int = 200
    t_period: int = 40
    alpha: float = 1.5
    beta: float = 0.5
    k: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.t_period < 1:
            raise ConfigError(f"t_period must be >= 1, got {self.t_period}")
        if self.f_max < 0:
            raise ConfigError(f"f_max must be >= 0, got {self.f_max}")
        neutral = self.alpha == 1.0 and self.beta == 1.0
        if not neutral and not (self.alpha > 1.0 and 0.0 < self.beta < 1.0):
            raise ConfigError(
                "reweighting needs alpha > 1 and beta in (0, 1); "
                f"got alpha={self.alpha}, beta={self.beta} "
                "(alpha = beta = 1 selects plain propagation)"
            )
        if self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")

    @property
    def neutral(self) -> bool:
        return self.alpha == 1.0 and self.beta == 1.0


class PropagationResult(NamedTuple):
    features: FeatureMatrix
    adjacency: NormalizedAdjacency
    assignment: ClusterAssignment


def propagate_step(adj: NormalizedAdjacency, features: FeatureMatrix) -> FeatureMatrix:
    """One diffusion step: values <- A_hat @ values, complete rows restored."""
    if adj.node_count != features.node_count:
        raise InputError(
            f"adjacency has {adj.node_count} nodes, features have {features.node_count}"
        )
    out = adj.matrix() @ features.values
    out[features.complete_mask] = features.original_complete_rows
    bad = ~np.isfinite(out).all(axis=1)
    if bad.any():
        raise NumericError(
            f"non-finite values in row {int(np.flatnonzero(bad)[0])} after propagation"
        )
    return FeatureMatrix(out, features.complete_mask, features.original_complete_rows)


def run_propagation(
    graph: Graph,
    features: FeatureMatrix,
    config: PropagationConfig,
    adjacency: Optional[NormalizedAdjacency] = None,
    normalization: str = "symmetric",
    telemetry: Optional[TelemetryCallback] = None,
) -> PropagationResult:
    """Run ``f_max`` propagation iterations with periodic reweighting.

    At every iteration t with t % t_period == 0 (skipped in the neutral
    alpha = beta = 1 variant) the full current feature matrix, imputed
    rows included, is clustered and the adjacency reweighted in place for
    the following iterations. Returns the final features, the final
    (possibly reweighted) adjacency, and the most recent cluster
    assignment; if no clustering ran inside the loop, one k-means pass on
    the final features supplies it.

    ``telemetry(t, change_norm, reweighted)`` receives the max-norm of
    the feature change per iteration, the norm under which a row-sum-
    capped adjacency provably contracts.
    """
    adj = adjacency if adjacency is not None else normalize(graph, normalization)
    current = features
    assignment: Optional[ClusterAssignment] = None

    for t in range(1, config.f_max + 1):
        previous = current
        current = propagate_step(adj, current)
        reweighted = False
        if not config.neutral and t % config.t_period == 0:
            assignment = kmeans(current.values, config.k, seed=config.seed + t)
            adj = reweight_edges(adj, assignment, config.alpha, config.beta)
            reweighted = True
        if telemetry is not None:
            change = float(np.max(np.abs(current.values - previous.values), initial=0.0))
            telemetry(t, change, reweighted)

    if assignment is None:
        assignment = kmeans(current.values, config.k, seed=config.seed)
    return PropagationResult(current, adj, assignment)
