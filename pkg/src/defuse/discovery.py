"""Layer-by-layer causal order discovery with deconfounded regressions.

Starting from an empty frontier, each round regresses every unplaced
variable on the placed columns plus their frozen residuals, tests the new
residuals for normality, and admits the variables that fail to reject.
Admitted variables keep the parent set read off their fit and contribute
their residual column to later rounds. Parents always come from strictly
earlier rounds, so the estimated graph is acyclic by construction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from .errors import DegenerateSample, InvalidConfig, InvalidSize, NoProgress, SampleTooSmall, ShapeMismatch
from .graph import Dag, DepthProfile, topological_depths
from .network import predict
from .normality import NormalityReport, anderson_darling
from .regressor import FitResult, TrainConfig, fit_node
from .simulate import Dataset

_TAG_NODE_FIT = 20

_MIN_SAMPLE = 50


def _node_seed(seed: int, depth: int, node: int) -> int:
    ss = np.random.SeedSequence([int(seed), _TAG_NODE_FIT, depth, node])
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class LayerState:
    """Snapshot between rounds: placed nodes, their residual columns, fits."""

    d: int
    placed: tuple
    xi_hat: np.ndarray  # n x len(placed); column i belongs to placed[i]
    fits: dict
    pending: tuple

    def design_for(self, data: Dataset) -> np.ndarray:
        return data.values[:, list(self.placed)]


def initial_state(data: Dataset) -> LayerState:
    return LayerState(
        d=0,
        placed=(),
        xi_hat=np.empty((data.n, 0)),
        fits={},
        pending=tuple(range(data.p)),
    )


def residual_update(data: Dataset, state: LayerState, fits: dict) -> LayerState:
    """Advance one round: append residual columns for the newly placed nodes.

    Residuals are frozen at placement time; the prediction for node k uses
    exactly the design that was current when k was admitted.
    """
    new_nodes = sorted(fits)
    for j in new_nodes:
        if j not in state.pending:
            raise ShapeMismatch(f"node {j} is not pending")
    x = state.design_for(data)
    columns = [state.xi_hat]
    for j in new_nodes:
        resid = data.column(j) - predict(fits[j].params, x, state.xi_hat)
        columns.append(resid[:, None])
    return LayerState(
        d=state.d + 1,
        placed=state.placed + tuple(new_nodes),
        xi_hat=np.hstack(columns),
        fits={**state.fits, **fits},
        pending=tuple(j for j in state.pending if j not in fits),
    )


def layer_gate(reports: dict, alpha: float, forced: bool = True):
    """Admit the pending nodes whose residuals fail to reject normality.

    Returns (admitted node tuple, forced flag). When every node rejects and
    forced placement is on, the node with the largest p-value is admitted
    alone so the loop always progresses; with forced placement off that
    situation raises NoProgress.
    """
    if not reports:
        raise NoProgress("no pending nodes to gate")
    admitted = tuple(sorted(j for j, rep in reports.items() if rep.p_value >= alpha))
    if admitted:
        return admitted, False
    if not forced:
        raise NoProgress("every pending residual rejected the normality test")
    best = max(sorted(reports), key=lambda j: reports[j].p_value)
    return (best,), True


@dataclass(frozen=True)
class DiscoveryResult:
    """Estimated graph plus everything needed to audit how it was found."""

    dag_hat: Dag
    depth_profile: DepthProfile
    fits: dict
    designs: dict       # node -> design node ids at placement time
    placement_depth: dict
    audit: tuple
    warnings: tuple
    names: tuple
    alpha: float

    def parents_of(self, j: int) -> frozenset:
        return self.dag_hat.parents(j)

    def beta_for(self, j: int) -> dict:
        """Deconfounding coefficients of node j keyed by design node id."""
        fit = self.fits[j]
        return {k: float(b) for k, b in zip(self.designs[j], fit.params.beta)}

    def audit_json_dict(self, provenance=None) -> dict:
        doc = {
            "alpha": self.alpha,
            "names": list(self.names),
            "iterations": [
                {
                    "depth": entry["depth"],
                    "pending": [self.names[j] for j in entry["pending"]],
                    "tests": {
                        self.names[j]: rep.to_json_dict() if rep is not None else None
                        for j, rep in entry["tests"].items()
                    },
                    "admitted": [self.names[j] for j in entry["admitted"]],
                    "forced": entry["forced"],
                    "fits": {
                        self.names[j]: fit.to_json_dict() for j, fit in entry["fits"].items()
                    },
                }
                for entry in self.audit
            ],
            "placements": {
                self.names[j]: {
                    "depth": self.placement_depth[j],
                    "parents": sorted(self.names[k] for k in self.dag_hat.parents(j)),
                }
                for j in range(self.dag_hat.p)
            },
            "warnings": list(self.warnings),
        }
        if provenance is not None:
            doc["provenance"] = provenance
        return doc

    def write_audit_json(self, path, provenance=None):
        with open(path, "w") as fh:
            json.dump(self.audit_json_dict(provenance), fh, indent=2, sort_keys=True)
            fh.write("\n")


def discover(
    data: Dataset,
    alpha: float = 0.025,
    config: TrainConfig | None = None,
    forced_placement: bool = True,
) -> DiscoveryResult:
    """Estimate the causal graph of a dataset by peeling topological layers.

    Each round fits every pending node on the current design (empty at round
    zero, where the fit degenerates to the column mean), gates the residual
    vectors through the normality test at level ``alpha``, and freezes the
    admitted nodes' parent sets and residuals. Nodes whose column is
    constant cannot be tested and are admitted immediately with a warning.
    """
    if config is None:
        config = TrainConfig()
    if data.n < _MIN_SAMPLE:
        raise SampleTooSmall(f"need at least {_MIN_SAMPLE} observations, got {data.n}")
    if data.p < 2:
        raise InvalidSize("need at least two variables")
    if not (0.0 < alpha < 1.0):
        raise InvalidConfig(f"alpha must lie in (0, 1), got {alpha}")

    state = initial_state(data)
    audit = []
    warnings = []
    fits_all: dict[int, FitResult] = {}
    designs: dict[int, tuple] = {}
    placement_depth: dict[int, int] = {}

    while state.pending:
        x = state.design_for(data)
        round_fits, reports, degenerate = {}, {}, []
        for j in state.pending:
            cfg = replace(config, rng_seed=_node_seed(config.rng_seed, state.d, j))
            fit = fit_node(data.column(j), x, state.xi_hat, cfg)
            round_fits[j] = fit
            resid = data.column(j) - predict(fit.params, x, state.xi_hat)
            try:
                reports[j] = anderson_darling(resid)
            except DegenerateSample:
                degenerate.append(j)
                warnings.append(
                    f"node {data.names[j]}: residual has zero variance at depth {state.d}; "
                    "admitted without a normality test"
                )
        if reports:
            gated, forced = layer_gate(reports, alpha, forced=forced_placement)
        else:
            gated, forced = (), False
        admitted = tuple(sorted(set(gated) | set(degenerate)))
        if forced:
            warnings.append(
                f"depth {state.d}: every pending residual rejected at alpha={alpha}; "
                f"forced placement of {data.names[admitted[0]]}"
            )
        audit.append(
            {
                "depth": state.d,
                "pending": tuple(state.pending),
                "tests": {j: reports.get(j) for j in state.pending},
                "admitted": admitted,
                "forced": forced,
                "fits": {j: round_fits[j] for j in admitted},
            }
        )
        for j in admitted:
            fits_all[j] = round_fits[j]
            designs[j] = tuple(state.placed)
            placement_depth[j] = state.d
        state = residual_update(data, state, {j: round_fits[j] for j in admitted})

    edges = set()
    for j, fit in fits_all.items():
        for col in fit.selected_parents:
            edges.add((designs[j][col], j))
    dag_hat = Dag(data.p, frozenset(edges))
    return DiscoveryResult(
        dag_hat=dag_hat,
        depth_profile=topological_depths(dag_hat),
        fits=fits_all,
        designs=designs,
        placement_depth=placement_depth,
        audit=tuple(audit),
        warnings=tuple(warnings),
        names=data.names,
        alpha=alpha,
    )
