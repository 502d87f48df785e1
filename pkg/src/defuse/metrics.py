"""Graph-recovery metrics and the linear-vs-quadratic AIC diagnostic."""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .errors import EmptyList, SingularDesign, SizeMismatch
from .graph import Dag
from .simulate import Dataset


@dataclass(frozen=True)
class GraphMetrics:
    """Edge-decision counts and the derived rates for one estimated graph.

    tp: estimated edges with the correct direction; re: estimated edges
    whose reversal is a true edge; fp: estimated edges absent from the true
    skeleton; pe = tp + re + fp; fn: true skeleton edges matched in neither
    direction; tn: unordered pairs with no edge in either skeleton.
    """

    tp: int
    re: int
    fp: int
    tn: int
    fn: int
    pe: int
    fdr: float
    fpr: float
    tpr: float
    shd: int

    def to_row(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


METRIC_FIELDS = ("tp", "re", "fp", "tn", "fn", "pe", "fdr", "fpr", "tpr", "shd")


def graph_metrics(truth: Dag, estimate: Dag) -> GraphMetrics:
    """Classify every directed edge decision of ``estimate`` against ``truth``.

    Rates follow the usual conventions for empty denominators: FDR and FPR
    are 0 when undefined; TPR is 1 when the true graph has no edges and 0
    when it has edges but none is recovered with its direction.
    """
    if truth.p != estimate.p:
        raise SizeMismatch(f"node counts differ: {truth.p} vs {estimate.p}")
    true_edges = truth.edges
    true_skel = {frozenset(e) for e in true_edges}
    est_edges = estimate.edges
    est_skel = {frozenset(e) for e in est_edges}

    tp = sum(1 for e in est_edges if e in true_edges)
    re = sum(1 for (k, j) in est_edges if (j, k) in true_edges)
    fp = sum(1 for e in est_edges if frozenset(e) not in true_skel)
    pe = len(est_edges)
    fn = sum(1 for pair in true_skel if pair not in est_skel)
    p = truth.p
    tn = p * (p - 1) // 2 - len(true_skel | est_skel)

    fdr = (re + fp) / pe if pe > 0 else 0.0
    fpr = (re + fp) / (fp + tn) if (fp + tn) > 0 else 0.0
    if tp + fn > 0:
        tpr = tp / (tp + fn)
    else:
        tpr = 1.0 if not true_edges else 0.0
    return GraphMetrics(
        tp=tp, re=re, fp=fp, tn=tn, fn=fn, pe=pe,
        fdr=fdr, fpr=fpr, tpr=tpr, shd=fp + fn + re,
    )


@dataclass(frozen=True)
class ReplicationSummary:
    """Per-metric mean and sample standard deviation over replications."""

    means: dict
    sds: dict
    n_replications: int
    single_replication: bool

    def to_json_dict(self) -> dict:
        return {
            "n_replications": self.n_replications,
            "single_replication": self.single_replication,
            "metrics": {
                name: {"mean": self.means[name], "sd": self.sds[name]} for name in self.means
            },
        }


def replication_summary(metrics: list) -> ReplicationSummary:
    if not metrics:
        raise EmptyList("no replications to summarize")
    single = len(metrics) == 1
    means, sds = {}, {}
    for name in METRIC_FIELDS:
        vals = np.array([getattr(m, name) for m in metrics], dtype=float)
        means[name] = float(vals.mean())
        sds[name] = 0.0 if single else float(vals.std(ddof=1))
    return ReplicationSummary(
        means=means, sds=sds, n_replications=len(metrics), single_replication=single
    )


@dataclass(frozen=True)
class AicReport:
    """AIC of one parent-model fit: rss/(n sigma2) + 2 dim/n."""

    model: str
    aic: float
    rss: float
    sigma2_fnn: float
    dim: int


def _ols_aic(y, design, model, sigma2_fnn) -> AicReport:
    n, dim = design.shape
    if np.linalg.matrix_rank(design) < dim:
        raise SingularDesign(f"{model} design is rank-deficient")
    coefs, *_ = np.linalg.lstsq(design, y, rcond=None)
    rss = float(np.sum((y - design @ coefs) ** 2))
    aic = rss / (n * sigma2_fnn) + 2.0 * dim / n
    return AicReport(model=model, aic=aic, rss=rss, sigma2_fnn=sigma2_fnn, dim=dim)


def aic_compare(data: Dataset, node: int, parents, sigma2_fnn: float):
    """Fit linear and linear-plus-squares parent models; return both AIC reports.

    The quadratic model adds the squared parent columns. The parameter count
    includes the intercept. ``sigma2_fnn`` should be the error variance the
    network fit estimated for this node (its validation MSE).
    """
    parents = sorted(parents)
    if not parents:
        raise ValueError("parents must be nonempty")
    if sigma2_fnn <= 0:
        raise ValueError("sigma2_fnn must be positive")
    y = data.column(node)
    base = data.values[:, parents]
    ones = np.ones((data.n, 1))
    linear = _ols_aic(y, np.hstack([ones, base]), "linear", sigma2_fnn)
    quadratic = _ols_aic(y, np.hstack([ones, base, base**2]), "quadratic", sigma2_fnn)
    return linear, quadratic
