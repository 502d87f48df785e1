"""Benchmark graph generators and sampling from the nonlinear structural model.

Every random quantity is drawn from a PCG64 generator keyed by
``SeedSequence([seed, tag, *key])``, where ``tag`` is a fixed integer per
purpose and ``key`` identifies the edge or node. Draws therefore do not
depend on iteration order, and a fixed seed reproduces output bit for bit
across runs and platforms.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    CovarianceNotPD,
    InvalidProbability,
    InvalidSize,
    ParseError,
    ShapeMismatch,
    ZeroVarianceColumn,
)
from .graph import Dag, default_names

# Substream tags (see module docstring).
_TAG_RANDOM_DAG = 0
_TAG_EDGE = 1
_TAG_PAIR = 2
_TAG_NOISE = 3
_TAG_TRIO = 4

FUNC_TAGS = ("square", "cosine")

_FUNCS = {"square": np.square, "cosine": np.cos}


def _rng(seed: int, tag: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), tag, *key])))


@dataclass(frozen=True)
class Dataset:
    """An n x p observation matrix with column names."""

    values: np.ndarray
    names: tuple
    standardized: bool = False

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise ShapeMismatch("values must be a 2-d matrix")
        if values.shape[0] < 2:
            raise ShapeMismatch("need at least two observations")
        if not np.isfinite(values).all():
            raise ValueError("values contain non-finite entries")
        names = tuple(self.names) if self.names else default_names(values.shape[1])
        if len(names) != values.shape[1]:
            raise ShapeMismatch("names length must equal column count")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "names", names)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    def column(self, j: int) -> np.ndarray:
        return self.values[:, j]


@dataclass(frozen=True)
class SemSpec:
    """A sampled structural equation system over a fixed DAG.

    Per edge (k, j): a function tag in {square, cosine}, a coefficient in
    [-3, -2] or [2, 3], and a shift in [-1, 1]. Nodes with more than one
    parent get a product interaction over a sampled parent pair. Errors are
    jointly Gaussian with covariance ``sigma``.
    """

    dag: Dag
    func_tags: dict
    alphas: dict
    shifts: dict
    interactions: dict  # node -> (k1, k2) pair, or None
    sigma: np.ndarray

    def __post_init__(self):
        p = self.dag.p
        sig = np.asarray(self.sigma, dtype=float)
        if sig.shape != (p, p):
            raise ShapeMismatch("sigma must be p x p")
        if not np.allclose(sig, sig.T):
            raise CovarianceNotPD("sigma must be symmetric")
        object.__setattr__(self, "sigma", sig)

    def to_json_dict(self, names=None, provenance=None) -> dict:
        names = tuple(names) if names is not None else default_names(self.dag.p)
        doc = {
            "p": self.dag.p,
            "names": list(names),
            "edges": [
                {
                    "from": k + 1,
                    "to": j + 1,
                    "func": self.func_tags[(k, j)],
                    "alpha": self.alphas[(k, j)],
                    "shift": self.shifts[(k, j)],
                }
                for k, j in self.dag.sorted_edges()
            ],
            "interactions": {
                str(j + 1): [k1 + 1, k2 + 1]
                for j, pair in sorted(self.interactions.items())
                if pair is not None
                for k1, k2 in [pair]
            },
            "sigma": self.sigma.tolist(),
        }
        if provenance is not None:
            doc["provenance"] = provenance
        return doc

    def write_json(self, path, names=None, provenance=None):
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(names, provenance), fh, indent=2, sort_keys=True)
            fh.write("\n")


def random_dag(p: int, s: float, rng_seed: int) -> Dag:
    """Upper-triangular random DAG: each pair j < k gets edge j -> k w.p. s."""
    if not (0.0 <= s <= 1.0):
        raise InvalidProbability(f"edge probability must lie in [0, 1], got {s}")
    if p < 1:
        raise InvalidSize("need at least one node")
    gen = _rng(rng_seed, _TAG_RANDOM_DAG)
    rows, cols = np.triu_indices(p, k=1)
    hits = gen.random(rows.size) < s
    edges = frozenset((int(j), int(k)) for j, k in zip(rows[hits], cols[hits]))
    return Dag(p, edges)


def hub_dag(p: int) -> Dag:
    """Star graph: node 0 is the single parent of every other node."""
    if p < 2:
        raise InvalidSize("hub graph needs at least two nodes")
    return Dag(p, frozenset((0, k) for k in range(1, p)))


def error_covariance(p: int) -> np.ndarray:
    """Variance 2 on the diagonal; consecutive pairs (2k-1, 2k) covary at 1."""
    sigma = 2.0 * np.eye(p)
    for k in range(p // 2):
        sigma[2 * k, 2 * k + 1] = 1.0
        sigma[2 * k + 1, 2 * k] = 1.0
    return sigma


def draw_sem_spec(dag: Dag, rng_seed: int) -> SemSpec:
    """Sample per-edge functions/coefficients/shifts and interaction pairs.

    Coefficients are uniform on [-3, -2] union [2, 3]; shifts uniform on
    [-1, 1]; function tags uniform over {square, cosine}. A node with more
    than one parent receives a unit-coefficient product interaction over a
    parent pair sampled without replacement.
    """
    func_tags, alphas, shifts = {}, {}, {}
    for k, j in dag.sorted_edges():
        gen = _rng(rng_seed, _TAG_EDGE, k, j)
        magnitude = gen.uniform(2.0, 3.0)
        sign = 1.0 if gen.uniform() < 0.5 else -1.0
        alphas[(k, j)] = sign * magnitude
        func_tags[(k, j)] = FUNC_TAGS[gen.integers(len(FUNC_TAGS))]
        shifts[(k, j)] = gen.uniform(-1.0, 1.0)
    interactions = {}
    for j in range(dag.p):
        pa = sorted(dag.parents(j))
        if len(pa) > 1:
            gen = _rng(rng_seed, _TAG_PAIR, j)
            k1, k2 = gen.choice(pa, size=2, replace=False)
            interactions[j] = (int(min(k1, k2)), int(max(k1, k2)))
        else:
            interactions[j] = None
    return SemSpec(
        dag=dag,
        func_tags=func_tags,
        alphas=alphas,
        shifts=shifts,
        interactions=interactions,
        sigma=error_covariance(dag.p),
    )


def sample(spec: SemSpec, n: int, rng_seed: int, errors: np.ndarray | None = None) -> Dataset:
    """Draw n observations from the structural system.

    Errors are N(0, sigma) via the Cholesky factor unless an explicit error
    matrix is supplied (the zero matrix gives the noise-free evaluation used
    by structural tests). Nodes are evaluated in topological order so parent
    values always exist.
    """
    if n < 1:
        raise InvalidSize("need at least one observation")
    p = spec.dag.p
    if errors is None:
        try:
            chol = np.linalg.cholesky(spec.sigma)
        except np.linalg.LinAlgError as exc:
            raise CovarianceNotPD("sigma admits no Cholesky factor") from exc
        eps = _rng(rng_seed, _TAG_NOISE).standard_normal((n, p)) @ chol.T
    else:
        eps = np.asarray(errors, dtype=float)
        if eps.shape != (n, p):
            raise ShapeMismatch(f"errors must be {n} x {p}")

    from .graph import topological_depths

    order = np.argsort(topological_depths(spec.dag).depths, kind="stable")
    values = np.empty((n, p))
    for j in order:
        total = eps[:, j].copy()
        for k in sorted(spec.dag.parents(j)):
            f = _FUNCS[spec.func_tags[(k, j)]]
            total += spec.alphas[(k, j)] * f(values[:, k] + spec.shifts[(k, j)])
        pair = spec.interactions.get(int(j))
        if pair is not None:
            total += values[:, pair[0]] * values[:, pair[1]]
        values[:, j] = total
    return Dataset(values=values, names=default_names(p))


def trio_truth() -> Dag:
    """True graph of the three-variable confounded fixture: one edge 1 -> 3."""
    return Dag(3, frozenset({(0, 2)}))


def sample_confounded_trio(n: int, rng_seed: int) -> Dataset:
    """Three-variable benchmark with a shared latent confounder.

    Two root variables are independent noise plus a common Gaussian
    confounder; the third adds the cosine of the first root on top of the
    same confounder. The population regression of the third column on the
    first two is cos(Y1) + Y1/3 + Y2/3, which makes this the standard
    fixture for checking that the deconfounding adjustment removes the
    spurious linear association with Y2.
    """
    if n < 1:
        raise InvalidSize("need at least one observation")
    draws = _rng(rng_seed, _TAG_TRIO).standard_normal((n, 4))
    e1, e2, e3, eta = draws.T
    y1 = e1 + eta
    y2 = e2 + eta
    y3 = np.cos(y1) + e3 + eta
    return Dataset(values=np.column_stack([y1, y2, y3]), names=default_names(3))


def standardize(data: Dataset) -> Dataset:
    """Column-wise (x - mean) / sd with the sample (n-1) standard deviation."""
    means = data.values.mean(axis=0)
    sds = data.values.std(axis=0, ddof=1)
    bad = np.nonzero(sds == 0.0)[0]
    if bad.size:
        raise ZeroVarianceColumn(f"column {data.names[bad[0]]} has zero variance")
    return Dataset(values=(data.values - means) / sds, names=data.names, standardized=True)


# ---------------------------------------------------------------------------
# Dataset CSV I/O: header row of names, one observation per row, '#' lines
# reserved for provenance comments.

def write_csv(data: Dataset, path, provenance: str | None = None):
    with open(path, "w") as fh:
        if provenance is not None:
            fh.write(f"# {provenance}\n")
        fh.write(",".join(data.names) + "\n")
        for row in data.values:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def read_csv(path) -> Dataset:
    names = None
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            cells = line.split(",")
            if names is None:
                names = tuple(cell.strip() for cell in cells)
                continue
            if len(cells) != len(names):
                raise ParseError(f"{path}: line {lineno}: expected {len(names)} cells, found {len(cells)}")
            try:
                rows.append([float(c) for c in cells])
            except ValueError as exc:
                raise ParseError(f"{path}: line {lineno}: {exc}") from exc
    if names is None or not rows:
        raise ParseError(f"{path}: no data rows")
    return Dataset(values=np.array(rows), names=names)
