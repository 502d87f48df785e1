"""Directed acyclic graphs: validation, topological depth, layer sets, interchange.

Nodes are 0-indexed integers internally. File formats (JSON, DOT, adjacency
CSV) use 1-based node ids and human-readable column names, matching the
convention of the data files they accompany.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import CycleDetected, NodeOutOfRange, NonSquareInput, ParseError


def default_names(p: int) -> tuple[str, ...]:
    return tuple(f"Y{j + 1}" for j in range(p))


@dataclass(frozen=True)
class Dag:
    """Directed acyclic graph over nodes 0..p-1.

    ``edges`` holds ordered pairs ``(k, j)`` meaning ``k -> j`` (k is a
    parent of j). The adjacency matrix ``U`` satisfies ``U[j, k] = 1`` iff
    j is a parent of k. Acyclicity is checked on construction; instances
    are immutable and safe to share across threads.
    """

    p: int
    edges: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if self.p < 0:
            raise ValueError("node count must be nonnegative")
        edges = frozenset((int(k), int(j)) for k, j in self.edges)
        object.__setattr__(self, "edges", edges)
        for k, j in edges:
            if not (0 <= k < self.p and 0 <= j < self.p):
                raise NodeOutOfRange(f"edge ({k}, {j}) outside 0..{self.p - 1}")
            if k == j:
                raise CycleDetected([k, k])
        _check_acyclic(self.p, edges)

    def parents(self, j: int) -> frozenset:
        self._check_node(j)
        return frozenset(k for k, c in self.edges if c == j)

    def children(self, k: int) -> frozenset:
        self._check_node(k)
        return frozenset(j for par, j in self.edges if par == k)

    def adjacency(self) -> np.ndarray:
        """0/1 matrix U with U[j, k] = 1 iff j is a parent of k."""
        u = np.zeros((self.p, self.p), dtype=int)
        for k, j in self.edges:
            u[k, j] = 1
        return u

    def sorted_edges(self) -> list:
        return sorted(self.edges)

    def _check_node(self, j: int):
        if not (0 <= j < self.p):
            raise NodeOutOfRange(f"node {j} outside 0..{self.p - 1}")


def _check_acyclic(p: int, edges: frozenset):
    """Kahn-style peeling; on failure report one cycle in deterministic order."""
    children = {j: [] for j in range(p)}
    indeg = [0] * p
    for k, j in sorted(edges):
        children[k].append(j)
        indeg[j] += 1
    queue = sorted(j for j in range(p) if indeg[j] == 0)
    removed = 0
    while queue:
        v = queue.pop(0)
        removed += 1
        for c in children[v]:
            indeg[c] -= 1
            if indeg[c] == 0:
                queue.append(c)
        queue.sort()
    if removed == p:
        return
    # Every remaining node has an in-edge from another remaining node; walk
    # parents (smallest first) until a node repeats, then emit that loop.
    remaining = {j for j in range(p) if indeg[j] > 0}
    parents = {j: sorted(k for k, c in edges if c == j and k in remaining) for j in remaining}
    start = min(remaining)
    trail = [start]
    seen = {start: 0}
    while True:
        nxt = parents[trail[-1]][0]
        if nxt in seen:
            cycle = trail[seen[nxt]:] + [nxt]
            cycle.reverse()  # report in edge direction
            raise CycleDetected(cycle)
        seen[nxt] = len(trail)
        trail.append(nxt)


def validate_acyclic(adjacency) -> Dag:
    """Build a Dag from a 0/1 adjacency matrix (U[j, k] = 1 iff j -> k).

    Raises NonSquareInput for a malformed matrix and CycleDetected (naming
    one offending cycle) if the relation is not acyclic.
    """
    u = np.asarray(adjacency)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise NonSquareInput(f"adjacency must be square, got shape {u.shape}")
    if not np.isin(u, (0, 1)).all():
        raise ValueError("adjacency entries must be 0 or 1")
    p = u.shape[0]
    edges = frozenset((int(k), int(j)) for k, j in zip(*np.nonzero(u)))
    return Dag(p, edges)


@dataclass(frozen=True)
class DepthProfile:
    """Per-node topological depths and the nested layer sets V(d).

    depth(j) is the length of the longest directed path from any root to j;
    V(d) = {j : depth(j) < d}, so V(0) is empty and V(d_max + 1) is all nodes.
    """

    depths: tuple
    d_max: int
    layers: tuple  # layers[d] == V(d), d = 0..d_max+1

    def layer(self, d: int) -> frozenset:
        return self.layers[d]


def topological_depths(dag: Dag) -> DepthProfile:
    """Longest root-to-node path lengths via dynamic programming over a peel order."""
    p = dag.p
    parents = [[] for _ in range(p)]
    children = [[] for _ in range(p)]
    indeg = [0] * p
    for k, j in dag.sorted_edges():
        parents[j].append(k)
        children[k].append(j)
        indeg[j] += 1
    depth = [0] * p
    queue = [j for j in range(p) if indeg[j] == 0]
    while queue:
        v = queue.pop(0)
        for c in children[v]:
            depth[c] = max(depth[c], depth[v] + 1)
            indeg[c] -= 1
            if indeg[c] == 0:
                queue.append(c)
    d_max = max(depth) if p else 0
    layers = tuple(
        frozenset(j for j in range(p) if depth[j] < d) for d in range(d_max + 2)
    )
    return DepthProfile(depths=tuple(depth), d_max=d_max, layers=layers)


def ancestor_closure(dag: Dag, j: int) -> frozenset:
    """All nodes with a directed path into j."""
    if not (0 <= j < dag.p):
        raise NodeOutOfRange(f"node {j} outside 0..{dag.p - 1}")
    parents = [[] for _ in range(dag.p)]
    for k, c in dag.edges:
        parents[c].append(k)
    seen = set()
    stack = list(parents[j])
    while stack:
        v = stack.pop()
        if v not in seen:
            seen.add(v)
            stack.extend(parents[v])
    return frozenset(seen)


# ---------------------------------------------------------------------------
# Interchange formats. JSON/DOT/CSV use 1-based ids and column names.

def to_json_dict(dag: Dag, names=None, provenance=None) -> dict:
    names = tuple(names) if names is not None else default_names(dag.p)
    if len(names) != dag.p:
        raise ValueError("names length must equal node count")
    doc = {
        "p": dag.p,
        "edges": [[k + 1, j + 1] for k, j in dag.sorted_edges()],
        "names": list(names),
    }
    if provenance is not None:
        doc["provenance"] = provenance
    return doc


def from_json_dict(doc: dict) -> tuple[Dag, tuple]:
    try:
        p = int(doc["p"])
        edges = frozenset((int(k) - 1, int(j) - 1) for k, j in doc["edges"])
        names = tuple(doc.get("names") or default_names(p))
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed graph document: {exc}") from exc
    return Dag(p, edges), names


def write_json(dag: Dag, path, names=None, provenance=None):
    with open(path, "w") as fh:
        json.dump(to_json_dict(dag, names, provenance), fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_json(path) -> tuple[Dag, tuple]:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: {exc}") from exc
    return from_json_dict(doc)


def to_dot(dag: Dag, names=None) -> str:
    """DOT digraph with one line per directed edge."""
    names = tuple(names) if names is not None else default_names(dag.p)
    lines = ["digraph {"]
    for j in range(dag.p):
        lines.append(f'  "{names[j]}";')
    for k, j in dag.sorted_edges():
        lines.append(f'  "{names[k]}" -> "{names[j]}";')
    lines.append("}")
    return "\n".join(lines) + "\n"


def write_dot(dag: Dag, path, names=None):
    with open(path, "w") as fh:
        fh.write(to_dot(dag, names))


def read_adjacency_csv(path) -> tuple[Dag, tuple]:
    """0/1 adjacency matrix with a header row of column names."""
    with open(path) as fh:
        rows = [line.strip() for line in fh if line.strip() and not line.startswith("#")]
    if not rows:
        raise ParseError(f"{path}: empty file")
    names = tuple(cell.strip() for cell in rows[0].split(","))
    p = len(names)
    if len(rows) - 1 != p:
        raise ParseError(f"{path}: expected {p} data rows, found {len(rows) - 1}")
    u = np.zeros((p, p), dtype=int)
    for i, row in enumerate(rows[1:]):
        cells = row.split(",")
        if len(cells) != p:
            raise ParseError(f"{path}: line {i + 2}: expected {p} cells, found {len(cells)}")
        for k, cell in enumerate(cells):
            try:
                u[i, k] = int(cell)
            except ValueError as exc:
                raise ParseError(f"{path}: line {i + 2}: non-integer cell {cell!r}") from exc
    return validate_acyclic(u), names
