"""
Time-varying directed communication graphs and their weight matrices.

Edges are ordered pairs ``(j, i)`` meaning node ``j`` transmits to node
``i``. Weight indexing follows the same convention: ``A[i, j]`` is the
weight node ``i`` applies to the value pulled from ``j``, and ``B[i, j]``
is the share of node ``j``'s mass pushed to ``i``. Hence
``A[i, j] > 0  <=>  (j, i) in E  <=>  B[i, j] > 0``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import MissingSelfLoop

__all__ = [
    "DiGraph",
    "GraphSchedule",
    "WeightSchedule",
    "ValidationReport",
    "canonical_schedule",
    "check_connectivity",
    "is_strongly_connected",
    "uniform_row_weights",
    "uniform_col_weights",
    "uniform_weights",
    "validate_weights",
    "schedule_to_dict",
    "schedule_from_dict",
    "save_schedule",
    "load_schedule",
    "weights_to_dict",
    "weights_from_dict",
]


@dataclass(frozen=True)
class DiGraph:
    """Directed graph on nodes ``0 .. m-1``.

    Self-loops are always added, so every node hears itself.
    """

    m: int
    edges: frozenset

    def __post_init__(self):
        edges = set()
        for j, i in self.edges:
            j, i = int(j), int(i)
            if not (0 <= j < self.m and 0 <= i < self.m):
                raise ValueError(f"edge ({j}, {i}) out of range for m={self.m}")
            edges.add((j, i))
        edges.update((i, i) for i in range(self.m))
        object.__setattr__(self, "edges", frozenset(edges))

    def adjacency(self) -> np.ndarray:
        """Boolean matrix with ``adj[i, j]`` true iff ``(j, i)`` is an edge."""
        adj = np.zeros((self.m, self.m), dtype=bool)
        for j, i in self.edges:
            adj[i, j] = True
        return adj

    def in_neighbors(self, i):
        return sorted(j for j, t in self.edges if t == i)

    def out_neighbors(self, j):
        return sorted(i for s, i in self.edges if s == j)

    def sorted_edges(self):
        """Non-self-loop edges in sorted order."""
        return sorted(e for e in self.edges if e[0] != e[1])


@dataclass(frozen=True)
class GraphSchedule:
    """Periodic sequence of graphs: ``G(k) = graphs[k % period]``."""

    graphs: tuple
    connectivity_window: int

    def __post_init__(self):
        object.__setattr__(self, "graphs", tuple(self.graphs))
        if not self.graphs:
            raise ValueError("schedule needs at least one graph")
        ms = {g.m for g in self.graphs}
        if len(ms) != 1:
            raise ValueError("all graphs must share the node count")
        if self.connectivity_window < 1:
            raise ValueError("connectivity_window must be positive")

    @property
    def m(self):
        return self.graphs[0].m

    @property
    def period(self):
        return len(self.graphs)

    def graph(self, k) -> DiGraph:
        return self.graphs[k % self.period]


@dataclass(frozen=True)
class WeightSchedule:
    """Periodic row-stochastic ``A(k)`` and column-stochastic ``B(k)``."""

    row: tuple
    col: tuple

    def __post_init__(self):
        row = tuple(np.array(a, dtype=float) for a in self.row)
        col = tuple(np.array(b, dtype=float) for b in self.col)
        if len(row) != len(col) or not row:
            raise ValueError("row and column schedules must have the same nonzero period")
        for mat in row + col:
            mat.setflags(write=False)
        object.__setattr__(self, "row", row)
        object.__setattr__(self, "col", col)

    @property
    def period(self):
        return len(self.row)

    @property
    def m(self):
        return self.row[0].shape[0]

    def A(self, k) -> np.ndarray:
        return self.row[k % self.period]

    def B(self, k) -> np.ndarray:
        return self.col[k % self.period]

    @property
    def positivity_floor(self) -> float:
        """Smallest positive entry over one period of both schedules."""
        vals = [mat[mat > 0].min() for mat in self.row + self.col]
        return float(min(vals))


def is_strongly_connected(adj: np.ndarray) -> bool:
    """Strong connectivity from a boolean adjacency matrix (``adj[i, j]``: j -> i)."""
    m = adj.shape[0]
    for mat in (adj, adj.T):
        seen = np.zeros(m, dtype=bool)
        seen[0] = True
        frontier = [0]
        while frontier:
            j = frontier.pop()
            # successors of j: nodes i with mat[i, j]
            for i in np.flatnonzero(mat[:, j] & ~seen):
                seen[i] = True
                frontier.append(int(i))
        if not seen.all():
            return False
    return True


def check_connectivity(sched: GraphSchedule, B: int) -> bool:
    """True iff every window of ``B`` consecutive graphs has a strongly
    connected union. Checking ``period`` offsets covers all windows."""
    if B < 1:
        raise ValueError("B must be >= 1")
    adjs = [g.adjacency() for g in sched.graphs]
    for k in range(sched.period):
        union = np.zeros_like(adjs[0])
        for t in range(B):
            union |= adjs[(k + t) % sched.period]
        if not is_strongly_connected(union):
            return False
    return True


# Fixed period-4 schedule on six nodes. The ring 0->1->2->3->4->5->0 is
# spread over the four graphs and three chords shorten mixing paths.
_CANONICAL_EDGES = (
    ((0, 1), (3, 4), (5, 2)),
    ((1, 2), (4, 5), (2, 0)),
    ((2, 3), (5, 0), (1, 4)),
    ((0, 3), (3, 1)),
)


def canonical_schedule() -> GraphSchedule:
    """The built-in ``canonical4`` schedule: 6 nodes, period 4, B = 4."""
    graphs = [DiGraph(6, frozenset(edges)) for edges in _CANONICAL_EDGES]
    return GraphSchedule(tuple(graphs), connectivity_window=4)


def uniform_row_weights(g: DiGraph) -> np.ndarray:
    """``A[i, j] = 1 / |N_i^in|`` on edges ``(j, i)``, zero elsewhere."""
    adj = g.adjacency()
    indeg = adj.sum(axis=1)
    if np.any(indeg == 0):
        raise MissingSelfLoop(f"nodes {np.flatnonzero(indeg == 0).tolist()} have in-degree 0")
    return np.where(adj, 1.0 / indeg[:, None], 0.0)


def uniform_col_weights(g: DiGraph) -> np.ndarray:
    """``B[i, j] = 1 / |N_j^out|`` on edges ``(j, i)``, zero elsewhere."""
    adj = g.adjacency()
    outdeg = adj.sum(axis=0)
    if np.any(outdeg == 0):
        raise MissingSelfLoop(f"nodes {np.flatnonzero(outdeg == 0).tolist()} have out-degree 0")
    return np.where(adj, 1.0 / outdeg[None, :], 0.0)


def uniform_weights(sched: GraphSchedule) -> WeightSchedule:
    return WeightSchedule(
        tuple(uniform_row_weights(g) for g in sched.graphs),
        tuple(uniform_col_weights(g) for g in sched.graphs),
    )


@dataclass
class PeriodCheck:
    k: int
    row_sum_dev: float
    col_sum_dev: float
    min_positive: float
    pattern_mismatch: list
    self_loops: bool

    def ok(self, floor, tol):
        return (
            self.row_sum_dev <= tol
            and self.col_sum_dev <= tol
            and self.min_positive >= floor
            and not self.pattern_mismatch
            and self.self_loops
        )


@dataclass
class ValidationReport:
    checks: list
    eta: float
    tol: float
    ok: bool
    messages: list = field(default_factory=list)

    def __str__(self):
        lines = [f"weights ok={self.ok} eta={self.eta:.6g}"]
        lines += [f"  {m}" for m in self.messages]
        return "\n".join(lines)


def validate_weights(ws: WeightSchedule, sched: GraphSchedule, tol=1e-12, floor=None) -> ValidationReport:
    """Check stochasticity, sparsity, self-loops and uniform positivity.

    The positivity floor defaults to the smallest realized positive weight,
    so the check only fails on a zero or negative entry unless ``floor`` is
    given explicitly. Never raises on bad weights.
    """
    checks, messages = [], []
    period = max(ws.period, sched.period)
    if ws.m != sched.m:
        return ValidationReport([], 0.0, tol, False, [f"weights are {ws.m}x{ws.m} but graph has m={sched.m}"])
    eta = ws.positivity_floor
    floor = eta if floor is None else floor
    if not eta > 0:
        messages.append(f"nonpositive floor {eta}")
    for k in range(period):
        A, B, g = ws.A(k), ws.B(k), sched.graph(k)
        adj = g.adjacency()
        mismatch = []
        for name, mat in (("A", A), ("B", B)):
            bad = np.argwhere((mat > 0) != adj)
            mismatch += [(name, int(i), int(j)) for i, j in bad]
            neg = np.argwhere(mat < 0)
            mismatch += [(name, int(i), int(j)) for i, j in neg if adj[i, j]]
        pos = np.concatenate([A[A > 0], B[B > 0]])
        chk = PeriodCheck(
            k=k,
            row_sum_dev=float(np.max(np.abs(A.sum(axis=1) - 1.0))),
            col_sum_dev=float(np.max(np.abs(B.sum(axis=0) - 1.0))),
            min_positive=float(pos.min()) if pos.size else 0.0,
            pattern_mismatch=mismatch,
            self_loops=bool(np.all(np.diag(A) > 0) and np.all(np.diag(B) > 0)),
        )
        checks.append(chk)
        if chk.row_sum_dev > tol:
            messages.append(f"k={k}: A row-sum deviation {chk.row_sum_dev:.3g}")
        if chk.col_sum_dev > tol:
            messages.append(f"k={k}: B column-sum deviation {chk.col_sum_dev:.3g}")
        if chk.min_positive < floor:
            messages.append(f"k={k}: min positive weight {chk.min_positive:.3g} < {floor:.3g}")
        if mismatch:
            messages.append(f"k={k}: {len(mismatch)} entries off the edge pattern")
        if not chk.self_loops:
            messages.append(f"k={k}: missing self-loop weight")
    ok = eta > 0 and all(c.ok(floor, tol) for c in checks)
    return ValidationReport(checks, eta, tol, ok, messages)


# --------------------------------------------------------------------------
# JSON formats

def schedule_to_dict(sched: GraphSchedule) -> dict:
    return {
        "format": "pushpull-schedule/1",
        "m": sched.m,
        "period": sched.period,
        "connectivity_window": sched.connectivity_window,
        "graphs": [[list(e) for e in g.sorted_edges()] for g in sched.graphs],
    }


def schedule_from_dict(doc: dict) -> GraphSchedule:
    graphs = [DiGraph(doc["m"], frozenset(tuple(e) for e in edges)) for edges in doc["graphs"]]
    if "period" in doc and doc["period"] != len(graphs):
        raise ValueError(f"declared period {doc['period']} but {len(graphs)} graphs given")
    return GraphSchedule(tuple(graphs), doc.get("connectivity_window", len(graphs)))


def save_schedule(sched: GraphSchedule, path) -> None:
    with open(path, "w") as fh:
        json.dump(schedule_to_dict(sched), fh, indent=1)
        fh.write("\n")


def load_schedule(path) -> GraphSchedule:
    with open(path) as fh:
        return schedule_from_dict(json.load(fh))


def weights_to_dict(ws: WeightSchedule) -> dict:
    return {
        "format": "pushpull-weights/1",
        "row": [a.tolist() for a in ws.row],
        "col": [b.tolist() for b in ws.col],
    }


def weights_from_dict(doc: dict) -> WeightSchedule:
    return WeightSchedule(tuple(doc["row"]), tuple(doc["col"]))
