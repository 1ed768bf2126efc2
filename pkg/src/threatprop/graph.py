"""Graph representation, matrix views, and observation containers.

Vertices are dense integer indices ``0..n-1``; external string identifiers are
handled by the I/O layer and carried here only as an optional label table.
Edges are stored as individual interaction records so that repeated,
timestamped contacts between the same pair survive construction; the
adjacency view coalesces them by weight summation.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, NamedTuple, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.sparse import csgraph

from .errors import DisconnectedGraphError, EigenSolverError, GraphError, ObservationError

logger = logging.getLogger(__name__)

# Dense eigensolvers below this order: deterministic and fast at test scale.
DENSE_EIG_LIMIT = 256
CONNECTIVITY_TOL = 1e-10

LAPLACIAN_KINDS = ("kirchhoff", "normalized", "generalized")


class Interaction(NamedTuple):
    """One edge record: endpoints, weight, and an optional timestamp pair.

    Timestamps are in abstract time units; ``t_u`` is the event time seen at
    ``u`` and ``t_v`` the one seen at ``v``.  Either both are set or neither.
    """

    u: int
    v: int
    weight: float = 1.0
    t_u: float | None = None
    t_v: float | None = None

    @property
    def timestamped(self) -> bool:
        return self.t_u is not None


@dataclass(frozen=True)
class Graph:
    """Immutable weighted graph.

    All matrix views are built lazily and cached; the object is safe to share
    across worker threads once constructed.
    """

    n: int
    interactions: tuple[Interaction, ...]
    directed: bool = False
    labels: tuple[str, ...] | None = None

    @cached_property
    def adjacency(self) -> sp.csr_matrix:
        """Coalesced weighted adjacency; symmetric for undirected graphs."""
        us = np.fromiter((e.u for e in self.interactions), dtype=np.int64, count=len(self.interactions))
        vs = np.fromiter((e.v for e in self.interactions), dtype=np.int64, count=len(self.interactions))
        ws = np.fromiter((e.weight for e in self.interactions), dtype=np.float64, count=len(self.interactions))
        if self.directed:
            rows, cols, vals = us, vs, ws
        else:
            rows = np.concatenate([us, vs])
            cols = np.concatenate([vs, us])
            vals = np.concatenate([ws, ws])
        a = sp.coo_matrix((vals, (rows, cols)), shape=(self.n, self.n))
        return a.tocsr()

    @cached_property
    def degrees(self) -> np.ndarray:
        """Weighted degree vector d = A @ 1 (out-degrees when directed)."""
        return np.asarray(self.adjacency.sum(axis=1)).ravel()

    @cached_property
    def neighbor_counts(self) -> np.ndarray:
        """Unweighted degree: number of distinct neighbors per vertex."""
        a = self.adjacency.tocsr()
        return np.diff(a.indptr).astype(np.float64)

    @cached_property
    def interaction_weight(self) -> np.ndarray:
        """Per-vertex total interaction weight (each record counted once)."""
        w = np.zeros(self.n)
        for e in self.interactions:
            w[e.u] += e.weight
            if e.v != e.u:
                w[e.v] += e.weight
        return w

    @property
    def size(self) -> int:
        return len(self.interactions)

    def is_connected(self) -> bool:
        if self.n == 0:
            return False
        ncomp, _ = csgraph.connected_components(
            self.adjacency, directed=self.directed, connection="strong" if self.directed else "weak"
        )
        return ncomp == 1

    def component_of(self, vertices: Sequence[int]) -> np.ndarray:
        """Boolean mask of vertices reachable from any of ``vertices``
        (treating edges as undirected)."""
        _, comp = csgraph.connected_components(self.adjacency, directed=False)
        hit = np.unique(comp[np.asarray(vertices, dtype=int)])
        return np.isin(comp, hit)


def build_graph(
    edges: Iterable[tuple],
    directed: bool = False,
    n: int | None = None,
    allow_self_loops: bool = False,
    labels: Sequence[str] | None = None,
) -> Graph:
    """Build a :class:`Graph` from edge rows.

    Each row is ``(u, v, weight)`` or ``(u, v, weight, t_u, t_v)`` with
    integer endpoints.  Duplicate static undirected edges are merged by
    weight summation and reported; timestamped records are kept as distinct
    interactions.

    Raises
    ------
    GraphError
        On an empty edge list with no vertex count, negative weights,
        out-of-range indices, self-loops (unless allowed), or a half-set
        timestamp pair.
    """
    records: list[Interaction] = []
    max_idx = -1
    for row in edges:
        if len(row) == 3:
            u, v, w = row
            t_u = t_v = None
        elif len(row) == 5:
            u, v, w, t_u, t_v = row
        else:
            raise GraphError(f"edge row must have 3 or 5 fields, got {len(row)}")
        u, v = int(u), int(v)
        w = float(w)
        if u < 0 or v < 0:
            raise GraphError(f"negative vertex index in edge ({u}, {v})")
        if w < 0:
            raise GraphError(f"negative weight {w} on edge ({u}, {v})")
        if u == v and not allow_self_loops:
            raise GraphError(f"self-loop at vertex {u} (pass allow_self_loops=True to permit)")
        if (t_u is None) != (t_v is None):
            raise GraphError(f"edge ({u}, {v}) has a half-set timestamp pair")
        if t_u is not None:
            t_u, t_v = float(t_u), float(t_v)
        max_idx = max(max_idx, u, v)
        records.append(Interaction(u, v, w, t_u, t_v))

    if n is None:
        n = max_idx + 1
    if n <= 0:
        raise GraphError("empty graph")
    if max_idx >= n:
        raise GraphError(f"vertex index {max_idx} out of range for n={n}")

    # Merge duplicate static records of the same (unordered) pair; repeated
    # timestamped interactions are legitimate multiplicity.
    merged: dict[tuple[int, int], int] = {}
    out: list[Interaction] = []
    dupes = 0
    for rec in records:
        if rec.timestamped:
            out.append(rec)
            continue
        key = (rec.u, rec.v) if directed or rec.u <= rec.v else (rec.v, rec.u)
        if key in merged:
            i = merged[key]
            out[i] = out[i]._replace(weight=out[i].weight + rec.weight)
            dupes += 1
        else:
            merged[key] = len(out)
            out.append(rec)
    if dupes:
        logger.warning("merged %d duplicate static edge records by weight summation", dupes)

    if labels is not None:
        labels = tuple(str(s) for s in labels)
        if len(labels) != n:
            raise GraphError(f"label table has {len(labels)} entries for n={n}")

    return Graph(n=n, interactions=tuple(out), directed=directed, labels=labels)


def incidence(g: Graph) -> sp.csc_matrix:
    """Oriented incidence matrix, one column per coalesced edge.

    The initial vertex of each edge gets ``-sqrt(w)`` and the terminal vertex
    ``+sqrt(w)``, so that ``B @ B.T`` reproduces the Kirchhoff matrix for
    undirected graphs (stored orientation is used as the arbitrary one).
    """
    seen: dict[tuple[int, int], float] = {}
    for e in g.interactions:
        key = (e.u, e.v) if g.directed or e.u <= e.v else (e.v, e.u)
        seen[key] = seen.get(key, 0.0) + e.weight
    rows, cols, vals = [], [], []
    for j, ((u, v), w) in enumerate(seen.items()):
        r = np.sqrt(w)
        rows += [u, v]
        cols += [j, j]
        vals += [-r, +r]
    return sp.csc_matrix((vals, (rows, cols)), shape=(g.n, len(seen)))


def laplacian(g: Graph, kind: str = "kirchhoff", psi: np.ndarray | None = None) -> sp.csr_matrix:
    """Return a Laplacian view of the graph.

    ``kind`` selects the Kirchhoff matrix ``Q = D - A``, the normalized
    ``L = D^{-1/2} Q D^{-1/2}``, or the generalized ``I - D^{-1} A``.  With
    ``psi`` given (per-vertex diffusion probabilities), the generalized kind
    becomes ``I - diag(psi) D^{-1} A``.
    """
    if kind not in LAPLACIAN_KINDS:
        raise GraphError(f"unknown laplacian kind {kind!r}")
    if psi is not None and kind != "generalized":
        raise GraphError("per-vertex prior applies to the generalized kind only")
    a = g.adjacency
    d = g.degrees
    if kind == "kirchhoff":
        return (sp.diags(d) - a).tocsr()
    if np.any(d <= 0):
        isolated = int(np.argmin(d))
        raise GraphError(f"zero degree at vertex {isolated}; {kind} laplacian undefined")
    if kind == "normalized":
        dinv = sp.diags(1.0 / np.sqrt(d))
        return (dinv @ (sp.diags(d) - a) @ dinv).tocsr()
    t = sp.diags(1.0 / d) @ a
    if psi is not None:
        psi = np.asarray(psi, dtype=float)
        if psi.shape != (g.n,):
            raise GraphError("prior vector length must equal vertex count")
        t = sp.diags(psi) @ t
    return (sp.identity(g.n, format="csr") - t).tocsr()


def _fix_sign(vec: np.ndarray) -> np.ndarray:
    """Resolve eigenvector sign: make the maximum-magnitude entry positive."""
    i = int(np.argmax(np.abs(vec)))
    return vec if vec[i] > 0 else -vec


def fiedler(g: Graph, residual_tol: float = 1e-8) -> tuple[float, np.ndarray]:
    """Second-smallest eigenpair of the Kirchhoff matrix.

    Raises :class:`DisconnectedGraphError` ("not connected") when the value
    degenerates to zero, and :class:`EigenSolverError` when the eigenpair
    fails its residual bound.
    """
    if not g.is_connected():
        raise DisconnectedGraphError("not connected: algebraic connectivity is zero")
    q = laplacian(g, "kirchhoff")
    if g.n < DENSE_EIG_LIMIT:
        w, v = np.linalg.eigh(q.toarray())
        value, vec = float(w[1]), v[:, 1]
    else:
        # Deflate the constant kernel vector by shifting it above the spectrum,
        # then take the two smallest of the shifted operator.
        shift = float(q.diagonal().max()) * 2.0 + 1.0
        ones = np.full(g.n, 1.0 / np.sqrt(g.n))

        def matvec(x):
            return q @ x + shift * ones * (ones @ x)

        op = spla.LinearOperator((g.n, g.n), matvec=matvec, dtype=float)
        v0 = np.cos(np.arange(g.n, dtype=float))  # fixed start for determinism
        w, v = spla.eigsh(op, k=1, which="SA", v0=v0, tol=1e-12)
        value, vec = float(w[0]), v[:, 0]
        vec = vec - ones * (ones @ vec)
        vec /= np.linalg.norm(vec)
    res = np.linalg.norm(q @ vec - value * vec)
    if res > residual_tol * max(1.0, abs(value)):
        raise EigenSolverError(f"fiedler residual {res:.3e} exceeds {residual_tol:.1e}")
    return value, _fix_sign(vec)


class Observation(NamedTuple):
    """A cued vertex with its boundary threat probability and optional time."""

    vertex: int
    p: float
    t: float | None = None


@dataclass(frozen=True)
class ObservationSet:
    """Validated collection of observations used as boundary conditions."""

    entries: tuple[Observation, ...]

    def __post_init__(self):
        if not self.entries:
            raise ObservationError("observation set is empty")
        seen = set()
        for e in self.entries:
            if not 0.0 <= e.p <= 1.0:
                raise ObservationError(f"boundary probability {e.p} outside [0, 1]")
            key = (e.vertex, e.t)
            if key in seen:
                raise ObservationError(f"duplicate observation at {key}")
            seen.add(key)

    @classmethod
    def of(cls, *pairs: tuple) -> "ObservationSet":
        """Build from ``(vertex, p)`` or ``(vertex, p, t)`` tuples."""
        return cls(tuple(Observation(int(v), float(p), *rest) for v, p, *rest in pairs))

    @classmethod
    def from_measurements(cls, measurements: Iterable[tuple], model="ideal") -> "ObservationSet":
        """Convert raw measurements to boundary probabilities.

        The ideal model equates measurement and threat; a mapping gives a
        custom likelihood table from measurement value to threat probability.
        """
        entries = []
        for v, z, *rest in measurements:
            p = float(z) if model == "ideal" else float(model[z])
            entries.append(Observation(int(v), p, *rest))
        return cls(tuple(entries))

    @property
    def vertices(self) -> np.ndarray:
        return np.fromiter((e.vertex for e in self.entries), dtype=np.int64, count=len(self.entries))

    @property
    def values(self) -> np.ndarray:
        return np.fromiter((e.p for e in self.entries), dtype=np.float64, count=len(self.entries))

    def validate_against(self, g: Graph) -> None:
        bad = [e.vertex for e in self.entries if not 0 <= e.vertex < g.n]
        if bad:
            raise ObservationError(f"observed vertices {bad} out of range for n={g.n}")
        spatial = {}
        for e in self.entries:
            if e.vertex in spatial and spatial[e.vertex] != e.p and e.t is None:
                raise ObservationError(f"conflicting untimed observations at vertex {e.vertex}")
            spatial.setdefault(e.vertex, e.p)
