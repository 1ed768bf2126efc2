"""A-priori per-vertex diffusion probabilities.

Each model produces a vector ``psi`` with entries in ``(0, 1]``: the
probability that threat survives a visit to the vertex instead of being
absorbed into the non-threat state.  Supported kinds:

* ``uniform`` -- constant ``psi0``;
* ``dwtp`` -- degree weighted, ``psi_v = 1 / deg(v)``;
* ``lwtp`` -- length weighted, constant ``2**(-1/l)`` with ``l`` the graph's
  average shortest-path length;
* ``bfs`` -- inversely proportional to hop distance from the observed set.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csgraph

from .errors import DisconnectedGraphError, GraphError, ObservationError
from .graph import Graph, ObservationSet

logger = logging.getLogger(__name__)

EULER_GAMMA = 0.5772156649015329

PRIOR_KINDS = ("uniform", "dwtp", "lwtp", "bfs")


@dataclass(frozen=True)
class PriorSpec:
    """Configuration of a diffusion-probability model.

    ``floor`` keeps the absorbing chain non-degenerate; ``exact_path_length_limit``
    is the order above which the average path length falls back to the
    closed-form estimate for sparse random graphs.
    """

    kind: str = "dwtp"
    psi0: float = 1.0
    floor: float = 1e-6
    exact_path_length_limit: int = 2000

    def __post_init__(self):
        if self.kind not in PRIOR_KINDS:
            raise GraphError(f"unknown prior kind {self.kind!r}")
        if not 0.0 < self.psi0 <= 1.0:
            raise GraphError("uniform prior value must lie in (0, 1]")


def hop_distances(g: Graph, sources) -> np.ndarray:
    """Minimum hop count from any source vertex, ``inf`` where unreachable."""
    d = csgraph.shortest_path(g.adjacency, method="D", unweighted=True, directed=False, indices=sources)
    if d.ndim == 2:
        d = d.min(axis=0)
    return d


def average_path_length(g: Graph) -> float:
    """Mean shortest-path hop distance over all unordered vertex pairs."""
    if g.n < 2:
        raise GraphError("average path length needs at least two vertices")
    d = csgraph.shortest_path(g.adjacency, method="D", unweighted=True, directed=False)
    iu = np.triu_indices(g.n, k=1)
    vals = d[iu]
    if np.isinf(vals).any():
        raise DisconnectedGraphError("average path length undefined on a disconnected graph")
    return float(vals.mean())


def er_average_path_length(n: int) -> float:
    """Closed-form average path length of a sparse random graph of order n.

    Valid for edge probability near ``log(n)/n`` (the almost-sure
    connectivity regime).
    """
    return (math.log(n) - EULER_GAMMA) / math.log(math.log(n)) + 0.5


def compute_prior(g: Graph, spec: PriorSpec, obs: ObservationSet | None = None) -> np.ndarray:
    """Evaluate a diffusion prior over all vertices.

    The ``bfs`` kind requires a nonempty observation set and errors on
    vertices unreachable from it.
    """
    if spec.kind == "uniform":
        psi = np.full(g.n, spec.psi0)
    elif spec.kind == "dwtp":
        deg = g.neighbor_counts
        if np.any(deg <= 0):
            raise GraphError("degree-weighted prior undefined at an isolated vertex")
        psi = 1.0 / deg
    elif spec.kind == "lwtp":
        if g.n > spec.exact_path_length_limit:
            l = er_average_path_length(g.n)
            logger.warning("order %d above exact limit %d: using closed-form path length %.4f",
                           g.n, spec.exact_path_length_limit, l)
        else:
            l = average_path_length(g)
        psi = np.full(g.n, 2.0 ** (-1.0 / l))
    else:  # bfs
        if obs is None:
            raise ObservationError("distance-weighted prior requires an observation set")
        obs.validate_against(g)
        dist = hop_distances(g, obs.vertices)
        if np.isinf(dist).any():
            bad = int(np.flatnonzero(np.isinf(dist))[0])
            raise DisconnectedGraphError(f"vertex {bad} disconnected from cue")
        psi = np.ones(g.n)
        far = dist >= 1
        psi[far] = 1.0 / dist[far]
    return np.clip(psi, spec.floor, 1.0)
