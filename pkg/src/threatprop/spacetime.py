"""Space-time threat propagation.

The timestamped graph is lifted to a graph on (vertex, time-bin) pairs.  Each
timestamped interaction between ``u`` and ``v`` contributes one sparse column
per direction: threat received at ``v`` near the interaction's ``v``-side
time couples to the threat at ``u`` in the bin of the interaction's
``u``-side time, weighted by the exponential kernel ``exp(-lam * |dt|)``.
Untimed edges enter either as identity blocks (instantaneous contact at
every bin) or as uniform rank-one blocks (a time clique, the zero-rate
limit of the kernel).

The coordination prior measures how temporally aligned a vertex's
interactions are: it is the kernel mass arriving at a (vertex, bin) divided
by the vertex's total interaction weight, and equals one exactly when all
interactions hit the same discretized time.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ._solve import solve_boundary_value
from .errors import GraphError, ObservationError
from .graph import Graph, ObservationSet

logger = logging.getLogger(__name__)

MODES = ("kernel", "instant", "clique")
VARIANTS = ("weighted", "coordinated", "coordinated-spatial")

# Kernel entries below this are dropped to preserve sparsity (not renormalized).
KERNEL_TRUNCATION = 1e-4

# Default bin width keeps per-bin kernel decay below one percent.
DT_ACCURACY = 0.02

# Lifted systems beyond this order are almost certainly a misconfigured grid.
MAX_ORDER = 20_000_000


@dataclass(frozen=True)
class TimeGrid:
    """Uniform discretization of the observation horizon.

    Bin ``k`` covers ``[t0 + k*dt, t0 + (k+1)*dt)``; timestamps snap to the
    covering bin's center.
    """

    t0: float
    dt: float
    nt: int

    def __post_init__(self):
        if self.dt <= 0:
            raise GraphError("bin width must be positive")
        if self.nt < 1:
            raise GraphError("grid needs at least one bin")

    @property
    def centers(self) -> np.ndarray:
        return self.t0 + (np.arange(self.nt) + 0.5) * self.dt

    @property
    def end(self) -> float:
        return self.t0 + self.nt * self.dt

    def bin_of(self, t: float) -> int:
        # Half-bin slack at the ends absorbs roundoff in caller-supplied times.
        if t < self.t0 - 0.5 * self.dt or t > self.end + 0.5 * self.dt:
            raise GraphError(f"timestamp {t} outside grid [{self.t0}, {self.end})")
        return int(np.clip(int((t - self.t0) // self.dt), 0, self.nt - 1))

    @classmethod
    def cover(cls, times: np.ndarray, dt: float | None = None, lam: float = 1.0, nt: int | None = None) -> "TimeGrid":
        """Grid spanning the observed times.

        Without an explicit ``dt``, the width is chosen so the slowest kernel
        loses under one percent per bin (``dt <= DT_ACCURACY / lam``), unless
        a bin count ``nt`` is forced.
        """
        times = np.asarray(times, dtype=float)
        if times.size == 0:
            raise GraphError("no timestamps to cover")
        lo, hi = float(times.min()), float(times.max())
        span = max(hi - lo, 1e-9)
        if nt is not None:
            return cls(t0=lo, dt=span / nt * (1 + 1e-9), nt=nt)
        if dt is None:
            dt = DT_ACCURACY / lam
        n_bins = max(1, int(np.ceil(span / dt + 1e-9)))
        return cls(t0=lo, dt=dt, nt=n_bins)


def default_rate(g: Graph, horizon: float | None = None) -> float:
    """Decay rate with half-life at the data's natural timescale.

    Uses ``ln 2 / median positive inter-interaction gap`` pooled over
    vertices; falls back to the horizon scale when gaps degenerate.
    """
    per_vertex: dict[int, list[float]] = {}
    for e in g.interactions:
        if e.timestamped:
            per_vertex.setdefault(e.u, []).append(e.t_u)
            per_vertex.setdefault(e.v, []).append(e.t_v)
    gaps = []
    for ts in per_vertex.values():
        ts = np.sort(np.asarray(ts))
        d = np.diff(ts)
        gaps.extend(d[d > 0].tolist())
    if gaps:
        return float(np.log(2.0) / np.median(gaps))
    if horizon:
        return 1.0 / horizon
    raise GraphError("cannot infer a kernel rate from a graph with no timestamps")


def kernel_profile(lam: float, lags: np.ndarray) -> np.ndarray:
    """Exponential threat kernel ``exp(-lam * |lag|)``."""
    return np.exp(-lam * np.abs(lags))


@dataclass(frozen=True)
class SpaceTimeSystem:
    """Assembled space-time operator of order ``n * nt``."""

    graph: Graph
    grid: TimeGrid
    rates: np.ndarray
    adjacency: sp.csr_matrix
    spatial_degree: np.ndarray  # per-vertex total interaction weight

    @property
    def order(self) -> int:
        return self.graph.n * self.grid.nt

    def index(self, vertex: int, time_bin: int) -> int:
        return vertex * self.grid.nt + time_bin


def assemble_spacetime(
    g: Graph,
    grid: TimeGrid,
    rates: float | np.ndarray = 1.0,
    mode_default: str = "clique",
    modes=None,
    truncation: float = KERNEL_TRUNCATION,
) -> SpaceTimeSystem:
    """Build the weighted space-time adjacency from interaction records.

    Timestamped records use the kernel mode; untimed ones fall back to
    ``mode_default``.  An explicit ``modes`` sequence (aligned with
    ``g.interactions``) overrides both.  Kernel rates may be global or
    per-vertex and must be positive.
    """
    if mode_default not in MODES:
        raise GraphError(f"unknown mode {mode_default!r}")
    lam = np.asarray(rates, dtype=float)
    if lam.ndim == 0:
        lam = np.full(g.n, float(lam))
    if lam.shape != (g.n,) or np.any(lam <= 0):
        raise GraphError("kernel rates must be positive, one global or one per vertex")
    if g.n * grid.nt > MAX_ORDER:
        raise GraphError(
            f"space-time order {g.n * grid.nt} exceeds {MAX_ORDER}; coarsen the grid (dt/bins)"
        )

    nt = grid.nt
    centers = grid.centers
    rows: list[np.ndarray] = []
    cols: list[np.ndarray] = []
    vals: list[np.ndarray] = []
    eye = np.arange(nt)

    def add_column(recv: int, send: int, t_recv: float, t_send: float, w: float):
        profile = w * kernel_profile(lam[recv], centers - centers[grid.bin_of(t_recv)])
        keep = np.flatnonzero(profile >= truncation)
        if keep.size == 0:
            return
        rows.append(recv * nt + keep)
        cols.append(np.full(keep.size, send * nt + grid.bin_of(t_send)))
        vals.append(profile[keep])

    for i, e in enumerate(g.interactions):
        mode = modes[i] if modes is not None else ("kernel" if e.timestamped else mode_default)
        if mode not in MODES:
            raise GraphError(f"unknown mode {mode!r} on interaction {i}")
        if mode == "kernel":
            if not e.timestamped:
                raise GraphError(f"interaction {i} ({e.u},{e.v}) has no timestamps for kernel mode")
            add_column(e.v, e.u, e.t_v, e.t_u, e.weight)
            add_column(e.u, e.v, e.t_u, e.t_v, e.weight)
        elif mode == "instant":
            for a, b in ((e.u, e.v), (e.v, e.u)):
                rows.append(a * nt + eye)
                cols.append(b * nt + eye)
                vals.append(np.full(nt, e.weight))
        else:  # clique
            block = np.full(nt * nt, e.weight / nt)
            grid_r, grid_c = np.divmod(np.arange(nt * nt), nt)
            for a, b in ((e.u, e.v), (e.v, e.u)):
                rows.append(a * nt + grid_r)
                cols.append(b * nt + grid_c)
                vals.append(block)

    order = g.n * nt
    a = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(order, order)
    ).tocsr()
    return SpaceTimeSystem(graph=g, grid=grid, rates=lam, adjacency=a, spatial_degree=g.interaction_weight)


def coordination_prior(sys: SpaceTimeSystem, on_isolated: str = "error") -> np.ndarray:
    """Per-(vertex, bin) alignment prior, shape ``(n, nt)``.

    Equals one exactly where all of a vertex's interaction weight arrives in
    a single discretized bin.  Values above one (stacked interactions) are
    clamped and reported.  An isolated spatial vertex is an error by
    default; ``on_isolated='zero'`` assigns it the absorbing prior instead.
    """
    d = sys.spatial_degree.copy()
    if np.any(d <= 0):
        if on_isolated == "error":
            raise GraphError(f"isolated spatial vertex {int(np.argmin(d))} has no interactions")
        if on_isolated != "zero":
            raise ValueError(f"unknown on_isolated policy {on_isolated!r}")
        d[d <= 0] = 1.0  # their kernel mass is zero, so the ratio is zero
    mass = np.asarray(sys.adjacency.sum(axis=1)).ravel().reshape(sys.graph.n, sys.grid.nt)
    psi = mass / d[:, None]
    over = int(np.count_nonzero(psi > 1.0 + 1e-12))
    if over:
        logger.info("coordination prior clamped at %d space-time vertices (stacked interactions)", over)
    return np.clip(psi, 0.0, 1.0)


def _spacetime_boundary(sys: SpaceTimeSystem, obs: ObservationSet) -> tuple[np.ndarray, np.ndarray]:
    nt = sys.grid.nt
    idx: dict[int, float] = {}
    for e in obs.entries:
        if not 0 <= e.vertex < sys.graph.n:
            raise ObservationError(f"observed vertex {e.vertex} out of range")
        if e.t is None:
            # An untimed cue pins the vertex at every bin (clique-style cue).
            for k in range(nt):
                idx[e.vertex * nt + k] = e.p
        else:
            idx[sys.index(e.vertex, sys.grid.bin_of(e.t))] = e.p
    boundary = np.fromiter(idx.keys(), dtype=np.int64, count=len(idx))
    values = np.fromiter(idx.values(), dtype=np.float64, count=len(idx))
    order = np.argsort(boundary)
    return boundary[order], values[order]


def solve_spacetime(
    sys: SpaceTimeSystem,
    obs: ObservationSet,
    variant: str = "coordinated",
    spatial_psi: np.ndarray | None = None,
    tol: float = 1e-10,
    max_iter: int | None = None,
    method: str = "auto",
    on_isolated: str = "error",
) -> np.ndarray:
    """Threat probability over every (vertex, bin), shape ``(n, nt)``.

    Variants: ``weighted`` solves against the kernel-mass normalization with
    an optional externally supplied prior; ``coordinated`` normalizes by
    spatial interaction count, which folds the coordination prior into the
    operator; ``coordinated-spatial`` additionally damps each vertex by a
    spatial-only prior.  Space-time vertices with no kernel mass (or cut off
    from every cue) take the absorbing value zero.
    """
    if variant not in VARIANTS:
        raise GraphError(f"unknown variant {variant!r}")
    a = sys.adjacency
    w = np.asarray(a.sum(axis=1)).ravel()
    winv = np.divide(1.0, w, out=np.zeros_like(w), where=w > 0)
    p = sp.diags(winv) @ a

    if variant == "weighted":
        if spatial_psi is not None:
            p = sp.diags(np.repeat(_check_spatial_psi(sys, spatial_psi), sys.grid.nt)) @ p
    else:
        psi = coordination_prior(sys, on_isolated=on_isolated).ravel()
        if variant == "coordinated-spatial":
            if spatial_psi is None:
                raise GraphError("coordinated-spatial variant needs a spatial prior")
            psi = psi * np.repeat(_check_spatial_psi(sys, spatial_psi), sys.grid.nt)
        p = sp.diags(psi) @ p

    boundary, values = _spacetime_boundary(sys, obs)
    p = p.tocsr()
    inbound = np.diff(p.tocsc().indptr)
    inert = boundary[inbound[boundary] == 0]
    if inert.size:
        nt = sys.grid.nt
        cells = [(int(i) // nt, int(i) % nt) for i in inert[:5]]
        logger.warning(
            "%d cue cells have no inbound coupling (vertex inactive at that bin): %s",
            inert.size, cells,
        )
    theta = solve_boundary_value(p, boundary, values, tol=tol, max_iter=max_iter, method=method)
    return theta.reshape(sys.graph.n, sys.grid.nt)


def _check_spatial_psi(sys: SpaceTimeSystem, psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=float)
    if psi.shape != (sys.graph.n,):
        raise GraphError("spatial prior must have one entry per vertex")
    if np.any(psi <= 0) or np.any(psi > 1):
        raise GraphError("spatial prior entries must lie in (0, 1]")
    return psi


def reduce_to_vertex_scores(theta_st: np.ndarray, reducer: str = "max") -> np.ndarray:
    """Collapse a (vertex, bin) threat field to one detection score per vertex."""
    if reducer == "max":
        return theta_st.max(axis=1)
    if reducer == "mean":
        return theta_st.mean(axis=1)
    raise GraphError(f"unknown reducer {reducer!r}")
