"""File formats: edge lists, observations, scores, truth, and run metadata.

Edge-list CSV header is ``src,dst,weight,t_src,t_dst``; empty time fields
denote static edges, times are real numbers in the configured units.
Vertex identifiers are strings externally and dense indices internally; the
symbol table travels with every artifact so runs are replayable.  Floats are
serialized with ``repr`` (shortest round-trip), which keeps artifacts
byte-stable across runs.
"""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

from .errors import GraphError, ObservationError
from .graph import Graph, Observation, ObservationSet, build_graph

EDGE_HEADER = ["src", "dst", "weight", "t_src", "t_dst"]


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_edges(path, g: Graph) -> None:
    labels = g.labels or tuple(str(i) for i in range(g.n))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(EDGE_HEADER)
        for e in g.interactions:
            t_u = _fmt(e.t_u) if e.t_u is not None else ""
            t_v = _fmt(e.t_v) if e.t_v is not None else ""
            w.writerow([labels[e.u], labels[e.v], _fmt(e.weight), t_u, t_v])


def read_edges(path, directed: bool = False) -> Graph:
    """Load a graph, mapping string vertex ids to dense indices by first
    appearance."""
    symbols: dict[str, int] = {}

    def idx(name: str) -> int:
        if name not in symbols:
            symbols[name] = len(symbols)
        return symbols[name]

    rows = []
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r, None)
        if header is None or [h.strip() for h in header[:3]] != EDGE_HEADER[:3]:
            raise GraphError(f"{path}: expected edge header {','.join(EDGE_HEADER)}")
        for line in r:
            if not line or all(not c.strip() for c in line):
                continue
            src, dst = idx(line[0].strip()), idx(line[1].strip())
            weight = float(line[2]) if len(line) > 2 and line[2].strip() else 1.0
            t_src = line[3].strip() if len(line) > 3 else ""
            t_dst = line[4].strip() if len(line) > 4 else ""
            if bool(t_src) != bool(t_dst):
                raise GraphError(f"{path}: half-set timestamp pair on ({line[0]},{line[1]})")
            if t_src:
                rows.append((src, dst, weight, float(t_src), float(t_dst)))
            else:
                rows.append((src, dst, weight))
    if not symbols:
        raise GraphError(f"{path}: empty graph")
    labels = tuple(sorted(symbols, key=symbols.get))
    return build_graph(rows, directed=directed, n=len(symbols), labels=labels)


def resolve_vertex(g: Graph, name: str) -> int:
    if g.labels is not None and name in g.labels:
        return g.labels.index(name)
    try:
        v = int(name)
    except ValueError:
        raise ObservationError(f"unknown vertex identifier {name!r}") from None
    if not 0 <= v < g.n:
        raise ObservationError(f"vertex index {v} out of range for n={g.n}")
    return v


def read_observations(path, g: Graph) -> ObservationSet:
    """Observation CSV with named columns ``vertex``, ``p``, optional ``t``
    (in any order; an empty time broadcasts the cue over all bins)."""
    entries = []
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r, None)
        if header is None:
            raise ObservationError(f"{path}: empty observation file")
        cols = {name.strip(): i for i, name in enumerate(header)}
        if "vertex" not in cols or "p" not in cols:
            raise ObservationError(f"{path}: expected columns vertex,p[,t], got {header}")
        t_col = cols.get("t")
        for line in r:
            if not line or all(not c.strip() for c in line):
                continue
            v = resolve_vertex(g, line[cols["vertex"]].strip())
            p = float(line[cols["p"]])
            t = None
            if t_col is not None and len(line) > t_col and line[t_col].strip():
                t = float(line[t_col])
            entries.append(Observation(v, p, t))
    return ObservationSet(tuple(entries))


def write_scores(path, g: Graph, values: np.ndarray, column: str = "theta") -> None:
    labels = g.labels or tuple(str(i) for i in range(g.n))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["vertex", column])
        for i, v in enumerate(values):
            w.writerow([labels[i], _fmt(float(v))])


def write_spacetime_scores(path, g: Graph, theta_st: np.ndarray, grid) -> None:
    labels = g.labels or tuple(str(i) for i in range(g.n))
    centers = grid.centers
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["vertex", "t", "theta"])
        for i in range(theta_st.shape[0]):
            for k in range(theta_st.shape[1]):
                w.writerow([labels[i], _fmt(float(centers[k])), _fmt(float(theta_st[i, k]))])


def write_truth(path, g: Graph, truth: np.ndarray) -> None:
    write_scores(path, g, truth.astype(float), column="theta")


def read_truth(path, g: Graph) -> np.ndarray:
    truth = np.zeros(g.n, dtype=np.int8)
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        next(r, None)
        for line in r:
            if not line or all(not c.strip() for c in line):
                continue
            truth[resolve_vertex(g, line[0].strip())] = int(float(line[1]))
    return truth


def write_roc(path, curve) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["threshold", "pfa", "pd", "se"])
        for thr, pfa, pd, se in curve.rows():
            w.writerow([_fmt(thr), _fmt(pfa), _fmt(pd), _fmt(se)])


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), default=_jsonable)


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if hasattr(x, "__dataclass_fields__"):
        return {k: getattr(x, k) for k in x.__dataclass_fields__}
    raise TypeError(f"not JSON serializable: {type(x)}")


def config_digest(obj) -> str:
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()[:16]


def write_meta(path, config: dict, seed: int | None, version: str) -> None:
    """Provenance record: resolved config, its hash, seed, toolkit version.

    Deliberately excludes wall-clock time so artifacts are byte-reproducible.
    """
    record = {
        "config": json.loads(canonical_json(config)),
        "config_digest": config_digest(config),
        "seed": seed,
        "version": version,
    }
    Path(path).write_text(canonical_json(record) + "\n")
