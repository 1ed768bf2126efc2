"""Shared boundary-value solver for harmonic propagation systems.

Solves ``theta = P @ theta`` on interior vertices with boundary entries held
fixed, where ``P`` is a (sub)stochastic propagation operator.  The residual
reported and tested is ``max_i |theta_i - (P theta)_i|`` over the interior,
i.e. the harmonic equation defect.
"""

from __future__ import annotations

import logging

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConvergenceError

logger = logging.getLogger(__name__)

# Clamping beyond this magnitude indicates ill-conditioning and is reported.
CLAMP_WARN = 1e-6

SOLVE_METHODS = ("iterative", "direct", "bicgstab", "auto")

# Direct sparse factorization is exact and fast up to this many unknowns.
_DIRECT_LIMIT = 50_000


def solve_boundary_value(
    p: sp.spmatrix,
    boundary: np.ndarray,
    boundary_values: np.ndarray,
    tol: float = 1e-10,
    max_iter: int | None = None,
    method: str = "iterative",
) -> np.ndarray:
    """Solve the fixed-boundary harmonic system and clamp the result to [0, 1].

    ``method='iterative'`` is plain repeated application of ``P`` (robust, no
    factorization); ``'direct'`` and ``'bicgstab'`` solve the equivalent
    interior linear system; ``'auto'`` picks direct below a size cutoff.
    """
    if method not in SOLVE_METHODS:
        raise ValueError(f"unknown solve method {method!r}")
    n = p.shape[0]
    boundary = np.asarray(boundary, dtype=np.int64)
    mask = np.zeros(n, dtype=bool)
    mask[boundary] = True

    theta = np.zeros(n)
    theta[boundary] = boundary_values

    p = p.tocsr()
    # A vertex with no pull-path to the boundary has exactly zero threat;
    # solving only on the reaching set also keeps the interior system
    # nonsingular (a detached stochastic component would make I - P_ii
    # singular for the factorized methods).
    reach = _reaches_boundary(p, boundary)
    interior = np.flatnonzero(reach & ~mask)
    if interior.size == 0:
        return theta

    if method == "auto":
        method = "direct" if interior.size <= _DIRECT_LIMIT else "iterative"

    if method == "iterative":
        # Iteration count floor: the 10n heuristic is too small for tight
        # tolerances on small or weakly absorbing systems.
        if max_iter is None:
            max_iter = max(10 * n, 4096)
        theta = _fixed_point(p, theta, interior, boundary, boundary_values, tol, max_iter)
    else:
        pii = p[interior][:, interior]
        pib = p[interior][:, boundary]
        rhs = pib @ boundary_values
        a = sp.identity(interior.size, format="csc") - pii
        if method == "direct":
            x = spla.spsolve(a, rhs)
        else:
            x, info = spla.bicgstab(a, rhs, rtol=0.0, atol=tol * 1e-3, maxiter=max_iter or 10 * n)
            if info != 0:
                raise ConvergenceError(f"bicgstab did not converge (info={info})")
        theta[interior] = x
        resid = _residual(p, theta, interior)
        if not resid <= tol:  # NaN-safe: a failed factorization must not pass
            raise ConvergenceError(f"direct solve residual {resid:.3e} exceeds tol {tol:.1e}", residual=resid)

    over = max(float(np.max(theta) - 1.0), float(-np.min(theta)), 0.0)
    if over > CLAMP_WARN:
        logger.warning("clamping harmonic solution by %.3e; system may be ill-conditioned", over)
    return np.clip(theta, 0.0, 1.0)


def _reaches_boundary(p: sp.csr_matrix, boundary: np.ndarray) -> np.ndarray:
    """Vertices with a pull-path (following nonzeros of P row->column) to the
    boundary set."""
    csc = p.tocsc()
    reach = np.zeros(p.shape[0], dtype=bool)
    reach[boundary] = True
    frontier = boundary
    while frontier.size:
        preds = np.unique(
            np.concatenate([csc.indices[csc.indptr[j]:csc.indptr[j + 1]] for j in frontier])
        ) if frontier.size else np.empty(0, dtype=np.int64)
        frontier = preds[~reach[preds]] if preds.size else preds
        reach[frontier] = True
    return reach


def _residual(p, theta, interior) -> float:
    r = theta - p @ theta
    return float(np.max(np.abs(r[interior]))) if interior.size else 0.0


def _fixed_point(p, theta, interior, boundary, boundary_values, tol, max_iter):
    for _ in range(max_iter):
        nxt = p @ theta
        nxt[boundary] = boundary_values
        diff = float(np.max(np.abs(nxt - theta)))
        theta = nxt
        if diff <= 0.5 * tol and _residual(p, theta, interior) <= tol:
            return theta
    last = _residual(p, theta, interior)
    if last <= tol:
        return theta
    raise ConvergenceError(
        f"fixed-point iteration stalled at residual {last:.3e} after {max_iter} sweeps (tol {tol:.1e})",
        residual=last,
    )
