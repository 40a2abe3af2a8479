"""Damped iteratively reweighted least squares for ``min_x ||Bx - c||_q``."""

from __future__ import annotations

import numpy as np

from .errors import DataError, NoConvergenceError
from .linalg import as_matrix, as_vector


def _lq(r: np.ndarray, q: float) -> float:
    m = np.abs(r).max(initial=0.0)
    if m == 0.0:
        return 0.0
    return float(m * np.sum((np.abs(r) / m) ** q) ** (1.0 / q))


def irls_solve(B, c, q: float, eps: float = 1e-10, max_iter: int = 200, *,
               strict: bool = True, trace: list | None = None) -> np.ndarray:
    """Minimise ``||Bx - c||_q`` for ``q >= 1``.

    Each step solves the least-squares problem reweighted by ``|r_i|^(q-2)``
    and moves toward it with a backtracking step, so the residual norm never
    increases. For ``q > 2`` the first trial step is the Newton step, which is
    the reweighted solution shrunk by ``1/(q-1)``.

    Stops when a step improves the residual by less than ``eps`` relative.
    ``trace`` (if given) receives the residual norm after every iteration.
    Raises :class:`NoConvergenceError` carrying the best iterate after
    ``max_iter`` steps unless ``strict`` is false.
    """
    M = as_matrix(B)
    y = as_vector(c, M.shape[0])
    if q < 1:
        raise DataError("irls_solve needs q >= 1")
    x = np.linalg.lstsq(M, y, rcond=None)[0]
    r = M @ x - y
    f = _lq(r, q)
    if trace is not None:
        trace.append(f)
    if q == 2 or f == 0.0:
        return x
    first = 1.0 / (q - 1.0) if q > 2 else 1.0
    scale_c = max(np.abs(y).max(initial=0.0), 1.0)
    for _ in range(max_iter):
        mag = np.abs(r)
        floor = max(1e-12 * mag.max(), 1e-300 * scale_c)
        w = np.maximum(mag, floor) ** ((q - 2.0) / 2.0)
        x_ls = np.linalg.lstsq(M * w[:, None], y * w, rcond=None)[0]
        step = x_ls - x
        theta = first
        improved = False
        for _ in range(60):
            cand = x + theta * step
            r_c = M @ cand - y
            f_c = _lq(r_c, q)
            if f_c < f:
                improved = True
                break
            theta *= 0.5
        if not improved:
            return x
        gain = (f - f_c) / f
        x, r, f = cand, r_c, f_c
        if trace is not None:
            trace.append(f)
        if gain < eps or f == 0.0:
            return x
    if strict:
        raise NoConvergenceError("IRLS hit the iteration cap", best=x, residual=f)
    return x


def lq_norm(v, q: float) -> float:
    """Overflow-safe ``||v||_q``; ``q = inf`` gives the max norm."""
    r = np.asarray(v, dtype=float).reshape(-1)
    if np.isinf(q):
        return float(np.abs(r).max(initial=0.0))
    return _lq(r, q)
