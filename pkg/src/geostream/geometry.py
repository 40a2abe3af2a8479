"""Geometry on top of the l-infinity coreset: symmetrization, hull support
queries, coreset ellipsoids, volume maximization, minimum-width spherical
shells and linear programs over symmetric polytopes."""

from __future__ import annotations

import itertools
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np
from scipy.optimize import linprog

from .coreset import Coreset
from .errors import (AlgorithmError, ConfigError, DegenerateInputError, EmptyStreamError,
                     InsufficientRowsError, RankDeficientError, SizeLimitError,
                     UnboundedError)
from .linalg import RowSpace, as_matrix, as_vector, log_volume, pinv_psd

EXACT_VOLMAX_LIMIT = 25


def worker_threads() -> int:
    env = os.environ.get("GEOSTREAM_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


class Symmetrizer:
    """Anchor on the first row and emit ``a_i - a_1`` for every later row.

    Heights ``max |<a_i - a_1, x>|`` then lie between half the width
    ``max <a_i, x> - min <a_i, x>`` and the full width. The negated copy is
    not emitted: every consumer here evaluates ``|<., x>|``."""

    def __init__(self) -> None:
        self.anchor: np.ndarray | None = None

    def push(self, a) -> np.ndarray | None:
        v = as_vector(a)
        if self.anchor is None:
            self.anchor = v
            return None
        return v - self.anchor

    def __call__(self, rows: Iterable) -> Iterator[np.ndarray]:
        for a in rows:
            out = self.push(a)
            if out is not None:
                yield out
        if self.anchor is None:
            raise EmptyStreamError("cannot symmetrize an empty stream")


def symmetrize(rows: Iterable) -> Iterator[np.ndarray]:
    return Symmetrizer()(rows)


def width(A, x) -> float:
    vals = as_matrix(A) @ as_vector(x)
    return float(vals.max() - vals.min())


def symmetric_coreset(A) -> Coreset:
    """Coreset of the anchored differences, indexed by original row."""
    M = as_matrix(A)
    if not len(M):
        raise EmptyStreamError("empty stream")
    c = Coreset(M.shape[1])
    for i, a in enumerate(M[1:] - M[0], start=1):
        c.ingest_row(a, index=i)
    return c


def hull_support_query(c: Coreset, u) -> float:
    """``max_{i in S} |<a_i, u>|``, within ``sqrt(|S|)`` of the full support."""
    v = as_vector(u, c.d)
    if not np.any(v):
        return 0.0
    return c.query(v)


@dataclass
class Ellipsoid:
    """``{x : x^T H x <= 1}``; directions outside ``range(H)`` are unbounded."""

    H: np.ndarray

    def gauge(self, x) -> float:
        v = as_vector(x, len(self.H))
        return math.sqrt(max(float(v @ self.H @ v), 0.0))

    def contains(self, x, tol: float = 1e-12) -> bool:
        return self.gauge(x) <= 1 + tol

    def polar(self) -> "Ellipsoid":
        return Ellipsoid(pinv_psd(self.H))

    def support(self, u) -> float:
        v = as_vector(u, len(self.H))
        return math.sqrt(max(float(v @ pinv_psd(self.H) @ v), 0.0))

    def to_dict(self) -> dict:
        return {"H": self.H.tolist()}


def ellipsoid_from_coreset(c: Coreset, target: str = "polytope",
                           restrict_to_span: bool = True) -> tuple[Ellipsoid, float]:
    """Ellipsoid and distortion ``sqrt(|S|)``.

    ``polytope``: ``E = {x : ||A_S x||_2 <= 1}`` with ``E <= K <= sqrt(|S|) E``
    for ``K = {x : ||Ax||_inf <= 1}``.
    ``hull``: the polar of that ellipsoid, which contains ``conv(+-a_i)`` and
    shrinks into it by ``sqrt(|S|)``.
    """
    if not len(c):
        raise InsufficientRowsError("coreset is empty")
    H = c.gram
    delta = c.distortion
    if target == "polytope":
        return Ellipsoid(H), delta
    if target != "hull":
        raise ConfigError(f"unknown target {target!r}")
    rank = RowSpace.of(c.matrix).rank
    if rank < c.d and not restrict_to_span:
        raise RankDeficientError("coreset does not span the ambient space", rank=rank)
    return Ellipsoid(pinv_psd(H)), delta


@dataclass
class VolmaxResult:
    indices: list[int]
    log_volume: float
    coreset_size: int
    mode: str
    sketch_dim: int

    def to_dict(self) -> dict:
        return {"indices": self.indices, "log_volume": self.log_volume,
                "coreset_size": self.coreset_size, "mode": self.mode,
                "sketch_dim": self.sketch_dim}


def _greedy_volume(M: np.ndarray, k: int) -> list[int]:
    """Pivoted Gram-Schmidt: repeatedly take the row with the largest
    residual after projecting out the rows already chosen."""
    R = M.astype(float).copy()
    chosen: list[int] = []
    for _ in range(k):
        norms = np.linalg.norm(R, axis=1)
        norms[chosen] = -1.0
        j = int(np.argmax(norms))
        chosen.append(j)
        if norms[j] <= 0:
            break
        q = R[j] / norms[j]
        R -= np.outer(R @ q, q)
    return chosen


def _safe_log_volume(M: np.ndarray) -> float:
    try:
        return log_volume(M)
    except Exception:
        return -math.inf


def volmax_select(A, k: int, r: int | None = None, seed=None,
                  mode: str = "auto") -> VolmaxResult:
    """Pick ``k`` rows of large spanned volume from an l-infinity coreset of
    ``AG``, where ``G`` is ``d x r`` Gaussian with variance ``1/r`` (skipped
    when ``r >= d``). Returns indices into the original stream."""
    M = as_matrix(A)
    n, d = M.shape
    if not 1 <= k <= d:
        raise ConfigError("need 1 <= k <= d")
    r = d if r is None else r
    if r < d:
        G = np.random.default_rng(seed).standard_normal((d, r)) / math.sqrt(r)
        L = M @ G
    else:
        L = M
    c = Coreset(L.shape[1])
    c.ingest(L)
    rows = np.asarray(c.rows).reshape(-1, L.shape[1])
    if len(rows) < k:
        raise InsufficientRowsError(f"coreset holds {len(rows)} rows, need {k}")
    if mode == "auto":
        mode = "exact" if len(rows) <= EXACT_VOLMAX_LIMIT else "greedy"
    if mode == "exact":
        if len(rows) > EXACT_VOLMAX_LIMIT:
            raise SizeLimitError(f"exact volume search limited to {EXACT_VOLMAX_LIMIT} rows",
                                 size=len(rows))
        best = max(itertools.combinations(range(len(rows)), k),
                   key=lambda sub: _safe_log_volume(rows[list(sub)]))
        pick = list(best)
    elif mode == "greedy":
        pick = _greedy_volume(rows, k)
    else:
        raise ConfigError(f"unknown mode {mode!r}")
    idx = sorted(c.indices[j] for j in pick)
    return VolmaxResult(idx, _safe_log_volume(L[idx]), len(rows), mode, min(r, d))


@dataclass
class ShellResult:
    center: np.ndarray
    r: float
    R: float
    delta: float
    estimate: float

    @property
    def width(self) -> float:
        return self.R - self.r

    def certify(self, points) -> "ShellResult":
        """Recompute the radii against ``points`` so every one is inside."""
        dist = np.linalg.norm(as_matrix(points) - self.center, axis=1)
        return ShellResult(self.center, float(dist.min()), float(dist.max()), self.delta,
                           self.estimate)

    def to_dict(self) -> dict:
        return {"center": self.center.tolist(), "r": self.r, "R": self.R,
                "width": self.width, "delta": self.delta, "estimate": self.estimate}


def _compass(f, x0: np.ndarray, step: float, budget: int) -> tuple[np.ndarray, float]:
    x, fx, evals = x0.copy(), f(x0), 1
    while evals < budget and step > 1e-12:
        moved = False
        for j in range(len(x)):
            for sgn in (1.0, -1.0):
                y = x.copy()
                y[j] += sgn * step
                fy = f(y)
                evals += 1
                if fy < fx:
                    x, fx, moved = y, fy, True
                    break
            if evals >= budget:
                break
        if not moved:
            step *= 0.5
    return x, fx


class ShellSketch:
    """Two l-infinity coresets over lifted points: ``b_i = (-2 u_i, |u_i|^2)``
    and ``b''_i = (b_i, 1)``, with ``u_i = a_i - a_1``. For a center ``c``
    (relative to ``a_1``), ``<b''_i, (c, 1, |c|^2)>`` is the squared distance
    of ``a_i`` to the center, and ``<b_i, (c, 1)>`` is that minus ``|c|^2``."""

    def __init__(self, d: int) -> None:
        self.d = d
        self.anchor: np.ndarray | None = None
        self.lin = Coreset(d + 1)
        self.quad = Coreset(d + 2)
        self.n_seen = 0

    def ingest_row(self, a) -> None:
        v = as_vector(a, self.d)
        i = self.n_seen
        self.n_seen += 1
        if self.anchor is None:
            self.anchor = v
        u = v - self.anchor
        b = np.append(-2.0 * u, u @ u)
        self.quad.ingest_row(np.append(b, 1.0), index=i)
        if i:
            self.lin.ingest_row(b, index=i)

    def ingest(self, A) -> None:
        for a in as_matrix(A, self.d):
            self.ingest_row(a)

    @property
    def delta(self) -> float:
        return math.sqrt(max(len(self.lin), len(self.quad), 1))

    def stored_points(self) -> np.ndarray:
        """Original points recoverable from the stored lifts, anchor included."""
        pts = [np.zeros(self.d)]
        for rows in (self.lin.rows, self.quad.rows):
            pts += [-0.5 * b[: self.d] for b in rows]
        return np.array(pts) + self.anchor

    def estimate(self, c: np.ndarray) -> float:
        """Coreset estimate of ``R - r`` at center ``c`` (relative to a_1):
        height of the distance-squared spread over ``sqrt`` of the largest
        squared distance."""
        spread = self.lin.query(np.append(c, 1.0)) if len(self.lin) else 0.0
        outer = self.quad.query(np.concatenate([c, [1.0, c @ c]]))
        return spread / math.sqrt(outer) if outer > 0 else math.inf


def shell_solve(A, seed=0, starts: int = 16, evals: int = 500,
                sketch: ShellSketch | None = None) -> ShellResult:
    """Streamed minimum-width shell. Centers are searched by compass descent
    on the coreset estimate from ``starts`` seeded points, then polished on
    the exact width over the stored coreset points. Radii are exact over the
    stored points; call :meth:`ShellResult.certify` with the full set when it
    is retained."""
    if sketch is None:
        M = as_matrix(A)
        if len(M) < 2:
            raise InsufficientRowsError("shell needs at least two points")
        sketch = ShellSketch(M.shape[1])
        sketch.ingest(M)
    if not len(sketch.lin):
        raise DegenerateInputError("all points coincide")
    pts = sketch.stored_points() - sketch.anchor
    scale = float(np.linalg.norm(pts, axis=1).max())
    rng = np.random.default_rng(seed)
    base = pts.mean(axis=0)
    inits = [base] + [base + scale * rng.standard_normal(sketch.d) for _ in range(starts - 1)]

    def exact(c):
        dist = np.linalg.norm(pts - c, axis=1)
        return float(dist.max() - dist.min())

    def run(x0):
        x, _ = _compass(sketch.estimate, x0, scale / 2, evals)
        return _compass(exact, x, scale / 8, evals)

    with ThreadPoolExecutor(max_workers=min(worker_threads(), starts)) as pool:
        results = list(pool.map(run, inits))
    c, _ = min(results, key=lambda t: (t[1], tuple(t[0])))
    dist = np.linalg.norm(pts - c, axis=1)
    return ShellResult(c + sketch.anchor, float(dist.min()), float(dist.max()), sketch.delta,
                       sketch.estimate(c))


@dataclass
class LpResult:
    x_hat: np.ndarray
    value: float
    x_star: np.ndarray
    relaxed_value: float
    delta: float

    def to_dict(self) -> dict:
        return {"x_hat": self.x_hat.tolist(), "value": self.value,
                "x_star": self.x_star.tolist(), "relaxed_value": self.relaxed_value,
                "delta": self.delta}


def lp_maximize(c_obj, c: Coreset) -> LpResult:
    """Maximize ``<c_obj, x>`` over ``{x : ||A_S x||_inf <= 1}`` and shrink the
    optimizer by ``sqrt(|S|)`` so it is feasible for every streamed row;
    the returned value is then within that factor of the true optimum."""
    if not len(c):
        raise InsufficientRowsError("coreset is empty")
    obj = as_vector(c_obj, c.d)
    delta = c.distortion
    if not np.any(obj):
        z = np.zeros(c.d)
        return LpResult(z, 0.0, z, 0.0, delta)
    S = c.matrix
    space = RowSpace.of(S)
    if not space.contains(obj):
        raise UnboundedError("objective leaves the row space of the coreset")
    B = S @ space.Vt.T
    res = linprog(-(space.Vt @ obj), A_ub=np.vstack([B, -B]), b_ub=np.ones(2 * len(B)),
                  bounds=[(None, None)] * space.rank, method="highs")
    if res.status != 0:
        raise AlgorithmError(f"LP solver failed: {res.message}")
    x_star = space.Vt.T @ res.x
    x_hat = x_star / delta
    return LpResult(x_hat, float(obj @ x_hat), x_star, float(obj @ x_star), delta)
