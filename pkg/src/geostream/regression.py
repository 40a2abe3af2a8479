"""lp regression by sketch-and-solve (offline embedding, streaming coreset,
l-infinity LP) and lp column subset selection."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
from scipy.optimize import linprog

from .coreset import Coreset
from .errors import AlgorithmError, ConfigError, RetryBudgetError
from .linalg import as_matrix, as_vector
from .lp_stream import LpQuadraticSketch
from .sampling import OnlineSpectralSampler, lp_to_lq_embed
from .solvers import irls_solve, lq_norm

__all__ = ["RegressionResult", "CssResult", "irls_solve", "sketch_solve_regression",
           "streaming_regression_coreset", "linf_regression", "css_select", "column_cost"]


@dataclass
class RegressionResult:
    x: np.ndarray
    residual_p: float
    certified_factor: float
    route: str
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"x": self.x.tolist(), "residual_p": self.residual_p,
                "certified_factor": self.certified_factor, "route": self.route, **self.meta}


def _split(A, b) -> tuple[np.ndarray, np.ndarray]:
    M = as_matrix(A)
    return M, as_vector(b, len(M))


def sketch_solve_regression(A, b, p: float, q: float = 2.0, eps: float = 0.5, seed=None,
                            s: int | None = None, irls_eps: float = 1e-10) -> RegressionResult:
    """Embed ``[A b]`` from lp into lq, solve the small lq problem, and
    report the embedding distortion as the approximation factor."""
    M, y = _split(A, b)
    d = M.shape[1]
    S = lp_to_lq_embed(np.column_stack([M, y]), p, q, eps, seed, s)
    SA, Sb = S.matrix[:, :d], S.matrix[:, d]
    x = irls_solve(SA, Sb, q, eps=irls_eps, strict=False)
    res = lq_norm(M @ x - y, p)
    return RegressionResult(x, res, S.kappa, "offline",
                            {"p": p, "q": q, "eps": eps, "seed": S.seed, "sample_rows": len(S),
                             "sketch_residual_q": lq_norm(SA @ x - Sb, q)})


def streaming_regression_coreset(rows: Iterable, p: float, n_declared: int, eps: float = 0.5,
                                 seed=None) -> RegressionResult:
    """One pass over ``[a_i, b_i]`` rows: each row gets its quadratic-sketch
    weight, the weighted row goes through online leverage sampling, and
    least squares on the kept rows gives the answer.

    Factor: ``Delta_p * sqrt((1 + eps) / (1 - eps))``, chaining the sketch
    sandwich with the spectral approximation of its quadratic form."""
    if not 0 < eps < 1:
        raise ConfigError("need 0 < eps < 1")
    sketch: LpQuadraticSketch | None = None
    sampler: OnlineSpectralSampler | None = None
    full: list[np.ndarray] = []
    for i, r in enumerate(rows):
        v = as_vector(r)
        if sketch is None:
            sketch = LpQuadraticSketch(v.size, p, n_declared)
            sampler = OnlineSpectralSampler(v.size, eps, seed)
        w = sketch.ingest_l2_weighted(v)
        sampler.ingest(w * v, i)
        full.append(v)
    if sketch is None:
        raise ConfigError("empty stream")
    S = sampler.result()
    d = sketch.d - 1
    x = np.linalg.lstsq(S.matrix[:, :d], S.matrix[:, d], rcond=None)[0]
    F = np.array(full)
    factor = sketch.distortion * math.sqrt((1 + eps) / (1 - eps))
    return RegressionResult(x, lq_norm(F[:, :d] @ x - F[:, d], p), factor, "streaming_coreset",
                            {"p": p, "eps": eps, "coreset_size": len(S),
                             "indices": S.source_indices.tolist(),
                             "quadratic_distortion": sketch.distortion})


def _linf_fit(M: np.ndarray, y: np.ndarray) -> np.ndarray:
    n, d = M.shape
    cost = np.zeros(d + 1)
    cost[-1] = 1.0
    ones = np.ones((n, 1))
    A_ub = np.vstack([np.hstack([M, -ones]), np.hstack([-M, -ones])])
    res = linprog(cost, A_ub=A_ub, b_ub=np.concatenate([y, -y]),
                  bounds=[(None, None)] * d + [(0, None)], method="highs")
    if res.status != 0:
        raise AlgorithmError(f"LP solver failed: {res.message}")
    return res.x[:d]


def linf_regression(c: Coreset, A=None, b=None) -> RegressionResult:
    """``min_x ||A_S x - b_S||_inf`` on a coreset of ``[A b]`` rows; within
    ``sqrt(|S|)`` of the full optimum. With ``A, b`` the residual is the
    full one, otherwise the coreset's."""
    if not len(c):
        raise ConfigError("coreset is empty")
    S = c.matrix
    x = _linf_fit(S[:, :-1], S[:, -1])
    if A is not None:
        M, y = _split(A, b)
        res = float(np.abs(M @ x - y).max())
    else:
        res = float(np.abs(S[:, :-1] @ x - S[:, -1]).max())
    return RegressionResult(x, res, c.distortion, "linf_lp", {"coreset_size": len(c)})


@dataclass
class CssResult:
    selected: list[int]
    cost: float
    column_costs: np.ndarray
    kappa: float
    guess: float
    rounds: int
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"selected": self.selected, "cost": self.cost,
                "column_costs": self.column_costs.tolist(), "kappa": self.kappa,
                "guess": self.guess, "rounds": self.rounds, **self.meta}


def column_cost(A, cols: list[int], p: float) -> np.ndarray:
    """``min_x ||A_cols x - A_i||_p^p`` for every column ``i``."""
    M = as_matrix(A)
    if not cols:
        return np.sum(np.abs(M) ** p, axis=0)
    B = M[:, cols]
    out = np.empty(M.shape[1])
    for i in range(M.shape[1]):
        x = irls_solve(B, M[:, i], p, strict=False)
        out[i] = lq_norm(B @ x - M[:, i], p) ** p
    out[cols] = 0.0
    return out


def _cover_costs(M, R, targets, p, q, rng, exact):
    B = M[:, R]
    out = {}
    for i in targets:
        if exact:
            x = irls_solve(B, M[:, i], p, strict=False)
        else:
            x = sketch_solve_regression(B, M[:, i], p, q, seed=int(rng.integers(2 ** 63))).x
        out[i] = lq_norm(B @ x - M[:, i], p) ** p
    return out


def _select_for_guess(M, p, k, q, kappa, guess, rng, exact, max_retries):
    d = M.shape[1]
    threshold = kappa ** p * (k + 1) ** (p - 1) / d * guess
    remaining = list(range(d))
    selected: list[int] = []
    rounds = 0
    while len(remaining) > 2 * k:
        best_try = None
        for _ in range(max_retries):
            R = sorted(rng.choice(remaining, size=2 * k, replace=False).tolist())
            rest = [i for i in remaining if i not in R]
            costs = _cover_costs(M, R, rest, p, q, rng, exact)
            covered = [i for i in rest if costs[i] <= threshold]
            if best_try is None or len(covered) > len(best_try[1]):
                best_try = (R, covered)
            if len(covered) >= len(rest) / 10:
                break
        else:
            raise RetryBudgetError("cover fraction not reached", best=best_try)
        R, covered = best_try
        selected += R
        remaining = [i for i in remaining if i not in R and i not in covered]
        rounds += 1
    return sorted(selected + remaining), rounds


def css_select(A, p: float, k: int, q: float = 2.0, seed=None, kappa: float = 2.0,
               guesses: int = 12, exact: bool = False, max_retries: int = 50,
               max_columns: int | None = None) -> CssResult:
    """Column subset selection for entrywise lp error.

    For each of ``guesses`` geometric guesses of the optimal residual
    ``||A - A_*||_p^p`` the recursive cover procedure runs: draw ``2k``
    columns, call a column covered when its regression cost falls below
    ``kappa^p (k+1)^(p-1) / d * guess``, redraw until a tenth of the rest is
    covered and recurse on what is left. Among selections of at most
    ``max_columns`` columns (default ``ceil(2 k ln d)``) the one with the
    smallest true reconstruction cost wins; if every guess overshoots the
    cap, the smallest selection is returned."""
    M = as_matrix(A)
    n, d = M.shape
    if k < 1:
        raise ConfigError("k must be positive")
    rng = np.random.default_rng(seed)
    if d <= 2 * k:
        cols = list(range(d))
        return CssResult(cols, 0.0, np.zeros(d), kappa, 0.0, 0, {"guesses": []})
    full = float(np.sum(np.abs(M) ** p))
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    low = float(np.sum(np.abs(M - (U[:, :k] * s[:k]) @ Vt[:k]) ** p))
    lo = max(low / 4, 1e-12 * full)
    grid = np.geomspace(lo, full, guesses) if full > 0 else np.zeros(1)
    cap = max_columns or math.ceil(2 * k * math.log(d))
    best: CssResult | None = None
    fallback: CssResult | None = None
    failures = []
    for g in grid:
        try:
            cols, rounds = _select_for_guess(M, p, k, q, kappa, float(g), rng, exact,
                                             max_retries)
        except RetryBudgetError as exc:
            failures.append(exc)
            continue
        costs = column_cost(M, cols, p)
        cand = CssResult(cols, float(costs.sum()), costs, kappa, float(g), rounds)
        if len(cols) > cap:
            if fallback is None or len(cols) < len(fallback.selected):
                fallback = cand
        elif best is None or (cand.cost, len(cols)) < (best.cost, len(best.selected)):
            best = cand
    best = best or fallback
    if best is None:
        raise RetryBudgetError("no residual guess reached the cover fraction",
                               best=failures[-1].best if failures else None)
    best.meta = {"guesses": grid.tolist(), "failed_guesses": len(failures),
                 "max_columns": cap}
    return best
