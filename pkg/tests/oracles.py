"""Reference computations written independently of the package: brute
force, enumeration, direct pseudo-inverses and Newton's method. Tests
compare package output against these."""

from __future__ import annotations

import itertools
import math

import numpy as np


def lp_norms(A: np.ndarray, X: np.ndarray, p: float) -> np.ndarray:
    """``||A x||_p`` for every row ``x`` of ``X``."""
    V = np.abs(X @ A.T)
    if math.isinf(p):
        return V.max(axis=1)
    m = V.max(axis=1, keepdims=True)
    m[m == 0] = 1.0
    return m[:, 0] * np.sum((V / m) ** p, axis=1) ** (1 / p)


def unit_queries(d: int, m: int, seed: int) -> np.ndarray:
    X = np.random.default_rng(seed).standard_normal((m, d))
    return X / np.linalg.norm(X, axis=1, keepdims=True)


def pinv_sensitivity(a: np.ndarray, B: np.ndarray) -> float:
    """``a^T (B^T B)^+ a``, or inf when ``a`` leaves ``rowspan(B)``."""
    if len(B) == 0:
        return math.inf if np.any(a) else 0.0
    P = np.linalg.pinv(B) @ B
    if np.linalg.norm(a - P @ a) > 1e-9 * max(np.linalg.norm(a), 1e-300):
        return math.inf
    return float(a @ np.linalg.pinv(B.T @ B) @ a)


def online_leverage(A: np.ndarray) -> np.ndarray:
    """Online scores by a fresh pseudo-inverse per prefix."""
    out = np.empty(len(A))
    for i, a in enumerate(A):
        s = pinv_sensitivity(a, A[:i])
        out[i] = 1.0 if math.isinf(s) else min(s, 1.0)
    return out


def leverage(A: np.ndarray) -> np.ndarray:
    return np.einsum("ij,jk,ik->i", A, np.linalg.pinv(A.T @ A), A)


def lewis_residual(A: np.ndarray, w: np.ndarray, p: float) -> float:
    """``max_i |w_i - tau_i(W^(1/2-1/p) A)|`` straight from the definition."""
    scaled = w[:, None] ** (0.5 - 1 / p) * A
    return float(np.max(np.abs(w - leverage(scaled))))


def net_sensitivity_2d(a: np.ndarray, B: np.ndarray, p: float, m: int = 40_000) -> float:
    t = np.linspace(0, np.pi, m, endpoint=False)
    X = np.column_stack([np.cos(t), np.sin(t)])
    return float(np.max(np.abs(X @ a) ** p / np.sum(np.abs(X @ B.T) ** p, axis=1)))


def net_sensitivity_3d(a: np.ndarray, B: np.ndarray, p: float, m: int = 400_000,
                       seed: int = 0) -> float:
    X = np.random.default_rng(seed).standard_normal((m, 3))
    return float(np.max(np.abs(X @ a) ** p / np.sum(np.abs(X @ B.T) ** p, axis=1)))


def newton_lp_regression(B: np.ndarray, c: np.ndarray, p: float, iters: int = 100) -> np.ndarray:
    """Damped Newton on ``sum |Bx - c|^p`` (``p >= 2``), from least squares."""
    x = np.linalg.lstsq(B, c, rcond=None)[0]

    def f(z):
        return float(np.sum(np.abs(B @ z - c) ** p))

    for _ in range(iters):
        r = B @ x - c
        g = p * B.T @ (np.abs(r) ** (p - 2) * r)
        H = p * (p - 1) * B.T @ ((np.abs(r) ** (p - 2) + 1e-300)[:, None] * B)
        step = np.linalg.lstsq(H, g, rcond=None)[0]
        t, fx = 1.0, f(x)
        while t > 1e-12 and f(x - t * step) > fx:
            t /= 2
        if t <= 1e-12:
            break
        x = x - t * step
    return x


def linf_regression_lp(A: np.ndarray, b: np.ndarray) -> float:
    from scipy.optimize import linprog

    n, d = A.shape
    ones = np.ones((n, 1))
    res = linprog(np.r_[np.zeros(d), 1.0],
                  A_ub=np.vstack([np.hstack([A, -ones]), np.hstack([-A, -ones])]),
                  b_ub=np.r_[b, -b], bounds=[(None, None)] * d + [(0, None)])
    return float(res.fun)


def lp_vertex_enumeration(A: np.ndarray, c: np.ndarray) -> float:
    """``max <c,x>`` over ``{|Ax| <= 1}`` in ``d = 3`` by visiting every
    vertex (intersection of three active constraint planes)."""
    C = np.vstack([A, -A])
    best = -math.inf
    for tri in itertools.combinations(range(len(C)), 3):
        M = C[list(tri)]
        if abs(np.linalg.det(M)) < 1e-12:
            continue
        v = np.linalg.solve(M, np.ones(3))
        if np.all(np.abs(A @ v) <= 1 + 1e-9):
            best = max(best, float(c @ v))
    return best


def brute_force_volume(A: np.ndarray, k: int) -> float:
    """Largest ``log sqrt(det(A_S A_S^T))`` over all ``k``-subsets."""
    best = -math.inf
    for sub in itertools.combinations(range(len(A)), k):
        M = A[list(sub)]
        sign, ld = np.linalg.slogdet(M @ M.T)
        if sign > 0:
            best = max(best, 0.5 * ld)
    return best


def grid_shell_width(P: np.ndarray, m: int = 200, pad: float = 1.0) -> float:
    lo, hi = P.min(axis=0) - pad, P.max(axis=0) + pad
    ys = np.linspace(lo[1], hi[1], m)
    best = math.inf
    for x in np.linspace(lo[0], hi[0], m):
        C = np.column_stack([np.full(m, x), ys])
        D = np.linalg.norm(P[None, :, :] - C[:, None, :], axis=2)
        best = min(best, float((D.max(axis=1) - D.min(axis=1)).min()))
    return best


def kth_robust_width(A: np.ndarray, x: np.ndarray, k: int) -> float:
    return float(np.sort(np.abs(A @ x))[::-1][k])


def brute_force_css(A: np.ndarray, k: int, p: float) -> float:
    """``min`` over ``k``-column subsets of the total lp^p fitting cost."""
    best = math.inf
    for sub in itertools.combinations(range(A.shape[1]), k):
        B = A[:, list(sub)]
        total = 0.0
        for i in range(A.shape[1]):
            if i in sub:
                continue
            x = newton_lp_regression(B, A[:, i], p, iters=40)
            total += float(np.sum(np.abs(B @ x - A[:, i]) ** p))
            if total >= best:
                break
        best = min(best, total)
    return best
