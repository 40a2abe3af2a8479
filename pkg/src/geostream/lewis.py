"""Lewis weights: offline fixed point and averaged iterate, multi-pass
streaming drivers over replayable sources, weight switching and the
change-of-density reweighting between lp and lq."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import ConfigError, KindMismatchError, SingularQuadraticError
from .linalg import as_matrix, as_vector, khatri_rao_lift
from .solvers import lq_norm
from .streams import RowSource

EXACT, ONE_SIDED, OVERESTIMATE = "exact", "one_sided", "overestimate"


@dataclass
class LewisWeights:
    w: np.ndarray
    p: float
    gamma: float = 0.0
    alpha: float = 1.0
    kind: str = EXACT
    residual: float = float("nan")
    iterations: int = 0

    def to_dict(self) -> dict:
        return {"p": self.p, "gamma": self.gamma, "alpha": self.alpha, "kind": self.kind,
                "w": self.w.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "LewisWeights":
        return cls(np.asarray(data["w"], float), float(data["p"]), float(data["gamma"]),
                   float(data["alpha"]), data["kind"])


@dataclass
class LewisQuadratic:
    """``M = A^T W^(1-2/p) A``; row weights are recovered from ``M`` alone."""

    M: np.ndarray
    p: float
    gamma: float = 0.0

    def to_dict(self) -> dict:
        return {"p": self.p, "gamma": self.gamma, "M": self.M.tolist()}


def _powers(w: np.ndarray, e: float) -> np.ndarray:
    out = np.zeros_like(w)
    pos = w > 0
    out[pos] = w[pos] ** e
    return out


def _inverse_half(M: np.ndarray) -> np.ndarray:
    """``L`` with ``L L^T = M^{-1}``; refuses numerically singular forms."""
    lam, V = np.linalg.eigh((M + M.T) / 2)
    if lam.size == 0 or lam[-1] <= 0 or lam[0] <= 1e-12 * lam[-1]:
        raise SingularQuadraticError("Lewis quadratic is numerically singular")
    return V / np.sqrt(lam)


def _quad_scores(A: np.ndarray, scale: np.ndarray) -> np.ndarray:
    """``a_i^T (A^T diag(scale) A)^{-1} a_i`` via the SVD of the scaled matrix."""
    _, s, Vt = np.linalg.svd(np.sqrt(scale)[:, None] * A, full_matrices=False)
    if s.size < A.shape[1] or s[-1] <= 1e-10 * s[0]:
        raise SingularQuadraticError("reweighted matrix is rank deficient")
    return np.sum((A @ Vt.T / s) ** 2, axis=1)


def reweighted_leverage(A, w, p: float) -> np.ndarray:
    """``tau_i(W^(1/2-1/p) A)``."""
    M = as_matrix(A)
    wv = np.asarray(w, float)
    e = 1.0 - 2.0 / p
    return _powers(wv, e) * _quad_scores(M, _powers(wv, e))


def default_iterations(n: int) -> int:
    return math.ceil(math.log2(max(math.log2(max(n, 4)), 1.0))) + 8


def lewis_fixed_point(A, p: float, T: int | None = None, gamma: float = 0.0,
                      tol: float | None = None, damping: float | None = None
                      ) -> tuple[LewisWeights, LewisQuadratic]:
    """Iterate ``w_i <- max(gamma, (a_i^T (A^T W^(1-2/p) A)^{-1} a_i)^(p/2))``
    from the all-ones vector.

    Without ``tol`` exactly ``T`` updates run (default
    ``ceil(log2 log2 n) + 8``); with ``tol`` the loop stops once the
    fixed-point residual is below it, still capped at ``T``. The plain update
    contracts only for ``p < 4``; for larger ``p`` the update is damped in log
    space with factor ``4 / (p + 2)``.
    """
    M = as_matrix(A)
    n, d = M.shape
    if p <= 0:
        raise ConfigError("p must be positive")
    if T is None:
        T = default_iterations(n) if tol is None else 500
    if damping is None:
        damping = 1.0 if p < 4 else 4.0 / (p + 2.0)
    e = 1.0 - 2.0 / p
    w = np.ones(n)
    it = 0
    while True:
        scale = _powers(w, e)
        t = _quad_scores(M, scale)
        tau = scale * t
        residual = float(np.max(np.abs(w - np.maximum(gamma, tau)))) if n else 0.0
        if it >= T or (tol is not None and residual <= tol):
            break
        new = np.maximum(gamma, t ** (p / 2))
        if damping != 1.0:
            pos = (w > 0) & (new > 0)
            new = np.where(pos, np.exp((1 - damping) * np.log(np.where(pos, w, 1.0))
                                       + damping * np.log(np.where(pos, new, 1.0))), new)
        w = new
        it += 1
    weights = LewisWeights(w, p, gamma, 1.0 + gamma * n / max(d, 1),
                           EXACT if gamma == 0 else ONE_SIDED, residual, it)
    return weights, LewisQuadratic(M.T @ (scale[:, None] * M), p, gamma)


def lewis_weights(A, p: float, tol: float = 1e-10, max_iter: int = 1000) -> LewisWeights:
    """Exact Lewis weights to fixed-point residual ``tol``."""
    w, _ = lewis_fixed_point(A, p, T=max_iter, tol=tol)
    return w


def round_delta(x, delta: float):
    """Round up to the next multiple of ``delta``."""
    return delta * np.ceil(np.asarray(x) / delta)


def _power_of_two_below(x: float) -> float:
    return 2.0 ** math.floor(math.log2(x))


def averaged_rounds(n: int, d: int) -> int:
    """Round count for the averaged iterate: ``ceil(log2(n/d)) + 4``, raised if
    needed so that ``ln(n/d) / T <= ln 1.5``, which is what one-sidedness of the
    ``3/2``-scaled average requires."""
    ratio = max(n / d, 2.0)
    return max(math.ceil(math.log2(ratio)) + 4, math.ceil(math.log(ratio) / math.log(1.5)) + 1)


def lewis_averaged(A, p: float, T: int | None = None,
                   delta: float | None = None) -> LewisWeights:
    """Average of the rounded, floored iterates
    ``w_(t) = round_delta(max(d/n, tau_i(W_(t-1)^(1/2-1/p) A)))``, scaled by 3/2.
    The result overestimates the reweighted leverage scores (one-sided) with
    total mass ``O(d)``."""
    M = as_matrix(A)
    n, d = M.shape
    if p < 2:
        raise ConfigError("averaged iterate needs p >= 2")
    floor = d / n
    T = averaged_rounds(n, d) if T is None else T
    delta = _power_of_two_below(floor / 16) if delta is None else delta
    prev = np.full(n, floor)
    total = np.zeros(n)
    for _ in range(T):
        cur = round_delta(np.maximum(floor, reweighted_leverage(M, prev, p)), delta)
        total += cur
        prev = cur
    w = 1.5 * total / T
    return LewisWeights(w, p, 0.0, float(w.sum() / d), OVERESTIMATE, iterations=T)


def recover_weights(Mq: LewisQuadratic, a) -> float:
    """``max(gamma, (a^T M^{-1} a)^(p/2))``."""
    v = as_vector(a, Mq.M.shape[0])
    L = _inverse_half(Mq.M)
    if not np.any(v):
        return Mq.gamma
    return max(Mq.gamma, float(np.sum((v @ L) ** 2)) ** (Mq.p / 2))


@dataclass
class StreamLewisResult:
    quadratic: LewisQuadratic
    passes: int
    mode: str
    rounds: int
    delta: float
    n: int
    quadratics: list[np.ndarray] = field(default_factory=list)

    def weight(self, a) -> float:
        """Weight of a row: recovered from the final quadratic (FewPass) or the
        3/2-scaled average of the replayed round chain (LogPass)."""
        if self.mode == "fewpass":
            return recover_weights(self.quadratic, a)
        v = as_vector(a)
        d = v.size
        halves = [_inverse_half(Q) for Q in self.quadratics[:-1]]
        floor = d / self.n
        e = 1.0 - 2.0 / self.quadratic.p
        w, total = floor, 0.0
        for L in halves:
            w = float(round_delta(max(floor, w ** e * float(np.sum((v @ L) ** 2))), self.delta))
            total += w
        return 1.5 * total / self.rounds

    def to_dict(self) -> dict:
        out = {"mode": self.mode, "passes": self.passes, "rounds": self.rounds,
               "delta": self.delta, "n": self.n, **self.quadratic.to_dict()}
        if self.quadratics:
            out["quadratics"] = [Q.tolist() for Q in self.quadratics]
        return out


def stream_lewis_quadratic(src: RowSource | Iterable, p: float, mode: str = "fewpass",
                           T: int | None = None, delta: float | None = None,
                           gamma: float = 0.0) -> StreamLewisResult:
    """Compute a Lewis quadratic touching rows only through full passes.

    ``fewpass`` (``p < 4``): one pass for ``A^T A``, then ``T`` passes of
    ``Q += round_delta(max(d/n, (a^T M^{-1} a)^(p/2))^(1-2/p)) a a^T``;
    ``T + 1`` passes in all. ``logpass`` (``p >= 2``): the averaged-iterate
    recursion where pass ``t`` replays each row's weight chain through the
    frozen quadratics ``Q_(0..t-1)``; returns every round's quadratic.
    Only ``d x d`` forms and scalars are held between passes.
    """
    source = src if isinstance(src, RowSource) else RowSource(src)
    if mode not in ("fewpass", "logpass"):
        raise ConfigError(f"unknown mode {mode!r}")
    if mode == "fewpass" and not 0 < p < 4:
        raise ConfigError("FewPass Lewis streaming requires 0 < p < 4")
    if mode == "logpass" and p < 2:
        raise ConfigError("LogPass Lewis streaming requires p >= 2")
    e = 1.0 - 2.0 / p
    G = None
    n = 0
    for a in source:
        G = np.outer(a, a) if G is None else G + np.outer(a, a)
        n += 1
    if G is None:
        raise ConfigError("empty row source")
    d = G.shape[0]
    floor = d / n

    if mode == "fewpass":
        T = default_iterations(n) if T is None else T
        if delta is None:
            delta = _power_of_two_below(min(1.0, floor ** e) / 16)
        M = G
        for _ in range(T):
            L = _inverse_half(M)
            Q = np.zeros((d, d))
            for a in source:
                lev = float(np.sum((a @ L) ** 2)) ** (p / 2)
                w = float(round_delta(max(floor, lev) ** e, delta))
                Q += w * np.outer(a, a)
            M = Q
        return StreamLewisResult(LewisQuadratic(M, p, gamma), source.passes, mode, T, delta, n)

    T = averaged_rounds(n, d) if T is None else T
    delta = _power_of_two_below(floor / 16) if delta is None else delta
    quads = [floor ** e * G]
    for t in range(1, T + 1):
        halves = [_inverse_half(Q) for Q in quads[:t]]
        Q = np.zeros((d, d))
        for a in source:
            w = floor
            for L in halves:
                w = float(round_delta(max(floor, w ** e * float(np.sum((a @ L) ** 2))), delta))
            Q += w ** e * np.outer(a, a)
        quads.append(Q)
    return StreamLewisResult(LewisQuadratic(quads[-1], p, gamma), source.passes, mode, T,
                             delta, n, quads)


def switch_weights(A, p: float, q: float, tol: float = 1e-12) -> dict:
    """Check that the lq weights of ``W_p^(1/q-1/p) A`` equal the lp weights of A.

    Returns the largest elementwise relative discrepancy together with the
    one-sided check ``tau_i(V^(1/2-1/q) B) <= v_i`` for ``v = w_p``.
    """
    M = as_matrix(A)
    wp = lewis_weights(M, p, tol=tol).w
    B = _powers(wp, 1.0 / q - 1.0 / p)[:, None] * M
    wq = lewis_weights(B, q, tol=tol).w
    disc = float(np.max(np.abs(wq - wp) / np.maximum(wp, 1e-300)))
    one_sided = float(np.max(reweighted_leverage(B, wp, q) - wp))
    return {"p": p, "q": q, "discrepancy": disc, "one_sided_excess": one_sided,
            "w_p": wp, "w_q": wq}


@dataclass
class DensityChange:
    """``B = W^(1/q-1/p) A`` with constants such that, for every x,

    p >= q:  ||Ax||_p <= lam ||Bx||_q   <= kappa lam ||Ax||_p
    q >= p:  ||Ax||_p <= kappa ||Bx||_q <= kappa lam ||Ax||_p
    """

    B: np.ndarray
    p: float
    q: float
    kappa: float
    lam: float

    @property
    def scale(self) -> float:
        return self.lam if self.p >= self.q else self.kappa

    @property
    def distortion(self) -> float:
        return self.kappa * self.lam

    def estimate(self, x) -> float:
        """Scaled lq estimator; lower bound of the sandwich is ``||Ax||_p``."""
        return self.scale * lq_norm(self.B @ as_vector(x, self.B.shape[1]), self.q)


def density_constants(d: int, p: float, q: float, alpha: float = 1.0) -> tuple[float, float]:
    """``(kappa, lam)`` for the change of density from lp to lq."""
    ad = alpha * d
    if p >= q:
        kappa = ad ** (1 / q - 1 / p)
        lam = ad ** (max(0.0, 0.5 - 1 / q) * (p - q) / p)
    else:
        kappa = ad ** (1 / p - 1 / q)
        lam = ad ** (max(0.0, 0.5 - 1 / p) * (q - p) / q)
    return kappa, lam


def change_of_density(A, p: float, q: float, w: LewisWeights | np.ndarray,
                      alpha: float | None = None) -> DensityChange:
    """Reweight rows by ``w^(1/q-1/p)``. With overestimates the one-sided
    mass ``||v||_1`` in the bounds is replaced by ``alpha d``."""
    M = as_matrix(A)
    n, d = M.shape
    if isinstance(w, LewisWeights):
        if not math.isclose(w.p, p):
            raise KindMismatchError(f"weights are for p={w.p}, not p={p}")
        wv = w.w
        if alpha is None:
            alpha = max(w.alpha, float(wv.sum()) / d) if w.kind != EXACT else 1.0
    else:
        wv = np.asarray(w, float)
        if alpha is None:
            alpha = max(1.0, float(wv.sum()) / d)
    if wv.shape != (n,):
        raise ConfigError("weight vector length does not match the row count")
    B = _powers(wv, 1.0 / q - 1.0 / p)[:, None] * M
    kappa, lam = density_constants(d, p, q, alpha)
    return DensityChange(B, p, q, kappa, lam)


def lewis_basis(A, w, p: float) -> np.ndarray:
    """Change of basis ``R`` making ``W^(1/2-1/p) A R`` orthonormal."""
    M = as_matrix(A)
    scaled = np.sqrt(_powers(np.asarray(w, float), 1.0 - 2.0 / p))[:, None] * M
    _, s, Vt = np.linalg.svd(scaled, full_matrices=False)
    if s[-1] <= 1e-10 * s[0]:
        raise SingularQuadraticError("reweighted matrix is rank deficient")
    return Vt.T / s


def lifted_lewis_weights(A, p: float, k: int, limit: int = 10_000) -> LewisWeights:
    """Lewis weights of index ``p/k`` on the ``k``-fold row tensor lift, the
    route for large ``p`` where the direct iteration stops contracting.
    ``||Ax||_p^p = ||A^(k) x^(k)||_(p/k)^(p/k)`` links the two problems."""
    lifted = khatri_rao_lift(A, k, limit)
    _, s, Vt = np.linalg.svd(lifted, full_matrices=False)
    r = int(np.count_nonzero(s > 1e-10 * s[0]))
    return lewis_weights(lifted @ Vt[:r].T, p / k)
