"""Dense linear-algebra primitives shared by every other module.

Rank decisions use two relative tolerances: a singular value is kept when it
exceeds ``EPS_RANK * sigma_1`` and a vector lies in a row space when its
orthogonal residual is at most ``EPS_SPAN * ||a||``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DataError, NonFiniteError, SizeLimitError, ZeroMatrixError

EPS_RANK = 1e-10
EPS_SPAN = 1e-9
KHATRI_RAO_LIMIT = 10_000


class _OutOfSpan:
    """Marker returned by sensitivity queries for vectors outside a row space."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "OUT_OF_SPAN"

    def __reduce__(self):
        return (_OutOfSpan, ())


OUT_OF_SPAN = _OutOfSpan()


def as_matrix(A, d: int | None = None) -> np.ndarray:
    """Return ``A`` as a finite 2-D float array (``n x d``)."""
    M = np.asarray(A, dtype=float)
    if M.ndim == 1:
        M = M.reshape(0, d) if M.size == 0 and d is not None else M.reshape(1, -1)
    if M.ndim != 2:
        raise DataError(f"expected a 2-D matrix, got shape {M.shape}")
    if d is not None and M.shape[1] != d:
        raise DataError(f"expected {d} columns, got {M.shape[1]}")
    if not np.all(np.isfinite(M)):
        raise NonFiniteError("matrix has non-finite entries")
    return M


def as_vector(a, d: int | None = None) -> np.ndarray:
    v = np.asarray(a, dtype=float).reshape(-1)
    if d is not None and v.size != d:
        raise DataError(f"expected a vector of length {d}, got {v.size}")
    if not np.all(np.isfinite(v)):
        raise NonFiniteError("vector has non-finite entries")
    return v


@dataclass(frozen=True)
class SpectralFactorization:
    """Truncated SVD ``A ~ U diag(s) Vt`` keeping only the numerical rank."""

    U: np.ndarray
    s: np.ndarray
    Vt: np.ndarray

    @property
    def rank(self) -> int:
        return int(self.s.size)

    def reconstruct(self) -> np.ndarray:
        return (self.U * self.s) @ self.Vt


def spectral_factorization(A, eps_rank: float = EPS_RANK) -> SpectralFactorization:
    M = as_matrix(A)
    n, d = M.shape
    if n == 0 or d == 0:
        return SpectralFactorization(np.zeros((n, 0)), np.zeros(0), np.zeros((0, d)))
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    r = int(np.count_nonzero(s > eps_rank * s[0])) if s[0] > 0 else 0
    return SpectralFactorization(U[:, :r], s[:r], Vt[:r])


class RowSpace:
    """Orthonormal basis of ``rowspan(B)`` plus the singular values needed
    for ``(B^T B)^-`` restricted to that space."""

    def __init__(self, Vt: np.ndarray, s: np.ndarray, d: int,
                 eps_span: float = EPS_SPAN) -> None:
        self.Vt = Vt
        self.s = s
        self.d = d
        self.eps_span = eps_span

    @classmethod
    def of(cls, B, eps_rank: float = EPS_RANK, eps_span: float = EPS_SPAN,
           d: int | None = None) -> "RowSpace":
        M = as_matrix(B, d)
        f = spectral_factorization(M, eps_rank)
        return cls(f.Vt, f.s, M.shape[1], eps_span)

    @property
    def rank(self) -> int:
        return int(self.s.size)

    def residual(self, a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        coef = self.Vt @ a
        par = self.Vt.T @ coef
        return par, a - par

    def contains(self, a: np.ndarray) -> bool:
        _, perp = self.residual(a)
        return bool(np.linalg.norm(perp) <= self.eps_span * np.linalg.norm(a))

    def sensitivity(self, a: np.ndarray):
        """``a^T (B^T B)^- a`` if ``a`` is in the row space, else ``OUT_OF_SPAN``."""
        coef = self.Vt @ a
        perp = a - self.Vt.T @ coef
        norm_a = np.linalg.norm(a)
        if np.linalg.norm(perp) > self.eps_span * norm_a:
            return OUT_OF_SPAN
        if norm_a == 0.0:
            return 0.0
        return float(np.sum((coef / self.s) ** 2))

    def sensitivities(self, A: np.ndarray) -> np.ndarray:
        """Vectorised ``sensitivity`` over rows; out-of-span rows give ``inf``."""
        coef = A @ self.Vt.T
        perp = A - coef @ self.Vt
        out = np.sum((coef / self.s) ** 2, axis=1) if self.rank else np.zeros(len(A))
        bad = np.linalg.norm(perp, axis=1) > self.eps_span * np.linalg.norm(A, axis=1)
        out[bad] = np.inf
        return out

    @property
    def sigma_min(self) -> float:
        return float(self.s[-1]) if self.rank else 0.0

    @property
    def sigma_max(self) -> float:
        return float(self.s[0]) if self.rank else 0.0


def leverage_scores(A, eps_rank: float = EPS_RANK) -> np.ndarray:
    """``tau_i = a_i^T (A^T A)^- a_i``, read off the left singular vectors."""
    f = spectral_factorization(A, eps_rank)
    return np.sum(f.U ** 2, axis=1)


def generalized_sensitivity(a, B, eps_rank: float = EPS_RANK,
                            eps_span: float = EPS_SPAN):
    """``sup_{x in rowspan(B)} <a,x>^2 / ||Bx||^2`` or ``OUT_OF_SPAN``."""
    v = as_vector(a)
    return RowSpace.of(B, eps_rank, eps_span, d=v.size).sensitivity(v)


def orthogonal_residual(a, B, eps_rank: float = EPS_RANK) -> tuple[np.ndarray, np.ndarray]:
    """Split ``a`` into its projection on ``rowspan(B)`` and the remainder."""
    v = as_vector(a)
    return RowSpace.of(B, eps_rank, d=v.size).residual(v)


def in_rowspan(a, B, eps_rank: float = EPS_RANK, eps_span: float = EPS_SPAN) -> bool:
    v = as_vector(a)
    return RowSpace.of(B, eps_rank, eps_span, d=v.size).contains(v)


def _psd_eigh(G, eps_rank: float) -> tuple[np.ndarray, np.ndarray]:
    M = as_matrix(G)
    if M.shape[0] != M.shape[1]:
        raise DataError("quadratic form must be square")
    scale = max(np.abs(M).max(initial=0.0), 1e-300)
    if np.abs(M - M.T).max(initial=0.0) > 1e-8 * scale:
        raise DataError("quadratic form is not symmetric")
    lam, V = np.linalg.eigh((M + M.T) / 2)
    top = lam[-1] if lam.size else 0.0
    if lam.size and lam[0] < -1e-8 * max(top, 0.0) - 1e-300:
        raise DataError("quadratic form is not positive semidefinite")
    keep = lam > eps_rank * top if top > 0 else np.zeros(lam.size, bool)
    return lam[keep], V[:, keep]


def log_pseudodet(G, eps_rank: float = EPS_RANK) -> float:
    """Sum of log eigenvalues above the rank cutoff."""
    lam, _ = _psd_eigh(G, eps_rank)
    if lam.size == 0:
        raise ZeroMatrixError("pseudodeterminant of the zero matrix")
    return float(np.sum(np.log(lam)))


def pinv_psd(G, eps_rank: float = EPS_RANK) -> np.ndarray:
    lam, V = _psd_eigh(G, eps_rank)
    return (V / lam) @ V.T


def sqrt_psd(G, eps_rank: float = EPS_RANK) -> np.ndarray:
    lam, V = _psd_eigh(G, eps_rank)
    return (V * np.sqrt(lam)) @ V.T


def log_volume(A) -> float:
    """``0.5 * log det(A A^T)`` for a matrix with independent rows."""
    M = as_matrix(A)
    sign, logdet = np.linalg.slogdet(M @ M.T)
    if sign <= 0:
        raise DataError("rows are linearly dependent")
    return 0.5 * float(logdet)


def log_heights(A) -> np.ndarray:
    """``log ||a_i^perp||`` where ``a_i^perp`` is ``a_i`` minus its projection on
    the earlier rows. The diagonal of R in ``A^T = QR`` carries these norms."""
    M = as_matrix(A)
    R = np.linalg.qr(M.T, mode="r")
    with np.errstate(divide="ignore"):
        return np.log(np.abs(np.diag(R)))


def khatri_rao_lift(A, k: int, limit: int = KHATRI_RAO_LIMIT) -> np.ndarray:
    """Row-wise ``k``-fold tensor power: row ``i`` becomes ``a_i (x) ... (x) a_i``."""
    M = as_matrix(A)
    if k < 1:
        raise DataError("k must be a positive integer")
    n, d = M.shape
    if d ** k > limit:
        raise SizeLimitError(f"lifted dimension {d}^{k} exceeds {limit}", d=d, k=k)
    out = M
    for _ in range(k - 1):
        out = (out[:, :, None] * M[:, None, :]).reshape(n, -1)
    return out


def tensor_power(x, k: int) -> np.ndarray:
    v = as_vector(x)
    out = v
    for _ in range(k - 1):
        out = np.outer(out, v).reshape(-1)
    return out


class GramFactor:
    """Square-root factor ``R`` with ``R^T R = sum_j w_j^2 a_j a_j^T``.

    Rows are folded in by re-triangularising ``[R; w a]``, which never forms
    the Gram matrix explicitly. The row-space factorisation used for
    sensitivity queries is cached until the next update.
    """

    def __init__(self, d: int, eps_rank: float = EPS_RANK, eps_span: float = EPS_SPAN) -> None:
        self.d = d
        self.R = np.zeros((0, d))
        self.eps_rank = eps_rank
        self.eps_span = eps_span
        self._space: RowSpace | None = None

    def add(self, a: np.ndarray, weight: float = 1.0) -> None:
        self._reset(np.vstack([self.R, weight * a]))

    def add_rows(self, rows: np.ndarray) -> None:
        if len(rows):
            self._reset(np.vstack([self.R, rows]))

    def rebuild(self, rows: np.ndarray) -> None:
        self.R = np.zeros((0, self.d))
        self.add_rows(rows)
        if not len(rows):
            self._space = None

    def _reset(self, stacked: np.ndarray) -> None:
        R = np.linalg.qr(stacked, mode="r")
        self.R = R[: min(R.shape[0], self.d)]
        self._space = None

    @property
    def space(self) -> RowSpace:
        if self._space is None:
            f = spectral_factorization(self.R, self.eps_rank)
            self._space = RowSpace(f.Vt, f.s, self.d, self.eps_span)
        return self._space

    def sensitivity(self, a: np.ndarray):
        return self.space.sensitivity(a)

    @property
    def gram(self) -> np.ndarray:
        return self.R.T @ self.R

    def quad(self, x: np.ndarray) -> float:
        return float(np.sum((self.R @ x) ** 2))

    def copy(self) -> "GramFactor":
        g = GramFactor(self.d, self.eps_rank, self.eps_span)
        g.R = self.R.copy()
        return g
