"""Row-sampling embeddings: Lewis-weight sampling, a merge-and-reduce
streaming summary, online leverage sampling for spectral approximation and
the composed lp-to-lq embedding."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DegenerateWeightsError, ShapeMismatchError
from .lewis import change_of_density, lewis_weights
from .linalg import OUT_OF_SPAN, GramFactor, as_matrix, as_vector, spectral_factorization
from .solvers import lq_norm

def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


@dataclass
class SampledMatrix:
    """Sampled source rows with per-row scales; ``matrix = diag(scales) rows``.
    ``kappa`` is the certified distortion when the sample comes with one."""

    rows: np.ndarray
    source_indices: np.ndarray
    scales: np.ndarray
    p: float
    seed: int | None = None
    kappa: float = 1.0
    meta: dict = field(default_factory=dict)

    @property
    def matrix(self) -> np.ndarray:
        return self.scales[:, None] * self.rows

    def __len__(self) -> int:
        return len(self.rows)

    def norm(self, x) -> float:
        return lq_norm(self.matrix @ as_vector(x, self.rows.shape[1]), self.p)

    def collapse(self) -> "SampledMatrix":
        """Merge repeated source rows; ``sum scale^p`` per index is preserved,
        so every ``||SAx||_p`` is unchanged."""
        if not len(self):
            return self
        uniq, first, inv = np.unique(self.source_indices, return_index=True,
                                     return_inverse=True)
        if len(uniq) == len(self):
            return self
        if math.isinf(self.p):
            scales = np.zeros(len(uniq))
            np.maximum.at(scales, inv, self.scales)
        else:
            mass = np.zeros(len(uniq))
            np.add.at(mass, inv, self.scales ** self.p)
            scales = mass ** (1.0 / self.p)
        return SampledMatrix(self.rows[first], uniq, scales, self.p, self.seed, self.kappa,
                             dict(self.meta))

    def to_dict(self) -> dict:
        return {"p": self.p, "seed": self.seed, "kappa": self.kappa,
                "source_indices": self.source_indices.tolist(),
                "scales": self.scales.tolist(), "rows": self.rows.tolist(), **self.meta}

    @classmethod
    def raw(cls, A, p: float, indices=None) -> "SampledMatrix":
        M = as_matrix(A)
        idx = np.arange(len(M)) if indices is None else np.asarray(indices)
        return cls(M, idx, np.ones(len(M)), p)


def lewis_sample(A, p: float, w, s: int, seed=None, indices=None) -> SampledMatrix:
    """``s`` iid draws with probability ``w_i / ||w||_1``; a draw of row ``i``
    is rescaled by ``(s q_i)^(-1/p)`` so that ``E ||SAx||_p^p = ||Ax||_p^p``."""
    M = as_matrix(A)
    wv = np.asarray(getattr(w, "w", w), dtype=float)
    if wv.shape != (len(M),):
        raise ShapeMismatchError("weight vector length does not match the row count")
    total = float(wv.sum())
    if not np.all(wv >= 0) or total <= 0 or not math.isfinite(total):
        raise DegenerateWeightsError("sampling weights must be nonnegative with positive sum")
    if s < 1:
        raise ConfigError("sample budget must be positive")
    q = wv / total
    draws = _rng(seed).choice(len(M), size=s, p=q)
    scales = (s * q[draws]) ** (-1.0 / p)
    src = np.arange(len(M)) if indices is None else np.asarray(indices)
    return SampledMatrix(M[draws], src[draws], scales, p,
                         seed if isinstance(seed, (int, np.integer)) else None)


def span_lewis_weights(A, p: float, tol: float = 1e-10) -> np.ndarray:
    """Lewis weights computed in row-space coordinates, so rank-deficient
    inputs are handled (the weights are basis invariant)."""
    f = spectral_factorization(A)
    if f.rank == 0:
        raise DegenerateWeightsError("matrix is zero")
    return lewis_weights(f.U * f.s, p, tol=tol).w


def sample_budget(d: int, p: float, eps: float, constant: float = 2.0) -> int:
    """``C d^max(1, p/2) ln(d+1) / eps^2``."""
    return math.ceil(constant * d ** max(1.0, p / 2) * math.log(d + 1) / eps ** 2)


class MergeTreeSummary:
    """One-pass merge-and-reduce summary for ``||Ax||_p``.

    Rows are buffered into blocks of ``block_size``; full blocks enter a
    binary counter of levels and two blocks on the same level are reduced
    into one on the next level. A reduce keeps the union when it is within
    the sample budget and otherwise Lewis-samples it at per-level accuracy
    ``eps / depth``, where ``depth = ceil(log2(n_hint / block_size))``.
    """

    def __init__(self, d: int, p: float, eps: float, block_size: int,
                 n_hint: int | None = None, seed=None, budget: int | None = None) -> None:
        if block_size < 1 or not 0 < eps < 1:
            raise ConfigError("need block_size >= 1 and 0 < eps < 1")
        self.d, self.p, self.eps, self.block_size = d, p, eps, block_size
        self.depth = max(1, math.ceil(math.log2(n_hint / block_size))) if n_hint and \
            n_hint > block_size else 1
        self.eps_level = eps / self.depth
        self.budget = budget or sample_budget(d, p, self.eps_level)
        self.seed = seed
        self._rng = _rng(seed)
        self.levels: dict[int, SampledMatrix] = {}
        self._buf: list[np.ndarray] = []
        self._buf_idx: list[int] = []
        self.n_seen = 0
        self.max_inventory = 0
        self.reductions = 0

    @property
    def inventory(self) -> int:
        return len(self.levels) + (1 if self._buf else 0)

    def _note(self) -> None:
        self.max_inventory = max(self.max_inventory, self.inventory)

    def ingest(self, a, index: int | None = None) -> None:
        self._buf.append(as_vector(a, self.d))
        self._buf_idx.append(self.n_seen if index is None else int(index))
        self.n_seen += 1
        self._note()
        if len(self._buf) == self.block_size:
            block = SampledMatrix.raw(np.array(self._buf), self.p, self._buf_idx)
            self._buf, self._buf_idx = [], []
            self._carry(block, 0)

    def ingest_rows(self, A) -> None:
        for a in as_matrix(A, self.d):
            self.ingest(a)

    def _carry(self, block: SampledMatrix, level: int) -> None:
        while level in self.levels:
            block = self.reduce(self.levels.pop(level), block)
            level += 1
        self.levels[level] = block
        self._note()

    def reduce(self, X: SampledMatrix, Y: SampledMatrix) -> SampledMatrix:
        both = SampledMatrix(np.vstack([X.rows, Y.rows]),
                             np.concatenate([X.source_indices, Y.source_indices]),
                             np.concatenate([X.scales, Y.scales]), self.p)
        if len(both) <= self.budget:
            return both
        self.reductions += 1
        w = span_lewis_weights(both.matrix, self.p)
        pick = lewis_sample(both.matrix, self.p, w, self.budget, self._rng)
        pos = pick.source_indices                     # positions inside `both`
        return SampledMatrix(both.rows[pos], both.source_indices[pos],
                             both.scales[pos] * pick.scales, self.p).collapse()

    def merge(self, other: "MergeTreeSummary") -> "MergeTreeSummary":
        """Fold ``other`` into this summary (same ``d`` and ``p``)."""
        if other.d != self.d or other.p != self.p:
            raise ShapeMismatchError("summaries differ in dimension or index")
        for level in sorted(other.levels):
            self._carry(other.levels[level], level)
        for a, i in zip(other._buf, other._buf_idx):
            self.ingest(a, i)
        self.n_seen += other.n_seen - len(other._buf)
        return self

    def summary(self) -> SampledMatrix:
        parts = [self.levels[k] for k in sorted(self.levels)]
        if self._buf:
            parts.append(SampledMatrix.raw(np.array(self._buf), self.p, self._buf_idx))
        if not parts:
            return SampledMatrix.raw(np.zeros((0, self.d)), self.p)
        out = SampledMatrix(np.vstack([b.rows for b in parts]),
                            np.concatenate([b.source_indices for b in parts]),
                            np.concatenate([b.scales for b in parts]), self.p,
                            self.seed if isinstance(self.seed, int) else None)
        out.meta = {"block_size": self.block_size, "eps": self.eps, "depth": self.depth,
                    "budget": self.budget, "max_inventory": self.max_inventory}
        return out

    def query(self, x) -> float:
        return self.summary().norm(x)


class OnlineSpectralSampler:
    """Keep row ``a`` with probability ``min(c l, 1)``, ``c = 8 ln d / eps^2``,
    where ``l = min((1+eps) a^T (S^T S)^- a, 1)`` against the rows kept so far
    (1 outside their span); kept rows are scaled by ``1/sqrt(prob)``."""

    def __init__(self, d: int, eps: float, seed=None) -> None:
        if eps <= 0:
            raise ConfigError("eps must be positive")
        self.d, self.eps, self.seed = d, eps, seed
        self.c = max(8.0 * math.log(d), 1.0) / eps ** 2
        self._rng = _rng(seed)
        self._factor = GramFactor(d)
        self.rows: list[np.ndarray] = []
        self.indices: list[int] = []
        self.scales: list[float] = []
        self.n_seen = 0

    def ingest(self, a, index: int | None = None) -> bool:
        v = as_vector(a, self.d)
        idx = self.n_seen if index is None else int(index)
        self.n_seen += 1
        u = self._rng.random()
        if not np.any(v):
            return False
        s = self._factor.sensitivity(v)
        lev = 1.0 if s is OUT_OF_SPAN else min((1 + self.eps) * s, 1.0)
        prob = min(self.c * lev, 1.0)
        if u >= prob:
            return False
        scale = 1.0 / math.sqrt(prob)
        self._factor.add(v, scale)
        self.rows.append(v)
        self.indices.append(idx)
        self.scales.append(scale)
        return True

    def result(self) -> SampledMatrix:
        rows = np.array(self.rows).reshape(-1, self.d)
        return SampledMatrix(rows, np.array(self.indices, dtype=int), np.array(self.scales), 2.0,
                             self.seed if isinstance(self.seed, int) else None,
                             meta={"eps": self.eps, "c": self.c})


def online_spectral_sample(A, eps: float, seed=None) -> SampledMatrix:
    M = as_matrix(A)
    sampler = OnlineSpectralSampler(M.shape[1], eps, seed)
    for a in M:
        sampler.ingest(a)
    return sampler.result()


def lp_to_lq_embed(A, p: float, q: float, eps: float, seed=None,
                   s: int | None = None) -> SampledMatrix:
    """Sampled reweighting ``S`` with ``||Ax||_p <= ||SAx||_q <= kappa ||Ax||_p``
    (with the sampling step succeeding).

    The rows are reweighted by exact lp Lewis weights (change of density to
    lq) and then sampled at index ``q`` with the same weights, which are the
    lq Lewis weights of the reweighted matrix. Dividing by ``1 - eps`` makes
    the lower bound survive a ``(1 +- eps)`` sampling error, so the reported
    ``kappa`` is ``kappa_density * (1 + eps) / (1 - eps)``.
    """
    M = as_matrix(A)
    if not (q <= p and 0 < eps < 1):
        raise ConfigError("need q <= p and 0 < eps < 1")
    f = spectral_factorization(M)
    if f.rank == 0:
        raise DegenerateWeightsError("matrix is zero")
    C = f.U * f.s                                  # row-space coordinates
    w = lewis_weights(C, p, tol=1e-10)
    dens = change_of_density(C, p, q, w)
    r = f.rank
    budget = s or math.ceil(4 * r ** max(1.0, q / 2) * math.log(r + 1) / eps ** 2)
    pick = lewis_sample(dens.B, q, w.w, budget, seed)
    pos = pick.source_indices
    reweight = w.w[pos] ** (1.0 / q - 1.0 / p)
    scales = dens.scale / (1 - eps) * reweight * pick.scales
    kappa = dens.distortion * (1 + eps) / (1 - eps)
    out = SampledMatrix(M[pos], pos, scales, q,
                        seed if isinstance(seed, (int, np.integer)) else None, kappa,
                        {"source_p": p, "eps": eps, "budget": budget,
                         "kappa_density": dens.kappa, "lambda_density": dens.lam})
    return out.collapse()
