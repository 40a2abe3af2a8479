"""Online l-infinity coresets: the sensitivity-threshold coreset, its k-robust
cascade and the angular (restricted) variant."""

from __future__ import annotations

import enum
import math

import numpy as np

from .errors import ConfigError, EmptyCoresetError, InsufficientRowsError, NormBandError
from .linalg import OUT_OF_SPAN, GramFactor, as_matrix, as_vector

TIE_TOL = 1e-9
REFACTOR_EVERY = 128


class Decision(enum.Enum):
    KEPT = "kept"
    DISCARDED = "discarded"

    def __bool__(self) -> bool:
        return self is Decision.KEPT


class Coreset:
    """Irrevocable row selection certifying, for every ``x``,

        ||A_S x||_inf <= ||A x||_inf <= sqrt(|S|) ||A_S x||_inf.

    A row is kept when it leaves the span of the stored rows or when its
    sensitivity ``a^T (A_S^T A_S)^- a`` is at least 1 (within ``tie_tol``,
    so exact ties are kept). Rows may carry a positive weight; the test and
    the queries then act on the weighted row.
    """

    def __init__(self, d: int, tie_tol: float = TIE_TOL,
                 refactor_every: int = REFACTOR_EVERY) -> None:
        if d < 1:
            raise ConfigError("dimension must be positive")
        self.d = d
        self.tie_tol = tie_tol
        self.refactor_every = refactor_every
        self.indices: list[int] = []
        self.rows: list[np.ndarray] = []
        self.weights: list[float] = []
        self.n_seen = 0
        self._factor = GramFactor(d)
        self._since_refactor = 0

    def __len__(self) -> int:
        return len(self.indices)

    def _accepts(self, v: np.ndarray) -> bool:
        s = self._factor.sensitivity(v)
        return s is OUT_OF_SPAN or s >= 1.0 - self.tie_tol

    def ingest_row(self, a, weight: float = 1.0, index: int | None = None) -> Decision:
        v = as_vector(a, self.d)
        idx = self.n_seen if index is None else int(index)
        self.n_seen += 1
        wv = weight * v
        if not np.any(wv) or not self._accepts(wv):
            return Decision.DISCARDED
        self._store(idx, v, weight)
        return Decision.KEPT

    def _store(self, idx: int, v: np.ndarray, weight: float) -> None:
        self.indices.append(idx)
        self.rows.append(v)
        self.weights.append(float(weight))
        self._since_refactor += 1
        if self._since_refactor >= self.refactor_every:
            self._factor.rebuild(self.matrix)
            self._since_refactor = 0
        else:
            self._factor.add(v, weight)

    def ingest(self, A) -> list[Decision]:
        return [self.ingest_row(a) for a in as_matrix(A, self.d)]

    @property
    def matrix(self) -> np.ndarray:
        """Stored rows with their weights applied."""
        if not self.rows:
            return np.zeros((0, self.d))
        return np.asarray(self.weights)[:, None] * np.asarray(self.rows)

    @property
    def gram(self) -> np.ndarray:
        return self._factor.gram

    def sensitivity(self, a):
        return self._factor.sensitivity(as_vector(a, self.d))

    @property
    def distortion(self) -> float:
        return math.sqrt(len(self))

    def query(self, x, norm: str = "linf") -> float:
        if not self.rows:
            raise EmptyCoresetError("query on an empty coreset")
        y = self.matrix @ as_vector(x, self.d)
        if norm == "linf":
            return float(np.abs(y).max())
        if norm == "l2":
            return float(np.linalg.norm(y))
        raise ConfigError(f"unknown norm {norm!r}")

    def certified_size_bound(self, M: float | None = None, kappa_ol: float | None = None,
                             C: float = 20.0) -> dict:
        """Size audit: ``C d ln n`` for integer input bounded by ``M``, or
        ``C d ln(n kappa)`` when an online condition number is supplied."""
        n = max(self.n_seen, 2)
        if kappa_ol is not None and M is None:
            bound = C * self.d * max(math.log(n * max(kappa_ol, 1.0)), 1.0)
        else:
            bound = C * self.d * max(math.log(n), 1.0)
        return {"size": len(self), "bound": bound, "constant": C, "pass": len(self) <= bound}

    def to_dict(self) -> dict:
        return {"d": self.d, "n_seen": self.n_seen, "indices": list(self.indices),
                "weights": list(self.weights),
                "rows": [r.tolist() for r in self.rows]}

    @classmethod
    def from_dict(cls, data: dict) -> "Coreset":
        c = cls(int(data["d"]))
        c.n_seen = int(data["n_seen"])
        c.indices = [int(i) for i in data["indices"]]
        c.weights = [float(w) for w in data["weights"]]
        c.rows = [np.asarray(r, dtype=float) for r in data["rows"]]
        c._factor.rebuild(c.matrix)
        return c


class KRobustCascade:
    """``k + 1`` chained coresets; level ``i`` only sees rows that every
    earlier level discarded."""

    def __init__(self, k: int, d: int) -> None:
        if k < 0:
            raise ConfigError("k must be nonnegative")
        self.k = k
        self.d = d
        self.levels = [Coreset(d) for _ in range(k + 1)]
        self.n_seen = 0

    def ingest_row(self, a) -> int | None:
        """Return the level that kept ``a``, or None if all discarded it."""
        v = as_vector(a, self.d)
        idx = self.n_seen
        self.n_seen += 1
        for level, c in enumerate(self.levels):
            if c.ingest_row(v, index=idx):
                return level
        return None

    @property
    def union(self) -> np.ndarray:
        mats = [c.matrix for c in self.levels]
        return np.vstack(mats)

    @property
    def indices(self) -> list[int]:
        return sorted(i for c in self.levels for i in c.indices)

    @property
    def distortion(self) -> float:
        return math.sqrt(max(len(c) for c in self.levels))

    def krobust_query(self, x) -> float:
        """``(k+1)``-st largest ``|<a, x>|`` over the stored union."""
        U = self.union
        if len(U) <= self.k:
            raise InsufficientRowsError(f"need more than {self.k} stored rows", stored=len(U))
        h = np.sort(np.abs(U @ as_vector(x, self.d)))[::-1]
        return float(h[self.k])


class RestrictedCoreset(Coreset):
    """Angular coreset for rows of norm in a fixed band: keep a row only if
    its direction has ``|cos| < 1/sqrt(2d-1)`` with every stored direction.
    Pairwise-incoherent unit vectors in ``R^d`` number at most ``2d - 1``."""

    def __init__(self, d: int, band: tuple[float, float] = (0.5, 2.0)) -> None:
        super().__init__(d)
        self.band = band
        # shrink slightly so rounding cannot admit a pair on the boundary
        self.threshold = (1.0 - 1e-12) / math.sqrt(2 * d - 1)
        self._units = np.zeros((0, d))

    def ingest_row(self, a, weight: float = 1.0, index: int | None = None) -> Decision:
        v = as_vector(a, self.d)
        nrm = float(np.linalg.norm(v))
        lo, hi = self.band
        if not lo <= nrm <= hi:
            raise NormBandError(f"row norm {nrm:g} outside [{lo}, {hi}]", norm=nrm)
        idx = self.n_seen if index is None else int(index)
        self.n_seen += 1
        u = v / nrm
        if len(self._units) and np.abs(self._units @ u).max() >= self.threshold:
            return Decision.DISCARDED
        self._units = np.vstack([self._units, u])
        self._store(idx, v, weight)
        return Decision.KEPT

    restricted_ingest = ingest_row
