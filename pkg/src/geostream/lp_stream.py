"""One-pass lp subspace sketches.

* ``LpQuadraticSketch``: deterministic, stores a single ``d x d`` quadratic
  form whose square root overestimates ``||Ax||_p`` (``p >= 2``).
* ``LqTradeoffSketch``: rows reweighted by lq sensitivities feed an lq
  merge-and-reduce summary.
* ``ExpEmbedSketch``: rows scaled by ``E^(-1/p)`` with ``E ~ Exp(1)`` feed
  l-infinity coresets; the max of the scaled values tracks ``||Ax||_p``.
"""

from __future__ import annotations

import math
from statistics import median

import numpy as np

from .coreset import Coreset, Decision
from .errors import ConfigError, EmptyCoresetError, ShapeMismatchError, StreamOverflowError
from .linalg import OUT_OF_SPAN, GramFactor, as_vector
from .online import lp_sensitivity
from .sampling import MergeTreeSummary


def power_of_two_ceil(w: float) -> float:
    """Smallest power of two that is ``>= w``."""
    e = math.ceil(math.log2(w))
    if 2.0 ** e < w:
        e += 1
    return 2.0 ** e


class LpQuadraticSketch:
    """Quadratic form ``Q = sum (w'_i a_i)(w'_i a_i)^T`` with weights
    ``w'_i = 2^ceil(log2 s_i^(p/4 - 1/2))`` where ``s_i`` is the leverage of
    ``a_i`` against ``Q`` floored at ``1/n_declared``.

    ``query(x) = sqrt(x^T Q x)`` satisfies ``||Ax||_p <= query(x) <=
    distortion * ||Ax||_p`` with ``distortion = 2 (sum s_i^(p/2))^(1/2 - 1/p)``.
    """

    def __init__(self, d: int, p: float, n_declared: int) -> None:
        if p < 2:
            raise ConfigError("quadratic sketch needs p >= 2")
        if n_declared < 1:
            raise ConfigError("n_declared must be positive")
        self.d, self.p, self.n_declared = d, p, n_declared
        self.factor = GramFactor(d)
        self.rows_seen = 0
        self.s_log: list[float] = []
        self.weight_log: list[float] = []

    @property
    def exponent(self) -> float:
        return self.p / 4 - 0.5

    def ingest_l2_weighted(self, a) -> float:
        if self.rows_seen >= self.n_declared:
            raise StreamOverflowError(f"more than {self.n_declared} rows",
                                      n_declared=self.n_declared)
        v = as_vector(a, self.d)
        floor = 1.0 / self.n_declared
        if np.any(v):
            lev = self.factor.sensitivity(v)
            s = 1.0 if lev is OUT_OF_SPAN else max(min(lev, 1.0), floor)
        else:
            s = floor
        w = power_of_two_ceil(s ** self.exponent)
        self.factor.add(v, w)
        self.rows_seen += 1
        self.s_log.append(s)
        self.weight_log.append(w)
        return w

    def ingest(self, A) -> list[float]:
        return [self.ingest_l2_weighted(a) for a in np.asarray(A, float)]

    @property
    def Q(self) -> np.ndarray:
        return self.factor.gram

    def query(self, x) -> float:
        return math.sqrt(self.factor.quad(as_vector(x, self.d)))

    def query_many(self, X) -> np.ndarray:
        return np.linalg.norm(np.asarray(X, float) @ self.factor.R.T, axis=1)

    @property
    def sensitivity_mass(self) -> float:
        """``sum s_i^(p/2)``."""
        return float(np.sum(np.asarray(self.s_log) ** (self.p / 2)))

    @property
    def distortion(self) -> float:
        if self.exponent == 0:
            return 1.0
        # rounding up to a power of two at most doubles each weight
        return max(1.0, 2.0 * self.sensitivity_mass ** (0.5 - 1.0 / self.p))

    @property
    def weight_exponent_bound(self) -> float:
        """Every stored weight is ``2^k`` with ``|k|`` at most this."""
        return math.ceil(math.log2(max(self.n_declared, 2))) * abs(self.exponent) + 1

    def merge(self, other: "LpQuadraticSketch") -> "LpQuadraticSketch":
        if (self.d, self.p, self.n_declared) != (other.d, other.p, other.n_declared):
            raise ShapeMismatchError("sketches differ in d, p or n_declared")
        out = LpQuadraticSketch(self.d, self.p, self.n_declared)
        out.factor.add_rows(np.vstack([self.factor.R, other.factor.R]))
        out.rows_seen = self.rows_seen + other.rows_seen
        out.s_log = self.s_log + other.s_log
        out.weight_log = self.weight_log + other.weight_log
        return out

    def to_dict(self) -> dict:
        return {"p": self.p, "d": self.d, "n_declared": self.n_declared,
                "rows_seen": self.rows_seen, "Q": self.Q.tolist(),
                "distortion": self.distortion, "weight_log": self.weight_log}


class LqTradeoffSketch:
    """Rows reweighted by ``w' = 2^ceil(log2 s^((p/q - 1)/q))``, where ``s`` is
    ``inflation * max(lq sensitivity against the running summary, 1/n)``,
    and stored in an lq merge-and-reduce summary."""

    def __init__(self, d: int, p: float, q: float, n_declared: int, eps: float = 0.25,
                 block_size: int = 256, seed=None, inflation: float = 2.0,
                 exact_oracle: bool = False) -> None:
        if not 2 <= q <= p:
            raise ConfigError("need 2 <= q <= p")
        self.d, self.p, self.q, self.n_declared = d, p, q, n_declared
        self.inflation, self.exact_oracle = inflation, exact_oracle
        self.inner = MergeTreeSummary(d, q, eps, block_size, n_hint=n_declared, seed=seed)
        self.rows_seen = 0
        self.s_log: list[float] = []
        self.sensitivity_log: list[float] = []
        self.weight_log: list[float] = []

    def ingest_lq(self, a) -> float:
        if self.rows_seen >= self.n_declared:
            raise StreamOverflowError(f"more than {self.n_declared} rows")
        v = as_vector(a, self.d)
        prefix = self.inner.summary().matrix
        sens = lp_sensitivity(v, prefix, self.q, self.exact_oracle) if len(prefix) else 1.0
        if not np.any(v):
            sens = 0.0
        s = self.inflation * max(sens, 1.0 / self.n_declared)
        w = power_of_two_ceil(s ** ((self.p / self.q - 1) / self.q))
        self.inner.ingest(w * v, self.rows_seen)
        self.rows_seen += 1
        self.sensitivity_log.append(sens)
        self.s_log.append(s)
        self.weight_log.append(w)
        return w

    def query(self, x) -> float:
        return self.inner.query(x)

    @property
    def distortion_bound(self) -> float:
        """Upper factor of the reweighted lq norm over ``||Ax||_p`` from
        Hölder, before the summary's own ``1 +- eps``."""
        mass = float(np.sum(np.asarray(self.s_log) ** (self.p / self.q)))
        return 2.0 * mass ** (1 / self.q - 1 / self.p)


def exponential_draw(seed: int, replica: int, index: int) -> float:
    """Exp(1) variate for one (replica, row) pair, by inverse CDF from a
    64-bit word hashed out of ``(seed, replica, index)``."""
    word = np.random.SeedSequence([seed, replica, index]).generate_state(1, np.uint64)[0]
    u = (float(word >> np.uint64(11)) + 0.5) * 2.0 ** -53     # uniform on (0, 1)
    return -math.log1p(-u)


class ExpEmbedSketch:
    """``replicas`` independent l-infinity coresets of the rows
    ``E_i^(-1/p) a_i``; the for-all estimate is the median over replicas."""

    def __init__(self, d: int, p: float, seed: int, replicas: int = 11,
                 p_inf: bool = False) -> None:
        if replicas < 1:
            raise ConfigError("need at least one replica")
        if not p_inf and p <= 0:
            raise ConfigError("p must be positive")
        self.d, self.p, self.seed, self.p_inf = d, p, int(seed), p_inf
        self.replicas = [Coreset(d) for _ in range(replicas)]
        self.rows_seen = 0

    def weight(self, replica: int, index: int) -> float:
        if self.p_inf:
            return 1.0
        return exponential_draw(self.seed, replica, index) ** (-1.0 / self.p)

    def exp_embed_ingest(self, a) -> list[Decision]:
        v = as_vector(a, self.d)
        i = self.rows_seen
        self.rows_seen += 1
        return [c.ingest_row(v, self.weight(r, i), index=i)
                for r, c in enumerate(self.replicas)]

    def ingest(self, A) -> None:
        for a in np.asarray(A, float):
            self.exp_embed_ingest(a)

    def replica_query(self, x, replica: int = 0) -> float:
        return self.replicas[replica].query(x)

    def query(self, x) -> float:
        if not self.rows_seen:
            raise EmptyCoresetError("no rows ingested")
        return median(c.query(x) if len(c) else 0.0 for c in self.replicas)

    @property
    def max_distortion(self) -> float:
        return max(c.distortion for c in self.replicas)

    def band(self) -> tuple[float, float]:
        """Interval for ``query(x) / ||Ax||_p`` met by each query with
        probability at least 2/3. A replica's scaled maximum leaves the band
        on either side with probability 1/4, so the median of several rarely
        does; a coreset loses at most its own distortion on the low side."""
        if self.p_inf:
            return 1.0 / self.max_distortion, 1.0
        lo = math.log(4.0) ** (-1.0 / self.p) / self.max_distortion
        hi = math.log(4.0 / 3.0) ** (-1.0 / self.p)
        return lo, hi

    def to_dict(self) -> dict:
        return {"p": None if self.p_inf else self.p, "d": self.d, "seed": self.seed,
                "rows_seen": self.rows_seen,
                "replicas": [c.to_dict() for c in self.replicas]}
