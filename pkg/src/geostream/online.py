"""Online leverage scores, online lp sensitivities and their running-sum audits."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, OracleLimitError
from .linalg import OUT_OF_SPAN, GramFactor, RowSpace, as_matrix, as_vector
from .solvers import irls_solve, lq_norm


def lp_sensitivity(a, B, p: float, exact_oracle: bool = False) -> float:
    """``min(sup_x |<a,x>|^p / ||Bx||_p^p, 1)`` over ``x`` in ``rowspan(B)``;
    1 when ``a`` leaves the row space.

    For ``p >= 1`` the supremum is the reciprocal of the convex program
    ``min ||Bx||_p^p s.t. <a,x> = 1``, solved by IRLS on an affine
    parametrisation of the constraint inside the row space. With
    ``exact_oracle`` the value is instead enumerated over a sphere net
    (``d <= 3`` only).
    """
    v = as_vector(a)
    M = as_matrix(B, v.size)
    if exact_oracle:
        if v.size > 3:
            raise OracleLimitError("sphere-net oracle is limited to d <= 3", d=v.size)
        return min(sphere_net_lp_sensitivity(v, M, p), 1.0)
    space = RowSpace.of(M, d=v.size)
    if space.sensitivity(v) is OUT_OF_SPAN:
        return 1.0
    if not np.any(v):
        return 0.0
    if p == 2:
        return min(float(space.sensitivity(v)), 1.0)
    coords = space.Vt @ v                        # a in row-space coordinates
    Bc = M @ space.Vt.T                          # B restricted to the row space
    y0 = coords / (coords @ coords)
    if space.rank == 1:
        denom = lq_norm(Bc @ y0, p) ** p
    else:
        # orthonormal basis of the complement of `coords` inside R^rank
        Q, _ = np.linalg.qr(np.column_stack([coords, np.eye(space.rank)]))
        N = Q[:, 1: space.rank]
        z = irls_solve(Bc @ N, -(Bc @ y0), p, strict=False)
        denom = lq_norm(Bc @ (y0 + N @ z), p) ** p
    return 1.0 if denom <= 0 else min(1.0 / denom, 1.0)


def sphere_directions(d: int, resolution: int | None = None) -> np.ndarray:
    """Deterministic near-uniform unit directions covering a half sphere
    (``d <= 3``); antipodes are redundant for symmetric ratios."""
    if d == 1:
        return np.ones((1, 1))
    if d == 2:
        m = resolution or 20_000
        t = np.pi * (np.arange(m) + 0.5) / m
        return np.column_stack([np.cos(t), np.sin(t)])
    if d == 3:
        m = resolution or 200_000
        k = np.arange(m) + 0.5
        z = k / m                                 # upper hemisphere, z in (0, 1)
        phi = np.pi * (1 + 5 ** 0.5) * k
        rho = np.sqrt(1 - z ** 2)
        return np.column_stack([rho * np.cos(phi), rho * np.sin(phi), z])
    raise OracleLimitError("sphere net only available for d <= 3", d=d)


def sphere_net_lp_sensitivity(a: np.ndarray, B: np.ndarray, p: float,
                              resolution: int | None = None) -> float:
    space = RowSpace.of(B, d=a.size)
    if space.sensitivity(a) is OUT_OF_SPAN:
        return 1.0
    X = sphere_directions(a.size, resolution)
    X = X @ space.Vt.T @ space.Vt                 # project onto the row space
    keep = np.linalg.norm(X, axis=1) > 1e-6
    X = X[keep]
    if not len(X):
        return 0.0
    num = np.abs(X @ a) ** p
    den = np.sum(np.abs(X @ B.T) ** p, axis=1)
    return float(np.max(num / den))


@dataclass
class AuditReport:
    sum: float
    bound: float
    constant: float
    passed: bool
    kind: str = "integer"
    lp_sum: float | None = None
    lp_bound: float | None = None
    lp_passed: bool | None = None

    def to_dict(self) -> dict:
        out = {"sum": self.sum, "bound": self.bound, "constant": self.constant,
               "pass": self.passed, "kind": self.kind}
        if self.lp_sum is not None:
            out.update(lp_sum=self.lp_sum, lp_bound=self.lp_bound, lp_pass=self.lp_passed)
        return out


class OnlineScoreState:
    """Running state for online leverage scores of a row stream.

    When constructed with ``p`` the explicit prefix is also kept so that
    online lp sensitivities can be evaluated; that mode is an audit tool and
    uses memory linear in the stream length.
    """

    def __init__(self, d: int, p: float | None = None) -> None:
        if p is not None and p <= 0:
            raise ConfigError("p must be positive")
        self.d = d
        self.p = p
        self.factor = GramFactor(d)
        self.count = 0
        self.score_sum = 0.0
        self.scores: list[float] = []
        self.lp_scores: list[float] = []
        self._prefix: list[np.ndarray] = []
        self._min_sigma = math.inf

    @property
    def G(self) -> np.ndarray:
        return self.factor.gram

    def observe_online_leverage(self, a) -> float:
        """Score of ``a`` against the rows seen so far, then absorb ``a``."""
        v = as_vector(a, self.d)
        space = self.factor.space
        if space.rank:
            self._min_sigma = min(self._min_sigma, space.sigma_min)
        s = space.sensitivity(v)
        tau = 1.0 if s is OUT_OF_SPAN else min(s, 1.0)
        self.factor.add(v)
        if self.p is not None:
            self._prefix.append(v)
        self.count += 1
        self.score_sum += tau
        self.scores.append(tau)
        return tau

    def observe_online_lp_sensitivity(self, a, exact_oracle: bool = False) -> float:
        """Online lp sensitivity of ``a`` against the stored prefix, then absorb
        ``a`` (which also records its online leverage score)."""
        if self.p is None:
            raise ConfigError("state was created without a sensitivity index p")
        v = as_vector(a, self.d)
        prefix = np.array(self._prefix).reshape(-1, self.d)
        s = lp_sensitivity(v, prefix, self.p, exact_oracle=exact_oracle)
        self.lp_scores.append(s)
        self.observe_online_leverage(v)
        return s

    @property
    def online_cond(self) -> float:
        """Proxy for ``||A||_2 * max_i ||A_i^-||_2`` over all prefixes."""
        space = self.factor.space
        if not space.rank:
            return 1.0
        smin = min(self._min_sigma, space.sigma_min)
        return space.sigma_max / smin

    @property
    def online_cond_log(self) -> float:
        return math.log(self.online_cond)


def audit_sums(state: OnlineScoreState, n: int | None = None, d: int | None = None,
               M: float | None = None, C: float = 10.0) -> AuditReport:
    """Compare the running sums with ``C d ln n`` (integer input with entry
    bound ``M``) or ``C d ln kappa`` (real input, ``M`` omitted)."""
    n = state.count if n is None else n
    d = state.d if d is None else d
    if M is not None:
        base = C * d * max(math.log(n), 1.0)
        kind = "integer"
    else:
        base = C * d * max(math.log(state.online_cond), 1.0)
        kind = "condition"
    rep = AuditReport(sum=state.score_sum, bound=base, constant=C,
                      passed=state.score_sum <= base, kind=kind)
    if state.p is not None and state.lp_scores:
        lp_sum = float(np.sum(state.lp_scores))
        lp_bound = base ** (state.p / 2)
        rep.lp_sum, rep.lp_bound, rep.lp_passed = lp_sum, lp_bound, lp_sum <= lp_bound
    return rep


def uniform_lp_bound(gamma: float, d: int, n: int, p: float) -> float:
    """Sensitivity cap ``(gamma d)^(p/2) / n`` implied by ``tau_i <= gamma d / n``."""
    if p < 2:
        raise ConfigError("the uniform bound needs p >= 2")
    if gamma < 1:
        raise ConfigError("gamma must be at least 1")
    return (gamma * d) ** (p / 2) / n
