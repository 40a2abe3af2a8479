"""``geostream`` command line: dataset generation and one subcommand per
pipeline, each writing a JSON document with results and certificates."""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import asdict, dataclass, fields
from typing import Any, Callable

import numpy as np

from . import streams
from .coreset import Coreset, KRobustCascade
from .errors import ConfigError, GeostreamError, IoError
from .geometry import (ellipsoid_from_coreset, hull_support_query, lp_maximize, shell_solve,
                       symmetric_coreset, volmax_select)
from .lewis import lewis_averaged, lewis_weights, stream_lewis_quadratic
from .linalg import RowSpace
from .lp_stream import ExpEmbedSketch, LpQuadraticSketch
from .online import OnlineScoreState, audit_sums
from .regression import (css_select, linf_regression, sketch_solve_regression,
                         streaming_regression_coreset)
from .sampling import (MergeTreeSummary, lewis_sample, lp_to_lq_embed, online_spectral_sample,
                       span_lewis_weights)

RANDOMIZED = {"embed", "sample", "regress", "css", "volmax", "shell", "audit"}


@dataclass
class RunConfig:
    command: str
    input: str | None = None
    format: str | None = None
    seed: int | None = None
    p: float | None = None
    q: float | None = None
    eps: float | None = None
    k: int | None = None
    passes: int | None = None
    n_declared: int | None = None
    output: str | None = None
    mode: str | None = None
    timing: bool = False

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        return cls(**data)


def _json_default(o: Any):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"not serializable: {type(o).__name__}")


def dumps(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, default=_json_default, allow_nan=True)


def _load(cfg: RunConfig) -> np.ndarray:
    if not cfg.input:
        raise ConfigError("--input is required")
    return streams.read_matrix(cfg.input, cfg.format)


def _need(value, flag: str):
    if value is None:
        raise ConfigError(f"{flag} is required")
    return value


def _unit_queries(d: int, m: int, seed: int) -> np.ndarray:
    X = np.random.default_rng(seed).standard_normal((m, d))
    return X / np.linalg.norm(X, axis=1, keepdims=True)


# ---------------------------------------------------------------- commands

def cmd_generate(cfg: RunConfig, ns) -> dict:
    rng = np.random.default_rng(cfg.seed)
    kind = ns.kind
    if kind == "random-int":
        A = streams.random_int(ns.n, ns.d, ns.M, rng)
    elif kind == "scaled-identity":
        A = streams.scaled_identity(ns.d, ns.levels, ns.base)
    elif kind == "sphere":
        A = streams.sphere(ns.n, ns.d, rng)
    else:
        A = streams.clustered(ns.n, ns.d, rng)
    out = _need(ns.out, "--out")
    streams.write_matrix(out, A, cfg.format or "text")
    return {"kind": kind, "path": out, "n": A.shape[0], "d": A.shape[1]}


def cmd_sketch_linf(cfg: RunConfig, ns) -> dict:
    A = _load(cfg)
    if cfg.k:
        cas = KRobustCascade(cfg.k, A.shape[1])
        for a in A:
            cas.ingest_row(a)
        return {"k": cfg.k, "level_sizes": [len(c) for c in cas.levels],
                "indices": cas.indices, "delta": cas.distortion}
    c = Coreset(A.shape[1])
    c.ingest(A)
    return {"size": len(c), "delta": c.distortion, "indices": c.indices,
            "size_bound": c.certified_size_bound(M=float(np.abs(A).max()))}


def cmd_sketch_lp(cfg: RunConfig, ns) -> dict:
    A = _load(cfg)
    p = _need(cfg.p, "--p")
    if (cfg.mode or "quadratic") == "quadratic":
        sk = LpQuadraticSketch(A.shape[1], p, cfg.n_declared or len(A))
        sk.ingest(A)
        return sk.to_dict()
    if cfg.mode == "exp":
        sk = ExpEmbedSketch(A.shape[1], p, _need(cfg.seed, "--seed"))
        sk.ingest(A)
        lo, hi = sk.band()
        return {"p": p, "seed": cfg.seed, "replica_sizes": [len(c) for c in sk.replicas],
                "band": [lo, hi]}
    raise ConfigError(f"unknown sketch-lp mode {cfg.mode!r}")


def cmd_lewis(cfg: RunConfig, ns) -> dict:
    A = _load(cfg)
    p = _need(cfg.p, "--p")
    mode = cfg.mode or "exact"
    if mode == "exact":
        w = lewis_weights(A, p, tol=1e-10)
        return {**w.to_dict(), "sum": float(w.w.sum()), "residual": w.residual,
                "iterations": w.iterations}
    if mode == "averaged":
        w = lewis_averaged(A, p)
        return {**w.to_dict(), "sum": float(w.w.sum()), "rounds": w.iterations}
    if mode in ("fewpass", "logpass"):
        src = streams.RowSource(A, cfg.passes)
        res = stream_lewis_quadratic(src, p, mode)
        w = np.array([res.weight(a) for a in A])
        return {**res.to_dict(), "w": w, "sum": float(w.sum())}
    raise ConfigError(f"unknown lewis mode {mode!r}")


def cmd_embed(cfg: RunConfig, ns) -> dict:
    A = _load(cfg)
    S = lp_to_lq_embed(A, _need(cfg.p, "--p"), _need(cfg.q, "--q"), cfg.eps or 0.5,
                       _need(cfg.seed, "--seed"))
    return S.to_dict()


def cmd_sample(cfg: RunConfig, ns) -> dict:
    A = _load(cfg)
    seed = _need(cfg.seed, "--seed")
    mode = cfg.mode or "lewis"
    eps = cfg.eps or 0.5
    if mode == "lewis":
        p = _need(cfg.p, "--p")
        w = span_lewis_weights(A, p)
        return lewis_sample(A, p, w, ns.budget or 4 * A.shape[1], seed).to_dict()
    if mode == "merge-reduce":
        mt = MergeTreeSummary(A.shape[1], cfg.p or 2.0, eps, ns.block_size, len(A), seed)
        mt.ingest_rows(A)
        return mt.summary().to_dict()
    if mode == "online-spectral":
        return online_spectral_sample(A, eps, seed).to_dict()
    raise ConfigError(f"unknown sample mode {mode!r}")


def cmd_regress(cfg: RunConfig, ns) -> dict:
    Ab = _load(cfg)
    A, b = Ab[:, :-1], Ab[:, -1]
    route = cfg.mode or "offline"
    if route == "offline":
        res = sketch_solve_regression(A, b, _need(cfg.p, "--p"), cfg.q or 2.0, cfg.eps or 0.5,
                                      _need(cfg.seed, "--seed"))
    elif route == "streaming":
        res = streaming_regression_coreset(Ab, _need(cfg.p, "--p"), cfg.n_declared or len(Ab),
                                           cfg.eps or 0.5, _need(cfg.seed, "--seed"))
    elif route == "linf":
        c = Coreset(Ab.shape[1])
        c.ingest(Ab)
        res = linf_regression(c, A, b)
    else:
        raise ConfigError(f"unknown regression route {route!r}")
    return res.to_dict()


def cmd_css(cfg: RunConfig, ns) -> dict:
    A = _load(cfg)
    res = css_select(A, _need(cfg.p, "--p"), _need(cfg.k, "--k"), cfg.q or 2.0,
                     _need(cfg.seed, "--seed"), exact=cfg.mode == "exact")
    return res.to_dict()


def cmd_hull(cfg: RunConfig, ns) -> dict:
    A = _load(cfg)
    c = symmetric_coreset(A)
    out = {"size": len(c), "delta": c.distortion, "indices": c.indices,
           "anchor": A[0]}
    if ns.directions:
        U = streams.read_matrix(ns.directions)
        out["support"] = [hull_support_query(c, u) for u in U]
    return out


def cmd_ellipsoid(cfg: RunConfig, ns) -> dict:
    A = _load(cfg)
    c = Coreset(A.shape[1])
    c.ingest(A)
    E, delta = ellipsoid_from_coreset(c, cfg.mode or "polytope")
    return {**E.to_dict(), "delta": delta, "target": cfg.mode or "polytope"}


def cmd_volmax(cfg: RunConfig, ns) -> dict:
    A = _load(cfg)
    return volmax_select(A, _need(cfg.k, "--k"), ns.r, _need(cfg.seed, "--seed"),
                         cfg.mode or "auto").to_dict()


def cmd_shell(cfg: RunConfig, ns) -> dict:
    A = _load(cfg)
    res = shell_solve(A, _need(cfg.seed, "--seed"))
    return {"stored": res.to_dict(), "certified": res.certify(A).to_dict()}


def cmd_lp_solve(cfg: RunConfig, ns) -> dict:
    A = _load(cfg)
    obj = np.array([float(t) for t in _need(ns.objective, "--objective").split(",")])
    c = Coreset(A.shape[1])
    c.ingest(A)
    res = lp_maximize(obj, c)
    return {**res.to_dict(), "max_violation": float(np.abs(A @ res.x_hat).max())}


def cmd_audit(cfg: RunConfig, ns) -> dict:
    """Online-score sum bound plus coreset sandwich checks on random queries."""
    A = _load(cfg)
    n, d = A.shape
    state = OnlineScoreState(d)
    for a in A:
        state.observe_online_leverage(a)
    integer = bool(np.all(A == np.round(A)))
    rep = audit_sums(state, n, d, M=float(np.abs(A).max()) if integer else None)
    c = Coreset(d)
    c.ingest(A)
    X = _unit_queries(d, ns.queries, _need(cfg.seed, "--seed"))
    full = np.abs(X @ A.T).max(axis=1)
    sub = np.abs(X @ c.matrix.T).max(axis=1)
    lower = int(np.sum(sub > full * (1 + 1e-12)))
    upper = int(np.sum(full > c.distortion * sub * (1 + 1e-12)))
    space = RowSpace.of(c.matrix)
    kept = set(c.indices)
    sens = space.sensitivities(A[[i for i in range(n) if i not in kept]])
    size = c.certified_size_bound(M=float(np.abs(A).max()) if integer else None,
                                  kappa_ol=None if integer else state.online_cond)
    checks = {"score_sum": rep.to_dict(),
              "sandwich": {"queries": ns.queries, "lower_violations": lower,
                           "upper_violations": upper, "pass": lower == 0 and upper == 0},
              "discarded_sensitivity": {"max": float(sens.max()) if sens.size else 0.0,
                                        "pass": bool(np.all(sens <= 1 + 1e-9))},
              "size": size}
    checks["pass"] = all(v["pass"] for v in checks.values())
    return checks


COMMANDS: dict[str, Callable] = {
    "generate": cmd_generate, "sketch-linf": cmd_sketch_linf, "sketch-lp": cmd_sketch_lp,
    "lewis": cmd_lewis, "embed": cmd_embed, "sample": cmd_sample, "regress": cmd_regress,
    "css": cmd_css, "hull": cmd_hull, "ellipsoid": cmd_ellipsoid, "volmax": cmd_volmax,
    "shell": cmd_shell, "lp-solve": cmd_lp_solve, "audit": cmd_audit,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="geostream", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--input")
        sp.add_argument("--format", choices=["text", "binary"])
        sp.add_argument("--seed", type=int)
        sp.add_argument("--p", type=float)
        sp.add_argument("--q", type=float)
        sp.add_argument("--eps", type=float)
        sp.add_argument("--k", type=int)
        sp.add_argument("--passes", type=int)
        sp.add_argument("--n-declared", type=int)
        sp.add_argument("--output")
        sp.add_argument("--mode")
        sp.add_argument("--timing", action="store_true")
        if name == "generate":
            sp.add_argument("--kind", required=True,
                            choices=["random-int", "scaled-identity", "sphere", "clustered"])
            sp.add_argument("--n", type=int, default=100)
            sp.add_argument("--d", type=int, default=5)
            sp.add_argument("--M", type=int, default=100)
            sp.add_argument("--levels", type=int, default=2)
            sp.add_argument("--base", type=float, default=2.0)
            sp.add_argument("--out")
        if name == "sample":
            sp.add_argument("--budget", type=int)
            sp.add_argument("--block-size", type=int, default=256)
        if name == "hull":
            sp.add_argument("--directions")
        if name == "volmax":
            sp.add_argument("--r", type=int)
        if name == "lp-solve":
            sp.add_argument("--objective")
        if name == "audit":
            sp.add_argument("--queries", type=int, default=1000)
    return parser


def _needs_seed(cfg: RunConfig, ns) -> bool:
    if cfg.command == "generate":
        return ns.kind != "scaled-identity"
    if cfg.command == "regress":
        return cfg.mode != "linf"
    return cfg.command in RANDOMIZED


def run(argv: list[str] | None = None) -> tuple[int, str]:
    ns = build_parser().parse_args(argv)
    cfg = RunConfig(command=ns.command, input=ns.input, format=ns.format, seed=ns.seed,
                    p=ns.p, q=ns.q, eps=ns.eps, k=ns.k, passes=ns.passes,
                    n_declared=ns.n_declared, output=ns.output, mode=ns.mode,
                    timing=ns.timing)
    try:
        if _needs_seed(cfg, ns) and cfg.seed is None:
            raise ConfigError(f"{cfg.command} is randomized and requires --seed")
        start = time.perf_counter()
        result = COMMANDS[cfg.command](cfg, ns)
        doc = {"command": cfg.command, "config": cfg.to_dict(), "result": result}
        if cfg.timing:
            doc["seconds"] = time.perf_counter() - start
        text = dumps(doc)
        if cfg.output:
            try:
                with open(cfg.output, "w") as fh:
                    fh.write(text + "\n")
            except OSError as exc:
                raise IoError(str(exc)) from exc
    except GeostreamError as exc:
        return exc.exit_status, dumps(exc.to_dict())
    return 0, text


def main(argv: list[str] | None = None) -> int:
    status, text = run(argv)
    print(text, file=sys.stdout if status == 0 else sys.stderr)
    return status


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
