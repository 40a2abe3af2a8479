"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run ``pytest tests/test_acceptance.py -v`` (lines are collected in the
terminal summary) or ``python tests/test_acceptance.py``."""

from __future__ import annotations

import math
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
from scipy.linalg import eigh
from scipy.stats import kstest

sys.path.insert(0, str(Path(__file__).parent))

import oracles as O  # noqa: E402
from acceptance_report import report  # noqa: E402

from geostream.coreset import Coreset, KRobustCascade, RestrictedCoreset
from geostream.geometry import lp_maximize, shell_solve, volmax_select
from geostream.lewis import (change_of_density, lewis_fixed_point, lewis_weights,
                             stream_lewis_quadratic, switch_weights)
from geostream.linalg import khatri_rao_lift, log_heights, log_pseudodet, log_volume, tensor_power
from geostream.lp_stream import ExpEmbedSketch, LpQuadraticSketch
from geostream.online import OnlineScoreState
from geostream.regression import css_select, column_cost, irls_solve, sketch_solve_regression
from geostream.sampling import MergeTreeSummary, lewis_sample, online_spectral_sample
from geostream.streams import RowSource, random_int, scaled_identity


@pytest.fixture(scope="module")
def random_int_stream():
    A = random_int(5000, 20, 100, np.random.default_rng(7))
    c = Coreset(20)
    c.ingest(A)
    return A, c


def test_c01_linf_coreset_sandwich(random_int_stream):
    A, c = random_int_stream
    n, d = A.shape
    X = O.unit_queries(d, 1000, 11)
    full = O.lp_norms(A, X, math.inf)
    sub = O.lp_norms(c.matrix, X, math.inf)
    delta = math.sqrt(len(c))
    lower = int(np.sum(sub > full))
    upper = int(np.sum(full > delta * sub))
    bound = 20 * d * math.log(n)
    report(1, "l-inf coreset sandwich and size",
           lower == 0 and upper == 0 and len(c) <= bound,
           f"|S|={len(c)} <= {bound:.0f}, violations {lower}/{upper}, "
           f"max ratio {np.max(full / sub):.3f} <= {delta:.3f}")


def test_c02_discarded_row_certificate(random_int_stream):
    A, c = random_int_stream
    S = c.matrix
    kept = set(c.indices)
    rest = A[[i for i in range(len(A)) if i not in kept]]
    P = np.linalg.pinv(S) @ S
    perp = np.linalg.norm(rest - rest @ P.T, axis=1) / np.linalg.norm(rest, axis=1)
    sens = np.einsum("ij,jk,ik->i", rest, np.linalg.pinv(S.T @ S), rest)
    ok = bool(np.all(perp <= 1e-9)) and float(sens.max()) <= 1 + 1e-9
    report(2, "discarded rows have sensitivity <= 1", ok,
           f"{len(rest)} rows, max sensitivity {sens.max():.6f}")


def test_c03_online_score_sum():
    details, ok = [], True
    streams = {
        "random-int": random_int(5000, 20, 100, np.random.default_rng(7)),
        # 16 doublings keep every entry below n^2, the bounded-integer regime
        "scaled-identity": scaled_identity(20, 16, 2.0),
    }
    for name, A in streams.items():
        n, d = A.shape
        st = OnlineScoreState(d)
        for a in A:
            st.observe_online_leverage(a)
        bound = 10 * d * math.log(n)
        ref = O.online_leverage(A[:400])
        agree = np.allclose(st.scores[:400], ref, rtol=1e-7, atol=1e-9)
        ok &= st.score_sum <= bound and agree
        details.append(f"{name}: {st.score_sum:.1f} <= {bound:.0f}, oracle agree={agree}")
    report(3, "online leverage score sum", ok, "; ".join(details))


def _rel(a: float, b: float) -> float:
    """Relative error between two quantities given by their logarithms."""
    return abs(math.expm1(a - b))


def test_c04_pseudodeterminant_identities():
    rng = np.random.default_rng(4)
    worst = [0.0, 0.0, 0.0]
    for _ in range(100):
        d = int(rng.integers(3, 9))
        r = int(rng.integers(1, d))
        B = rng.standard_normal((r, d))
        G = B.T @ B
        a = rng.standard_normal(d)
        perp = a - np.linalg.pinv(B) @ (B @ a)
        lhs = log_pseudodet(G + np.outer(a, a))
        worst[0] = max(worst[0], _rel(lhs, log_pseudodet(G) + 2 * math.log(np.linalg.norm(perp))))
        y = B.T @ rng.standard_normal(r)
        lhs = log_pseudodet(G + np.outer(y, y))
        rhs = log_pseudodet(G) + math.log1p(y @ np.linalg.pinv(G) @ y)
        worst[1] = max(worst[1], _rel(lhs, rhs))
        k = int(rng.integers(1, d + 1))
        M = rng.standard_normal((k, d))
        heights, Q = [], np.zeros((0, d))
        for row in M:                       # Gram-Schmidt heights
            res = row - Q.T @ (Q @ row)
            heights.append(np.linalg.norm(res))
            Q = np.vstack([Q, res / heights[-1]])
        gs = float(np.sum(np.log(heights)))
        worst[2] = max(worst[2], _rel(log_volume(M), gs), _rel(float(np.sum(log_heights(M))), gs))
    report(4, "pseudodeterminant updates and volume identity", max(worst) <= 1e-8,
           "max rel errors " + ", ".join(f"{w:.1e}" for w in worst))


def test_c05_lewis_fixed_point():
    A = np.random.default_rng(5).standard_normal((500, 10))
    ok, details = True, []
    for p in (1.0, 1.5, 3.0):
        w, _ = lewis_fixed_point(A, p, T=30)
        res = O.lewis_residual(A, w.w, p)
        s = float(w.w.sum())
        good = res <= 1e-6 and abs(s - 10) <= 1e-6 and w.w.min() >= 0 and w.w.max() <= 1
        ok &= good and w.iterations <= 30
        details.append(f"p={p}: residual {res:.1e}, sum-10 {s - 10:+.1e}")
    report(5, "Lewis fixed point converges", ok, "; ".join(details))


def test_c06_switching_identity():
    A = np.random.default_rng(6).standard_normal((200, 6))
    ok, details = True, []
    for p, q in ((3.0, 2.0), (2.5, 1.5)):
        rep = switch_weights(A, p, q)
        B = rep["w_p"][:, None] ** (1 / q - 1 / p) * A
        direct = O.lewis_residual(B, rep["w_p"], q)
        ok &= rep["discrepancy"] <= 1e-5 and direct <= 1e-8
        details.append(f"({p},{q}): {rep['discrepancy']:.1e}, oracle residual {direct:.1e}")
    report(6, "Lewis weight switching", ok, "; ".join(details))


def test_c07_change_of_density():
    A = np.random.default_rng(7).standard_normal((300, 8))
    X = np.random.default_rng(70).standard_normal((1000, 8))
    ok, details = True, []
    for p, q in ((4, 2), (8, 2), (6, 3)):
        w = lewis_weights(A, p, tol=1e-12)
        dc = change_of_density(A, p, q, w)
        ax = O.lp_norms(A, X, p)
        bx = O.lp_norms(dc.B, X, q)
        mid = dc.lam * bx
        bad = int(np.sum(ax > mid * (1 + 1e-12)) + np.sum(mid > dc.kappa * dc.lam * ax * (1 + 1e-12)))
        ok &= bad == 0
        details.append(f"({p},{q}) violations {bad}, ratio in [{(mid / ax).min():.2f},"
                       f"{(mid / ax).max():.2f}] vs {dc.kappa * dc.lam:.2f}")
    report(7, "change-of-density sandwich", ok, "; ".join(details))


def test_c08_lewis_sampling():
    A = np.random.default_rng(8).standard_normal((1000, 8))
    w = lewis_weights(A, 3)
    X = np.random.default_rng(80).standard_normal((1000, 8))
    full = O.lp_norms(A, X, 3)
    good = 0
    worst = []
    for seed in range(10):
        S = lewis_sample(A, 3, w, 400 * 8, seed)
        r = O.lp_norms(S.matrix, X, 3) / full
        worst.append(max(r.max(), 1 / r.min()))
        good += bool(r.min() >= 1 / 1.5 and r.max() <= 1.5)
    report(8, "Lewis sampling embedding", good >= 8,
           f"{good}/10 seeds within 1.5, worst distortion {max(worst):.3f}")


def test_c09_online_spectral():
    A = random_int(2000, 10, 100, np.random.default_rng(9))
    n, d = A.shape
    G0 = A.T @ A
    good, sizes = 0, []
    cap = 10 * d * math.log(d) * math.log(n) / 0.25
    for seed in range(10):
        S = online_spectral_sample(A, 0.5, seed)
        ev = eigh(S.matrix.T @ S.matrix, G0, eigvals_only=True)
        sizes.append(len(S))
        good += bool(ev.min() >= 0.5 and ev.max() <= 1.5 and len(S) <= cap)
    report(9, "online spectral sampling", good >= 8,
           f"{good}/10 seeds, kept rows <= {max(sizes)} (cap {cap:.0f})")


def test_c10_restricted_coreset():
    rng = np.random.default_rng(10)
    worst = []
    ok = True
    for d in (2, 3, 5, 8):
        base = rng.standard_normal(d)
        base /= np.linalg.norm(base)
        inputs = {
            "random": rng.standard_normal((2000, d)),
            "near-duplicate": base + 1e-3 * rng.standard_normal((2000, d)),
            "signed-basis": np.vstack([np.eye(d), -np.eye(d), np.eye(d) + 1e-9]),
        }
        for A in inputs.values():
            A = A / np.linalg.norm(A, axis=1, keepdims=True)
            A *= rng.uniform(0.5, 2.0, size=(len(A), 1))
            c = RestrictedCoreset(d)
            for a in A:
                c.ingest_row(a)
            ok &= len(c) <= 2 * d - 1
            worst.append(f"d={d}:{len(c)}")
    report(10, "restricted coreset size <= 2d-1", ok, " ".join(worst[::3]))


def test_c11_max_stability():
    a = np.array([1.0, -2.0, 0.5])
    x = np.array([0.3, 0.2, 1.0])
    p = 3.0
    target = abs(a @ x)
    stats = []
    for seed in range(10_000):
        sk = ExpEmbedSketch(3, p, seed, replicas=1)
        sk.exp_embed_ingest(a)
        stats.append((sk.replica_query(x) / target) ** (-p))
    ks = kstest(stats, "expon").statistic
    report(11, "max-stability of exponential scaling", ks <= 0.02, f"KS {ks:.4f}")


def test_c12_quadratic_sketch():
    A = random_int(2000, 10, 100, np.random.default_rng(12))
    sk = LpQuadraticSketch(10, 4, 2000)
    sk.ingest(A)
    X = O.unit_queries(10, 1000, 120)
    est = sk.query_many(X)
    true = O.lp_norms(A, X, 4)
    low = int(np.sum(est < true))
    ratio = float(np.max(est / true))
    report(12, "lp quadratic sketch sandwich", low == 0 and ratio <= sk.distortion,
           f"lower violations {low}, max ratio {ratio:.3f} <= certified {sk.distortion:.3f}")


def test_c13_krobust_width():
    A = np.random.default_rng(13).standard_normal((200, 5))
    cas = KRobustCascade(2, 5)
    for a in A:
        cas.ingest_row(a)
    U = cas.union
    X = O.unit_queries(5, 200, 130)
    bad = 0
    for x in X:
        ek_a = O.kth_robust_width(A, x, 2)
        ek_u = cas.krobust_query(x)
        bad += not (ek_u <= ek_a <= cas.distortion * ek_u)
        assert ek_u == O.kth_robust_width(U, x, 2)
    report(13, "k-robust width sandwich", bad == 0,
           f"violations {bad}, Delta {cas.distortion:.3f}")


def test_c14_volume_maximization():
    n, d, k = 30, 6, 3
    ok, details = True, []
    for seed in range(3):
        A = np.random.default_rng(140 + seed).standard_normal((n, d))
        res = volmax_select(A, k, r=d, seed=seed)
        best = O.brute_force_volume(A, k)
        chosen = 0.5 * np.linalg.slogdet(A[res.indices] @ A[res.indices].T)[1]
        floor = best - k * math.log(10 * k * math.log(n))
        ok &= chosen >= floor
        details.append(f"log vol {chosen:.2f} vs opt {best:.2f}")
    report(14, "volume maximization", ok, "; ".join(details))


def test_c15_spherical_shell():
    P = np.random.default_rng(15).standard_normal((50, 2))
    res = shell_solve(P, seed=0)
    cert = res.certify(P)
    dist = np.linalg.norm(P - cert.center, axis=1)
    feasible = bool(np.all(dist >= cert.r - 1e-9) and np.all(dist <= cert.R + 1e-9))
    opt = O.grid_shell_width(P)
    limit = res.delta ** 1.5 * opt * 1.05
    report(15, "minimum-width spherical shell", feasible and cert.width <= limit,
           f"width {cert.width:.4f} vs grid opt {opt:.4f}, limit {limit:.4f}")


def test_c16_lp_over_polytope():
    ok, details = True, []
    for seed in range(3):
        rng = np.random.default_rng(160 + seed)
        A = rng.integers(-10, 11, size=(20, 3)).astype(float)
        obj = rng.standard_normal(3)
        c = Coreset(3)
        c.ingest(A)
        res = lp_maximize(obj, c)
        opt = O.lp_vertex_enumeration(A, obj)
        inside = opt / res.delta - 1e-9 <= res.value <= opt + 1e-9
        feasible = bool(np.all(np.abs(A @ res.x_hat) <= 1 + 1e-9))
        ok &= inside and feasible
        details.append(f"{res.value:.4f} in [{opt / res.delta:.4f},{opt:.4f}]")
    report(16, "LP over symmetric polytope", ok, "; ".join(details))


def test_c17_regression():
    rng = np.random.default_rng(17)
    A = rng.standard_normal((2000, 10))
    b = A @ rng.standard_normal(10) + rng.standard_t(3, 2000)
    x_opt = O.newton_lp_regression(A, b, 4)
    opt = min(float(np.sum(np.abs(A @ x_opt - b) ** 4) ** 0.25),
              float(np.sum(np.abs(A @ irls_solve(A, b, 4) - b) ** 4) ** 0.25))
    good, ratios = 0, []
    for seed in range(10):
        res = sketch_solve_regression(A, b, 4, 2, eps=0.5, seed=seed)
        ratios.append(res.residual_p / opt)
        good += res.residual_p <= res.certified_factor * opt
    report(17, "sketch-and-solve regression", good >= 8,
           f"{good}/10 seeds, worst ratio {max(ratios):.3f} vs kappa {res.certified_factor:.2f}")


def test_c18_column_subset_selection():
    rng = np.random.default_rng(18)
    A = rng.standard_normal((40, 20))
    k, p, q = 2, 4.0, 2.0
    res = css_select(A, p, k, q, seed=1)
    cost = float(column_cost(A, res.selected, p).sum())
    opt = O.brute_force_css(A, k, p)
    factor = 10 * k ** (1.5 - (1 + q / 2) / p)
    ratio = (cost / opt) ** (1 / p)
    report(18, "lp column subset selection", ratio <= factor,
           f"{len(res.selected)} columns, norm ratio {ratio:.3f} <= {factor:.1f}")


def test_c19_khatri_rao_identity():
    rng = np.random.default_rng(19)
    worst = 0.0
    for i in range(100):
        k = 2 + i % 2
        d = int(rng.integers(2, 5))
        A = rng.standard_normal((int(rng.integers(3, 20)), d))
        x = rng.standard_normal(d)
        p = float(rng.uniform(k, 8))
        lhs = float(np.sum(np.abs(A @ x) ** p))
        rhs = float(np.sum(np.abs(khatri_rao_lift(A, k) @ tensor_power(x, k)) ** (p / k)))
        worst = max(worst, abs(lhs - rhs) / lhs)
    report(19, "Khatri-Rao lift identity", worst <= 1e-10, f"max rel error {worst:.1e}")


def test_c20_merge_and_reduce():
    B, d = 1000, 4
    n = 4 * B
    A = np.random.default_rng(20).standard_normal((n, d))
    X = O.unit_queries(d, 1000, 200)
    full = O.lp_norms(A, X, 2)
    cap = math.ceil(math.log2(n / B)) + 2
    ok, details = True, []
    for seed in range(5):
        mt = MergeTreeSummary(d, 2.0, 0.3, B, n_hint=n, seed=seed)
        mt.ingest_rows(A)
        r = O.lp_norms(mt.summary().matrix, X, 2) / full
        good = r.min() >= 0.7 and r.max() <= 1.3 and mt.max_inventory <= cap
        ok &= good
        details.append(f"[{r.min():.3f},{r.max():.3f}] inv {mt.max_inventory}")
    report(20, "merge-and-reduce summary", ok, f"cap {cap}; " + "; ".join(details))


def test_c21_multipass_lewis():
    A = np.random.default_rng(21).standard_normal((300, 8))
    exact = lewis_weights(A, 3).w
    src = RowSource(A)
    res = stream_lewis_quadratic(src, 3, "fewpass")
    rec = np.array([res.weight(a) for a in A])
    factor = float(max(np.max(rec / exact), np.max(exact / rec)))
    report(21, "FewPass streaming Lewis weights",
           factor <= 1.5 and src.passes == res.rounds + 1,
           f"max factor {factor:.3f}, passes {src.passes} = T+1 = {res.rounds + 1}")


CLI_RUNS = [
    ["sketch-linf"], ["sketch-linf", "--k", "2"], ["sketch-lp", "--p", "4"],
    ["sketch-lp", "--p", "3", "--mode", "exp", "--seed", "5"], ["lewis", "--p", "3"],
    ["lewis", "--p", "3", "--mode", "fewpass"], ["embed", "--p", "4", "--q", "2", "--seed", "1"],
    ["sample", "--seed", "2", "--p", "3"], ["sample", "--seed", "2", "--mode", "online-spectral"],
    ["sample", "--seed", "2", "--mode", "merge-reduce", "--block-size", "40"],
    ["regress", "--p", "4", "--seed", "3"], ["regress", "--p", "4", "--seed", "3", "--mode",
                                             "streaming"],
    ["css", "--p", "4", "--k", "1", "--seed", "4", "--mode", "exact"], ["hull"],
    ["ellipsoid", "--mode", "hull"], ["volmax", "--k", "2", "--seed", "6"],
    ["shell", "--seed", "7"], ["lp-solve", "--objective", "1,2,3,4"], ["audit", "--seed", "8"],
]


def test_c22_cli_determinism(tmp_path):
    exe = [sys.executable, "-m", "geostream"]
    mismatched = []
    for fmt in ("text", "binary"):
        files = []
        for _ in range(2):
            path = tmp_path / f"gen-{fmt}-{len(files)}.dat"
            subprocess.run(exe + ["generate", "--kind", "random-int", "--n", "120", "--d", "4",
                                  "--M", "9", "--seed", "7", "--format", fmt, "--out", str(path)],
                           check=True, capture_output=True)
            files.append(path.read_bytes())
        if files[0] != files[1]:
            mismatched.append(f"generate/{fmt}")
    data = tmp_path / "gen-text-0.dat"
    for args in CLI_RUNS:
        outs = [subprocess.run(exe + args + ["--input", str(data)], capture_output=True)
                for _ in range(2)]
        if outs[0].returncode != 0 or outs[0].stdout != outs[1].stdout:
            mismatched.append(" ".join(args) + f" (exit {outs[0].returncode})")
    report(22, "CLI determinism", not mismatched,
           f"{len(CLI_RUNS) + 2} commands" + (f"; mismatched: {mismatched}" if mismatched else ""))


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s"]))
