"""End-to-end acceptance checks.

Each test records one ``CRITERION k: PASS|FAIL ...`` line that the terminal
summary prints, then asserts.
"""
import csv
import time

import numpy as np
import pytest

import conftest
import oracles
from saif.baselines import log_lambda_grid, solve_dynamic, solve_path, solve_plain
from saif.cli import main as cli_main
from saif.datasets import gen_chain_tree, gen_random_tree, gen_synthetic_regression
from saif.dual import Ball, gap_ball, intersect_balls, lambda_max, sequential_ball
from saif.engine import SaifConfig, solve
from saif.fused import build_transform, fused_lambda_max, fused_problem, solve_fused, transform_design
from saif.losses import Problem

pytestmark = pytest.mark.slow

RATIOS = (0.5, 0.1, 0.01)
EPS1 = 1e-8


def record(k, ok, detail):
    conftest.ACCEPTANCE_LINES.append(f"CRITERION {k}: {'PASS' if ok else 'FAIL'} {detail}")
    assert ok, detail


def gaussian_instances(count=50, seed=2024):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        n, p = int(rng.integers(20, 51)), int(rng.integers(100, 301))
        X = rng.standard_normal((n, p))
        beta = np.zeros(p)
        idx = rng.choice(p, size=max(1, p // 20), replace=False)
        beta[idx] = rng.uniform(-1, 1, idx.size)
        out.append((X, X @ beta + 0.1 * rng.standard_normal(n)))
    return out


@pytest.fixture(scope="module")
def oracle_runs():
    """SAIF, dynamic screening and the plain oracle on the shared random instances."""
    runs = []
    solve(Problem(np.eye(3), np.ones(3), lam=0.1))  # compile kernels before timing
    t_saif = t_total = 0.0
    for X, y in gaussian_instances():
        lmax = oracles.lambda_max(X, y)
        for ratio in RATIOS:
            pr = Problem(X, y, lam=ratio * lmax)
            t0 = time.perf_counter()
            saif = solve(pr, SaifConfig(epsilon=EPS1))
            t1 = time.perf_counter()
            ref = solve_plain(pr, SaifConfig(epsilon=1e-10))
            t_saif += t1 - t0
            t_total += time.perf_counter() - t0
            dyn = solve_dynamic(pr, SaifConfig(epsilon=EPS1))
            runs.append(dict(X=X, y=y, ratio=ratio, saif=saif, ref=ref, dyn=dyn))
    return runs, t_saif, t_total


def test_c1_oracle_equivalence(oracle_runs):
    runs, t_saif, t_total = oracle_runs
    dp = max(abs(r["saif"].primal - r["ref"].primal) for r in runs)
    dz = max(np.max(np.abs(r["X"] @ (r["saif"].beta - r["ref"].beta))) for r in runs)
    ok = dp <= 1e-7 and dz <= 1e-5 and t_total < 60 and all(r["ref"].gap < 1e-10 for r in runs)
    record(1, ok, f"{len(runs)} solves: max|dP|={dp:.2e} (<=1e-7), max|dXb|={dz:.2e} (<=1e-5), "
                  f"SAIF {t_saif:.1f}s, with oracle {t_total:.1f}s (<60s)")


def test_c2_terminal_certificate(oracle_runs):
    runs, _, _ = oracle_runs
    bad = 0
    for r in runs:
        res = r["saif"]
        rem = np.setdiff1d(np.arange(r["X"].shape[1]), res.active)
        Xr = r["X"][:, rem]
        lhs = np.abs(Xr.T @ res.theta) + np.linalg.norm(Xr, axis=0) * res.radius
        safe = res.certificate and np.all(lhs < 1)
        disjoint = not set(rem) & set(np.flatnonzero(r["ref"].beta))
        bad += not (safe and disjoint)
    record(2, bad == 0, f"{len(runs) - bad}/{len(runs)} runs pass the unscaled terminal screen "
                        f"with remaining set disjoint from the oracle support")


def test_c3_dynamic_safety(oracle_runs):
    runs, _, _ = oracle_runs
    bad = 0
    for r in runs:
        dyn = r["dyn"]
        removed = np.setdiff1d(np.arange(r["X"].shape[1]), dyn.active)
        bad += bool(set(removed) & set(np.flatnonzero(r["ref"].beta))) or not dyn.gap < EPS1
    record(3, bad == 0, f"{len(runs) - bad}/{len(runs)} dynamic runs keep the oracle support "
                        f"and reach gap < {EPS1:g}")


def _ball_instance(rng, k):
    loss = "squared" if k % 2 == 0 else "logistic"
    X = rng.standard_normal((15, 30))
    y = rng.standard_normal(15)
    if loss == "logistic":
        y = np.where(y >= 0, 1.0, -1.0)
    return X, y, loss, oracles.lambda_max(X, y, loss)


def _sample_intersection(rng, b1, b2, count):
    small, big = (b1, b2) if b1.radius <= b2.radius else (b2, b1)
    dim = small.center.size
    pts = []
    while len(pts) < count:
        d = rng.standard_normal((4 * count, dim))
        d *= (small.radius * rng.uniform(size=(4 * count, 1)) ** (1 / dim)
              / np.linalg.norm(d, axis=1, keepdims=True))
        cand = small.center + d
        pts.extend(cand[np.linalg.norm(cand - big.center, axis=1) <= big.radius])
    return np.array(pts[:count])


def test_c4_ball_containment():
    rng = np.random.default_rng(99)
    slack = 1e-10
    gap_ok = seq_ok = 0
    for k in range(20):
        X, y, loss, lmax = _ball_instance(rng, k)
        lam0, lam = 0.5 * lmax, 0.3 * lmax
        pr = Problem(X, y, loss, lam)
        theta_star, _, _ = oracles.dual_optimum(X, y, lam, loss)
        # a loose primal point and its scaled dual point
        beta, _, _ = oracles.fista(X, y, lam, loss, tol=1e-2)
        _, theta = oracles.gap(X, y, lam, beta, loss)
        gap_ok += gap_ball(pr, beta, theta).contains(theta_star, slack)
        theta0, _, _ = oracles.dual_optimum(X, y, lam0, loss)
        plain = sequential_ball(theta0, lam0, lam, pr)
        refined = sequential_ball(theta0, lam0, lam, pr, feasible_theta=theta)
        seq_ok += plain.contains(theta_star, slack) and refined.contains(theta_star, slack)
    pair_ok = 0
    for _ in range(50):
        dim = int(rng.integers(2, 6))
        r1, r2 = rng.uniform(0.2, 2.0, 2)
        c1 = rng.standard_normal(dim)
        u = rng.standard_normal(dim)
        c2 = c1 + u / np.linalg.norm(u) * rng.uniform(0, 0.99 * (r1 + r2))
        b1, b2 = Ball(c1, r1), Ball(c2, r2)
        out = intersect_balls(b1, b2)
        pts = _sample_intersection(rng, b1, b2, 1000)
        inside = np.all(np.linalg.norm(pts - out.center, axis=1) <= out.radius + 1e-12)
        pair_ok += bool(inside and out.radius <= min(r1, r2))
    ok = gap_ok == 20 and seq_ok == 20 and pair_ok == 50
    record(4, ok, f"gap_ball {gap_ok}/20, sequential_ball {seq_ok}/20, "
                  f"intersect_balls {pair_ok}/50 pairs (1000 samples each)")


LAMBDAS = (20.0, 100.0, 1000.0)


@pytest.fixture(scope="module")
def reference_instance():
    ds, _ = gen_synthetic_regression(100, 5000, 0.2, seed=0)
    return ds


def _timed(fn, pr, cfg, repeats):
    best, res = np.inf, None
    for _ in range(repeats):
        t0 = time.perf_counter()
        res = fn(pr, cfg)
        best = min(best, time.perf_counter() - t0)
    return best, res


def test_c5_efficiency(reference_instance):
    ds = reference_instance
    cfg = SaifConfig(epsilon=1e-6)
    warm = Problem(ds.X, ds.y, lam=1000.0)
    solve(warm, cfg), solve_dynamic(warm, cfg)  # compile kernels
    t_start = time.perf_counter()
    lines, ok = [], True
    for lam in LAMBDAS:
        pr = Problem(ds.X, ds.y, lam=lam)
        t_dyn, dyn = _timed(solve_dynamic, pr, cfg, 1)
        repeats = 3 if t_dyn < 5 else 1
        t_saif, saif = _timed(solve, pr, cfg, repeats)
        if repeats > 1:
            t_dyn = min(t_dyn, _timed(solve_dynamic, pr, cfg, repeats - 1)[0])
        ratio = saif.counters.base_ops / dyn.counters.base_ops
        wratio = saif.counters.weighted_ops / dyn.counters.weighted_ops
        ok &= ratio <= 1 / 3 and t_saif < t_dyn and saif.certificate and dyn.certificate
        lines.append(f"lam={lam:g}: ops {ratio:.3f} (<=0.333), weighted {wratio:.3f}, "
                     f"time {t_saif:.2f}s vs {t_dyn:.2f}s")
    total = time.perf_counter() - t_start
    ok &= total < 180
    record(5, ok, "; ".join(lines) + f"; total {total:.0f}s (<180s)")


def test_c6_lambda_max(reference_instance):
    ds = reference_instance
    lmax = lambda_max(Problem(ds.X, ds.y))
    res = solve(Problem(ds.X, ds.y, lam=lmax))
    ok = 5e3 <= lmax <= 1e5 and not np.any(res.beta) and res.certificate
    record(6, ok, f"lambda_max={lmax:.4g} in [5e3, 1e5], support at lambda_max = {res.support.size}")


def test_c7_fused():
    rng = np.random.default_rng(5)
    details, ok = [], True
    for name, tree in (("chain", gen_chain_tree(50)), ("random", gen_random_tree(50, 3))):
        X = rng.standard_normal((30, 50))
        y = X @ np.repeat(rng.standard_normal(5), 10) + 0.1 * rng.standard_normal(30)
        tr = build_transform(tree)
        DT = (tree.incidence_matrix() @ tr.T).toarray()
        dt_ok = np.array_equal(DT, np.hstack([np.eye(49), np.zeros((49, 1))]))
        _, _, Xt = fused_problem(X, y, tree, 1.0)
        lam = 0.3 * fused_lambda_max(Xt, y, "squared")
        res = solve_fused(X, y, tree, lam, config=SaifConfig(epsilon=1e-10))
        A = transform_design(X, build_transform(tree, res.info["root"])).data
        bt, b, _ = oracles.fista(A[:, :-1], y, lam, offset=A[:, -1], tol=1e-12)
        ref = oracles.primal(A[:, :-1], y, lam, bt, offset=A[:, -1], b=b)
        d_obj = abs(res.primal - ref)
        pen = sum(abs(res.beta[a] - res.beta[c]) for a, c in tree.edges)
        d_pen = abs(pen - np.abs(res.beta_tilde).sum())
        ok &= dt_ok and d_obj <= 1e-8 and d_pen <= 1e-10
        details.append(f"{name}: DT exact={dt_ok}, |dP|={d_obj:.1e}, |dpen|={d_pen:.1e}")
    record(7, ok, "; ".join(details) + " (tol 1e-8, 1e-10)")


def test_c8_logistic():
    rng = np.random.default_rng(8)
    worst, certs, total = 0.0, 0, 0
    for _ in range(10):
        X = rng.standard_normal((40, 150))
        w = np.zeros(150)
        w[:8] = rng.uniform(-2, 2, 8)
        y = np.where(X @ w + 0.5 * rng.standard_normal(40) >= 0, 1.0, -1.0)
        lmax = oracles.lambda_max(X, y, "logistic")
        for ratio in (0.3, 0.05):
            lam = ratio * lmax
            res = solve(Problem(X, y, "logistic", lam), SaifConfig(epsilon=1e-6))
            beta, _ = oracles.prox_cd(X, y, lam, "logistic", tol=1e-9)
            worst = max(worst, abs(res.primal - oracles.primal(X, y, lam, beta, "logistic")))
            certs += bool(res.certificate)
            total += 1
    record(8, worst <= 1e-5 and certs == total,
           f"{total} logistic solves: max|dP|={worst:.2e} (<=1e-5), certificates {certs}/{total}")


def _csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def test_c9_traces(tmp_path):
    for method in ("saif", "dynamic"):
        cli_main(["solve", "--lam", "100", "--method", method, "--tag", method,
                  "--out-dir", str(tmp_path)])
    p = 5000
    saif_pt = [int(r["p_t"]) for r in _csv(tmp_path / "saif_trace.csv")]
    dyn_pt = [int(r["p_t"]) for r in _csv(tmp_path / "dynamic_trace.csv")]
    support = int(_csv(tmp_path / "saif_results.csv")[0]["support"])
    ok = saif_pt[0] <= p // 20 and max(saif_pt) <= 3 * support and dyn_pt[0] == p
    record(9, ok, f"SAIF p_t starts at {saif_pt[0]} (p={p}), peaks at {max(saif_pt)} "
                  f"<= 3 x support {support}; dynamic starts at {dyn_pt[0]}")


def test_c10_path():
    ds, _ = gen_synthetic_regression(50, 500, 0.2, seed=7)
    eps = 1e-6
    cfg = SaifConfig(epsilon=eps)
    template = Problem(ds.X, ds.y)
    grid = log_lambda_grid(lambda_max(template), 20)
    solve(template.with_lam(grid[0]), cfg)  # compile kernels
    path = solve_path(template, grid, "saif", cfg)
    cold_time, worst = 0.0, 0.0
    for lam, res in zip(grid, path):
        pr = template.with_lam(lam)
        t0 = time.perf_counter()
        solve(pr, cfg)
        cold_time += time.perf_counter() - t0
        ref = solve_plain(pr, SaifConfig(epsilon=1e-10))
        worst = max(worst, abs(res.primal - ref.primal))
    ok = worst <= 2 * eps and path[-1].cum_time_s < cold_time and all(r.certificate for r in path)
    record(10, ok, f"20-point path: max|dP|={worst:.2e} (<=2e-6), path {path[-1].cum_time_s:.2f}s "
                   f"vs cold {cold_time:.2f}s")
