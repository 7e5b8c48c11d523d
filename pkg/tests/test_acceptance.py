"""Headline acceptance criteria, each at its stated tolerance.

Every test records a one-line detail; ``conftest.py`` prints a pass/fail
line per criterion at the end of the run.
"""

import itertools
import math

import networkx as nx
import numpy as np
import pytest
from scipy.optimize import minimize
from scipy.stats import spearmanr

from kdemode.gadget import RegularGraph, verify_gadget
from kdemode.kde import Dataset, KdeInstance, evaluate
from kdemode.kernels import (
    KernelKind,
    KernelSpec,
    critical_radius,
    derivative_check,
    gamma_for_epsilon,
    kappa,
    rds_check,
    rds_params,
    relative_slope,
)
from kdemode.lowdim import brute_force_mode, delta_for_eps
from kdemode.meanshift import mean_shift, multi_restart
from kdemode.pipeline import ExperimentConfig, run_pipeline
from kdemode.recovery import recover_convex, recover_nonconvex, sketched_sqdist
from kdemode.sketch import JlMatrix, make_jl, project, sketch_with_retry, target_dim

GAUSS = KernelSpec(KernelKind.GAUSSIAN)
CAUCHY = KernelSpec(KernelKind.CAUCHY)
LOGISTIC = KernelSpec(KernelKind.LOGISTIC)
SIGMOID = KernelSpec(KernelKind.SIGMOID)
GG = lambda a, bw=1.0: KernelSpec(KernelKind.GENERALIZED_GAUSSIAN, alpha=a, bandwidth=bw)
CONVEX5 = [GAUSS, LOGISTIC, SIGMOID, CAUCHY, GG(0.5)]


def oracle_max(inst, step=0.02, polish=8):
    """Dense scan over the padded bounding box, centers included, then local polish."""
    pts = inst.data.points
    d = pts.shape[1]
    pad = 2.0 * inst.kernel.bandwidth
    axes = [np.arange(pts[:, j].min() - pad, pts[:, j].max() + pad + step, step) for j in range(d)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, d)
    grid = np.vstack([grid, pts])
    vals = np.empty(len(grid))
    for s in range(0, len(grid), 20_000):
        blk = grid[s:s + 20_000]
        t = ((blk[:, None] - pts[None]) ** 2).sum(-1) / inst.kernel.bandwidth ** 2
        vals[s:s + 20_000] = kappa(inst.kernel, t).sum(1)
    best = float(vals.max())
    for i in np.argsort(vals)[-polish:]:
        r = minimize(lambda x: -evaluate(inst, x), grid[i], method="Nelder-Mead",
                     options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 4000})
        best = max(best, -float(r.fun))
    return best


# --- 1. sandwich --------------------------------------------------------------

def _rank2_instance(rng, n):
    d = int(rng.integers(2, 5))
    U = np.linalg.qr(rng.normal(size=(d, 2)))[0]
    z = rng.normal(size=(n, 2)) * 1.5
    return Dataset(z @ U.T + rng.normal(size=d)), U, z


@pytest.mark.acceptance(1, "sandwich inequality")
@pytest.mark.parametrize("kernel, n_range", [(GAUSS, (5, 31)), (CAUCHY, (5, 13))], ids=["gaussian", "cauchy"])
def test_c1_sandwich(kernel, n_range, record_property):
    eps, delta, solver_eps, slack = 0.3, 0.1, 0.01, 0.02
    ok = 0
    for seed in range(50):
        rng = np.random.default_rng([1, seed])
        n = int(rng.integers(*n_range))
        data, U, z = _rank2_instance(rng, n)
        gamma = gamma_for_epsilon(kernel, n, eps)
        w = target_dim(n, gamma, delta)
        pi = make_jl(data.d, w, gamma_target=gamma, seed=seed)
        # both maxima live in the affine hull of the centers, which is 2-dimensional
        R = np.linalg.qr(pi.entries @ U, mode="r")
        full = brute_force_mode(KdeInstance(Dataset(z), kernel), solver_eps).value
        sk = brute_force_mode(KdeInstance(Dataset(z @ R.T), kernel), solver_eps).value
        ok += (1 - eps - slack) * full <= sk <= (1 + slack) * full
    record_property("detail", f"{kernel.kind.value}: {ok}/50 seeds")
    assert ok >= 45


# --- 2. mean-shift monotonicity ---------------------------------------------

@pytest.mark.acceptance(2, "mean-shift monotonicity")
def test_c2_meanshift_monotone(record_property):
    violations = 0
    worst = 0.0
    for seed in range(100):
        rng = np.random.default_rng([2, seed])
        n, d = int(rng.integers(5, 60)), int(rng.integers(1, 10))
        pts = rng.normal(size=(n, d)) * rng.uniform(0.5, 3)
        for spec in CONVEX5:
            spec = KernelSpec(spec.kind, spec.alpha, bandwidth=float(rng.uniform(0.5, 3)))
            inst = KdeInstance(Dataset(pts), spec)
            res = mean_shift(inst, rng.normal(size=d) * 3, max_iters=20, tol=0.0,
                             record_trajectory=True)
            v = np.asarray(res.trajectory_values)
            drop = (v[:-1] - v[1:]) / np.maximum(v[:-1], 1e-300)
            worst = max(worst, float(drop.max(initial=0.0)))
            violations += int(np.sum(drop > 1e-12))
    record_property("detail", f"{violations} violations, worst relative drop {worst:.2e}")
    assert violations == 0


# --- 3. convex recovery dominance -------------------------------------------

@pytest.mark.acceptance(3, "convex recovery dominance")
def test_c3_identity_hook(record_property):
    bad = 0
    for seed in range(100):
        rng = np.random.default_rng([3, seed])
        spec = CONVEX5[seed % 5]
        n, d = int(rng.integers(2, 40)), int(rng.integers(1, 8))
        data = Dataset(rng.normal(size=(n, d)) * 2)
        sk = project(JlMatrix.identity(d), data)
        x = rng.normal(size=d) * 2
        low = evaluate(KdeInstance(sk.projected, spec), x)
        bad += recover_convex(data, sk, x, spec).value < low - 1e-12 * max(1.0, low)
    record_property("detail", f"identity hook: {100 - bad}/100")
    assert bad == 0


@pytest.mark.acceptance(3, "convex recovery dominance")
def test_c3_random_sketches(record_property):
    ok = total = 0
    eps, delta = 1.0, 0.1
    for seed in range(20):
        rng = np.random.default_rng([31, seed])
        spec = CONVEX5[seed % 5]
        n, d = 20, 4
        data = Dataset(rng.normal(size=(n, d)) * 1.5)
        gamma = gamma_for_epsilon(spec, n, eps)
        sk = sketch_with_retry(data, gamma, delta, seed=1000 * seed, max_attempts=5)
        low = KdeInstance(sk.projected, spec)
        for k in range(5):
            mix = rng.dirichlet(np.ones(n)) @ sk.projected.points
            x = mix + rng.normal(size=sk.w) * 0.5 / math.sqrt(sk.w)
            lv = evaluate(low, x)
            ok += recover_convex(data, sk, x, spec).value >= lv - 1e-12 * max(1.0, lv)
            total += 1
    record_property("detail", f"verified sketches: {ok}/{total}")
    assert ok >= 0.95 * total


# --- 4. non-convex recovery contract ----------------------------------------

@pytest.mark.acceptance(4, "non-convex recovery contract")
def test_c4_constraints(record_property):
    eps = 0.1
    spec = GG(2.0, bw=3.0)
    broken = 0
    for seed in range(50):
        rng = np.random.default_rng([4, seed])
        data = Dataset(rng.normal(size=(30, 10)))
        sk = sketch_with_retry(data, 0.5, 0.1, seed=100 * seed, max_attempts=10)
        low = KdeInstance(sk.projected, spec)
        x = multi_restart(low, restarts=5, iters=10, seed=seed).point
        res = recover_nonconvex(data, sk, x, eps, spec)
        dist = ((data.points - res.point) ** 2).sum(1)
        broken += int(np.any(dist > (1 + eps) * sketched_sqdist(sk, x)))
    record_property("detail", f"{50 - broken}/50 instances satisfy every ball constraint")
    assert broken == 0


@pytest.mark.acceptance(4, "non-convex recovery contract")
def test_c4_end_to_end(record_property):
    eps, alpha = 0.1, 0.05
    spec = GG(2.0)
    worst = np.inf
    for seed in range(20):
        rng = np.random.default_rng([41, seed])
        n = int(rng.integers(3, 9))
        data = Dataset(rng.normal(size=(n, 2)))
        gamma = gamma_for_epsilon(spec, n, eps)
        # certified one-sided sketch into w = 3: orthonormal columns times a stretch in [1, 1+gamma]
        Q = np.linalg.qr(rng.normal(size=(3, 2)))[0]
        pi = JlMatrix.from_matrix(Q * np.sqrt(1 + gamma * rng.random(2)))
        sk = project(pi, data)
        sol = brute_force_mode(KdeInstance(sk.projected, spec), alpha)
        res = recover_nonconvex(data, sk, sol.point, eps, spec)
        worst = min(worst, res.value / oracle_max(KdeInstance(data, spec)))
    record_property("detail", f"worst value/oracle {worst:.4f} vs bound {1 - 2 * eps - alpha:.2f}")
    assert worst >= 1 - 2 * eps - alpha


# --- 5. epsilon-net guarantee ------------------------------------------------

@pytest.mark.acceptance(5, "epsilon-net guarantee")
@pytest.mark.parametrize("spec", CONVEX5, ids=str)
def test_c5_epsilon_net(spec, record_property):
    worst = {}
    for eps in (0.05, 0.2):
        ratios = []
        for seed in range(20):
            rng = np.random.default_rng([5, seed])
            n, d = int(rng.integers(2, 11)), int(rng.integers(1, 3))
            inst = KdeInstance(Dataset(rng.normal(size=(n, d)) * 1.5), spec)
            ratios.append(brute_force_mode(inst, eps).value / oracle_max(inst))
        worst[eps] = min(ratios)
    record_property("detail", f"{spec}: worst ratio " +
                    ", ".join(f"eps={e}: {r:.4f}" for e, r in worst.items()))
    assert all(r >= 1 - e for e, r in worst.items())


# --- 6. delta condition ------------------------------------------------------

@pytest.mark.acceptance(6, "delta condition")
def test_c6_delta_condition(record_property):
    n = 100
    kinds = [GAUSS, LOGISTIC, SIGMOID, CAUCHY, GG(0.5), GG(1.0), GG(2.0)]
    fails = 0
    for spec, eps in itertools.product(kinds, (0.01, 0.1, 0.5)):
        rng = np.random.default_rng([6, int(eps * 100), kinds.index(spec)])
        xi = max(1.0, critical_radius(spec, 1 / n))
        c = rng.uniform(0, xi, 1000)
        delta = delta_for_eps(spec, n, eps)
        fails += int(np.sum(kappa(spec, c) - kappa(spec, c + delta) > eps * kappa(spec, c) + 1e-12))
    record_property("detail", f"{fails} failures over {len(kinds) * 3 * 1000} draws")
    assert fails == 0


# --- 7. RDS bounds ------------------------------------------------------------

@pytest.mark.acceptance(7, "relative-distance-smoothness bounds")
def test_c7_rds(record_property):
    grid = np.linspace(0, 100, 10_000)
    results = {str(s): rds_check(s, rds_params(s), grid)
               for s in [GAUSS, LOGISTIC, SIGMOID, GG(0.5), GG(1.0), GG(2.0)]}
    results[str(CAUCHY)] = bool(np.all(-relative_slope(CAUCHY, grid) >= -1.0))
    record_property("detail", ", ".join(f"{k}={'ok' if v else 'FAIL'}" for k, v in results.items()))
    assert all(results.values())


# --- 8. hardness gadget ------------------------------------------------------

@pytest.mark.acceptance(8, "hardness gadget")
def test_c8_gadget(record_property):
    named = {
        "K4": RegularGraph.from_edges(itertools.combinations(range(4), 2)),
        "K33": RegularGraph.from_edges([(i, j) for i in range(3) for j in range(3, 6)]),
        "Petersen": RegularGraph.from_edges(nx.petersen_graph().edges()),
    }
    good = sum(verify_gadget(g, 3) for g in named.values())
    rng = np.random.default_rng(8)
    for i in range(20):
        n = int(rng.choice([4, 6, 8, 10, 12]))
        G = nx.random_regular_graph(3, n, seed=int(rng.integers(2**31)))
        good += verify_gadget(RegularGraph.from_edges(G.edges(), vertex_count=n), 3)
    record_property("detail", f"{good}/23 graphs consistent")
    assert good == 23


# --- 9. desk-scale reproduction ----------------------------------------------

def _three_clusters(seed=9):
    rng = np.random.default_rng(seed)
    bw, d = 10.0, 200
    centers = np.linalg.qr(rng.normal(size=(d, 3)))[0].T * (10 * bw / math.sqrt(2))
    sizes = (1000, 600, 400)
    pts = np.vstack([c + rng.normal(size=(k, d)) for c, k in zip(centers, sizes)])
    return Dataset(pts), f"gaussian@{bw}"


@pytest.mark.acceptance(9, "desk-scale sweep")
def test_c9_reproduction(record_property):
    data, kernel = _three_clusters()
    cfg = ExperimentConfig(kernel=kernel, dims=[10, 20, 40, 80], trials=10, seed=9)
    rep = run_pipeline(cfg, data)
    base = rep.baseline["value"]
    means = {a["w"]: a["mean"] for a in rep.aggregates}
    rho = spearmanr(list(means), list(means.values())).statistic
    gap = abs(means[40] - base) / base
    record_property("detail", f"baseline {base:.2f}, w=40 gap {100 * gap:.2f}%, spearman {rho:.2f}, "
                    + " ".join(f"w{w}={m:.2f}" for w, m in means.items()))
    assert base >= 100
    assert gap <= 0.05
    assert rho >= 0.8


# --- 10. derivative correctness ---------------------------------------------

@pytest.mark.acceptance(10, "derivative finite-difference check")
def test_c10_derivatives(record_property):
    grid = np.logspace(-8, 4, 2001)
    kinds = [GAUSS, LOGISTIC, SIGMOID, CAUCHY, GG(0.5), GG(1.0), GG(2.0),
             KernelSpec(KernelKind.EPANECHNIKOV)]
    fails = {str(s): int(derivative_check(s, grid).size) for s in kinds}
    record_property("detail", ", ".join(f"{k}:{v}" for k, v in fails.items()))
    assert sum(fails.values()) == 0
