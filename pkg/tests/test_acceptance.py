"""End-to-end acceptance checks, one test per criterion.

Each test prints a PASS/FAIL line; the terminal summary repeats them all.
Run alone with ``pytest tests/test_acceptance.py -v``.
"""
import json
import os
import subprocess
import sys
import time

import numpy as np
from scipy.stats import chi2

from conftest import composite_gradient_check, random_spd
from glrtml.benchmark import BenchmarkConfig, run_benchmark
from glrtml.glrt_gmm import GmmParams, em_fit, gmm_score, symmetrize
from glrtml.glrt_mg import build_mg_model, estimate_cov, fit_mg_model, mg_full_llr, mg_score
from glrtml.loss import pair_loss_grad_scores
from glrtml.numerics import ClipMode
from glrtml.retrieval import RetrievalRun, average_precision, metrics, roc_curve
from test_config_cli import small_config, write_config
from test_retrieval import brute_ap, brute_metrics, random_instance

HERE = os.path.dirname(os.path.abspath(__file__))


def test_01_mle_covariance(criterion):
    start = time.perf_counter()
    x = np.random.default_rng(1).normal(size=(100, 8))
    brute = np.zeros((8, 8))
    for row in x:
        brute += np.outer(row, row)
    brute /= len(x)
    err = np.linalg.norm(estimate_cov(x) - brute) / np.linalg.norm(brute)
    elapsed = time.perf_counter() - start
    criterion(1, err <= 1e-12 and elapsed < 1.0, f"rel err {err:.2e}, {elapsed:.3f} s")


def test_02_em_monotone_and_recovery(criterion):
    start = time.perf_counter()
    worst = 0.0
    for seed in range(10):
        rng = np.random.default_rng(seed)
        x = np.concatenate([rng.normal(size=(150, 2)) - 2, rng.normal(size=(150, 2)) * 0.5 + 2])
        for k in (1, 2, 3):
            _, hist = em_fit(x, k, seed=seed, max_iters=200, tol=0.0)
            worst = min(worst, float(np.min(np.diff(hist))) if len(hist) > 1 else 0.0)
    rng = np.random.default_rng(42)
    n = 5000
    comp = rng.random(n) < 0.3
    samples = np.where(comp, rng.normal(-5.0, 1.0, n), rng.normal(5.0, 1.0, n)).reshape(-1, 1)
    params, _ = em_fit(samples, 2, seed=0)
    order = np.argsort(params.means[:, 0])
    means, weights = params.means[order, 0], params.weights[order]
    mean_err = float(np.max(np.abs(means - [-5.0, 5.0])))
    weight_err = float(np.max(np.abs(weights - [0.3, 0.7])))
    elapsed = time.perf_counter() - start
    ok = worst >= -1e-9 and mean_err <= 0.1 and weight_err <= 0.05 and elapsed < 30
    criterion(2, ok, f"worst step {worst:.1e}, mean err {mean_err:.3f}, weight err {weight_err:.3f}, "
                     f"{elapsed:.2f} s")


def test_03_gradient_correctness(criterion):
    start = time.perf_counter()
    errs = [composite_gradient_check(seed) for seed in range(20)]
    elapsed = time.perf_counter() - start
    criterion(3, max(errs) < 1e-4 and elapsed < 120, f"max rel err {max(errs):.2e} over 20 seeds, {elapsed:.2f} s")


def test_04_hard_pair_dominance(criterion):
    rng = np.random.default_rng(4)
    violations = 0
    for _ in range(100):
        sp = rng.normal(scale=rng.uniform(0.5, 50), size=rng.integers(2, 20))
        sn = rng.normal(scale=rng.uniform(0.5, 50), size=rng.integers(2, 20))
        nu = rng.choice([0.001, 0.01, 0.1, 1.0])
        gp, gn = pair_loss_grad_scores(sp, sn, nu)
        for s, g, harder in ((sp, np.abs(gp), np.less), (sn, np.abs(gn), np.greater)):
            for a in range(len(s)):
                for b in range(len(s)):
                    if harder(s[a], s[b]) and not g[a] > g[b]:
                        violations += 1
    criterion(4, violations == 0, f"{violations} ordering violations over 100 batches")


def test_05_mahalanobis_equivalence(criterion):
    rng = np.random.default_rng(5)
    s1, s0 = random_spd(rng, 6), random_spd(rng, 6, jitter=3.0)
    model = build_mg_model(s1, s0, ClipMode.NO_CLIP)
    x = rng.normal(size=(1000, 6))

    def mahalanobis_sq(cov, v):
        return float(v @ np.linalg.solve(cov, v))

    oracle = np.array([mahalanobis_sq(s0, v) - mahalanobis_sq(s1, v) for v in x])
    err_mg = float(np.max(np.abs(mg_score(model, x) - oracle) / np.maximum(1.0, np.abs(oracle))))
    g1 = GmmParams(np.ones(1), np.zeros((1, 6)), s1[None])
    g0 = GmmParams(np.ones(1), np.zeros((1, 6)), s0[None])
    ref = mg_full_llr(s1, s0, x)
    err_gmm = float(np.max(np.abs(gmm_score(g1, g0, x) - ref) / np.maximum(1.0, np.abs(ref))))
    criterion(5, err_mg <= 1e-10 and err_gmm <= 1e-10, f"mg vs mahalanobis {err_mg:.1e}, gmm vs llr {err_gmm:.1e}")


def test_06_pair_order_symmetry(criterion):
    rng = np.random.default_rng(6)
    emb_i, emb_j = rng.normal(size=(1000, 4)), rng.normal(size=(1000, 4))
    mg = fit_mg_model(rng.normal(size=(400, 4)), rng.normal(size=(400, 4)) * 2)
    mg_exact = bool(np.array_equal(mg.score(emb_i - emb_j), mg.score(emb_j - emb_i)))
    pos = rng.normal(size=(300, 4)) + [1.5, 0, 0, 0]
    neg = rng.normal(size=(300, 4)) * 2
    h1, _ = em_fit(symmetrize(pos), 2, seed=0, symmetric=True)
    h0, _ = em_fit(symmetrize(neg), 3, seed=1, symmetric=True)
    gap = float(np.max(np.abs(gmm_score(h1, h0, emb_i - emb_j) - gmm_score(h1, h0, emb_j - emb_i))))
    criterion(6, mg_exact and gap <= 1e-9, f"mg exact={mg_exact}, gmm max gap {gap:.1e}")


def _dominance_gap(llr_curve, other_curve):
    """Largest amount by which ``other_curve`` beats the LLR curve on a P_FA grid."""
    grid = np.linspace(0.0, 1.0, 1001)
    return float(np.max(np.interp(grid, other_curve.p_fa, other_curve.p_d)
                        - np.interp(grid, llr_curve.p_fa, llr_curve.p_d)))


def test_07_neyman_pearson(criterion):
    rng = np.random.default_rng(7)
    n = 100_000
    diff_pos, diff_neg = rng.normal(size=n), 2.0 * rng.normal(size=n)
    llr = lambda v: mg_full_llr(np.eye(1), 4 * np.eye(1), v.reshape(-1, 1))
    curve = roc_curve(llr(diff_pos), llr(diff_neg))
    expected = chi2.cdf(4 * chi2.ppf(0.1, 1), 1)
    pd_err = abs(curve.pd_at(0.1) - expected)
    # cosine needs the embeddings themselves: the anchor has the same law under both hypotheses
    gaps = []
    for dim, anchor in ((1, [3.0]), (2, [2.0, 0.0])):
        a_pos = np.asarray(anchor) + rng.normal(size=(n, dim))
        a_neg = np.asarray(anchor) + rng.normal(size=(n, dim))
        dp, dn = rng.normal(size=(n, dim)), 2.0 * rng.normal(size=(n, dim))
        llr_d = lambda v: mg_full_llr(np.eye(dim), 4 * np.eye(dim), v)
        cos = lambda a, d: np.einsum("ij,ij->i", a, a + d) / (
            np.linalg.norm(a, axis=1) * np.maximum(np.linalg.norm(a + d, axis=1), 1e-300))
        glrt_curve = roc_curve(llr_d(dp), llr_d(dn))
        cos_curve = roc_curve(cos(a_pos, dp), cos(a_neg, dn))
        gaps.append(_dominance_gap(glrt_curve, cos_curve))
    ok = pd_err <= 0.02 and max(gaps) <= 0.02
    criterion(7, ok, f"P_D@0.1 {curve.pd_at(0.1):.4f} vs {expected:.4f}; "
                     f"max cosine excess {max(gaps):+.4f} (1-D, 2-D)")


def test_08_benchmark_ordering(criterion):
    start = time.perf_counter()
    rows = [run_benchmark(BenchmarkConfig(), seed) for seed in range(5)]
    elapsed = time.perf_counter() - start
    margins = [r["source_glrt"] - r["source_identity_cosine"] for r in rows]
    wins = sum(r["target_adapted"] > r["target_unadapted"] for r in rows)
    for seed, r in enumerate(rows):
        print(f"  seed {seed}: " + " ".join(f"{k}={v:.4f}" for k, v in r.items()))
    ok = min(margins) >= 0.05 and wins >= 4 and elapsed < 600
    criterion(8, ok, f"(a) min GLRT-cosine margin {100 * min(margins):.1f} pts; "
                     f"(b) adaptation helped {wins}/5 seeds; {elapsed:.1f} s")


def test_09_adaptation_timing(criterion):
    env = dict(os.environ, OMP_NUM_THREADS="1", OPENBLAS_NUM_THREADS="1", MKL_NUM_THREADS="1",
               NUMEXPR_NUM_THREADS="1", VECLIB_MAXIMUM_THREADS="1")
    proc = subprocess.run([sys.executable, os.path.join(HERE, "timing_probe.py")], env=env,
                          capture_output=True, text=True, check=True)
    t = json.loads(proc.stdout)
    breakdown = ", ".join(f"{k}={t[k]:.1f} ms" for k in ("forward_ms", "clustering_ms", "diff_ms", "update_ms"))
    criterion(9, t["total_ms"] < 10_000, f"total {t['total_ms']:.1f} ms ({breakdown}); n={t['n']}, d={t['d']}")


def test_10_metric_oracles(criterion):
    rng = np.random.default_rng(10)
    mismatches = 0
    for _ in range(500):
        scores, rel = random_instance(rng)
        for s, r in zip(scores, rel):
            mismatches += average_precision(s, r) != brute_ap(list(s), list(r))
        m = metrics(RetrievalRun(scores, rel, (1, 3)))
        bm, br, bp = brute_metrics(scores, rel, (1, 3))
        mismatches += (m.map, m.recall_at_k, m.precision_at_k) != (bm, br, bp)
        warped = metrics(RetrievalRun(np.exp(scores) * 3 + 1, rel, (1, 3)))
        mismatches += warped.map != m.map
    criterion(10, mismatches == 0, f"{mismatches} mismatches over 500 instances")


def _cli(args, cwd):
    return subprocess.run([sys.executable, "-m", "glrtml"] + args, cwd=cwd, capture_output=True, text=True)


def _run_all(root):
    root.mkdir()
    cfg = write_config(root / "c.toml", small_config(root))
    adapted = write_config(root / "a.toml", small_config(root, model="adapted_model.json",
                                                         eval={"domain": "target"}))
    steps = [["gen"], ["train"], ["adapt"], ["eval"], ["eval", "--metric", "cosine"], ["score"], ["roc"],
             ["eval", "--config", adapted], ["score", "--config", adapted], ["roc", "--config", adapted]]
    for step in steps:
        args = step if "--config" in step else step + ["--config", cfg]
        proc = _cli(args, root)
        assert proc.returncode == 0, proc.stderr
    out = {}
    for base, _, names in os.walk(root):
        for name in names:
            if not name.endswith(".toml"):
                path = os.path.join(base, name)
                with open(path, "rb") as fh:
                    out[os.path.relpath(path, root)] = fh.read().replace(str(root).encode(), b"ROOT")
    return out


def test_11_cli_determinism(criterion, tmp_path):
    a, b = _run_all(tmp_path / "a"), _run_all(tmp_path / "b")
    differing = sorted(k for k in a if a[k] != b.get(k))
    ok = set(a) == set(b) and not differing and len(a) >= 16
    criterion(11, ok, f"{len(a)} output files, {len(differing)} differ")
