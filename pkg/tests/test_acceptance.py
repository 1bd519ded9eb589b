"""Acceptance criteria 1-11, one test each, at the stated tolerances.

Each test records a PASS/FAIL line with the measured quantities; the lines
are printed in the terminal summary (see conftest.py) and when this file is
run as a script.
"""

import itertools
import json
import math
import time

import numpy as np
import pytest

from unmix.bench import BenchConfig, median_by, run_bench, summarize
from unmix.cli import main
from unmix.deca import (DecaConfig, DirichletMixture, deca, em_fit_mixture, grad_loglik_noiseless,
                        log_marginal_quadrature, loglik_noiseless, ml_objective, r_integral)
from unmix.evaluation import match_endmembers, spectral_angle
from unmix.geometry import (equality_vector, lemma1_checks, min_affine_norm, orthonormal_complement_of_ones,
                            reduce, simplex_frames, svol, verify_gram_ratio)
from unmix.scene import SceneConfig, generate_scene, sample_dirichlet
from unmix.sisal import SisalConfig, grad_neg_logdet, hinge, neg_logdet, prox_hinge, sisal
from unmix.vca import vca

RESULTS = {}


def record(number, ok, detail):
    RESULTS[number] = f"{'PASS' if ok else 'FAIL'} criterion {number:>2}: {detail}"
    return ok


def fd_gradient(f, B, h):
    G = np.zeros_like(B)
    for idx in np.ndindex(B.shape):
        E = np.zeros_like(B)
        E[idx] = h
        G[idx] = (f(B + E) - f(B - E)) / (2 * h)
    return G


def test_criterion_01_vca_exact_recovery():
    hits, worst_time, projections = 0, 0.0, set()
    for seed in range(20):
        image, truth = generate_scene(SceneConfig(5, 50, 1000, include_pure_pixels=True, seed=seed))
        start = time.perf_counter()
        res = vca(image.data, 5, np.random.default_rng(seed))
        worst_time = max(worst_time, time.perf_counter() - start)
        projections.add(res.projections_used)
        hits += match_endmembers(res.endmembers, truth.mixing).mean_sam < 1e-8
    ok = hits >= 19 and worst_time < 1.0 and projections == {5}
    assert record(1, ok, f"VCA exact recovery {hits}/20 (need >= 19), max runtime {worst_time:.3f} s, "
                         f"projections_used {sorted(projections)}")


def test_criterion_02_sisal_no_pure_pixels():
    sams, worst_rise, worst_constraint, worst_time = [], -math.inf, 0.0, 0.0
    for seed in range(10):
        image, truth = generate_scene(SceneConfig(3, 50, 5000, max_purity=0.8, seed=seed))
        start = time.perf_counter()
        red = reduce(image.data, 3)
        state = sisal(red.reduced_data, SisalConfig(lam=5.0, outer_iters=80), rng=np.random.default_rng(seed))
        worst_time = max(worst_time, time.perf_counter() - start)
        A = red.basis @ state.endmembers
        sams.append(match_endmembers(A, truth.mixing).mean_sam)
        if len(state.objective_trace) > 1:
            worst_rise = max(worst_rise, float(np.max(np.diff(state.objective_trace))))
        worst_constraint = max(worst_constraint, max(state.constraint_trace))
    median = float(np.median(sams))
    ok = median < 0.02 and worst_rise <= 1e-9 and worst_constraint < 1e-8 and worst_time < 10.0
    assert record(2, ok, f"SISAL median mean_sam {median:.2e} rad (< 0.02), max objective rise {worst_rise:.1e}, "
                         f"max |B^T 1 - q| {worst_constraint:.1e}, max runtime {worst_time:.2f} s")


def test_criterion_03_gradient_checks():
    rng = np.random.default_rng(3)
    err_det, err_lik = 0.0, 0.0
    for _ in range(50):
        n = int(rng.integers(2, 7))
        B = rng.standard_normal((n, n)) + 2 * np.eye(n)
        g = grad_neg_logdet(B)
        fd = fd_gradient(neg_logdet, B, 1e-6 * np.linalg.norm(B))
        err_det = max(err_det, np.linalg.norm(g - fd) / np.linalg.norm(g))
    for _ in range(50):
        n, k = int(rng.integers(2, 5)), int(rng.integers(1, 3))
        prior = DirichletMixture(np.ones(k) / k, rng.uniform(0.5, 4.0, (k, n)))
        Y = 0.05 / n + 0.95 * sample_dirichlet(np.ones(n), rng, size=40)
        B = np.eye(n) + 0.001 * rng.standard_normal((n, n))
        g = grad_loglik_noiseless(B, Y, prior)
        fd = fd_gradient(lambda X: loglik_noiseless(X, Y, prior), B, 1e-6 * np.linalg.norm(B))
        err_lik = max(err_lik, np.linalg.norm(g - fd) / np.linalg.norm(g))
    ok = err_det < 1e-5 and err_lik < 1e-5
    assert record(3, ok, f"max relative gradient error: -log|det B| {err_det:.1e}, DECA likelihood {err_lik:.1e} (< 1e-5)")


def test_criterion_04_equality_vector_identity():
    worst = 0.0
    for i in range(100):
        n = 2 + i % 5
        image, _ = generate_scene(SceneConfig(n, n + 10, 50 * n, seed=1000 + i))
        Yr = reduce(image.data, n).reduced_data
        worst = max(worst, float(np.max(np.abs(Yr.T @ equality_vector(Yr) - 1.0))))
    assert record(4, worst < 1e-8, f"max ||Y^T (Y^T)^+ 1 - 1||_inf over 100 instances {worst:.1e} (< 1e-8)")


def test_criterion_05_gram_identity():
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(2, 8))
        A0 = rng.uniform(0, 1, (n, n))
        X = rng.standard_normal((n, n))
        X += (1.0 - X.sum(axis=0)) / n
        A = A0 @ X
        worst = max(worst, verify_gram_ratio(A, A0))
    lemma_ok = 0
    for _ in range(100):
        n = int(rng.integers(2, 9))
        A0 = rng.uniform(0, 1, (n + 2, n))
        Q, _ = np.linalg.qr(rng.standard_normal((n - 1, n - 1)))
        x = rng.standard_normal(n)
        x += (1 - x.sum()) / n
        lemma_ok += lemma1_checks(A0, orthonormal_complement_of_ones(n) @ Q, A0 @ x, rng) == (True, True, True)
    det_err = max(abs(np.linalg.det(simplex_frames(n).G) - 1.0) for n in range(2, 21))
    ok = worst < 1e-8 and lemma_ok == 100 and det_err < 1e-10
    assert record(5, ok, f"max det(A^T A) vs C det(Abar^T Abar) relative residual {worst:.1e} (< 1e-8) "
                         f"with C = {min_affine_norm(np.eye(3)):.4f} for I_3, subspace checks {lemma_ok}/100, "
                         f"max |det G - 1| {det_err:.1e}")


def test_criterion_06_log_likelihood_decomposition():
    rng = np.random.default_rng(6)
    worst = 0.0
    for n in (2, 3):
        for _ in range(20):
            A = rng.uniform(-1, 1, (n - 1, n))
            while svol(A) < 0.1:
                A = rng.uniform(-1, 1, (n - 1, n))
            y = A @ sample_dirichlet(np.ones(n), rng) + 0.1 * rng.standard_normal(n - 1)
            sigma = rng.uniform(0.1, 0.5)
            direct = log_marginal_quadrature(A, y, sigma, n_nodes=96)
            decomposed = -math.log(svol(A)) + r_integral(A, y, sigma)
            worst = max(worst, abs(direct - decomposed))
    assert record(6, worst < 1e-6, f"max |quadrature log p(y) - (-log svol + r)| over 40 cases {worst:.1e} (< 1e-6)")


def _barycentric(A, Y):
    N = A.shape[1]
    return np.linalg.solve(np.vstack([A, np.ones(N)]), np.vstack([Y, np.ones(Y.shape[1])]))


def test_criterion_07_zero_noise_argmin():
    rng = np.random.default_rng(7)
    agreements = []
    for n in (2, 3):
        A0 = rng.uniform(-1, 1, (n - 1, n))
        while svol(A0) < 0.2:
            A0 = rng.uniform(-1, 1, (n - 1, n))
        Y = A0 @ sample_dirichlet(np.ones(n), rng, size=60)
        centre = A0.mean(axis=1, keepdims=True)
        cands = []
        while len(cands) < 50:
            A = centre + rng.uniform(1.0, 1.6) * (A0 - centre) + 0.1 * rng.standard_normal(A0.shape)
            if svol(A) > 0 and _barycentric(A, Y).min() >= 0:
                cands.append(A)
        scale = max(np.linalg.norm(A0[:, i] - A0[:, j]) for i, j in itertools.combinations(range(n), 2))
        sigma = 1e-3 * scale
        ml = [ml_objective(A, Y, sigma) for A in cands]
        vol = [svol(A) for A in cands]
        agreements.append((n, int(np.argmin(ml)), int(np.argmin(vol))))
    ok = all(a == b for _, a, b in agreements)
    detail = ", ".join(f"N={n}: ml argmin {a}, svol argmin {b}" for n, a, b in agreements)
    assert record(7, ok, f"zero-noise argmin over 50 enclosing simplexes: {detail}")


def test_criterion_08_em_contracts():
    worst_em, worst_deca = math.inf, math.inf
    for seed in range(20):
        rng = np.random.default_rng(800 + seed)
        n, k = int(rng.integers(2, 5)), int(rng.integers(1, 4))
        S = sample_dirichlet(rng.uniform(0.5, 5, n), rng, size=500)
        _, trace = em_fit_mixture(S, k, iters=30, rng=rng)
        if len(trace) > 1:
            worst_em = min(worst_em, float(np.min(np.diff(trace))))
        image, _ = generate_scene(SceneConfig(3, 10, 500, max_purity=0.9, seed=800 + seed))
        red = reduce(image.data, 3)
        state = deca(red.reduced_data, 3, K=1 + seed % 2, config=DecaConfig(outer_iters=10), rng=rng)
        if len(state.loglik_trace) > 1:
            worst_deca = min(worst_deca, float(np.min(np.diff(state.loglik_trace))))
    alpha = np.array([3.0, 2.0, 4.0])
    rng = np.random.default_rng(8)
    prior, _ = em_fit_mixture(sample_dirichlet(alpha, rng, size=10_000), 1, rng=rng)
    rel = float(np.max(np.abs(prior.alphas[0] / alpha - 1)))
    ok = worst_em >= -1e-9 and worst_deca >= -1e-9 and rel < 0.1
    assert record(8, ok, f"min trace step: EM {worst_em:.1e}, DECA {worst_deca:.1e} (>= -1e-9); "
                         f"alpha recovery max relative error {rel:.3f} (< 0.1), alpha_hat {np.round(prior.alphas[0], 3).tolist()}")


@pytest.fixture(scope="module")
def trend_summary():
    cfg = BenchConfig(algorithms=("sisal", "deca"), snr_db=(30.0,), n_pixels=(500, 5000), trials=10)
    return summarize(cfg, run_bench(cfg))


def test_criterion_09_error_trend_in_T(trend_summary):
    parts, ok = [], True
    for algorithm in ("sisal", "deca"):
        small = median_by(trend_summary, algorithm, n_pixels=500)
        large = median_by(trend_summary, algorithm, n_pixels=5000)
        ok &= large <= small
        parts.append(f"{algorithm} median mean_sam T=500 {small:.4f}, T=5000 {large:.4f} "
                     f"({'ok' if large <= small else 'rises'})")
    assert record(9, ok, "30 dB sweep, 10 trials: " + "; ".join(parts))


def test_criterion_10_brute_force_oracles():
    rng = np.random.default_rng(10)
    prox_err, hinge_err, sam_err, hung_gap = 0.0, 0.0, 0.0, -math.inf
    z = np.linspace(-6, 4, 20001)
    for _ in range(1000):
        v, c = rng.uniform(-3, 3), rng.uniform(0.01, 2)
        best = z[np.argmin(c * np.maximum(-z, 0) + 0.5 * (z - v) ** 2)]
        prox_err = max(prox_err, abs(float(prox_hinge(v, c)) - best))
    perms = {n: np.array(list(itertools.permutations(range(n)))) for n in range(1, 8)}
    for _ in range(1000):
        n = int(rng.integers(1, 8))
        X = rng.standard_normal((n, n + 1))
        hinge_err = max(hinge_err, abs(hinge(X) - sum(-x for x in X.ravel() if x < 0)))
        a, b = rng.standard_normal(n + 2), rng.standard_normal(n + 2)
        cos = sum(p * q for p, q in zip(a, b)) / math.sqrt(sum(p * p for p in a) * sum(q * q for q in b))
        sam_err = max(sam_err, abs(spectral_angle(a, b) - math.acos(max(-1.0, min(1.0, cos)))))
        A, B = rng.standard_normal((n + 2, n)), rng.standard_normal((n + 2, n))
        cosm = (A / np.linalg.norm(A, axis=0)).T @ (B / np.linalg.norm(B, axis=0))
        C = np.arccos(np.clip(cosm, -1, 1))
        brute = C[perms[n], np.arange(n)].sum(axis=1).min()
        hung_gap = max(hung_gap, sum(match_endmembers(A, B).per_endmember_sam) - brute)
    ok = prox_err <= z[1] - z[0] and hinge_err < 1e-12 and sam_err < 1e-7 and hung_gap <= 1e-7
    assert record(10, ok, f"prox_hinge grid error {prox_err:.1e} (<= {z[1] - z[0]:.0e}), hinge {hinge_err:.1e}, "
                          f"spectral_angle {sam_err:.1e}, Hungarian minus brute force {hung_gap:.1e}")


def test_criterion_11_determinism(tmp_path, capsys):
    def tree_bytes(root):
        return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}

    def session(root):
        scene = root / "scene"
        main(["generate", "--n", "3", "--m", "20", "--t", "800", "--snr", "30", "--max-purity", "0.9",
              "--seed", "11", "--out", str(scene)])
        for algorithm in ("vca", "sisal", "deca"):
            main(["unmix", "--algorithm", algorithm, "--input", str(scene / "Y.csv"), "--n", "3", "--seed", "5",
                  "--truth", str(scene / "A0.csv"), "--out", str(root / algorithm)])
        capsys.readouterr()
        main(["eval", "--estimate", str(root / "sisal" / "A_est.csv"), "--truth", str(scene / "A0.csv")])
        (root / "eval.json").write_text(capsys.readouterr().out)
        main(["bench", "--algorithms", "vca,sisal", "--snr", "inf,30", "--t", "300", "--trials", "2",
              "--seed", "4", "--out", str(root / "bench")])
        return tree_bytes(root)

    first, second = session(tmp_path / "a"), session(tmp_path / "b")
    differing = sorted(k for k in first if first[k] != second.get(k)) + sorted(set(second) - set(first))
    ok = not differing and len(first) == 13
    assert record(11, ok, f"{len(first)} output files from generate/unmix x3/eval/bench, "
                          f"{'all byte-identical' if not differing else 'differ: ' + ', '.join(differing)}")


if __name__ == "__main__":
    import sys
    sys.exit(pytest.main([__file__, "-q"]))
