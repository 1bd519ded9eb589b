import math

import numpy as np
import pytest
from scipy.stats import norm

from unmix.deca import (DecaConfig, DirichletMixture, deca, dirichlet_logpdf, em_fit_mixture,
                        grad_loglik_noiseless, log_marginal_quadrature, loglik_noiseless, ml_objective,
                        mixture_logpdf, r_integral, r_integral_mc)
from unmix.errors import DimensionError, InvalidParameterError
from unmix.evaluation import match_endmembers
from unmix.geometry import lift, reduce, svol
from unmix.scene import SceneConfig, generate_scene, sample_dirichlet
from unmix.sisal import SisalConfig, sisal


def interior_simplex_points(rng, n, t, alpha=None):
    S = sample_dirichlet(np.ones(n) if alpha is None else alpha, rng, size=t)
    return 0.05 / n + 0.95 * S  # bounded away from the faces


# densities

def test_dirichlet_uniform_values(rng):
    s = interior_simplex_points(rng, 3, 1)[:, 0]
    assert dirichlet_logpdf(s, [1, 1, 1]) == pytest.approx(math.log(2))
    assert dirichlet_logpdf([0.3, 0.7], [1, 1]) == pytest.approx(0.0, abs=1e-15)


def test_dirichlet_boundary_and_off_simplex():
    assert dirichlet_logpdf([0.0, 0.5, 0.5], [0.5, 1, 1]) == -math.inf
    assert dirichlet_logpdf([0.2, 0.2, 0.2], [1, 1, 1]) == -math.inf
    with pytest.raises(DimensionError):
        dirichlet_logpdf([0.5, 0.5], [1, 1, 1])
    with pytest.raises(InvalidParameterError):
        dirichlet_logpdf([0.5, 0.5], [1, 0])


def test_dirichlet_integrates_to_one_n2():
    a = np.array([2.5, 0.7 + 1.0])
    x, w = np.polynomial.legendre.leggauss(200)
    u = 0.5 * (x + 1)
    vals = np.exp(dirichlet_logpdf(np.vstack([u, 1 - u]), a))
    assert abs(0.5 * np.sum(w * vals) - 1.0) < 1e-4


def test_dirichlet_integrates_to_one_n3(rng):
    for _ in range(5):
        a = rng.uniform(1.0, 4.0, 3)
        x, w = np.polynomial.legendre.leggauss(120)
        u = 0.5 * (x + 1)
        U1, U2 = np.meshgrid(u, u, indexing="ij")
        W = np.outer(w, w) * 0.25
        # s1 = u1, s2 = (1 - u1) u2, jacobian (1 - u1)
        S = np.vstack([U1.ravel(), ((1 - U1) * U2).ravel(), ((1 - U1) * (1 - U2)).ravel()])
        vals = np.exp(dirichlet_logpdf(S, a)) * (1 - U1.ravel())
        assert abs(np.sum(W.ravel() * vals) - 1.0) < 1e-4


def test_mixture_examples(rng):
    s = interior_simplex_points(rng, 3, 1)[:, 0]
    a = np.array([2.0, 3.0, 1.5])
    one = DirichletMixture(np.ones(1), a)
    two = DirichletMixture(np.array([0.4, 0.6]), np.vstack([a, a]))
    assert mixture_logpdf(s, one) == pytest.approx(dirichlet_logpdf(s, a))
    assert mixture_logpdf(s, two) == pytest.approx(dirichlet_logpdf(s, a))
    mix = DirichletMixture(np.array([0.5, 0.5]), np.array([[2.0, 1.0], [1.0, 2.0]]))
    assert mixture_logpdf(np.array([0.5, 0.5]), mix) == pytest.approx(0.0, abs=1e-14)


def test_mixture_validation():
    with pytest.raises(InvalidParameterError):
        DirichletMixture(np.array([0.5, 0.6]), np.ones((2, 3)))
    with pytest.raises(InvalidParameterError):
        DirichletMixture(np.ones(1), np.array([1.0, 0.0]))
    with pytest.raises(DimensionError):
        DirichletMixture(np.ones(2) / 2, np.ones((3, 3)))


# EM

def test_em_recovers_single_dirichlet(rng):
    alpha = np.array([3.0, 2.0, 4.0])
    S = sample_dirichlet(alpha, rng, size=10_000)
    prior, trace = em_fit_mixture(S, 1, rng=rng)
    assert np.all(np.abs(prior.alphas[0] / alpha - 1) < 0.1)
    assert np.all(np.diff(trace) >= -1e-9)


def test_em_recovers_two_components(rng):
    a1, a2 = np.array([20.0, 2.0, 2.0]), np.array([2.0, 2.0, 20.0])
    S = np.hstack([sample_dirichlet(a1, rng, size=5000), sample_dirichlet(a2, rng, size=5000)])
    prior, trace = em_fit_mixture(S, 2, rng=rng)
    # align components by alpha distance
    k1 = int(np.argmin(np.linalg.norm(prior.alphas - a1, axis=1)))
    assert abs(prior.weights[k1] - 0.5) <= 0.05
    assert abs(prior.weights[1 - k1] - 0.5) <= 0.05
    assert np.all(np.diff(trace) >= -1e-9)


def test_em_monotone_random_runs():
    for seed in range(20):
        rng = np.random.default_rng(seed)
        n, k = int(rng.integers(2, 5)), int(rng.integers(1, 4))
        S = sample_dirichlet(rng.uniform(0.5, 5, n), rng, size=500)
        prior, trace = em_fit_mixture(S, k, iters=30, rng=rng)
        assert np.all(np.diff(trace) >= -1e-9)
        assert abs(prior.weights.sum() - 1) < 1e-12 and np.all(prior.weights > 0)
        assert np.all(prior.alphas > 0)


def test_em_rejects_bad_k(rng):
    with pytest.raises(InvalidParameterError):
        em_fit_mixture(np.full((2, 5), 0.5), 0, rng=rng)


# noiseless likelihood

def test_loglik_identity_uniform(rng):
    Y = interior_simplex_points(rng, 3, 50)
    prior = DirichletMixture.uniform(3)
    assert loglik_noiseless(np.eye(3), Y, prior) == pytest.approx(math.log(2))
    c = 1.7
    assert loglik_noiseless(c * np.eye(3), Y, prior) - loglik_noiseless(np.eye(3), Y, prior) == \
        pytest.approx(3 * math.log(c))


def test_loglik_singular_and_outside(rng):
    Y = interior_simplex_points(rng, 3, 10)
    prior = DirichletMixture.uniform(3)
    assert loglik_noiseless(np.zeros((3, 3)), Y, prior) == -math.inf
    assert loglik_noiseless(-np.eye(3), Y, prior) == -math.inf


def test_loglik_gradient_finite_differences(rng):
    for _ in range(50):
        n = int(rng.integers(2, 5))
        k = int(rng.integers(1, 3))
        prior = DirichletMixture(np.ones(k) / k, rng.uniform(0.5, 4.0, (k, n)))
        Y = interior_simplex_points(rng, n, 40)
        B = np.eye(n) + 0.001 * rng.standard_normal((n, n))
        f = lambda X: loglik_noiseless(X, Y, prior)
        h = 1e-6 * np.linalg.norm(B)
        fd = np.zeros_like(B)
        for idx in np.ndindex(B.shape):
            E = np.zeros_like(B)
            E[idx] = h
            fd[idx] = (f(B + E) - f(B - E)) / (2 * h)
        g = grad_loglik_noiseless(B, Y, prior)
        assert np.linalg.norm(g - fd) / np.linalg.norm(g) < 1e-5


def test_loglik_truth_beats_perturbations():
    alpha = np.array([3.0, 2.0, 4.0])
    image, truth = generate_scene(SceneConfig(3, 10, 10_000, dirichlet_alpha=alpha, seed=3))
    red = reduce(image.data, 3)
    Y = red.reduced_data
    B0 = np.linalg.inv(red.basis.T @ truth.mixing)
    prior = DirichletMixture(np.ones(1), alpha)
    best = loglik_noiseless(B0, Y, prior)
    rng = np.random.default_rng(0)
    P = np.eye(3) - 1.0 / 3  # perturb within B^T 1 = q, where B Y stays sum-to-one
    for _ in range(100):
        B = B0 + 0.02 * np.linalg.norm(B0) * P @ rng.standard_normal(B0.shape) / 3
        assert loglik_noiseless(B, Y, prior) < best


# deca driver

def test_deca_uniform_matches_svmin():
    image, truth = generate_scene(SceneConfig(3, 20, 2000, max_purity=0.8, seed=4))
    red = reduce(image.data, 3)
    d = deca(red.reduced_data, 3, config=DecaConfig(uniform_prior=True), rng=np.random.default_rng(0))
    s = sisal(red.reduced_data, SisalConfig(lam=10.0), rng=np.random.default_rng(0))
    ratio = svol(d.endmembers) / svol(s.endmembers)
    assert abs(ratio - 1) < 0.02
    assert np.all(np.diff(d.loglik_trace) >= -1e-9)


def test_deca_two_component_recovery():
    rng = np.random.default_rng(5)
    A = rng.uniform(0, 1, (20, 3))
    S = np.hstack([sample_dirichlet([8.0, 2.0, 2.0], rng, size=5000),
                   sample_dirichlet([2.0, 2.0, 8.0], rng, size=5000)])
    Y = A @ S
    red = reduce(Y, 3)
    state = deca(red.reduced_data, 3, K=2, rng=np.random.default_rng(1))
    est = lift(red, state.endmembers).matrix
    assert match_endmembers(est, A).mean_sam < 0.03
    assert np.all(np.diff(state.loglik_trace) >= -1e-9)


def test_deca_trend_noiseless_uniform():
    medians = []
    for t in (1000, 10_000):
        errs = []
        for seed in range(10):
            image, truth = generate_scene(SceneConfig(3, 20, t, seed=seed))
            red = reduce(image.data, 3)
            st = deca(red.reduced_data, 3, config=DecaConfig(uniform_prior=True), rng=np.random.default_rng(seed))
            errs.append(match_endmembers(lift(red, st.endmembers).matrix, truth.mixing).mean_sam)
        medians.append(np.median(errs))
    assert medians[1] <= medians[0]


def test_deca_dimension_check(rng):
    with pytest.raises(DimensionError):
        deca(rng.uniform(size=(3, 20)), 2)


def test_deca_config_validation():
    with pytest.raises(InvalidParameterError):
        DecaConfig(backtrack=1.5)
    with pytest.raises(InvalidParameterError):
        DecaConfig(outer_iters=0)


# noisy-model terms

def test_r_segment_closed_form():
    A = np.array([[0.0, 1.0]])
    expected = math.log(norm.cdf(5) - norm.cdf(-5))
    assert r_integral(A, np.array([0.5]), 0.1) == pytest.approx(expected, rel=1e-6)
    assert expected == pytest.approx(-5.7e-7, rel=0.05)


def test_r_far_point():
    A = np.array([[0.0, 1.0]])
    r = r_integral(A, np.array([2.0]), 0.1)
    assert r <= norm.logcdf(-10) + 1e-9
    assert r == pytest.approx(-53.23, abs=0.01)


def test_r_small_sigma_limits():
    A = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    assert abs(r_integral(A, np.array([0.25, 0.25]), 1e-3)) < 1e-9
    assert r_integral(A, np.array([1.0, 1.0]), 1e-3) <= -700
    assert r_integral(np.array([[0.0, 1.0]]), np.array([-0.5]), 1e-3) <= -700


def test_r_rejects_bad_sigma():
    with pytest.raises(InvalidParameterError):
        r_integral(np.array([[0.0, 1.0]]), np.array([0.5]), 0.0)


def test_r_monte_carlo_agrees(rng):
    A = np.array([[0.0, 1.0, 0.2], [0.0, 0.1, 1.0]])
    y = np.array([0.5, 0.6])
    exact = r_integral(A, y, 0.3)
    mc, se = r_integral_mc(A, y, 0.3, 100_000, rng)
    assert abs(mc - exact) < 4 * se + 1e-4


def test_r_monte_carlo_higher_dimension(rng):
    A = np.hstack([np.zeros((3, 1)), np.eye(3)])
    y = np.full(3, 0.2)
    val = r_integral(A, y, 0.15, rng=rng)
    assert -1.0 < val < 0.0


@pytest.mark.parametrize("n", [2, 3])
def test_log_marginal_decomposition(rng, n):
    for _ in range(5):
        A = rng.uniform(-1, 1, (n - 1, n))
        while svol(A) < 0.1:
            A = rng.uniform(-1, 1, (n - 1, n))
        y = A @ sample_dirichlet(np.ones(n), rng) + 0.05 * rng.standard_normal(n - 1)
        sigma = rng.uniform(0.1, 0.5)
        lhs = log_marginal_quadrature(A, y, sigma, n_nodes=96)
        rhs = -math.log(svol(A)) + r_integral(A, y, sigma)
        assert abs(lhs - rhs) < 1e-6


def segment(a):
    return np.array([[-a, 1.0 + a]])


def test_ml_small_sigma_prefers_tight_segment(rng):
    Y = rng.uniform(0, 1, (1, 100))
    Y[0, :2] = [0.0, 1.0]
    grid = np.linspace(0, 1, 21)
    vals = [ml_objective(segment(a), Y, 1e-3) for a in grid]
    assert int(np.argmin(vals)) == 0
    assert np.all(np.diff(vals) > 0)


def test_ml_large_sigma_moves_off_enclosing_segment(rng):
    # with a large noise level the volume term no longer forces enclosure; the
    # minimizer over [-a, 1 + a] moves inside the data range (a < 0)
    Y = rng.uniform(0, 1, (1, 200))
    grid = np.linspace(-0.45, 1.0, 146)
    vals = [ml_objective(segment(a), Y, 1.0) for a in grid]
    assert grid[int(np.argmin(vals))] < 0
