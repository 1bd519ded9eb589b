import sys
import numpy as np
import pytest

from unmix.scene import SceneConfig, generate_scene


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def noiseless_scene(n=3, m=20, t=500, pure=False, purity=1.0, seed=0, alpha=None):
    cfg = SceneConfig(n, m, t, max_purity=purity, include_pure_pixels=pure, seed=seed, dirichlet_alpha=alpha)
    return generate_scene(cfg)


def random_inverse_instance(rng, n):
    """A well-conditioned nonsingular n x n matrix."""
    while True:
        B = rng.standard_normal((n, n)) + 2.0 * np.eye(n)
        if np.linalg.cond(B) < 50:
            return B


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        terminalreporter.write_line(results[number])
