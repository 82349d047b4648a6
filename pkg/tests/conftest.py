import numpy as np
import pytest

from grassmann_cg.manifold import orbital_norm, project_tangent, random_frame


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def tangent_pair(rng, n_grid=10, n_orb=3, h=1.0):
    u = random_frame(n_grid, n_orb, rng, h)
    d = project_tangent(u, rng.standard_normal((n_grid, n_orb)), h)
    return u, d / orbital_norm(d, h)


def random_orthogonal(rng, n):
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
