import numpy as np
import pytest

from rockrisk.sampling import ScenarioSet


class QuadraticProblem:
    """``J_i(z) = 1/2 ||z - xi_i||^2 + offset`` with the identity mass."""

    def __init__(self, centers, offset=0.0, weights=None, mask=None):
        c = np.asarray(centers, dtype=float)
        self.centers = c.reshape(len(c), -1)
        n = len(c)
        w = np.full(n, 1.0 / n) if weights is None else np.asarray(weights, dtype=float)
        m = np.zeros(n, bool) if mask is None else np.asarray(mask, bool)
        self.scenarios = ScenarioSet(c, w, m)
        self.offset = offset

    @property
    def n_controls(self):
        return self.centers.shape[1]

    @property
    def lumped_mass(self):
        return np.ones(self.n_controls)

    def mass_matvec(self, z):
        return np.asarray(z, dtype=float)

    def norm_sq(self, z):
        z = np.asarray(z, dtype=float)
        return float(z @ z)

    def evaluate(self, z, with_grad=True):
        d = np.asarray(z, dtype=float)[None, :] - self.centers
        J = 0.5 * np.sum(d * d, axis=1) + self.offset
        return J, (d if with_grad else None)


@pytest.fixture
def quadratic_problem():
    return QuadraticProblem


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# one summary line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: dict = {}


@pytest.fixture
def criterion():
    """``criterion(n, ok, detail)`` records a result line and asserts ``ok``."""

    def record(n, ok, detail):
        ACCEPTANCE_LINES[n] = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        assert ok, detail

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
