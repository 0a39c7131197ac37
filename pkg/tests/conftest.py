import numpy as np
import pytest

from boundopt.core import IterationMap, free_layout


class QuadraticMap(IterationMap):
    """L(x) = -1/2 (x - c)^T A (x - c) with the step x + P grad L(x).

    With P = A^-1 this is exact Newton; with P = I / lambda_max(A) it is a
    bound optimizer whose quadratic surrogate majorizes the curvature.
    """

    name = "quadratic"

    def __init__(self, A, c, P=None):
        self.A = np.asarray(A, dtype=float)
        self.c = np.asarray(c, dtype=float)
        self.P = np.linalg.inv(self.A) if P is None else np.asarray(P, dtype=float)
        super().__init__(free_layout(len(self.c)))

    def objective(self, x):
        d = np.asarray(x) - self.c
        return -0.5 * float(d @ self.A @ d)

    def gradient(self, x):
        return -self.A @ (np.asarray(x) - self.c)

    def hessian(self, x):
        return -self.A

    def step(self, x):
        return np.asarray(x) + self.P @ self.gradient(x)

    def bound(self, x, psi):
        # curvature-majorizing surrogate for P = I / L
        L = 1.0 / self.P[0, 0]
        d = np.asarray(x) - psi
        return self.objective(psi) + self.gradient(psi) @ d - 0.5 * L * float(d @ d)


@pytest.fixture
def gradient_step_map():
    A = np.array([[2.0, 0.3], [0.3, 1.0]])
    L = np.max(np.linalg.eigvalsh(A))
    return QuadraticMap(A, np.array([1.0, -2.0]), np.eye(2) / L)


@pytest.fixture
def newton_map():
    return QuadraticMap(np.array([[2.0, 0.3], [0.3, 1.0]]), np.array([1.0, -2.0]))


def pytest_configure(config):
    config._acceptance_lines = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
