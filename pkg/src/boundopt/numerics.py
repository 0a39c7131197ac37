"""Small dense linear algebra and finite-difference helpers.

All matrices here are tiny (a few hundred rows at most), so everything is
dense and LAPACK-backed through numpy.
"""
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .exceptions import DimensionError, NumericError, SingularMatrixError

CONDITION_LIMIT = 1e12


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues sorted by modulus, largest first.

    ``vectors`` holds the matching right eigenvectors as columns when they
    were requested.
    """

    eigenvalues: np.ndarray
    spectral_radius: float
    vectors: Optional[np.ndarray] = None

    def __len__(self):
        return len(self.eigenvalues)

    @property
    def lambda_max(self) -> float:
        """Largest real part among the eigenvalues."""
        return float(np.max(self.eigenvalues.real))


def _as_square(m) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise NumericError("matrix has non-finite entries")
    return m


def eig(m, vectors: bool = False) -> Spectrum:
    """Full eigendecomposition of a small dense matrix."""
    m = _as_square(m)
    try:
        if vectors:
            vals, vecs = np.linalg.eig(m)
        else:
            vals, vecs = np.linalg.eigvals(m), None
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"eigenvalue iteration did not converge for {m.shape[0]}x{m.shape[0]} matrix: {exc}") from exc
    vals = vals.astype(complex)
    # modulus descending; ties broken by real part so the order is reproducible
    order = np.lexsort((-vals.real, -np.round(np.abs(vals), 12)))
    vals = vals[order]
    if vecs is not None:
        vecs = vecs[:, order]
    radius = float(np.abs(vals[0])) if len(vals) else 0.0
    return Spectrum(vals, radius, vecs)


def solve(m, b) -> np.ndarray:
    """Solve ``m x = b``, refusing matrices with condition number above 1e12."""
    m = _as_square(m)
    b = np.asarray(b, dtype=float)
    if b.shape[0] != m.shape[0]:
        raise DimensionError(f"rhs length {b.shape[0]} does not match matrix size {m.shape[0]}")
    cond = float(np.linalg.cond(m))
    if not np.isfinite(cond) or cond > CONDITION_LIMIT:
        raise SingularMatrixError(f"matrix is singular to working precision (condition {cond:.3g})", cond)
    x = np.linalg.solve(m, b)
    # one round of iterative refinement
    x = x + np.linalg.solve(m, b - m @ x)
    return x


def default_step(x0) -> float:
    x0 = np.asarray(x0, dtype=float)
    scale = float(np.max(np.abs(x0))) if x0.size else 0.0
    return max(1e-6, 1e-7 * scale)


def fd_jacobian(f: Callable, x0, h: Optional[float] = None) -> np.ndarray:
    """Central-difference Jacobian; column j is (f(x+h e_j) - f(x-h e_j)) / 2h."""
    x0 = np.asarray(x0, dtype=float)
    if h is None:
        h = default_step(x0)
    if h <= 0:
        raise ValueError("step size must be positive")
    cols = []
    for j in range(x0.size):
        e = np.zeros_like(x0)
        e[j] = h
        fp = np.atleast_1d(np.asarray(f(x0 + e), dtype=float))
        fm = np.atleast_1d(np.asarray(f(x0 - e), dtype=float))
        if not (np.all(np.isfinite(fp)) and np.all(np.isfinite(fm))):
            raise NumericError(f"non-finite function value when perturbing coordinate {j}")
        cols.append((fp - fm) / (2.0 * h))
    if not cols:
        return np.zeros((0, 0))
    return np.column_stack(cols)


def fd_hessian(grad: Callable, x0, h: Optional[float] = None) -> np.ndarray:
    """Jacobian of an analytic gradient, symmetrized exactly."""
    jac = fd_jacobian(grad, x0, h)
    return 0.5 * (jac + jac.T)


def fd_gradient(f: Callable, x0, h: Optional[float] = None) -> np.ndarray:
    """Central-difference gradient of a scalar function."""
    return fd_jacobian(lambda x: np.array([f(x)]), x0, h)[0]


def cosine(a, b) -> float:
    a = np.ravel(a)
    b = np.ravel(b)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        return float("nan")
    return float(np.clip(a @ b / (na * nb), -1.0, 1.0))
