"""Local convergence analysis of bound optimizers.

The rate matrix M' is the Jacobian of the iteration map at a fixed point,
estimated here by central differences in the map's own (unconstrained)
chart.  The step/gradient transformation matrix P is never formed; only
the step itself is used.
"""
import json
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from . import numerics
from .core import IterationMap
from .exceptions import InsufficientDataError, NotConvergedError, SingularMatrixError

GAUGE_TOL = 1e-4
GAUGE_ALIGN = 0.99
ERROR_FLOOR = 1e-12
DEFAULT_K = 10


def fixed_point_residual(imap: IterationMap, theta) -> float:
    theta = np.asarray(theta, dtype=float)
    return float(np.linalg.norm(imap.step(theta) - theta))


def refine_fixed_point(imap: IterationMap, theta, tol: float = 1e-13, max_iter: int = 30, h: Optional[float] = None):
    """Polish an approximate fixed point by Newton's method on step(t) - t.

    The Jacobian (M' - I) is singular along gauge directions, so each
    Newton step is a least-squares solve.  Steps that fail to reduce the
    residual are rejected and the current point is returned.
    """
    theta = np.asarray(theta, dtype=float).copy()
    r = imap.step(theta) - theta
    for _ in range(max_iter):
        rn = np.linalg.norm(r)
        if rn <= tol * (1.0 + np.linalg.norm(theta)):
            break
        J = numerics.fd_jacobian(imap.step, theta, h) - np.eye(theta.size)
        delta = np.linalg.lstsq(J, -r, rcond=1e-12)[0]
        cand = theta + delta
        try:
            rc = imap.step(cand) - cand
        except Exception:
            break
        if not np.all(np.isfinite(rc)) or np.linalg.norm(rc) >= rn:
            break
        theta, r = cand, rc
    return theta


def estimate_rate_matrix(imap: IterationMap, fixed_point, h: Optional[float] = None) -> np.ndarray:
    fixed_point = np.asarray(fixed_point, dtype=float)
    res = fixed_point_residual(imap, fixed_point)
    if res > 1e-7 * (1.0 + np.linalg.norm(fixed_point)):
        raise NotConvergedError(f"{imap.name}: point is not a fixed point (residual {res:.3g})", res)
    return numerics.fd_jacobian(imap.step, fixed_point, h)


def observed_rate(trajectory: Sequence, fixed_point, k: int = DEFAULT_K, floor: float = ERROR_FLOOR) -> float:
    """Geometric mean of successive error ratios over the last ``k`` usable iterations."""
    fixed_point = np.asarray(fixed_point, dtype=float)
    errors = np.array([np.linalg.norm(np.asarray(t) - fixed_point) for t in trajectory])
    idx = np.flatnonzero(errors > floor)
    if idx.size == 0:
        raise InsufficientDataError("no iterate lies above the error floor")
    # the usable run is the last contiguous stretch above the floor
    last = idx[-1]
    start = last
    while start - 1 >= 0 and errors[start - 1] > floor:
        start -= 1
    tail = errors[max(start, last - k):last + 1]
    if tail.size - 1 < 3:
        raise InsufficientDataError(f"only {tail.size - 1} usable error ratios (need 3)")
    ratios = tail[1:] / tail[:-1]
    return float(np.exp(np.mean(np.log(ratios))))


def _unit_cluster(spectrum: numerics.Spectrum, tol: float) -> np.ndarray:
    return np.flatnonzero(np.abs(spectrum.eigenvalues - 1.0) <= tol)


def _span(vectors: np.ndarray, k: int) -> np.ndarray:
    """Orthonormal basis (real) for the span of the given complex column vectors, at most ``k`` wide."""
    stacked = np.hstack([vectors.real, vectors.imag])
    U, sv, _ = np.linalg.svd(stacked, full_matrices=False)
    rank = int(np.sum(sv > 1e-8 * sv[0])) if sv.size and sv[0] > 0 else 0
    return U[:, :min(rank, k)]


def _aligned_dimension(spectrum, directions, cluster, align) -> int:
    """Dimension of the overlap between the unit-eigenvalue eigenspace and span(directions).

    Counted as the number of principal cosines between the two subspaces
    that reach ``align``; this stays well defined when the unit eigenvalue
    is repeated and the eigensolver returns an arbitrary basis for it.
    """
    if cluster.size == 0 or not directions:
        return 0
    if spectrum.vectors is None:
        raise ValueError("gauge detection needs a spectrum computed with eigenvectors")
    E = _span(spectrum.vectors[:, cluster], cluster.size)
    Q, _ = np.linalg.qr(np.column_stack([np.asarray(d, dtype=float) for d in directions]))
    cosines = np.linalg.svd(Q.T @ E, compute_uv=False)
    return int(np.sum(cosines >= align))


def gauge_indices(spectrum: numerics.Spectrum, imap: IterationMap, fixed_point, tol: float = GAUGE_TOL,
                  align: float = GAUGE_ALIGN, directions: Optional[Sequence] = None) -> List[int]:
    """Indices of the unit eigenvalues explained by the supplied degeneracy directions.

    ``directions`` defaults to the map's gauge directions.  Within the
    cluster of eigenvalues near 1, the ones closest to 1 are attributed
    first.
    """
    if directions is None:
        directions = imap.gauge_directions(np.asarray(fixed_point, dtype=float))
    cluster = _unit_cluster(spectrum, tol)
    count = _aligned_dimension(spectrum, list(directions), cluster, align)
    order = cluster[np.argsort(np.abs(spectrum.eigenvalues[cluster] - 1.0), kind="stable")]
    return sorted(order[:count].tolist())


def detect_gauge(spectrum: numerics.Spectrum, imap: IterationMap, fixed_point, tol: float = GAUGE_TOL,
                 align: float = GAUGE_ALIGN) -> int:
    """Count unit eigenvalues explained by the model's known gauge directions."""
    return len(gauge_indices(spectrum, imap, fixed_point, tol, align))


@dataclass
class ConvergenceReport:
    eigenvalues: List[complex]
    spectral_radius: float
    predicted_rate: float
    observed_rate: Optional[float]
    gauge_dimensions: int
    degenerate_dimensions: int = 0

    def to_dict(self):
        d = asdict(self)
        d["eigenvalues"] = [[float(z.real), float(z.imag)] for z in self.eigenvalues]
        return d

    @property
    def relative_rate_error(self) -> Optional[float]:
        if self.observed_rate is None or self.predicted_rate == 0:
            return None
        return abs(self.predicted_rate - self.observed_rate) / self.predicted_rate


def convergence_report(imap: IterationMap, fixed_point, trajectory: Optional[Sequence] = None,
                       k: int = DEFAULT_K, rate_matrix: Optional[np.ndarray] = None) -> ConvergenceReport:
    if rate_matrix is None:
        rate_matrix = estimate_rate_matrix(imap, fixed_point)
    spec = numerics.eig(rate_matrix, vectors=True)
    fixed_point = np.asarray(fixed_point, dtype=float)
    gauge = gauge_indices(spec, imap, fixed_point)
    # predicted rate also skips flat directions beyond the named gauge (e.g. NMF factor mixing)
    flat = gauge_indices(spec, imap, fixed_point, directions=imap.degenerate_directions(fixed_point))
    flat = sorted(set(flat) | set(gauge))
    rest = np.delete(spec.eigenvalues, flat)
    predicted = float(np.max(np.abs(rest))) if rest.size else 0.0
    obs = None
    if trajectory is not None:
        try:
            obs = observed_rate(trajectory, fixed_point, k)
        except InsufficientDataError:
            obs = None
    return ConvergenceReport(list(spec.eigenvalues), spec.spectral_radius, predicted, obs, len(gauge), len(flat))


@dataclass
class DirectionReport:
    cos_step_grad: float
    cos_step_newton: float
    cos_grad_newton: float
    grad_log_norm: float
    newton_defined: bool = True
    degenerate: bool = False

    def to_dict(self):
        return asdict(self)


def newton_direction(gradient, hessian) -> Optional[np.ndarray]:
    """(-S)^-1 grad, or None when -S is not positive definite."""
    neg = -np.asarray(hessian, dtype=float)
    neg = 0.5 * (neg + neg.T)
    if np.min(np.linalg.eigvalsh(neg)) <= 0:
        return None
    try:
        return numerics.solve(neg, gradient)
    except SingularMatrixError:
        return None


def direction_report(imap: IterationMap, theta, hessian=None) -> DirectionReport:
    """Cosines between the bound-optimizer step, the gradient and the Newton step at ``theta``."""
    theta = np.asarray(theta, dtype=float)
    g = imap.gradient(theta)
    step = imap.step(theta) - theta
    gn = np.linalg.norm(g)
    if gn == 0 or np.linalg.norm(step) == 0:
        return DirectionReport(float("nan"), float("nan"), float("nan"),
                               float(np.log(gn)) if gn > 0 else float("-inf"), False, True)
    if hessian is None:
        hessian = numerics.fd_hessian(imap.gradient, theta)
    newton = newton_direction(g, hessian)
    if newton is None:
        return DirectionReport(numerics.cosine(step, g), float("nan"), float("nan"), float(np.log(gn)), False, False)
    return DirectionReport(numerics.cosine(step, g), numerics.cosine(step, newton),
                           numerics.cosine(g, newton), float(np.log(gn)))


def quasi_newton_residual(imap: IterationMap, theta, rate_matrix, hessian) -> float:
    """Relative mismatch between the actual step and (I - M')(-S)^-1 grad L."""
    theta = np.asarray(theta, dtype=float)
    step = imap.step(theta) - theta
    newton = numerics.solve(-np.asarray(hessian, dtype=float), imap.gradient(theta))
    predicted = (np.eye(theta.size) - rate_matrix) @ newton
    return float(np.linalg.norm(step - predicted) / np.linalg.norm(step))


def near_fixed_point(imap: IterationMap, theta) -> bool:
    """Gradient small enough, relative to the objective, for the linearized analysis to apply."""
    return bool(np.linalg.norm(imap.gradient(theta)) <= 1e-4 * (1.0 + abs(imap.objective(theta))))


def reports_to_json(convergence: Optional[ConvergenceReport] = None, direction: Optional[DirectionReport] = None,
                    **extra) -> str:
    doc = dict(extra)
    if convergence is not None:
        doc["convergence"] = convergence.to_dict()
    if direction is not None:
        doc["direction"] = direction.to_dict()
    return json.dumps(doc, indent=2, sort_keys=True, default=_json_default)


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, complex):
        return [o.real, o.imag]
    raise TypeError(f"cannot serialize {type(o).__name__}")
