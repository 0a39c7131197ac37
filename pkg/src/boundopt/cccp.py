"""Concave-convex procedure for smooth low-dimensional energies.

The energy E = E_vex + E_cave is minimized by repeatedly solving
grad E_vex(x_new) = -grad E_cave(x_old).
"""
from dataclasses import dataclass
from typing import Callable, Dict, Sequence

import numpy as np
from numpy.polynomial import Polynomial

from . import numerics
from .core import IterationMap, free_layout
from .exceptions import InnerSolveError, SingularMatrixError

INNER_TOL = 1e-12
INNER_MAX = 200


@dataclass(frozen=True)
class Decomposition:
    """Convex part, concave part, and their first two derivatives.

    All callables take a 1-d array and return a scalar, a vector, and a
    matrix respectively.
    """

    name: str
    vex: Callable
    vex_grad: Callable
    vex_hess: Callable
    cave: Callable
    cave_grad: Callable
    cave_hess: Callable

    def energy(self, x) -> float:
        return float(self.vex(x) + self.cave(x))

    def grad(self, x) -> np.ndarray:
        return self.vex_grad(x) + self.cave_grad(x)

    def hess(self, x) -> np.ndarray:
        return self.vex_hess(x) + self.cave_hess(x)

    def is_convex_concave(self, points) -> bool:
        """Sample check that the vex Hessian is PSD and the cave Hessian NSD."""
        for p in points:
            p = np.atleast_1d(np.asarray(p, dtype=float))
            if np.min(np.linalg.eigvalsh(self.vex_hess(p))) < -1e-10:
                return False
            if np.max(np.linalg.eigvalsh(self.cave_hess(p))) > 1e-10:
                return False
        return True


def polynomial_decomposition(name: str, vex_coeffs: Sequence[float], cave_coeffs: Sequence[float]) -> Decomposition:
    """1-d decomposition from ascending coefficient lists for each part."""
    pv, pc = Polynomial(vex_coeffs), Polynomial(cave_coeffs)
    dv, dc = pv.deriv(), pc.deriv()
    ddv, ddc = dv.deriv(), dc.deriv()
    return Decomposition(
        name,
        vex=lambda x: float(pv(x[0])),
        vex_grad=lambda x: np.array([dv(x[0])]),
        vex_hess=lambda x: np.array([[ddv(x[0])]]),
        cave=lambda x: float(pc(x[0])),
        cave_grad=lambda x: np.array([dc(x[0])]),
        cave_hess=lambda x: np.array([[ddc(x[0])]]),
    )


# E(x) = x^4 - 3x^2 + 2x - 2, coefficients ascending
QUARTIC = (-2.0, 2.0, -3.0, 0.0, 1.0)

QUARTIC_BENCH: Dict[str, Decomposition] = {
    "dec1": polynomial_decomposition("dec1", [0, 2, 0, 0, 1], [-2, 0, -3]),
    "dec2": polynomial_decomposition("dec2", [0, 2, 10, 0, 1], [-2, 0, -13]),
    "dec3": polynomial_decomposition("dec3", [0, 2, 0, 0, 10], [-2, 0, -3, 0, -9]),
}


def get_decomposition(name: str) -> Decomposition:
    try:
        return QUARTIC_BENCH[name]
    except KeyError:
        raise KeyError(f"unknown decomposition {name!r}; known: {sorted(QUARTIC_BENCH)}") from None


def _bisect_1d(g, x0, tol):
    # g is nondecreasing (derivative of a convex function); grow a bracket from x0
    lo = hi = float(x0)
    width = 1.0
    glo = ghi = g(lo)
    for _ in range(200):
        if glo <= 0 <= ghi:
            break
        if ghi < 0:
            lo, glo = hi, ghi
            hi = hi + width
            ghi = g(hi)
        else:
            hi, ghi = lo, glo
            lo = lo - width
            glo = g(lo)
        width *= 2.0
    else:
        raise InnerSolveError("could not bracket the inner root")
    for _ in range(2000):
        mid = 0.5 * (lo + hi)
        gm = g(mid)
        if abs(gm) <= tol or mid in (lo, hi):
            return mid, abs(gm)
        if gm < 0:
            lo = mid
        else:
            hi = mid
    return mid, abs(gm)


def cccp_step(d: Decomposition, x) -> np.ndarray:
    """Solve grad E_vex(y) = -grad E_cave(x) for y.

    Damped Newton on the convex surrogate E_vex(y) + y . grad E_cave(x),
    with a bisection fallback for 1-d problems.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    target = -d.cave_grad(x)
    tol = INNER_TOL * max(1.0, float(np.max(np.abs(target))))

    def surrogate(y):
        return d.vex(y) - target @ y

    y = x.copy()
    for _ in range(INNER_MAX):
        g = d.vex_grad(y) - target
        res = float(np.max(np.abs(g)))
        if res <= tol:
            return y
        H = d.vex_hess(y)
        try:
            delta = numerics.solve(H, -g)
        except SingularMatrixError:
            break
        if g @ delta >= 0:
            break
        t, f0 = 1.0, surrogate(y)
        # a near-flat convex part gives huge trial steps; overflowing trials count as rejected
        with np.errstate(over="ignore", invalid="ignore"):
            while t > 1e-12 and not surrogate(y + t * delta) <= f0 + 1e-4 * t * (g @ delta):
                t *= 0.5
        if t <= 1e-12:
            break
        y = y + t * delta
    else:
        if x.size != 1:
            raise InnerSolveError(f"inner Newton solve stagnated, residual {res:.3g}", res)

    if x.size == 1:
        root, res = _bisect_1d(lambda v: float(d.vex_grad(np.array([v]))[0] - target[0]), y[0], tol)
        # bisection bottoms out at the float spacing; accept if within a few ulps of the scale
        if res > max(tol, 1e3 * np.spacing(max(1.0, abs(target[0])))):
            raise InnerSolveError(f"inner bisection failed, residual {res:.3g}", res)
        return np.array([root])
    res = float(np.max(np.abs(d.vex_grad(y) - target)))
    raise InnerSolveError(f"inner Newton solve stagnated, residual {res:.3g}", res)


def cccp_rate_matrix(d: Decomposition, x_star) -> np.ndarray:
    """Jacobian of the CCCP map at a fixed point: -[Hess E_vex]^-1 [Hess E_cave]."""
    x_star = np.atleast_1d(np.asarray(x_star, dtype=float))
    hv = d.vex_hess(x_star)
    hc = d.cave_hess(x_star)
    return -numerics.solve(hv, hc)


def decomposition_ratio_score(d: Decomposition, x) -> float:
    """Spectral radius of the concave-to-convex curvature ratio at ``x``."""
    return numerics.eig(cccp_rate_matrix(d, x)).spectral_radius


def add_curvature_shift(d: Decomposition, mu: float) -> Decomposition:
    """Move mu*|x|^2 from the concave into the convex part; E itself is unchanged."""
    return Decomposition(
        f"{d.name}+{mu:g}",
        vex=lambda x: d.vex(x) + mu * float(x @ x),
        vex_grad=lambda x: d.vex_grad(x) + 2 * mu * x,
        vex_hess=lambda x: d.vex_hess(x) + 2 * mu * np.eye(len(x)),
        cave=lambda x: d.cave(x) - mu * float(x @ x),
        cave_grad=lambda x: d.cave_grad(x) - 2 * mu * x,
        cave_hess=lambda x: d.cave_hess(x) - 2 * mu * np.eye(len(x)),
    )


class CCCPMap(IterationMap):
    minimize = True

    def __init__(self, decomposition: Decomposition, dim: int = 1):
        super().__init__(free_layout(dim, "x"))
        self.decomposition = decomposition
        self.name = f"cccp-{decomposition.name}"

    def objective(self, theta):
        return -self.decomposition.energy(np.atleast_1d(theta))

    def gradient(self, theta):
        return -self.decomposition.grad(np.atleast_1d(theta))

    def hessian(self, theta):
        return -self.decomposition.hess(np.atleast_1d(theta))

    def step(self, theta):
        return cccp_step(self.decomposition, theta)

    def bound(self, theta, psi):
        d = self.decomposition
        theta, psi = np.atleast_1d(theta), np.atleast_1d(psi)
        upper = d.vex(theta) + d.cave(psi) + (theta - psi) @ d.cave_grad(psi)
        return -float(upper)
