"""KL-divergence non-negative matrix factorization by multiplicative updates.

Each half-update minimizes the Jensen upper bound of the divergence with
the other factor held fixed, so the divergence never increases.  The
default schedule updates H from (W, H) and then W from (W, H_new).
Updating both factors from the same (W, H) is available as
``mode="simultaneous"`` but is not a bound-minimization step and can
increase the divergence.
"""
import io
from dataclasses import dataclass
from pathlib import Path
from typing import List

import numpy as np
from scipy.special import xlogy

from . import numerics
from .core import IterationMap, Layout
from .exceptions import BoundaryError, NotConvergedError

EPS_NMF = 1e-12
MODES = ("sequential", "simultaneous")


@dataclass
class Factorization:
    V: np.ndarray
    W: np.ndarray
    H: np.ndarray

    def __post_init__(self):
        self.V = np.asarray(self.V, dtype=float)
        self.W = np.asarray(self.W, dtype=float)
        self.H = np.asarray(self.H, dtype=float)
        n, m = self.V.shape
        if self.W.shape[0] != n or self.H.shape[1] != m or self.W.shape[1] != self.H.shape[0]:
            raise ValueError(f"shapes V{self.V.shape}, W{self.W.shape}, H{self.H.shape} do not chain")
        if np.any(self.V < 0):
            raise ValueError("V must be non-negative")
        if np.any(self.W <= 0) or np.any(self.H <= 0):
            raise ValueError("W and H must be strictly positive")

    @property
    def rank(self) -> int:
        return self.W.shape[1]

    @property
    def product(self) -> np.ndarray:
        return self.W @ self.H

    def packed(self) -> np.ndarray:
        return np.concatenate([self.W.ravel(), self.H.ravel()])

    def with_factors(self, W, H) -> "Factorization":
        return Factorization(self.V, W, H)


def unpack(theta, n: int, r: int, m: int):
    theta = np.asarray(theta, dtype=float)
    return theta[:n * r].reshape(n, r), theta[n * r:].reshape(r, m)


@dataclass(frozen=True)
class AlphaWeights:
    """alpha_ij(a, b) = W_ia H_bj / (WH)_ij for one cell (i, j)."""

    i: int
    j: int
    values: np.ndarray  # (r, r)

    @property
    def diagonal(self) -> np.ndarray:
        return np.diag(self.values)


def alpha_weights(W, H, i: int, j: int) -> AlphaWeights:
    W, H = np.asarray(W, dtype=float), np.asarray(H, dtype=float)
    total = W[i] @ H[:, j]
    return AlphaWeights(i, j, np.outer(W[i], H[:, j]) / total)


def kl_divergence(f: Factorization) -> float:
    WH = f.product
    return float(np.sum(xlogy(f.V, f.V) - xlogy(f.V, WH) - f.V + WH))


def nmf_grad(f: Factorization) -> np.ndarray:
    """Gradient of the divergence with respect to (W, H), packed W first."""
    Q = 1.0 - f.V / f.product
    return np.concatenate([(Q @ f.H.T).ravel(), (f.W.T @ Q).ravel()])


def _update_H(V, W, H):
    ratio = V / (W @ H)
    return np.maximum(H * (W.T @ ratio) / W.sum(axis=0)[:, None], EPS_NMF)


def _update_W(V, W, H):
    ratio = V / (W @ H)
    return np.maximum(W * (ratio @ H.T) / H.sum(axis=1)[None, :], EPS_NMF)


def nmf_step(f: Factorization, mode: str = "sequential") -> Factorization:
    if mode == "sequential":
        H = _update_H(f.V, f.W, f.H)
        W = _update_W(f.V, f.W, H)
    elif mode == "simultaneous":
        H = _update_H(f.V, f.W, f.H)
        W = _update_W(f.V, f.W, f.H)
    else:
        raise ValueError(f"unknown NMF update mode {mode!r}; expected one of {MODES}")
    return f.with_factors(W, H)


def nmf_bound(V, W, H, W_psi, H_psi) -> float:
    """Jensen upper bound on the divergence at (W, H), built with weights from (W_psi, H_psi)."""
    V = np.asarray(V, dtype=float)
    ref = W_psi @ H_psi
    # alpha_ij(c, c) for every cell, shape (n, r, m)
    alpha = W_psi[:, :, None] * H_psi[None, :, :] / ref[:, None, :]
    log_terms = np.log(W)[:, :, None] + np.log(H)[None, :, :] - np.log(alpha)
    jensen = np.einsum("icj,icj->ij", alpha, log_terms)
    return float(np.sum(xlogy(V, V) - V * jensen - V + W @ H))


class NMFMap(IterationMap):
    """Multiplicative updates on log W, log H; the objective is the negated divergence."""

    minimize = True

    def __init__(self, V, rank: int, mode: str = "sequential"):
        self.V = np.asarray(V, dtype=float)
        if np.any(self.V < 0):
            raise ValueError("V must be non-negative")
        if mode not in MODES:
            raise ValueError(f"unknown NMF update mode {mode!r}; expected one of {MODES}")
        self.n, self.m = self.V.shape
        self.r = int(rank)
        self.mode = mode
        self.name = f"nmf-{mode}"
        super().__init__(Layout.build(("logW", self.n * self.r), ("logH", self.r * self.m)))

    def encode(self, W, H) -> np.ndarray:
        return np.log(np.concatenate([np.ravel(W), np.ravel(H)]))

    def decode(self, theta) -> Factorization:
        W, H = unpack(np.exp(theta), self.n, self.r, self.m)
        return Factorization(self.V, W, H)

    def objective(self, theta):
        return -kl_divergence(self.decode(theta))

    def gradient(self, theta):
        f = self.decode(theta)
        return -nmf_grad(f) * f.packed()

    def evaluate(self, theta):
        f = self.decode(theta)
        WH = f.product
        div = np.sum(xlogy(f.V, f.V) - xlogy(f.V, WH) - f.V + WH)
        Q = 1.0 - f.V / WH
        g = np.concatenate([(f.W * (Q @ f.H.T)).ravel(), (f.H * (f.W.T @ Q)).ravel()])
        return -float(div), -g

    def step(self, theta):
        f = nmf_step(self.decode(theta), self.mode)
        return self.encode(f.W, f.H)

    def on_boundary(self, theta) -> bool:
        return bool(np.min(theta) <= np.log(2 * EPS_NMF))

    def bound(self, theta, psi):
        a, b = self.decode(theta), self.decode(psi)
        return -nmf_bound(self.V, a.W, a.H, b.W, b.H)

    def gauge_directions(self, theta) -> List[np.ndarray]:
        # W[:, c] -> s W[:, c], H[c, :] -> H[c, :] / s leaves WH unchanged
        out = []
        for c in range(self.r):
            W = np.zeros((self.n, self.r))
            H = np.zeros((self.r, self.m))
            W[:, c] = 1.0
            H[c, :] = -1.0
            out.append(np.concatenate([W.ravel(), H.ravel()]))
        return out

    def degenerate_directions(self, theta) -> List[np.ndarray]:
        """Tangent of W -> WA, H -> A^-1 H at A = I: r*r directions, the gauge among them."""
        f = self.decode(theta)
        out = []
        for a in range(self.r):
            for b in range(self.r):
                dW = np.zeros((self.n, self.r))
                dH = np.zeros((self.r, self.m))
                dW[:, b] = f.W[:, a] / f.W[:, b]
                dH[a, :] = -f.H[b, :] / f.H[a, :]
                out.append(np.concatenate([dW.ravel(), dH.ravel()]))
        return out


def _second_derivative_blocks(f: Factorization):
    """Second derivatives of the divergence bound at Theta = Psi = (W, H), raw (W, H) coordinates.

    Returns the curvature blocks in the first argument and the mixed
    blocks between first and second argument, all flattened with W
    indexed (i, c) and H indexed (c, j).
    """
    V, W, H = f.V, f.W, f.H
    n, r = W.shape
    m = H.shape[1]
    Vb = W @ H
    R = V / Vb          # V_ij / Vbar_ij
    R2 = V / Vb ** 2    # V_ij / Vbar_ij^2
    eye_r = np.eye(r)

    # curvature in the first argument; W-W and H-H blocks are diagonal
    G_WW = np.diag(((R @ H.T) / W).ravel())
    G_HH = np.diag(((W.T @ R) / H).ravel())
    # (WH)_ij term: d2/dW_ic dH_pl = delta_cp for every i, l
    G_WH = np.einsum("cp,il->icpl", eye_r, np.ones((n, m))).reshape(n * r, r * m)

    # mixed W / W_psi, nonzero only within a row i
    G_WpW = np.zeros((n * r, n * r))
    for i in range(n):
        diag = (R[i] @ H.T) / W[i]
        cross = (H * R2[i]) @ H.T
        G_WpW[i * r:(i + 1) * r, i * r:(i + 1) * r] = -(np.diag(diag) - cross)
    # mixed H / H_psi, nonzero only within a column j
    G_HpH = np.zeros((r * m, r * m))
    for j in range(m):
        diag = (W.T @ R[:, j]) / H[:, j]
        cross = (W.T * R2[:, j]) @ W
        idx = np.arange(r) * m + j
        G_HpH[np.ix_(idx, idx)] = -(np.diag(diag) - cross)
    # mixed W_ic / H_psi_pl = -(V_il/Vb_il) [delta_cp - W_ip H_cl / Vb_il]
    G_WpH = -(np.einsum("il,cp->icpl", R, eye_r)
              - np.einsum("il,ip,cl->icpl", R2, W, H)).reshape(n * r, r * m)
    # mixed H_cj / W_psi_kp = -(V_kj/Vb_kj) [delta_cp - W_kc H_pj / Vb_kj]
    G_HpW = -(np.einsum("kj,cp->cjkp", R, eye_r)
              - np.einsum("kj,kc,pj->cjkp", R2, W, H)).reshape(r * m, n * r)
    return G_WW, G_HH, G_WH, G_WpW, G_WpH, G_HpW, G_HpH


def nmf_rate_matrix_analytic(f: Factorization, chart: str = "log", residual_tol: float = 1e-7) -> np.ndarray:
    """Jacobian of the sequential (H then W) update at an interior fixed point.

    Each half-update is the minimizer of the bound with respect to one
    factor, so implicit differentiation of its stationarity condition
    gives that half's Jacobian in terms of the curvature and mixed blocks
    of the bound; the two halves are then composed.  ``chart="log"``
    returns the matrix in log coordinates (same spectrum as ``"raw"``).
    """
    if np.min(f.W) <= 10 * EPS_NMF or np.min(f.H) <= 10 * EPS_NMF:
        raise BoundaryError("fixed point lies on the positivity boundary; the analytic rate matrix needs an interior point")
    stepped = nmf_step(f)
    res = np.linalg.norm(stepped.packed() - f.packed())
    if res > residual_tol * (1.0 + np.linalg.norm(f.packed())):
        raise NotConvergedError(f"not a fixed point of the update (residual {res:.3g})", res)
    n, r = f.W.shape
    m = f.H.shape[1]
    G_WW, G_HH, G_WH, G_WpW, G_WpH, G_HpW, G_HpH = _second_derivative_blocks(f)
    G_HW = G_WH.T
    # H' = H'(W, H)
    dH_dW = -numerics.solve(G_HH, G_HW + G_HpW)
    dH_dH = -numerics.solve(G_HH, G_HpH)
    # W' = W'(W, H'); H' also enters through the bound's reference point
    coupling = G_WH + G_WpH
    dW_dW = -numerics.solve(G_WW, G_WpW + coupling @ dH_dW)
    dW_dH = -numerics.solve(G_WW, coupling @ dH_dH)
    J = np.block([[dW_dW, dW_dH], [dH_dW, dH_dH]])
    if chart == "raw":
        return J
    if chart != "log":
        raise ValueError(f"unknown chart {chart!r}")
    x = f.packed()
    return J * x[None, :] / x[:, None]


def translate_data(V, t=None) -> np.ndarray:
    """Shift every entry of V down by ``t`` (default: min(V) - EPS_NMF)."""
    V = np.asarray(V, dtype=float)
    if t is None:
        t = float(V.min()) - EPS_NMF
    out = V - t
    if np.any(out < 0):
        raise ValueError(f"shift {t!r} exceeds the smallest entry {V.min()!r}; data would turn negative")
    return out


def init_factors(V, rank: int, seed: int = 0):
    """Uniform(0.5, 1.5) entries scaled by sqrt(mean(V) / rank)."""
    V = np.asarray(V, dtype=float)
    rng = np.random.default_rng(seed)
    scale = np.sqrt(max(V.mean(), EPS_NMF) / rank)
    W = rng.uniform(0.5, 1.5, (V.shape[0], rank)) * scale
    H = rng.uniform(0.5, 1.5, (rank, V.shape[1])) * scale
    return W, H


def gen_nmf_data(dim: int = 16, n_vectors: int = 100, offset: float = 20.0, seed: int = 0) -> np.ndarray:
    """Columns are N(0, I) vectors shifted by ``offset``, as a dim x n_vectors matrix."""
    rng = np.random.default_rng(seed)
    V = rng.standard_normal((dim, n_vectors)) + offset
    if np.any(V < 0):
        raise ValueError("offset too small: generated data has negative entries")
    return V


def matrix_to_csv(a) -> str:
    buf = io.StringIO()
    np.savetxt(buf, np.atleast_2d(a), delimiter=",", fmt="%.17g")
    return buf.getvalue()


def matrix_from_csv(text: str) -> np.ndarray:
    return np.atleast_2d(np.loadtxt(io.StringIO(text), delimiter=",", dtype=float))


def export_factors(f: Factorization, directory) -> List[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = [directory / "W.csv", directory / "H.csv"]
    for p, a in zip(paths, (f.W, f.H)):
        p.write_text(matrix_to_csv(a))
    return paths
