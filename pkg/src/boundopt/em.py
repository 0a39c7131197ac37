"""EM for Gaussian mixtures and discrete hidden Markov models.

Both models are exposed as iteration maps over an unconstrained chart:
additive log-ratios for simplex-valued parameters (mixing weights, HMM
rows) and log-Cholesky factors for covariances.  EM itself runs on the
natural parameters; the chart is only used to expose gradients and to
allow two-sided finite differences around a fixed point.
"""
from dataclasses import dataclass, replace
from typing import List, Sequence, Tuple

import numpy as np
from scipy.special import logsumexp

from .core import IterationMap, LastValueCache, Layout
from .exceptions import DegenerateError, NumericError

EPS_COV = 1e-6
EPS_PROB = 1e-8
LOG_2PI = np.log(2 * np.pi)


# ----------------------------------------------------------------------------
# simplex chart


def alr(p) -> np.ndarray:
    """Additive log-ratio against the last entry, row-wise."""
    p = np.asarray(p, dtype=float)
    return np.log(p[..., :-1]) - np.log(p[..., -1:])


def alr_inv(z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    full = np.concatenate([z, np.zeros(z.shape[:-1] + (1,))], axis=-1)
    full = full - full.max(axis=-1, keepdims=True)
    e = np.exp(full)
    return e / e.sum(axis=-1, keepdims=True)


def _alr_grad(counts, probs) -> np.ndarray:
    # d/dz of sum_b c_b log softmax([z, 0])_b, for each row
    total = counts.sum(axis=-1, keepdims=True)
    return (counts - total * probs)[..., :-1]


def _floor_rows(p, eps=EPS_PROB) -> np.ndarray:
    p = np.maximum(p, eps)
    return p / p.sum(axis=-1, keepdims=True)


# ----------------------------------------------------------------------------
# mixtures of Gaussians


@dataclass
class MoGParams:
    weights: np.ndarray      # (M,)
    means: np.ndarray        # (M, d)
    covariances: np.ndarray  # (M, d, d)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        self.means = np.atleast_2d(np.asarray(self.means, dtype=float))
        self.covariances = np.asarray(self.covariances, dtype=float).reshape(
            self.means.shape[0], self.means.shape[1], self.means.shape[1])

    @property
    def n_components(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def permuted(self, order) -> "MoGParams":
        order = list(order)
        return MoGParams(self.weights[order], self.means[order], self.covariances[order])


def _component_logpdf(params: MoGParams, data) -> np.ndarray:
    """log N(x_i | mu_k, Sigma_k), shape (N, M)."""
    N, d = data.shape
    out = np.empty((N, params.n_components))
    for k in range(params.n_components):
        L = np.linalg.cholesky(params.covariances[k])
        z = np.linalg.solve(L, (data - params.means[k]).T)
        out[:, k] = -0.5 * np.sum(z * z, axis=0) - np.sum(np.log(np.diag(L))) - 0.5 * d * LOG_2PI
    return out


def _joint_logpdf(params: MoGParams, data) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return _component_logpdf(params, data) + np.log(params.weights)


def mog_responsibilities(params: MoGParams, data) -> Tuple[float, np.ndarray]:
    """Log-likelihood and the (N, M) posterior over components."""
    data = np.atleast_2d(np.asarray(data, dtype=float))
    lj = _joint_logpdf(params, data)
    lse = logsumexp(lj, axis=1)
    bad = np.flatnonzero(~np.isfinite(lse))
    if bad.size:
        raise NumericError(f"non-finite log-density at datum {bad[0]}")
    return float(lse.sum()), np.exp(lj - lse[:, None])


def mog_log_lik(params: MoGParams, data) -> float:
    return mog_responsibilities(params, data)[0]


def _floor_cov(c, eps=EPS_COV):
    c = 0.5 * (c + c.T)
    vals, vecs = np.linalg.eigh(c)
    if vals[0] >= eps:
        return c
    return (vecs * np.maximum(vals, eps)) @ vecs.T


MOG_BLOCKS = ("weights", "means", "covariances")


def mog_em_step(params: MoGParams, data, free: Sequence[str] = MOG_BLOCKS) -> MoGParams:
    """One EM step; blocks not listed in ``free`` are held fixed (still a valid bound step)."""
    data = np.atleast_2d(np.asarray(data, dtype=float))
    _, r = mog_responsibilities(params, data)
    nk = r.sum(axis=0)
    empty = np.flatnonzero(nk < 1e-12)
    if empty.size:
        raise DegenerateError(f"mixture component {empty[0]} has no responsibility")
    weights = nk / nk.sum() if "weights" in free else params.weights.copy()
    means = (r.T @ data) / nk[:, None] if "means" in free else params.means.copy()
    covs = params.covariances.copy()
    if "covariances" in free:
        for k in range(params.n_components):
            diff = data - means[k]
            covs[k] = _floor_cov((diff * r[:, k:k + 1]).T @ diff / nk[k])
    return MoGParams(weights, means, covs)


def _tril(d):
    return np.tril_indices(d)


def mog_layout(n_components: int, dim: int, free: Sequence[str] = MOG_BLOCKS) -> Layout:
    parts = []
    if "weights" in free:
        parts.append(("weights", n_components - 1))
    if "means" in free:
        parts.append(("means", n_components * dim))
    if "covariances" in free:
        parts.append(("covariances", n_components * dim * (dim + 1) // 2))
    return Layout.build(*parts)


def mog_encode(params: MoGParams, free: Sequence[str] = MOG_BLOCKS) -> np.ndarray:
    """Chart coordinates: log-ratio weights, means, log-Cholesky covariance factors."""
    out = []
    if "weights" in free:
        out.append(alr(params.weights))
    if "means" in free:
        out.append(params.means.ravel())
    if "covariances" in free:
        d = params.dim
        rows, cols = _tril(d)
        for c in params.covariances:
            L = np.linalg.cholesky(c)
            L[np.diag_indices(d)] = np.log(np.diag(L))
            out.append(L[rows, cols])
    return np.concatenate(out) if out else np.zeros(0)


def mog_decode(theta, template: MoGParams, free: Sequence[str] = MOG_BLOCKS) -> MoGParams:
    theta = np.asarray(theta, dtype=float)
    M, d = template.n_components, template.dim
    layout = mog_layout(M, d, free)
    weights, means, covs = template.weights, template.means, template.covariances
    if "weights" in free:
        weights = alr_inv(layout.view(theta, "weights"))
    if "means" in free:
        means = layout.view(theta, "means").reshape(M, d)
    if "covariances" in free:
        rows, cols = _tril(d)
        blocks = layout.view(theta, "covariances").reshape(M, -1)
        covs = np.empty((M, d, d))
        for k in range(M):
            L = np.zeros((d, d))
            L[rows, cols] = blocks[k]
            L[np.diag_indices(d)] = np.exp(np.diag(L))
            covs[k] = L @ L.T
    return MoGParams(weights, means, covs)


def mog_grad(params: MoGParams, data, free: Sequence[str] = MOG_BLOCKS) -> np.ndarray:
    """Gradient of the log-likelihood in the chart coordinates of :func:`mog_encode`."""
    data = np.atleast_2d(np.asarray(data, dtype=float))
    _, r = mog_responsibilities(params, data)
    return _mog_grad_from_resp(params, data, r, free)


def _mog_grad_from_resp(params, data, r, free):
    M, d = params.n_components, params.dim
    nk = r.sum(axis=0)
    out = []
    if "weights" in free:
        out.append(_alr_grad(nk, params.weights))
    precisions = np.linalg.inv(params.covariances)
    if "means" in free:
        g = np.empty((M, d))
        for k in range(M):
            g[k] = precisions[k] @ (r[:, k] @ (data - params.means[k]))
        out.append(g.ravel())
    if "covariances" in free:
        rows, cols = _tril(d)
        for k in range(M):
            diff = data - params.means[k]
            scatter = (diff * r[:, k:k + 1]).T @ diff
            P = precisions[k]
            # dL/dSigma, then chain through Sigma = L L^T with log diagonal
            G = 0.5 * (P @ scatter @ P - nk[k] * P)
            L = np.linalg.cholesky(params.covariances[k])
            dL = 2.0 * G @ L
            dL[np.diag_indices(d)] *= np.diag(L)
            out.append(dL[rows, cols])
    return np.concatenate(out) if out else np.zeros(0)


def _mog_expected_complete(theta_params: MoGParams, data, r) -> float:
    return float(np.sum(r * _joint_logpdf(theta_params, data)))


class MoGEMMap(IterationMap):
    name = "em-mog"

    def __init__(self, data, template: MoGParams, free: Sequence[str] = MOG_BLOCKS):
        self.data = np.atleast_2d(np.asarray(data, dtype=float))
        if self.data.shape[0] == 1 and template.dim == 1:
            self.data = self.data.T
        self.template = template
        self.free = tuple(b for b in MOG_BLOCKS if b in free)
        super().__init__(mog_layout(template.n_components, template.dim, self.free))
        self._estep = LastValueCache(self._compute_estep)

    def _compute_estep(self, theta):
        params = self.decode(theta)
        ll, r = mog_responsibilities(params, self.data)
        return params, ll, r

    def decode(self, theta) -> MoGParams:
        return mog_decode(theta, self.template, self.free)

    def encode(self, params: MoGParams) -> np.ndarray:
        return mog_encode(params, self.free)

    def objective(self, theta):
        return self._estep(theta)[1]

    def gradient(self, theta):
        params, _, r = self._estep(theta)
        return _mog_grad_from_resp(params, self.data, r, self.free)

    def evaluate(self, theta):
        params, ll, r = self._estep(theta)
        return ll, _mog_grad_from_resp(params, self.data, r, self.free)

    def step(self, theta):
        params = self._estep(theta)[0]
        return self.encode(mog_em_step(params, self.data, self.free))

    def on_boundary(self, theta) -> bool:
        p = self.decode(theta)
        floor = np.min(np.linalg.eigvalsh(p.covariances)) <= EPS_COV * (1 + 1e-6)
        return bool(floor or np.min(p.weights) <= 2 * EPS_PROB)

    def bound(self, theta, psi):
        # G(theta, psi) = Q(theta|psi) - Q(psi|psi) + L(psi)
        p_theta = self.decode(theta)
        p_psi, ll_psi, r = self._compute_estep(np.asarray(psi, dtype=float))
        return (_mog_expected_complete(p_theta, self.data, r)
                - _mog_expected_complete(p_psi, self.data, r) + ll_psi)


def gen_mog_data(separation: str = "well", n: int = 200, d: int = 1, seed: int = 0) -> np.ndarray:
    """Two unit-variance isotropic clusters with centres 6 (well) or 1 (overlapping) sigma apart."""
    if n < 2:
        raise ValueError("need at least two points")
    gap = {"well": 6.0, "overlapping": 1.0}[separation]
    rng = np.random.default_rng(seed)
    n0 = n // 2
    centres = np.zeros((2, d))
    centres[0, 0], centres[1, 0] = -gap / 2, gap / 2
    labels = np.r_[np.zeros(n0, int), np.ones(n - n0, int)]
    return centres[labels] + rng.standard_normal((n, d))


def init_mog(data, n_components: int = 2, seed: int = 0, method: str = "quantile") -> MoGParams:
    """Starting point with equal weights and the pooled data covariance for every component.

    ``quantile`` splits the data into equal-count slices along its leading
    principal axis and starts each mean at a slice average; ``random``
    draws the means from the data points using ``seed``.
    """
    data = np.atleast_2d(np.asarray(data, dtype=float))
    N, d = data.shape
    if not 1 <= n_components <= N:
        raise ValueError(f"need between 1 and {N} components, got {n_components}")
    if method == "quantile":
        centred = data - data.mean(axis=0)
        axis = np.linalg.svd(centred, full_matrices=False)[2][0]
        order = np.argsort(centred @ axis, kind="stable")
        means = np.stack([data[chunk].mean(axis=0) for chunk in np.array_split(order, n_components)])
    elif method == "random":
        rng = np.random.default_rng(seed)
        means = data[rng.choice(N, size=n_components, replace=False)].copy()
    else:
        raise ValueError(f"unknown initialization {method!r}")
    cov = np.atleast_2d(np.cov(data.T)) + EPS_COV * np.eye(d)
    return MoGParams(np.full(n_components, 1.0 / n_components), means,
                     np.repeat(cov[None], n_components, axis=0))


# ----------------------------------------------------------------------------
# hidden Markov models


@dataclass
class HmmParams:
    initial: np.ndarray      # (K,)
    transitions: np.ndarray  # (K, K) row-stochastic
    emissions: np.ndarray    # (K, A) row-stochastic

    def __post_init__(self):
        self.initial = np.asarray(self.initial, dtype=float)
        self.transitions = np.asarray(self.transitions, dtype=float)
        self.emissions = np.asarray(self.emissions, dtype=float)

    @property
    def n_states(self) -> int:
        return self.initial.shape[0]

    @property
    def n_symbols(self) -> int:
        return self.emissions.shape[1]


@dataclass
class Responsibilities:
    gamma: np.ndarray   # (T, K) state posteriors
    xi: np.ndarray      # (T-1, K, K) pairwise transition posteriors


def hmm_forward_backward(params: HmmParams, seq) -> Tuple[float, Responsibilities]:
    """Scaled forward-backward for one symbol sequence."""
    seq = np.asarray(seq, dtype=int)
    if np.any(seq < 0) or np.any(seq >= params.n_symbols):
        raise ValueError("symbol outside the alphabet")
    T, K = len(seq), params.n_states
    A, B = params.transitions, params.emissions
    alpha = np.empty((T, K))
    c = np.empty(T)
    a = params.initial * B[:, seq[0]]
    c[0] = a.sum()
    alpha[0] = a / c[0]
    for t in range(1, T):
        a = (alpha[t - 1] @ A) * B[:, seq[t]]
        c[t] = a.sum()
        alpha[t] = a / c[t]
    beta = np.empty((T, K))
    beta[-1] = 1.0
    for t in range(T - 2, -1, -1):
        beta[t] = A @ (B[:, seq[t + 1]] * beta[t + 1]) / c[t + 1]
    gamma = alpha * beta
    gamma /= gamma.sum(axis=1, keepdims=True)
    xi = np.empty((max(T - 1, 0), K, K))
    for t in range(T - 1):
        x = alpha[t][:, None] * A * (B[:, seq[t + 1]] * beta[t + 1])[None, :] / c[t + 1]
        xi[t] = x / x.sum()
    return float(np.log(c).sum()), Responsibilities(gamma, xi)


@dataclass
class HmmCounts:
    loglik: float
    initial: np.ndarray
    transitions: np.ndarray
    emissions: np.ndarray


def _group_by_length(seqs) -> List[np.ndarray]:
    groups = {}
    for s in seqs:
        s = np.asarray(s, dtype=int)
        groups.setdefault(len(s), []).append(s)
    return [np.stack(groups[k]) for k in sorted(groups)]


def hmm_expected_counts(params: HmmParams, seqs) -> HmmCounts:
    """Total log-likelihood and expected sufficient statistics over a set of sequences.

    Sequences of equal length are processed as one batch; batches are
    reduced in a fixed order so results are deterministic.
    """
    K, n_sym = params.n_states, params.n_symbols
    A, B = params.transitions, params.emissions
    ll = 0.0
    c_init = np.zeros(K)
    c_trans = np.zeros((K, K))
    c_emit = np.zeros((K, n_sym))
    for batch in seqs if isinstance(seqs, _Batches) else _group_by_length(seqs):
        S, T = batch.shape
        if np.any(batch < 0) or np.any(batch >= n_sym):
            raise ValueError("symbol outside the alphabet")
        Bobs = B[:, batch].transpose(2, 1, 0)      # (T, S, K)
        alpha = np.empty((T, S, K))
        scale = np.empty((T, S))
        a = params.initial[None, :] * Bobs[0]
        scale[0] = a.sum(axis=1)
        alpha[0] = a / scale[0][:, None]
        for t in range(1, T):
            a = (alpha[t - 1] @ A) * Bobs[t]
            scale[t] = a.sum(axis=1)
            alpha[t] = a / scale[t][:, None]
        beta = np.empty((T, S, K))
        beta[-1] = 1.0
        for t in range(T - 2, -1, -1):
            nxt = Bobs[t + 1] * beta[t + 1] / scale[t + 1][:, None]
            beta[t] = nxt @ A.T
            c_trans += alpha[t].T @ nxt
        ll += float(np.log(scale).sum())
        gamma = alpha * beta
        c_init += gamma[0].sum(axis=0)
        flat_sym = batch.T.ravel()
        flat_gamma = gamma.reshape(T * S, K)
        for k in range(K):
            c_emit[k] += np.bincount(flat_sym, weights=flat_gamma[:, k], minlength=n_sym)
    c_trans *= A
    return HmmCounts(ll, c_init, c_trans, c_emit)


class _Batches(list):
    """Sequences pre-grouped by length."""


def hmm_log_lik(params: HmmParams, seqs) -> float:
    return hmm_expected_counts(params, seqs).loglik


def _m_step(counts: HmmCounts, what: str) -> np.ndarray:
    c = getattr(counts, what)
    total = c.sum(axis=-1, keepdims=True)
    dead = np.flatnonzero(np.atleast_1d(total.squeeze(-1)) < 1e-12)
    if dead.size:
        raise DegenerateError(f"{what} row {dead[0]} has no expected counts")
    return _floor_rows(c / total)


def hmm_em_step(params: HmmParams, seqs) -> HmmParams:
    """Baum-Welch re-estimation from expected counts, with a probability floor."""
    counts = hmm_expected_counts(params, seqs)
    return HmmParams(_m_step(counts, "initial"), _m_step(counts, "transitions"), _m_step(counts, "emissions"))


def hmm_layout(K: int, n_symbols: int) -> Layout:
    return Layout.build(("initial", K - 1), ("transitions", K * (K - 1)), ("emissions", K * (n_symbols - 1)))


def hmm_encode(params: HmmParams) -> np.ndarray:
    return np.concatenate([alr(params.initial), alr(params.transitions).ravel(), alr(params.emissions).ravel()])


def hmm_decode(theta, K: int, n_symbols: int) -> HmmParams:
    layout = hmm_layout(K, n_symbols)
    return HmmParams(alr_inv(layout.view(theta, "initial")),
                     alr_inv(layout.view(theta, "transitions").reshape(K, K - 1)),
                     alr_inv(layout.view(theta, "emissions").reshape(K, n_symbols - 1)))


def _hmm_grad_from_counts(params: HmmParams, counts: HmmCounts) -> np.ndarray:
    return np.concatenate([_alr_grad(counts.initial, params.initial),
                           _alr_grad(counts.transitions, params.transitions).ravel(),
                           _alr_grad(counts.emissions, params.emissions).ravel()])


def hmm_grad(params: HmmParams, seqs) -> np.ndarray:
    """Log-likelihood gradient in the log-ratio chart (expected counts minus fitted counts)."""
    return _hmm_grad_from_counts(params, hmm_expected_counts(params, seqs))


def _expected_complete(params: HmmParams, counts: HmmCounts) -> float:
    with np.errstate(divide="ignore"):
        terms = (counts.initial @ np.log(params.initial)
                 + np.sum(counts.transitions * np.log(params.transitions))
                 + np.sum(counts.emissions * np.log(params.emissions)))
    return float(terms)


class HmmEMMap(IterationMap):
    name = "em-hmm"

    def __init__(self, seqs, n_states: int, n_symbols: int):
        self.seqs = _Batches(_group_by_length(seqs))
        self.K, self.A = n_states, n_symbols
        super().__init__(hmm_layout(n_states, n_symbols))
        self._estep = LastValueCache(self._compute_estep)

    def _compute_estep(self, theta):
        params = self.decode(theta)
        return params, hmm_expected_counts(params, self.seqs)

    def decode(self, theta) -> HmmParams:
        return hmm_decode(theta, self.K, self.A)

    def encode(self, params: HmmParams) -> np.ndarray:
        return hmm_encode(params)

    def objective(self, theta):
        return self._estep(theta)[1].loglik

    def gradient(self, theta):
        params, counts = self._estep(theta)
        return _hmm_grad_from_counts(params, counts)

    def evaluate(self, theta):
        params, counts = self._estep(theta)
        return counts.loglik, _hmm_grad_from_counts(params, counts)

    def step(self, theta):
        _, counts = self._estep(theta)
        new = HmmParams(_m_step(counts, "initial"), _m_step(counts, "transitions"), _m_step(counts, "emissions"))
        return self.encode(new)

    def on_boundary(self, theta) -> bool:
        p = self.decode(theta)
        return bool(min(p.initial.min(), p.transitions.min(), p.emissions.min()) <= 2 * EPS_PROB)

    def bound(self, theta, psi):
        p_psi, counts = self._compute_estep(np.asarray(psi, dtype=float))
        return _expected_complete(self.decode(theta), counts) - _expected_complete(p_psi, counts) + counts.loglik


def _noisy_uniform(rng, rows, cols, noise):
    m = 1.0 / cols + rng.normal(0.0, noise, (rows, cols))
    m = np.maximum(m, 1e-3)
    return m / m.sum(axis=1, keepdims=True)


def _dominant(rng, K, cols, level):
    m = np.full((K, cols), (1.0 - level) / (cols - 1))
    targets = rng.permutation(cols)[:K] if cols >= K else rng.integers(0, cols, K)
    m[np.arange(K), targets] = level
    return m


def generating_hmm(kind: str = "structured", K: int = 5, A: int = 5, seed: int = 0,
                   dominance: float = 0.9, noise: float = None) -> HmmParams:
    """Ground-truth HMM for the synthetic experiments.

    ``structured``: every transition and emission row puts ``dominance``
    on one entry.  ``aliased``: rows are uniform plus Gaussian noise of
    standard deviation ``noise`` (default 0.1/A), clipped at 1e-3 and
    renormalized.
    """
    rng = np.random.default_rng(seed)
    if kind == "structured":
        perm = rng.permutation(K)
        trans = np.full((K, K), (1.0 - dominance) / (K - 1))
        trans[np.arange(K), perm] = dominance
        # keep the chain from collapsing onto a fixed point of the permutation
        if np.any(perm == np.arange(K)):
            trans = np.full((K, K), (1.0 - dominance) / (K - 1))
            trans[np.arange(K), (np.arange(K) + 1) % K] = dominance
        emit = _dominant(rng, K, A, dominance)
    elif kind == "aliased":
        noise = 0.1 / A if noise is None else noise
        trans = _noisy_uniform(rng, K, K, 0.1 / K)
        emit = _noisy_uniform(rng, K, A, noise)
    else:
        raise ValueError(f"unknown HMM data kind {kind!r}")
    return HmmParams(np.full(K, 1.0 / K), trans, emit)


def sample_hmm(params: HmmParams, num_seqs: int, length: int, rng: np.random.Generator) -> List[np.ndarray]:
    K, n_sym = params.n_states, params.n_symbols
    cum_t = np.cumsum(params.transitions, axis=1)
    cum_e = np.cumsum(params.emissions, axis=1)
    seqs = []
    for _ in range(num_seqs):
        states = np.empty(length, int)
        states[0] = rng.choice(K, p=params.initial)
        u = rng.random(length)
        for t in range(1, length):
            states[t] = min(np.searchsorted(cum_t[states[t - 1]], u[t], side="right"), K - 1)
        v = rng.random(length)
        syms = np.minimum((v[:, None] > cum_e[states]).sum(axis=1), n_sym - 1)
        seqs.append(syms)
    return seqs


def gen_hmm_data(kind: str = "structured", K: int = 5, A: int = 5, num_seqs: int = 20, length: int = 100,
                 seed: int = 0) -> Tuple[List[np.ndarray], HmmParams]:
    if length < 2:
        raise ValueError("sequences need at least two symbols")
    truth = generating_hmm(kind, K, A, seed)
    rng = np.random.default_rng([seed, 1])
    return sample_hmm(truth, num_seqs, length, rng), truth


def init_hmm(K: int, A: int, seed: int = 0, concentration: float = 5.0) -> HmmParams:
    """Random Dirichlet initialization."""
    rng = np.random.default_rng([seed, 2])
    return HmmParams(rng.dirichlet(np.full(K, 10.0 * concentration)),
                     rng.dirichlet(np.full(K, concentration), size=K),
                     rng.dirichlet(np.full(A, concentration), size=K))


# ----------------------------------------------------------------------------
# file formats


def mog_data_to_csv(data) -> str:
    data = np.atleast_2d(np.asarray(data, dtype=float))
    return "".join(",".join(repr(float(v)) for v in row) + "\n" for row in data)


def mog_data_from_csv(text: str) -> np.ndarray:
    rows = [line for line in text.splitlines() if line.strip()]
    return np.array([[float(v) for v in line.split(",")] for line in rows])


def sequences_to_text(seqs) -> str:
    return "".join(" ".join(str(int(v)) for v in s) + "\n" for s in seqs)


def sequences_from_text(text: str) -> List[np.ndarray]:
    return [np.array([int(v) for v in line.split()], dtype=int) for line in text.splitlines() if line.strip()]
