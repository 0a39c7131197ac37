"""Generalized Iterative Scaling.

Two adapters share the update rule

    theta_i <- theta_i + (1/s) ln(empirical_i / model_i),   s = max_x sum_i f_i(x)

* :class:`MaxentModel` over a finite, enumerable domain, where the rate
  matrix I - (1/s) D^-1 Cov is available in closed form;
* :class:`LogisticData` for two-class logistic regression.

Feature matrices carry the constant bias feature as their last column.
The bias counts towards ``s`` but its parameter is never moved by GIS in
the unconditional model (its ratio is always 1), so maps over maxent
models act on the non-bias parameters only.
"""
import warnings
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy.special import expit, logsumexp, log_expit

from . import numerics
from .core import IterationMap, LastValueCache, free_layout
from .exceptions import DegenerateError, NotConvergedError, NumericError, SingularMatrixError

EPS_FEAT = 1e-6


@dataclass
class MaxentModel:
    features: np.ndarray          # (n_outcomes, d + 1), last column is the bias
    empirical: np.ndarray         # (n_outcomes,)
    outcomes: Optional[Sequence[str]] = None

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        self.empirical = np.asarray(self.empirical, dtype=float)
        if self.features.ndim != 2 or self.features.shape[0] != self.empirical.shape[0]:
            raise ValueError("features must be (n_outcomes, n_features) matching the empirical vector")
        if np.any(self.features <= 0):
            raise ValueError("GIS needs strictly positive feature values")
        if np.any(self.empirical < 0) or abs(self.empirical.sum() - 1) > 1e-12:
            raise ValueError("empirical distribution must be non-negative and sum to 1")
        if np.ptp(self.features[:, -1]) != 0:
            raise ValueError("last feature column must be the constant bias")
        if self.outcomes is None:
            self.outcomes = [str(i) for i in range(self.features.shape[0])]

    @property
    def s(self) -> float:
        return float(self.features.sum(axis=1).max())

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def empirical_mean(self) -> np.ndarray:
        return self.empirical @ self.features

    def to_text(self) -> str:
        lines = ["# outcome weight f_1 ... f_d bias"]
        for name, w, row in zip(self.outcomes, self.empirical, self.features):
            lines.append(" ".join([name, repr(float(w))] + [repr(float(v)) for v in row]))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "MaxentModel":
        names, weights, rows = [], [], []
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            names.append(parts[0])
            weights.append(float(parts[1]))
            rows.append([float(v) for v in parts[2:]])
        return cls(np.array(rows), np.array(weights), names)


def _full(model: MaxentModel, theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    if theta.shape[0] == model.n_features - 1:
        theta = np.append(theta, 0.0)
    return theta


def model_distribution(model: MaxentModel, theta) -> np.ndarray:
    a = model.features @ _full(model, theta)
    return np.exp(a - logsumexp(a))


def maxent_log_lik(model: MaxentModel, theta) -> float:
    """sum_x p_emp(x) theta.F(x) - ln Z(theta), with Z summed exactly over the domain."""
    a = model.features @ _full(model, theta)
    return float(model.empirical @ a - logsumexp(a))


def maxent_grad(model: MaxentModel, theta) -> np.ndarray:
    p = model_distribution(model, theta)
    return model.empirical_mean - p @ model.features


@dataclass
class FeatureStats:
    mean: np.ndarray
    cov: np.ndarray

    @property
    def D(self) -> np.ndarray:
        return np.diag(self.mean)


def feature_stats(model: MaxentModel, theta) -> FeatureStats:
    p = model_distribution(model, theta)
    mean = p @ model.features
    centered = model.features - mean
    cov = (centered * p[:, None]).T @ centered
    return FeatureStats(mean, 0.5 * (cov + cov.T))


def gis_step(model: MaxentModel, theta) -> np.ndarray:
    full = _full(model, theta)
    model_mean = model_distribution(model, full) @ model.features
    if np.any(model_mean < 1e-300):
        raise NumericError(f"model expectation underflow for features {np.flatnonzero(model_mean < 1e-300).tolist()}")
    with np.errstate(divide="ignore"):
        new = full + np.log(model.empirical_mean / model_mean) / model.s
    return new[:len(np.asarray(theta))]


def gis_bound(model: MaxentModel, theta, psi) -> float:
    """Lower bound G(theta, psi); maximizing it in theta gives the GIS update."""
    theta, psi = _full(model, theta), _full(model, psi)
    s = model.s
    a_psi = model.features @ psi
    p_psi = np.exp(a_psi - logsumexp(a_psi))
    expected = p_psi @ model.features
    return float(model.empirical_mean @ theta - logsumexp(a_psi)
                 + expected @ ((1.0 - np.exp(s * (theta - psi))) / s))


def gis_rate_matrix(model: MaxentModel, theta_star, tol: float = 1e-8) -> np.ndarray:
    """Closed-form Jacobian of the GIS map at a fixed point, over the non-bias parameters.

    Returns I - (1/s) D^-1 Cov restricted to the non-bias block; the full
    matrix is block diagonal with a trailing 1 for the bias.
    """
    full = _full(model, theta_star)
    residual = float(np.max(np.abs(maxent_grad(model, full))))
    if residual > tol:
        raise NotConvergedError(f"moment residual {residual:.3g} exceeds {tol:g}", residual)
    stats = feature_stats(model, full)
    nb = model.n_features - 1
    cov = stats.cov[:nb, :nb]
    flat = np.flatnonzero(np.diag(cov) <= 1e-14 * max(1.0, float(np.max(np.abs(cov)))))
    if flat.size:
        warnings.warn(f"features {flat.tolist()} are constant under the model; their rate eigenvalue is 1",
                      RuntimeWarning, stacklevel=2)
    return np.eye(nb) - cov / stats.mean[:nb, None] / model.s


def solve_maxent(model: MaxentModel, theta0=None, tol: float = 1e-13, max_iter: int = 100) -> np.ndarray:
    """Maximum-likelihood non-bias parameters by damped Newton on the concave log-likelihood."""
    nb = model.n_features - 1
    theta = np.zeros(nb) if theta0 is None else np.asarray(theta0, dtype=float)[:nb].copy()
    for _ in range(max_iter):
        g = maxent_grad(model, theta)[:nb]
        if np.max(np.abs(g)) <= tol:
            break
        cov = feature_stats(model, theta).cov[:nb, :nb]
        delta = numerics.solve(cov, g)
        t, L0 = 1.0, maxent_log_lik(model, theta)
        while maxent_log_lik(model, theta + t * delta) < L0 - 1e-15 * abs(L0) and t > 1e-10:
            t *= 0.5
        theta = theta + t * delta
    return theta


class MaxentGISMap(IterationMap):
    name = "gis-maxent"

    def __init__(self, model: MaxentModel):
        super().__init__(free_layout(model.n_features - 1, "theta"))
        self.model = model

    def objective(self, theta):
        return maxent_log_lik(self.model, theta)

    def gradient(self, theta):
        return maxent_grad(self.model, theta)[:-1]

    def hessian(self, theta):
        return -feature_stats(self.model, theta).cov[:-1, :-1]

    def step(self, theta):
        return gis_step(self.model, theta)

    def bound(self, theta, psi):
        return gis_bound(self.model, theta, psi)


# ----------------------------------------------------------------------------
# feature transforms


@dataclass
class FeatureTransform:
    """Affine map f_new = A f - shift on the non-bias features."""

    A: np.ndarray
    shift: np.ndarray

    def apply(self, F_nb) -> np.ndarray:
        return F_nb @ self.A.T - self.shift

    def then(self, other: "FeatureTransform") -> "FeatureTransform":
        # other(self(f)) = B(A f - v) - u
        return FeatureTransform(other.A @ self.A, other.A @ self.shift + other.shift)

    def pull_back(self, w_new, bias_value: float = 1.0) -> np.ndarray:
        """Parameters on the original features giving the same linear scores.

        ``w_new`` covers the non-bias features followed by the bias weight.
        """
        w_new = np.asarray(w_new, dtype=float)
        w_nb, w_b = w_new[:-1], w_new[-1]
        return np.append(self.A.T @ w_nb, w_b - (w_nb @ self.shift) / bias_value)


def identity_transform(d: int) -> FeatureTransform:
    return FeatureTransform(np.eye(d), np.zeros(d))


def translation_for(F_nb, eps: float = EPS_FEAT) -> FeatureTransform:
    """Shift each feature so its minimum becomes ``eps``."""
    F_nb = np.asarray(F_nb, dtype=float)
    return FeatureTransform(np.eye(F_nb.shape[1]), F_nb.min(axis=0) - eps)


def whitening_for(F_nb, weights=None, cov_estimate=None, ridge: float = 0.0) -> FeatureTransform:
    """Symmetric whitening A = W H^-1/2 W^T of a covariance estimate (weighted sample covariance by default).

    ``ridge`` adds that fraction of the mean variance to the diagonal.
    """
    F_nb = np.asarray(F_nb, dtype=float)
    d = F_nb.shape[1]
    if cov_estimate is None:
        w = np.full(F_nb.shape[0], 1.0 / F_nb.shape[0]) if weights is None else np.asarray(weights, dtype=float)
        mean = w @ F_nb
        c = F_nb - mean
        cov = (c * w[:, None]).T @ c
        cov = 0.5 * (cov + cov.T)
        cov = cov + ridge * np.trace(cov) / d * np.eye(d)
    else:
        cov = np.asarray(cov_estimate, dtype=float)
        if not np.allclose(cov, cov.T):
            raise ValueError("covariance estimate must be symmetric")
    vals, vecs = np.linalg.eigh(cov)
    if vals[0] <= 0 or vals[-1] / vals[0] > numerics.CONDITION_LIMIT:
        raise SingularMatrixError(
            f"covariance estimate is singular (eigenvalues {vals[0]:.3g}..{vals[-1]:.3g}); add ridge regularization",
            float(vals[-1] / vals[0]) if vals[0] > 0 else np.inf)
    A = vecs @ np.diag(vals ** -0.5) @ vecs.T
    return FeatureTransform(A, np.zeros(d))


def _with_nonbias(model: MaxentModel, F_nb) -> MaxentModel:
    return replace(model, features=np.column_stack([F_nb, model.features[:, -1]]))


def translate_features(model: MaxentModel, eps: float = EPS_FEAT) -> MaxentModel:
    """Move every non-bias feature so its minimum over the domain is ``eps``."""
    F_nb = model.features[:, :-1]
    return _with_nonbias(model, translation_for(F_nb, eps).apply(F_nb))


def whiten_features(model: MaxentModel, cov_estimate=None, eps: float = EPS_FEAT) -> MaxentModel:
    """Whiten the non-bias features, then translate back to positivity."""
    F_nb = model.features[:, :-1]
    white = whitening_for(F_nb, model.empirical, cov_estimate).apply(F_nb)
    return _with_nonbias(model, translation_for(white, eps).apply(white))


def scale_features(model: MaxentModel, c: float) -> MaxentModel:
    """Homogeneous rescaling of every feature, bias included."""
    return replace(model, features=model.features * c)


def random_maxent_model(rng: np.random.Generator, n_outcomes: int = 12, d: int = 3,
                        offset: float = 0.0, correlated: bool = False) -> MaxentModel:
    """Random enumerable model whose empirical distribution lies in the exponential family."""
    Z = rng.standard_normal((n_outcomes, d))
    if correlated:
        mix = np.eye(d) + 0.9 * rng.standard_normal((d, d))
        Z = Z @ mix
    F_nb = Z - Z.min(axis=0) + rng.uniform(0.1, 1.0, d) + offset
    theta = rng.normal(0.0, 0.5, d) / (1.0 + F_nb.std(axis=0))
    a = F_nb @ theta
    p = np.exp(a - logsumexp(a))
    return MaxentModel(np.column_stack([F_nb, np.ones(n_outcomes)]), p / p.sum())


# ----------------------------------------------------------------------------
# logistic regression


@dataclass
class LogisticData:
    xs: np.ndarray     # (N, d + 1), positive, bias column last
    ys: np.ndarray     # labels in {+1, -1}

    def __post_init__(self):
        self.xs = np.asarray(self.xs, dtype=float)
        self.ys = np.asarray(self.ys, dtype=float)
        if np.any(self.xs <= 0):
            raise ValueError("GIS needs strictly positive feature values")
        if not np.all(np.isin(self.ys, (-1.0, 1.0))):
            raise ValueError("labels must be +1 or -1")
        if np.all(self.ys == 1) or np.all(self.ys == -1):
            raise DegenerateError("both classes must be present")

    @property
    def s(self) -> float:
        return float(self.xs.sum(axis=1).max())

    @property
    def targets(self) -> np.ndarray:
        return (self.ys > 0).astype(float)

    def to_csv(self) -> str:
        lines = ["label," + ",".join(f"x{i}" for i in range(self.xs.shape[1] - 1)) + ",bias"]
        for y, row in zip(self.ys, self.xs):
            lines.append(",".join([str(int(y))] + [repr(float(v)) for v in row]))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str) -> "LogisticData":
        arr = np.loadtxt(text.splitlines(), delimiter=",", skiprows=1, ndmin=2)
        return cls(arr[:, 1:], arr[:, 0])


def logistic_log_lik(data: LogisticData, w) -> float:
    return float(np.sum(log_expit(data.ys * (data.xs @ w))))


def logistic_grad(data: LogisticData, w) -> np.ndarray:
    return data.xs.T @ (data.targets - expit(data.xs @ w))


def logistic_hessian(data: LogisticData, w) -> np.ndarray:
    p = expit(data.xs @ w)
    return -(data.xs * (p * (1 - p))[:, None]).T @ data.xs


def logistic_gis_step(data: LogisticData, w) -> np.ndarray:
    num = data.targets @ data.xs
    den = expit(data.xs @ w) @ data.xs
    if np.any(den < 1e-300):
        raise NumericError("model expectation underflow")
    return w + np.log(num / den) / data.s


def logistic_bound(data: LogisticData, w, psi) -> float:
    s = data.s
    a = data.xs @ psi
    sig = expit(a)
    return float(data.targets @ (data.xs @ w) + np.sum(log_expit(-a))
                 + (sig @ data.xs) @ ((1.0 - np.exp(s * (w - psi))) / s))


def solve_logistic(data: LogisticData, w0=None, tol: float = 1e-12, max_iter: int = 100) -> np.ndarray:
    """Newton-Raphson maximum likelihood, used as an independent reference."""
    w = np.zeros(data.xs.shape[1]) if w0 is None else np.asarray(w0, dtype=float).copy()
    for _ in range(max_iter):
        g = logistic_grad(data, w)
        if np.max(np.abs(g)) <= tol * max(1.0, len(data.ys)):
            break
        delta = numerics.solve(-logistic_hessian(data, w), g)
        t, L0 = 1.0, logistic_log_lik(data, w)
        while logistic_log_lik(data, w + t * delta) < L0 and t > 1e-10:
            t *= 0.5
        w = w + t * delta
    return w


class LogisticGISMap(IterationMap):
    name = "gis-logistic"

    def __init__(self, data: LogisticData):
        super().__init__(free_layout(data.xs.shape[1], "w"))
        self.data = data
        self._targets = data.targets
        self._num = self._targets @ data.xs
        self._s = data.s
        self._scores = LastValueCache(self._compute_scores)

    def _compute_scores(self, w):
        a = self.data.xs @ w
        return a, expit(a)

    def _loglik(self, a):
        ya = self.data.ys * a
        with np.errstate(divide="ignore"):
            val = np.sum(np.log(expit(ya)))
        if not np.isfinite(val):
            val = np.sum(log_expit(ya))
        return float(val)

    def objective(self, theta):
        a, _ = self._scores(theta)
        return self._loglik(a)

    def gradient(self, theta):
        _, sig = self._scores(theta)
        return self.data.xs.T @ (self._targets - sig)

    def evaluate(self, theta):
        a, sig = self._scores(theta)
        return self._loglik(a), self.data.xs.T @ (self._targets - sig)

    def hessian(self, theta):
        return logistic_hessian(self.data, theta)

    def step(self, theta):
        _, sig = self._scores(theta)
        den = sig @ self.data.xs
        if np.any(den < 1e-300):
            raise NumericError("model expectation underflow")
        return np.asarray(theta, dtype=float) + np.log(self._num / den) / self._s

    def bound(self, theta, psi):
        return logistic_bound(self.data, theta, psi)


def gen_logistic_data(n: int = 2000, d: int = 2, seed: int = 0, oriented: bool = False,
                      offset: float = 20.0, variance: float = 2.0, anisotropy: float = 25.0):
    """Synthetic two-class data: x ~ N(0, variance I) (or an oriented covariance), w* on the sphere of radius sqrt(variance).

    Returns ``(data, w_true)`` with ``offset`` added to every data-derived
    feature and a bias column of ones appended.
    """
    rng = np.random.default_rng(seed)
    if oriented:
        # eigenvalues with ratio ``anisotropy`` and total variance d*variance, rotated off-axis
        q, _ = np.linalg.qr(rng.standard_normal((d, d)))
        ev = np.geomspace(anisotropy, 1.0, d)
        ev = ev * (d * variance / ev.sum())
        cov = q @ np.diag(ev) @ q.T
        x = rng.multivariate_normal(np.zeros(d), cov, size=n)
    else:
        x = rng.normal(0.0, np.sqrt(variance), size=(n, d))
    w = rng.standard_normal(d)
    w *= np.sqrt(variance) / np.linalg.norm(w)
    ys = np.where(rng.random(n) < expit(x @ w), 1.0, -1.0)
    xs = np.column_stack([x + offset, np.ones(n)])
    return LogisticData(xs, ys), w


def transform_logistic(data: LogisticData, transform: FeatureTransform) -> LogisticData:
    return LogisticData(np.column_stack([transform.apply(data.xs[:, :-1]), data.xs[:, -1]]), data.ys)


def logistic_preprocessing(data: LogisticData, steps: Sequence[str], eps: float = EPS_FEAT) -> FeatureTransform:
    """Compose the named preprocessing steps ('translate', 'whiten') into one transform.

    Whitening is always followed by a translation back to positive features.
    """
    F = data.xs[:, :-1]
    t = identity_transform(F.shape[1])
    for name in steps:
        if name in ("none", None):
            continue
        cur = t.apply(F)
        if name == "translate":
            t = t.then(translation_for(cur, eps))
        elif name == "whiten":
            t = t.then(whitening_for(cur))
            t = t.then(translation_for(t.apply(F), eps))
        else:
            raise ValueError(f"unknown preprocessing step {name!r}")
    return t
