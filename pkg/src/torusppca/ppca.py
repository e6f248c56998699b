"""Probabilistic PCA on Euclidean data.

The model is X = mu + W Z + eps with Z ~ N(0, I_d) and isotropic noise
eps ~ N(0, sigma2 I_D), so that Cov(X) = W W' + sigma2 I_D.  The maximum
likelihood solution is available in closed form from the leading eigenpairs
of the sample covariance; an EM fixed-point iteration is provided as an
alternative estimator, and the latent posterior supplies low-dimensional
scores.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateComponentError

__all__ = [
    "PpcaModel",
    "PpcaEmResult",
    "LatentPosterior",
    "sample_mean_cov",
    "sorted_eigh",
    "ppca_closed_form",
    "ppca_closed_form_cov",
    "ppca_loglik",
    "ppca_loglik_cov",
    "ppca_em",
    "latent_posterior",
    "posterior_means",
]

_LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True, eq=False)
class PpcaModel:
    """Parameters (mu, W, sigma2) with the derived posterior matrices.

    ``M = W'W + sigma2 I_d`` enters every latent conditional and
    ``C = W W' + sigma2 I_D`` is the marginal covariance of the data.
    """

    mu: np.ndarray
    W: np.ndarray
    sigma2: float

    def __post_init__(self):
        mu = np.atleast_1d(np.asarray(self.mu, dtype=float))
        W = np.asarray(self.W, dtype=float)
        if W.ndim != 2:
            raise ValueError("W must be a D x d matrix")
        dim, rank = W.shape
        if mu.shape != (dim,):
            raise ValueError("mu length must match the rows of W")
        if not (1 <= rank < dim):
            raise ValueError(f"need 1 <= d < D, got d={rank}, D={dim}")
        s2 = float(self.sigma2)
        if not np.isfinite(s2) or s2 <= 0.0:
            raise ValueError("sigma2 must be positive")
        if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(W))):
            raise ValueError("parameters must be finite")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "sigma2", s2)

    @property
    def dim(self):
        return self.W.shape[0]

    @property
    def rank(self):
        return self.W.shape[1]

    @property
    def M(self):
        return self.W.T @ self.W + self.sigma2 * np.eye(self.rank)

    @property
    def C(self):
        return self.W @ self.W.T + self.sigma2 * np.eye(self.dim)


@dataclass(eq=False)
class PpcaEmResult:
    model: PpcaModel
    trace: np.ndarray
    converged: bool
    n_iter: int


@dataclass(frozen=True, eq=False)
class LatentPosterior:
    """Gaussian posterior of the latent coordinates given one observation."""

    mean: np.ndarray
    cov: np.ndarray

    @property
    def second_moment(self):
        return self.cov + np.outer(self.mean, self.mean)


def sample_mean_cov(X):
    """Sample mean and maximum-likelihood covariance (divisor N).

    Requires at least two rows.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError("X must be an N x D matrix")
    n = X.shape[0]
    if n < 2:
        raise ValueError("need at least two observations")
    mean = X.mean(axis=0)
    diff = X - mean
    cov = diff.T @ diff / n
    return mean, (cov + cov.T) / 2.0


def sorted_eigh(S):
    """Symmetric eigendecomposition with descending eigenvalues.

    Eigenvector signs follow a fixed convention: the entry of largest
    magnitude in each column is made positive, so repeated runs and
    permuted inputs produce comparable bases.
    """
    S = np.asarray(S, dtype=float)
    vals, vecs = np.linalg.eigh(S)
    vals = vals[::-1].copy()
    vecs = vecs[:, ::-1]
    lead = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[lead, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    return vals, vecs * signs


def ppca_closed_form_cov(mean, S, d):
    """Closed-form maximum likelihood fit from a covariance matrix.

    The noise variance is the average of the D-d discarded eigenvalues and
    the loadings are ``U_d (Lambda_d - sigma2 I)^(1/2)`` with the rotation
    fixed to the identity.  Raises :class:`DegenerateComponentError` when a
    retained eigenvalue does not exceed the noise floor.
    """
    S = np.asarray(S, dtype=float)
    dim = S.shape[0]
    d = int(d)
    if not (1 <= d < dim):
        raise ValueError(f"need 1 <= d < D, got d={d}, D={dim}")
    vals, vecs = sorted_eigh(S)
    sigma2 = float(vals[d:].mean())
    if vals[d - 1] <= sigma2:
        raise DegenerateComponentError(
            f"eigenvalue {d} ({vals[d - 1]:.6g}) does not exceed the "
            f"noise floor {sigma2:.6g}"
        )
    W = vecs[:, :d] * np.sqrt(vals[:d] - sigma2)
    return PpcaModel(mean, W, sigma2)


def ppca_closed_form(X, d):
    """Closed-form maximum likelihood fit from data rows."""
    mean, S = sample_mean_cov(X)
    return ppca_closed_form_cov(mean, S, d)


def ppca_loglik_cov(S, n, model):
    """Marginal log-likelihood from a covariance around the model mean."""
    C = model.C
    L = np.linalg.cholesky(C)
    logdet = 2.0 * np.log(np.diag(L)).sum()
    half = np.linalg.solve(L, np.asarray(S, dtype=float))
    trace = np.trace(np.linalg.solve(L.T, half))
    return float(-0.5 * n * (model.dim * _LOG_2PI + logdet + trace))


def ppca_loglik(X, model):
    """Marginal log-likelihood of the rows of X under the model.

    Uses the covariance form -(N/2) [D log 2*pi + log det C + tr(C^-1 S)]
    with S taken around the model's own mean.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != model.dim:
        raise ValueError("X must be N x D with D matching the model")
    diff = X - model.mu
    S = diff.T @ diff / X.shape[0]
    return ppca_loglik_cov(S, X.shape[0], model)


def _em_update(S, W, sigma2):
    """One fixed-point update of (W, sigma2) given the sample covariance."""
    d = W.shape[1]
    dim = W.shape[0]
    M = W.T @ W + sigma2 * np.eye(d)
    SW = S @ W
    MinvWtSW = np.linalg.solve(M, W.T @ SW)
    W_new = SW @ np.linalg.inv(sigma2 * np.eye(d) + MinvWtSW)
    WnewMinv = np.linalg.solve(M, W_new.T).T
    sigma2_new = float((np.trace(S) - np.sum(SW * WnewMinv)) / dim)
    return W_new, sigma2_new


def ppca_em(X, d, init=None, tol=1e-8, max_iter=1000, seed=0):
    """Fit by the EM fixed point W <- S W (sigma2 I + M^-1 W' S W)^-1.

    The mean is the sample mean throughout; iterations stop once the
    relative change of the marginal log-likelihood falls below ``tol``.

    Parameters
    ----------
    X : array_like
        N x D data.
    d : int
        Latent dimension, 1 <= d < D.
    init : PpcaModel, optional
        Starting point; a seeded random-loading model is used by default.
    tol : float
        Relative log-likelihood change threshold.
    max_iter : int
        Iteration cap; hitting it leaves ``converged=False``.
    seed : int
        Seed for the default random initialization.

    Returns
    -------
    PpcaEmResult
        Fitted model, per-iteration log-likelihood trace and a convergence
        flag.
    """
    X = np.asarray(X, dtype=float)
    mean, S = sample_mean_cov(X)
    dim = S.shape[0]
    d = int(d)
    if not (1 <= d < dim):
        raise ValueError(f"need 1 <= d < D, got d={d}, D={dim}")
    n = X.shape[0]

    if init is None:
        rng = np.random.default_rng(seed)
        scale = np.sqrt(max(np.trace(S), 1e-12) / (dim * d))
        W = rng.standard_normal((dim, d)) * scale
        sigma2 = max(np.trace(S), 1e-12) / (2.0 * dim)
    else:
        if init.dim != dim or init.rank != d:
            raise ValueError("init shape does not match the requested fit")
        W, sigma2 = init.W, init.sigma2

    model = PpcaModel(mean, W, sigma2)
    trace = [ppca_loglik_cov(S, n, model)]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        W, sigma2 = _em_update(S, W, sigma2)
        model = PpcaModel(mean, W, sigma2)
        ll = ppca_loglik_cov(S, n, model)
        trace.append(ll)
        if abs(ll - trace[-2]) < tol * (1.0 + abs(trace[-2])):
            converged = True
            break

    return PpcaEmResult(model=model, trace=np.asarray(trace),
                        converged=converged, n_iter=it)


def latent_posterior(x, model):
    """Posterior of the latent coordinates for one observation.

    The mean is ``M^-1 W' (x - mu)`` and the covariance ``sigma2 M^-1``;
    the returned object also exposes the posterior second moment.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (model.dim,):
        raise ValueError("x must be a vector of the model dimension")
    M = model.M
    mean = np.linalg.solve(M, model.W.T @ (x - model.mu))
    cov = model.sigma2 * np.linalg.inv(M)
    return LatentPosterior(mean=mean, cov=(cov + cov.T) / 2.0)


def posterior_means(X, model):
    """Row-wise posterior latent means (the scores), shape N x d."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != model.dim:
        raise ValueError("X must be N x D with D matching the model")
    return np.linalg.solve(model.M, model.W.T @ (X - model.mu).T).T
