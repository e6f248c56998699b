"""Multivariate wrapped normal density and Classification EM estimation.

An observation on the D-torus is modelled as Y = X mod 2*pi with X drawn
from a D-variate normal.  The density of Y is a lattice sum of normal
densities over integer winding vectors; estimation recovers the location,
the covariance and the per-observation winding numbers jointly by a
Classification EM (CEM) scheme: soft winding weights (E), a hard argmax
assignment (C), and a plain Gaussian update of location and covariance on
the unwrapped points (M).
"""

from dataclasses import dataclass, field

import numpy as np

from . import _lattice
from .angles import TWO_PI, check_angle_matrix, circular_mean, resultant_length

__all__ = [
    "WnParams",
    "WrapIndices",
    "CemResult",
    "wrap_weights",
    "wn_log_density",
    "wn_log_density_rows",
    "classification_log_likelihood",
    "default_init",
    "cem_fit",
    "cem_unwrap",
]

_LOG_2PI = np.log(2.0 * np.pi)

# Relative eigenvalue floor below which an estimated covariance is ridged.
_SINGULAR_RTOL = 1e-10
_RIDGE_EPS = 1e-8


@dataclass(frozen=True, eq=False)
class WnParams:
    """Location (unwrapped radians) and covariance of the latent normal."""

    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        mu = np.atleast_1d(np.asarray(self.mu, dtype=float))
        sigma = np.asarray(self.sigma, dtype=float)
        if mu.ndim != 1:
            raise ValueError("mu must be a vector")
        d = mu.shape[0]
        if sigma.shape != (d, d):
            raise ValueError(f"sigma must be {d}x{d}, got {sigma.shape}")
        if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(sigma))):
            raise ValueError("parameters must be finite")
        scale = max(1.0, np.abs(sigma).max())
        if np.abs(sigma - sigma.T).max() > 1e-8 * scale:
            raise ValueError("sigma must be symmetric")
        evals = np.linalg.eigvalsh(sigma)
        if evals[0] <= _SINGULAR_RTOL * max(evals[-1], 0.0):
            raise ValueError("sigma must be positive definite")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", (sigma + sigma.T) / 2.0)

    @property
    def dim(self):
        return self.mu.shape[0]


@dataclass(frozen=True, eq=False)
class WrapIndices:
    """Integer winding numbers relating observed angles to unwrapped values."""

    k: np.ndarray
    lattice_radius: int

    def __post_init__(self):
        k = np.asarray(self.k, dtype=int)
        if k.ndim != 2:
            raise ValueError("winding numbers must form an N x D matrix")
        if self.lattice_radius < 0:
            raise ValueError("lattice radius must be non-negative")
        if np.abs(k).max(initial=0) > self.lattice_radius:
            raise ValueError("winding numbers exceed the lattice radius")
        object.__setattr__(self, "k", k)

    def unwrap(self, Y):
        """Unwrapped points y + 2*pi*k for the angles the indices were fit to."""
        return np.asarray(Y, dtype=float) + TWO_PI * self.k


@dataclass(eq=False)
class CemResult:
    """Outcome of a CEM fit: parameters, windings and the likelihood trace."""

    params: WnParams
    wraps: WrapIndices
    trace: np.ndarray
    converged: bool
    regularized: bool
    n_iter: int = field(default=0)

    @property
    def log_likelihood(self):
        return float(self.trace[-1])


def _validate_radius(radius):
    radius = int(radius)
    if radius < 0:
        raise ValueError("lattice radius must be non-negative")
    return radius


def _plan(Y, params, radius, budget):
    return _lattice.plan_offsets(
        Y, params.mu, np.diag(params.sigma).copy(), radius, budget
    )


def wn_log_density(y, params, radius=2, budget=_lattice.TERM_BUDGET):
    """Log density of a single torus point under the wrapped normal.

    Computes ``log sum_k phi(y + 2*pi*k | mu, sigma)`` over the winding
    lattice {-radius..radius}^D with a max-shifted log-sum-exp.

    Parameters
    ----------
    y : array_like
        Angles in [0, 2*pi), length D.
    params : WnParams
    radius : int
        Lattice truncation radius J (non-negative).
    budget : int
        Maximum number of lattice terms to enumerate.
    """
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if y.ndim != 1 or y.shape[0] != params.dim:
        raise ValueError("y must be a vector matching the parameter dimension")
    return float(wn_log_density_rows(y[None, :], params, radius, budget)[0])


def wn_log_density_rows(Y, params, radius=2, budget=_lattice.TERM_BUDGET):
    """Per-row wrapped normal log densities for an N x D angle matrix."""
    Y = check_angle_matrix(Y)
    radius = _validate_radius(radius)
    if Y.shape[1] != params.dim:
        raise ValueError("column count does not match the parameter dimension")
    offsets = TWO_PI * _plan(Y, params, radius, budget)
    prec, logdet = _lattice.spd_inverse(params.sigma)
    _, _, lse = _lattice.quad_reduce(Y - params.mu, prec, offsets)
    return lse - 0.5 * (params.dim * _LOG_2PI + logdet)


def wrap_weights(Y, params, radius=2, budget=_lattice.TERM_BUDGET):
    """Posterior winding weights v_{jk} for every observation.

    Returns ``(weights, windings)`` where ``weights[j, t]`` is the normalized
    probability that row j unwraps with winding ``windings[t]``.  Each row
    sums to one.  Dense in the lattice size; meant for moderate problems.
    """
    Y = check_angle_matrix(Y)
    radius = _validate_radius(radius)
    windings = _plan(Y, params, radius, budget)
    prec, _ = _lattice.spd_inverse(params.sigma)
    quad = _lattice.quad_matrix(Y - params.mu, prec, TWO_PI * windings)
    logw = -0.5 * (quad - quad.min(axis=1, keepdims=True))
    w = np.exp(logw)
    w /= w.sum(axis=1, keepdims=True)
    return w, windings


def classification_log_likelihood(X, mu, sigma):
    """Sum of normal log densities of unwrapped points, ln phi(x_j | mu, sigma)."""
    X = np.asarray(X, dtype=float)
    prec, logdet = _lattice.spd_inverse(sigma)
    diff = X - mu
    quad = np.einsum("nd,de,ne->n", diff, prec, diff)
    d = X.shape[1]
    return float(-0.5 * (d * _LOG_2PI + logdet) * X.shape[0] - 0.5 * quad.sum())


def default_init(Y):
    """Moment-style starting values: circular means and a diagonal covariance.

    The diagonal entries match the wrapped normal concentration implied by
    the per-coordinate mean resultant length (-2 log R-bar), clipped to keep
    the matrix well conditioned.
    """
    Y = check_angle_matrix(Y)
    mu = np.atleast_1d(circular_mean(Y))
    rbar = np.atleast_1d(resultant_length(Y))
    with np.errstate(divide="ignore"):
        var = -2.0 * np.log(rbar)
    var = np.clip(var, 1e-4, TWO_PI**2)
    return WnParams(mu, np.diag(var))


def _ridge_if_singular(sigma):
    """Ridge a (near-)singular covariance estimate; returns (sigma, flagged)."""
    sigma = (sigma + sigma.T) / 2.0
    d = sigma.shape[0]
    tr = np.trace(sigma)
    evals = np.linalg.eigvalsh(sigma)
    if evals[0] > _SINGULAR_RTOL * max(tr / d, 0.0) and evals[0] > 0.0:
        return sigma, False
    ridge = _RIDGE_EPS * (tr / d) if tr > 0.0 else _RIDGE_EPS
    return sigma + ridge * np.eye(d), True


def cem_fit(Y, radius=2, tol=1e-8, max_iter=100, init=None,
            budget=_lattice.TERM_BUDGET):
    """Fit a multivariate wrapped normal by Classification EM.

    Alternates winding weights (E), a hard winding assignment by argmax (C)
    and a Gaussian location/covariance update on the unwrapped points (M)
    until the classification log-likelihood improves by less than ``tol``.

    Parameters
    ----------
    Y : array_like
        N x D angles in [0, 2*pi) with N > D.
    radius : int
        Winding lattice radius J >= 1.
    tol : float
        Absolute improvement threshold on the classification log-likelihood.
    max_iter : int
        Iteration cap; hitting it leaves ``converged=False``.
    init : WnParams, optional
        Starting parameters; defaults to :func:`default_init`.

    Returns
    -------
    CemResult
        Final parameters, winding numbers, the non-decreasing trace of the
        classification log-likelihood, and convergence/regularization flags.
    """
    Y = check_angle_matrix(Y)
    n, d = Y.shape
    if n <= d:
        raise ValueError(f"need more observations than dimensions (N={n}, D={d})")
    radius = _validate_radius(radius)
    if radius < 1:
        raise ValueError("cem_fit needs a lattice radius of at least 1")
    params = init if init is not None else default_init(Y)
    if params.dim != d:
        raise ValueError("init dimension does not match the data")

    trace = []
    converged = False
    regularized = False
    k = np.zeros((n, d), dtype=int)
    it = 0
    for it in range(1, max_iter + 1):
        windings = _plan(Y, params, radius, budget)
        prec, _ = _lattice.spd_inverse(params.sigma)
        idx, _, _ = _lattice.quad_reduce(Y - params.mu, prec, TWO_PI * windings)
        k = windings[idx]

        X = Y + TWO_PI * k
        mu = X.mean(axis=0)
        diff = X - mu
        sigma = diff.T @ diff / n
        sigma, flagged = _ridge_if_singular(sigma)
        regularized = regularized or flagged
        params = WnParams(mu, sigma)

        ll = classification_log_likelihood(X, params.mu, params.sigma)
        trace.append(ll)
        if len(trace) > 1 and ll - trace[-2] < tol:
            converged = True
            break

    return CemResult(
        params=params,
        wraps=WrapIndices(k, radius),
        trace=np.asarray(trace),
        converged=converged,
        regularized=regularized,
        n_iter=it,
    )


def cem_unwrap(Y, radius=2, tol=1e-8, max_iter=100, init=None,
               budget=_lattice.TERM_BUDGET):
    """Unwrap torus data with an unstructured-covariance CEM fit.

    Returns ``(X_hat, result)`` where ``X_hat = Y + 2*pi*K_hat``.
    """
    result = cem_fit(Y, radius=radius, tol=tol, max_iter=max_iter, init=init,
                     budget=budget)
    return result.wraps.unwrap(Y), result
