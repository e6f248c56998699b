"""Torus probabilistic PCA: alternating winding/location and loading updates.

A fit starts from an unstructured wrapped-normal CEM unwrap, then
alternates two steps until the observed-data wrapped normal log-likelihood
stabilizes:

1. with loadings and noise held fixed, re-assign each observation's winding
   vector by maximizing the expected complete-data objective over the
   winding lattice and move the location to the mean of the unwrapped
   points;
2. with location and windings held fixed, apply the probabilistic PCA
   fixed-point update of the loadings and the noise variance on the
   unwrapped points.
"""

from dataclasses import dataclass

import numpy as np

from . import _lattice
from .angles import TWO_PI, check_angle_matrix, wrap
from .errors import DegenerateComponentError
from .ppca import (
    PpcaModel,
    posterior_means,
    ppca_closed_form_cov,
    _em_update,
)
from .wrapped_normal import WnParams, WrapIndices, cem_fit, wn_log_density_rows

__all__ = [
    "TppcaConfig",
    "TppcaInit",
    "TppcaFit",
    "tppca_init",
    "expected_complete_objective",
    "tppca_step1",
    "tppca_step2",
    "observed_log_likelihood",
    "tppca_fit",
    "tppca_scores",
    "tppca_reconstruct",
]


@dataclass(frozen=True)
class TppcaConfig:
    """Settings for a torus PPCA fit.

    ``full_step2=False`` applies a single loading/noise update per outer
    iteration (generalized-EM style); ``True`` drives the inner update to
    its fixed point before the next winding pass, which reaches the same
    stationary points in far fewer outer iterations.
    """

    d: int
    lattice_radius: int = 2
    outer_tol: float = 1e-7
    outer_max_iter: int = 500
    cem_tol: float = 1e-8
    cem_max_iter: int = 100
    full_step2: bool = False
    term_budget: int = _lattice.TERM_BUDGET
    seed: int | None = None

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("d must be at least 1")
        if self.lattice_radius < 1:
            raise ValueError("lattice radius must be at least 1")
        if self.outer_tol <= 0.0:
            raise ValueError("outer_tol must be positive")
        if self.outer_max_iter < 1:
            raise ValueError("outer_max_iter must be at least 1")


@dataclass(eq=False)
class TppcaInit:
    """Starting values: CEM location/windings plus a spectral loading guess."""

    mu0: np.ndarray
    wraps: WrapIndices
    S: np.ndarray
    W0: np.ndarray
    sigma2_0: float
    cem: "object"


@dataclass(eq=False)
class TppcaFit:
    """Fitted torus PPCA model together with the unwrapped data and scores."""

    model: PpcaModel
    wraps: WrapIndices
    X_hat: np.ndarray
    scores: np.ndarray
    trace: np.ndarray
    converged: bool
    n_iter: int
    trace_violations: int = 0

    @property
    def log_likelihood(self):
        return float(self.trace[-1])


def tppca_init(Y, d, radius=2, cem_tol=1e-8, cem_max_iter=100,
               budget=_lattice.TERM_BUDGET):
    """Initial values from an unstructured-covariance CEM unwrap.

    The CEM pass yields the starting location, winding numbers and an
    unrestricted covariance estimate S of the unwrapped points; the loading
    matrix and noise variance then come from the closed-form solution on S
    (noise = mean of the D-d discarded eigenvalues).
    """
    Y = check_angle_matrix(Y)
    n, dim = Y.shape
    if n <= dim:
        raise ValueError(f"need more observations than dimensions (N={n}, D={dim})")
    cem = cem_fit(Y, radius=radius, tol=cem_tol, max_iter=cem_max_iter,
                  budget=budget)
    S = cem.params.sigma
    spectral = ppca_closed_form_cov(cem.params.mu, S, d)
    return TppcaInit(
        mu0=cem.params.mu,
        wraps=cem.wraps,
        S=S,
        W0=spectral.W,
        sigma2_0=spectral.sigma2,
        cem=cem,
    )


def _gamma_quadratic(model):
    """Weight matrix and constant of the expected complete-data objective.

    For a candidate unwrapped residual e = y + 2*pi*k - mu the objective is
    ``const - e' Q e`` where Q collects the posterior-moment terms
    (it coincides with the inverse marginal covariance).
    """
    W, s2 = model.W, model.sigma2
    dim = model.dim
    Minv = np.linalg.inv(model.M)
    G = Minv @ W.T
    WG = W @ G
    Q = G.T @ G + (np.eye(dim) + G.T @ (W.T @ W) @ G - 2.0 * WG) / s2
    Q = (Q + Q.T) / 2.0
    const = -dim * np.log(s2) - s2 * np.trace(Minv) - np.trace(WG)
    return Q, const


def expected_complete_objective(Y, model, windings):
    """Expected complete-data objective for every (row, winding) pair.

    Returns an N x T matrix whose (j, t) entry evaluates the objective at
    winding candidate ``windings[t]`` for observation j, with the latent
    moments taken at their posterior values under ``model``.  Dense; meant
    for moderate lattice sizes.
    """
    Y = check_angle_matrix(Y)
    Q, const = _gamma_quadratic(model)
    quad = _lattice.quad_matrix(Y - model.mu, Q, TWO_PI * np.asarray(windings))
    return const - quad


def tppca_step1(Y, model, wraps, budget=_lattice.TERM_BUDGET):
    """Winding re-assignment and location update with (W, sigma2) fixed.

    Each row's winding vector maximizes the expected complete-data
    objective over the truncated lattice (the objective is additive over
    observations, so the joint maximization decomposes row by row); ties
    resolve to the lexicographically lowest winding.  The location moves to
    the mean of the unwrapped points.

    Returns ``(mu_new, wraps_new)``.
    """
    Y = check_angle_matrix(Y)
    radius = wraps.lattice_radius
    Q, _ = _gamma_quadratic(model)
    sigma_diag = np.diag(model.C).copy()
    windings = _lattice.plan_offsets(Y, model.mu, sigma_diag, radius, budget)
    idx, _, _ = _lattice.quad_reduce(Y - model.mu, Q, TWO_PI * windings)
    k = windings[idx]
    mu_new = (Y + TWO_PI * k).mean(axis=0)
    return mu_new, WrapIndices(k, radius)


def tppca_step2(X_hat, mu, W_prev, sigma2_prev):
    """One loading/noise fixed-point update on the unwrapped points.

    With S the maximum-likelihood covariance of ``X_hat`` around ``mu`` and
    M from the previous parameters, computes
    ``W_new = S W (sigma2 I + M^-1 W' S W)^-1`` and
    ``sigma2_new = tr(S - S W M^-1 W_new') / D``.
    """
    X_hat = np.asarray(X_hat, dtype=float)
    diff = X_hat - mu
    S = diff.T @ diff / X_hat.shape[0]
    return _em_update((S + S.T) / 2.0, np.asarray(W_prev, dtype=float),
                      float(sigma2_prev))


def observed_log_likelihood(Y, model, radius=2, budget=_lattice.TERM_BUDGET):
    """Observed-data wrapped normal log-likelihood at the model parameters.

    Sums the per-row wrapped normal log densities with covariance
    ``W W' + sigma2 I``.
    """
    params = WnParams(model.mu, model.C)
    return float(wn_log_density_rows(Y, params, radius, budget).sum())


def tppca_fit(Y, config):
    """Fit torus PPCA by alternating the two update steps.

    Starts from :func:`tppca_init`, then repeats step 1 (windings and
    location) and step 2 (loadings and noise) until the observed-data
    log-likelihood changes by less than ``outer_tol`` in relative terms or
    the iteration cap is reached.  The trace records the objective once at
    the start and after every outer iteration; decreases larger than 1e-6
    (possible with hard winding assignments) are counted in
    ``trace_violations`` rather than forbidden.

    Returns
    -------
    TppcaFit
        Final model, windings, unwrapped data, posterior-mean scores and
        the objective trace.
    """
    Y = check_angle_matrix(Y)
    cfg = config
    n, dim = Y.shape
    if not (1 <= cfg.d < dim):
        raise ValueError(f"need 1 <= d < D, got d={cfg.d}, D={dim}")

    ini = tppca_init(Y, cfg.d, radius=cfg.lattice_radius, cem_tol=cfg.cem_tol,
                     cem_max_iter=cfg.cem_max_iter, budget=cfg.term_budget)
    model = PpcaModel(ini.mu0, ini.W0, ini.sigma2_0)
    wraps = ini.wraps

    ll = observed_log_likelihood(Y, model, cfg.lattice_radius, cfg.term_budget)
    trace = [ll]
    converged = False
    violations = 0
    it = 0
    for it in range(1, cfg.outer_max_iter + 1):
        mu_new, wraps = tppca_step1(Y, model, wraps, cfg.term_budget)
        X_hat = Y + TWO_PI * wraps.k
        if cfg.full_step2:
            W_new, s2_new = _step2_to_convergence(X_hat, mu_new, model)
        else:
            W_new, s2_new = tppca_step2(X_hat, mu_new, model.W, model.sigma2)
        model = PpcaModel(mu_new, W_new, s2_new)

        ll_new = observed_log_likelihood(Y, model, cfg.lattice_radius,
                                         cfg.term_budget)
        trace.append(ll_new)
        if ll_new < ll - 1e-6:
            violations += 1
        if abs(ll_new - ll) < cfg.outer_tol * (1.0 + abs(ll)):
            converged = True
            ll = ll_new
            break
        ll = ll_new

    X_hat = Y + TWO_PI * wraps.k
    scores = posterior_means(X_hat, model)
    return TppcaFit(
        model=model,
        wraps=wraps,
        X_hat=X_hat,
        scores=scores,
        trace=np.asarray(trace),
        converged=converged,
        n_iter=it,
        trace_violations=violations,
    )


def _step2_to_convergence(X_hat, mu, model):
    """Drive the loading/noise update to its fixed point for fixed windings.

    The limit of the fixed-point iteration on a fixed unwrapped sample is
    the closed-form spectral solution; fall back to a single update when
    the spectrum is degenerate there.
    """
    diff = X_hat - mu
    S = diff.T @ diff / X_hat.shape[0]
    S = (S + S.T) / 2.0
    try:
        fitted = ppca_closed_form_cov(mu, S, model.rank)
        return fitted.W, fitted.sigma2
    except DegenerateComponentError:
        return _em_update(S, model.W, model.sigma2)


def tppca_scores(Y, model, radius=2, budget=_lattice.TERM_BUDGET):
    """Posterior-mean scores for torus data under a fitted model.

    Re-assigns windings for the given rows (step-1 rule with the model held
    fixed) and returns ``(scores, wraps)``.
    """
    Y = check_angle_matrix(Y)
    if Y.shape[1] != model.dim:
        raise ValueError("column count does not match the model dimension")
    wraps = WrapIndices(np.zeros(Y.shape, dtype=int), radius)
    _, wraps = tppca_step1(Y, model, wraps, budget)
    X_hat = Y + TWO_PI * wraps.k
    return posterior_means(X_hat, model), wraps


def tppca_reconstruct(fit):
    """Reconstructions mu + W z from the fit's scores.

    Returns ``(X_recons, Y_recons)`` with ``Y_recons = wrap(X_recons)``.
    """
    X_recons = fit.model.mu + fit.scores @ fit.model.W.T
    return X_recons, wrap(X_recons)
