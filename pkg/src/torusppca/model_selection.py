"""Choosing the latent dimension: likelihood ratio tests, Kaiser-Guttman,
and Krzanowski-style SVD cross-validation.

All selectors operate on Euclidean data; torus inputs should first be
unwrapped with :func:`torusppca.wrapped_normal.cem_unwrap` (the same
preliminary step the torus fit itself uses).
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh
from scipy.stats import chi2

from .ppca import PpcaModel, ppca_closed_form_cov, sample_mean_cov
from .errors import DegenerateComponentError

__all__ = [
    "LrtResult",
    "CvResult",
    "SelectionResult",
    "SelectionReport",
    "lrt_type1",
    "lrt_type2",
    "select_lrt",
    "kaiser_guttman",
    "correlation_eigenvalues",
    "cv_select",
    "select_all",
]


@dataclass(frozen=True)
class LrtResult:
    """One likelihood-ratio statistic with its chi-square reference."""

    statistic: float
    df: int
    p_value: float
    d: int
    clamped: bool = False


@dataclass(eq=False)
class CvResult:
    """Cross-validation prediction errors and the Krzanowski ratios.

    ``press[m]`` is the leave-out squared prediction error of the rank-m
    reconstruction (``press[0]`` uses the zero predictor on centered data);
    ``w[m-1]`` is the ratio statistic for component m.
    """

    press: np.ndarray
    w: np.ndarray
    d_m: np.ndarray
    d_r: np.ndarray
    chosen_d: int
    clamped: bool = False
    truncated: bool = False


@dataclass(eq=False)
class SelectionResult:
    """Outcome of a stepwise LRT selection."""

    chosen_d: int
    results: list
    exhausted: bool
    errors: dict = field(default_factory=dict)


@dataclass(eq=False)
class SelectionReport:
    """Per-method selection summary for one data set."""

    n: int
    dim: int
    lrt1: SelectionResult | None = None
    lrt2: SelectionResult | None = None
    kg: int | None = None
    kg_eigenvalues: np.ndarray | None = None
    cv: CvResult | None = None

    def chosen(self):
        out = {}
        if self.lrt1 is not None:
            out["lrt1"] = self.lrt1.chosen_d
        if self.lrt2 is not None:
            out["lrt2"] = self.lrt2.chosen_d
        if self.kg is not None:
            out["kg"] = self.kg
        if self.cv is not None:
            out["cv"] = self.cv.chosen_d
        return out

    def to_dict(self):
        doc = {"n": self.n, "D": self.dim, "chosen": self.chosen()}
        if self.lrt1 is not None:
            doc["lrt1"] = _lrt_dict(self.lrt1)
        if self.lrt2 is not None:
            doc["lrt2"] = _lrt_dict(self.lrt2)
        if self.kg is not None:
            doc["kg"] = {
                "chosen_d": self.kg,
                "eigenvalues": list(map(float, self.kg_eigenvalues)),
            }
        if self.cv is not None:
            doc["cv"] = {
                "chosen_d": self.cv.chosen_d,
                "press": list(map(float, self.cv.press)),
                "w": list(map(float, self.cv.w)),
                "clamped": self.cv.clamped,
            }
        return doc


def _lrt_dict(sel):
    return {
        "chosen_d": sel.chosen_d,
        "exhausted": sel.exhausted,
        "per_d": [
            {
                "d": r.d,
                "statistic": float(r.statistic),
                "df": int(r.df),
                "p_value": float(r.p_value),
            }
            for r in sel.results
        ],
        "errors": {str(k): str(v) for k, v in sel.errors.items()},
    }


def lrt_df_type1(dim, d):
    """Degrees of freedom of the goodness-of-fit test: D(D+1)/2 - t with
    t = D*d + 1 - d(d-1)/2 free parameters."""
    return dim * (dim + 1) // 2 - (dim * d + 1 - d * (d - 1) // 2)


def lrt_type1(S, model, n):
    """Goodness-of-fit test of the d-component covariance against saturation.

    With a and g the arithmetic and geometric means of the eigenvalues of
    ``Sigma0^-1 S`` (``Sigma0 = W W' + sigma2 I``), the statistic is
    ``n D (a - log g - 1)``, referred to a chi-square with
    ``D(D+1)/2 - (Dd + 1 - d(d-1)/2)`` degrees of freedom.
    """
    S = np.asarray(S, dtype=float)
    dim = model.dim
    if S.shape != (dim, dim):
        raise ValueError("S shape does not match the model dimension")
    if n <= dim:
        raise ValueError("sample size must exceed the dimension")
    evals = eigh(S, model.C, eigvals_only=True)
    if np.any(evals <= 0.0):
        raise np.linalg.LinAlgError(
            "Sigma0^-1 S has non-positive eigenvalues; inputs are not SPD"
        )
    a = evals.mean()
    g = np.exp(np.log(evals).mean())
    stat = n * dim * (a - np.log(g) - 1.0)
    df = lrt_df_type1(dim, model.rank)
    return LrtResult(
        statistic=float(stat),
        df=df,
        p_value=float(chi2.sf(max(stat, 0.0), df)),
        d=model.rank,
    )


def lrt_type2(S, model_d, model_d1, n):
    """Difference test of d components against d+1 components.

    The statistic is the difference of the two goodness-of-fit statistics,
    referred to a chi-square with D-d degrees of freedom.  A numerically
    negative difference is clamped to zero and flagged.
    """
    dim = model_d.dim
    d = model_d.rank
    if model_d1.rank != d + 1:
        raise ValueError("second model must have exactly one more component")
    if d + 1 >= dim:
        raise ValueError(f"need d+1 < D, got d={d}, D={dim}")
    u_d = lrt_type1(S, model_d, n).statistic
    u_d1 = lrt_type1(S, model_d1, n).statistic
    stat = u_d - u_d1
    clamped = stat < 0.0
    if clamped:
        stat = 0.0
    df = dim - d
    return LrtResult(
        statistic=float(stat),
        df=df,
        p_value=float(chi2.sf(stat, df)),
        d=d,
        clamped=clamped,
    )


def select_lrt(X, alpha=0.05, test_type=2):
    """Forward stepwise dimension selection on Euclidean data.

    Fits the closed-form model for d = 1, 2, ... and stops at the first d
    whose test fails to reject (p >= alpha).  If every testable d rejects,
    returns D-1 with ``exhausted=True``.  Dimensions whose fit fails are
    recorded and skipped.
    """
    if not (0.0 < alpha < 1.0):
        raise ValueError("alpha must lie in (0, 1)")
    if test_type not in (1, 2):
        raise ValueError("test_type must be 1 or 2")
    X = np.asarray(X, dtype=float)
    n, dim = X.shape
    mean, S = sample_mean_cov(X)

    max_d = dim - 1 if test_type == 1 else dim - 2
    results = []
    errors = {}
    chosen = None
    for d in range(1, max_d + 1):
        try:
            model = ppca_closed_form_cov(mean, S, d)
            if test_type == 1:
                res = lrt_type1(S, model, n)
            else:
                model1 = ppca_closed_form_cov(mean, S, d + 1)
                res = lrt_type2(S, model, model1, n)
        except (DegenerateComponentError, np.linalg.LinAlgError) as exc:
            errors[d] = exc
            continue
        results.append(res)
        if res.p_value >= alpha:
            chosen = d
            break
    exhausted = chosen is None
    if exhausted:
        chosen = dim - 1
    return SelectionResult(chosen_d=chosen, results=results,
                           exhausted=exhausted, errors=errors)


def correlation_eigenvalues(X):
    """Eigenvalues of the sample correlation matrix, descending."""
    X = np.asarray(X, dtype=float)
    sd = X.std(axis=0)
    zero = np.flatnonzero(sd == 0.0)
    if zero.size:
        raise ValueError(f"column {zero[0]} has zero variance")
    corr = np.corrcoef(X, rowvar=False)
    return np.linalg.eigvalsh(corr)[::-1]


def kaiser_guttman(X):
    """Number of correlation-matrix eigenvalues strictly above one.

    The raw count is clamped into [1, D-1] so the selected dimension is
    always usable downstream.
    """
    evals = correlation_eigenvalues(X)
    dim = evals.shape[0]
    count = int(np.sum(evals > 1.0))
    return min(max(count, 1), dim - 1)


def _aligned_svd(A, ref_left, ref_right):
    """SVD of a leave-one-out matrix with signs matched to the full-data SVD."""
    u, s, vt = np.linalg.svd(A, full_matrices=False)
    v = vt.T
    r = s.shape[0]
    if ref_left is not None:
        flips = np.sign(np.einsum("nt,nt->t", u, ref_left[:, :r]))
        flips[flips == 0] = 1.0
        u = u * flips
        v = v * flips
    elif ref_right is not None:
        flips = np.sign(np.einsum("nt,nt->t", v, ref_right[:, :r]))
        flips[flips == 0] = 1.0
        u = u * flips
        v = v * flips
    return u, s, v


def cv_select(X, threshold=0.9):
    """Krzanowski cross-validation over the number of components.

    Centers X, predicts each entry x_ij at rank m from two SVDs that never
    saw it (one with column j removed supplying the left factors, one with
    row i removed supplying the right factors, signs aligned to the
    full-data SVD), and forms

        W_m = [(PRESS(m-1) - PRESS(m)) / D_m] / [PRESS(m) / D_r]

    with D_m = n + p - 2m and D_r found by successive subtraction from the
    (n-1)p degrees of freedom of the centered matrix.  The chosen dimension
    is the largest m with W_m above ``threshold``, clamped to at least 1.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError("X must be an N x D matrix")
    n, p = X.shape
    if n <= p:
        raise ValueError("need more rows than columns")
    if p < 2:
        raise ValueError("need at least two columns")
    Xc = X - X.mean(axis=0)
    u_full, s_full, vt_full = np.linalg.svd(Xc, full_matrices=False)
    v_full = vt_full.T

    m_max = p - 1
    rank = int(np.sum(s_full > s_full[0] * max(n, p) * np.finfo(float).eps))
    truncated = rank < m_max
    if truncated:
        m_max = max(rank, 1)
    # left factors from the column-deleted SVDs
    left = []
    for j in range(p):
        u, s, _ = _aligned_svd(np.delete(Xc, j, axis=1), u_full, None)
        left.append(u[:, :m_max] * np.sqrt(s[:m_max]))
    # right factors from the row-deleted SVDs
    right = np.empty((n, p, m_max))
    for i in range(n):
        _, s, v = _aligned_svd(np.delete(Xc, i, axis=0), None, v_full)
        r = min(m_max, s.shape[0])
        right[i, :, :r] = v[:, :r] * np.sqrt(s[:r])
        right[i, :, r:] = 0.0

    press = np.empty(m_max + 1)
    press[0] = np.mean(Xc**2)
    pred = np.zeros((n, p))
    for m in range(1, m_max + 1):
        for j in range(p):
            pred[:, j] += left[j][:, m - 1] * right[:, j, m - 1]
        press[m] = np.mean((pred - Xc) ** 2)

    d_m = np.array([n + p - 2 * m for m in range(1, m_max + 1)], dtype=float)
    remaining = (n - 1) * p - np.cumsum(d_m)
    with np.errstate(divide="ignore", invalid="ignore"):
        w = ((press[:-1] - press[1:]) / d_m) / (press[1:] / remaining)
    above = np.flatnonzero(w > threshold)
    clamped = above.size == 0
    chosen = 1 if clamped else int(above[-1]) + 1
    return CvResult(
        press=press,
        w=w,
        d_m=d_m,
        d_r=remaining,
        chosen_d=chosen,
        clamped=clamped,
        truncated=truncated,
    )


def select_all(X, alpha=0.05, threshold=0.9):
    """Run every selector on Euclidean data and collect a report."""
    X = np.asarray(X, dtype=float)
    report = SelectionReport(n=X.shape[0], dim=X.shape[1])
    report.lrt1 = select_lrt(X, alpha=alpha, test_type=1)
    report.lrt2 = select_lrt(X, alpha=alpha, test_type=2)
    report.kg_eigenvalues = correlation_eigenvalues(X)
    report.kg = kaiser_guttman(X)
    report.cv = cv_select(X, threshold=threshold)
    return report
