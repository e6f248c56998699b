"""Winding-lattice enumeration and streaming quadratic-form reductions.

Everything here works on the integer lattice {-J..J}^D of winding candidates.
Enumerations are always produced in lexicographic order so that first-index
argmin/argmax resolves ties deterministically (lowest lexicographic winding
wins).
"""

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .angles import TWO_PI
from .errors import LatticeBudgetError

#: Hard cap on the number of enumerated lattice terms.
TERM_BUDGET = 1_000_000

#: Per-coordinate candidates whose Gaussian weight falls below this value,
#: relative to the per-coordinate maximum, are dropped when the full lattice
#: exceeds the budget.
PRUNE_REL_WEIGHT = 1e-12

# Max rows*terms cells processed per block in the streaming reductions.
_BLOCK_CELLS = 1 << 22


def lattice_offsets(radius, dim):
    """All integer winding vectors in {-radius..radius}^dim, lexicographic order."""
    if radius < 0:
        raise ValueError("lattice radius must be non-negative")
    if dim < 1:
        raise ValueError("lattice dimension must be positive")
    count = (2 * radius + 1) ** dim
    if count > TERM_BUDGET:
        raise LatticeBudgetError(
            f"full lattice has {count} terms, exceeding the budget of {TERM_BUDGET}"
        )
    axis = np.arange(-radius, radius + 1)
    grids = np.meshgrid(*([axis] * dim), indexing="ij")
    return np.stack([g.reshape(-1) for g in grids], axis=1)


def plan_offsets(Y, mu, sigma_diag, radius, budget=TERM_BUDGET):
    """Winding candidates for the rows of ``Y`` under a Gaussian at ``mu``.

    Returns the full lattice when it fits the budget.  Otherwise candidates
    are pruned coordinate by coordinate: a winding k is kept for coordinate i
    when its best-case Gaussian weight across the rows of ``Y`` exceeds
    ``PRUNE_REL_WEIGHT`` relative to that coordinate's best winding.  Raises
    :class:`LatticeBudgetError` if the pruned enumeration still exceeds the
    budget.
    """
    dim = Y.shape[1]
    full = (2 * radius + 1) ** dim
    if full <= budget:
        axis = np.arange(-radius, radius + 1)
        grids = np.meshgrid(*([axis] * dim), indexing="ij")
        return np.stack([g.reshape(-1) for g in grids], axis=1)

    log_cut = -2.0 * np.log(PRUNE_REL_WEIGHT)  # squared-distance slack, in 2*sigma units
    kept = []
    ks = np.arange(-radius, radius + 1)
    for i in range(dim):
        # best-case squared distance of each winding over the observed rows
        d2 = (Y[:, i][:, None] + TWO_PI * ks[None, :] - mu[i]) ** 2
        best = d2.min(axis=0)
        keep = best - best.min() <= sigma_diag[i] * log_cut
        kept.append(ks[keep])
    count = 1
    for c in kept:
        count *= len(c)
        if count > budget:
            raise LatticeBudgetError(
                f"pruned lattice still has more than {budget} terms at radius {radius}"
            )
    grids = np.meshgrid(*kept, indexing="ij")
    return np.stack([g.reshape(-1) for g in grids], axis=1)


def spd_inverse(sigma):
    """Inverse and log-determinant of a symmetric positive definite matrix."""
    c, low = cho_factor(sigma, lower=True)
    logdet = 2.0 * np.log(np.diag(c)).sum()
    inv = cho_solve((c, low), np.eye(sigma.shape[0]))
    return inv, logdet


def quad_reduce(A, P, offsets):
    """Row-wise reductions of q(j,t) = (a_j + o_t)' P (a_j + o_t).

    ``A`` holds one residual per row, ``offsets`` the (already scaled, i.e.
    2*pi*k) lattice displacements, and ``P`` a symmetric positive definite
    weight matrix.  Returns, per row:

    - index of the minimizing lattice term (first occurrence on ties, which
      is the lexicographically lowest winding),
    - the minimum quadratic form,
    - ``log(sum_t exp(-q(j,t)/2))`` accumulated with a running max shift.

    Work proceeds in lattice blocks so the full (rows x terms) matrix is
    never materialized.
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    t_total = offsets.shape[0]
    AP = A @ P
    rowq = np.einsum("nd,nd->n", AP, A)

    block = max(1, _BLOCK_CELLS // max(n, 1))
    best = np.full(n, np.inf)
    best_idx = np.zeros(n, dtype=np.intp)
    sumexp = np.zeros(n)

    for start in range(0, t_total, block):
        off = offsets[start:start + block]
        colq = np.einsum("td,de,te->t", off, P, off)
        q = rowq[:, None] + colq[None, :] + 2.0 * (AP @ off.T)

        bidx = np.argmin(q, axis=1)
        bval = q[np.arange(n), bidx]
        improved = bval < best
        new_best = np.where(improved, bval, best)
        # re-anchor the running sum at the new per-row minimum
        with np.errstate(over="ignore"):
            sumexp *= np.exp(-0.5 * (best - new_best))
        sumexp = np.where(np.isfinite(sumexp), sumexp, 0.0)
        shifted = -0.5 * (q - new_best[:, None])
        contrib = np.zeros_like(shifted)
        np.exp(shifted, out=contrib, where=shifted > -46.0)
        sumexp += contrib.sum(axis=1)
        best_idx = np.where(improved, bidx + start, best_idx)
        best = new_best

    return best_idx, best, -0.5 * best + np.log(sumexp)


def quad_matrix(A, P, offsets):
    """Dense (rows x terms) version of the quadratic forms in :func:`quad_reduce`.

    Intended for small problems (weights, diagnostics, tests); refuses to
    materialize more than the block budget.
    """
    A = np.asarray(A, dtype=float)
    n, t = A.shape[0], offsets.shape[0]
    if n * t > _BLOCK_CELLS:
        raise LatticeBudgetError(
            f"dense lattice matrix of {n}x{t} cells exceeds the materialization limit"
        )
    AP = A @ P
    rowq = np.einsum("nd,nd->n", AP, A)
    colq = np.einsum("td,de,te->t", offsets, P, offsets)
    return rowq[:, None] + colq[None, :] + 2.0 * (AP @ offsets.T)
