"""Elementary operations on angles and angle matrices (radians)."""

import numpy as np

TWO_PI = 2.0 * np.pi


def wrap(x):
    """Reduce angles to the fundamental domain [0, 2*pi).

    Parameters
    ----------
    x : array_like or scalar
        Angles in radians, any shape. All entries must be finite.

    Returns
    -------
    Same shape as the input, with every entry equal to
    ``x - 2*pi*floor(x / (2*pi))``.
    """
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError("wrap requires finite angles")
    out = arr - TWO_PI * np.floor(arr / TWO_PI)
    # floating floor can land exactly on the open boundary; fold it back
    out = np.where(out >= TWO_PI, out - TWO_PI, out)
    out = np.where(out < 0.0, 0.0, out)
    if np.isscalar(x):
        return float(out)
    return out


def check_angle_matrix(Y):
    """Validate an N x D matrix of angles on the torus and return it as float64.

    Entries must be finite and lie in [0, 2*pi); N >= 1 and D >= 1.
    """
    Y = np.ascontiguousarray(Y, dtype=float)
    if Y.ndim != 2:
        raise ValueError(f"angle matrix must be 2-D, got shape {Y.shape}")
    n, d = Y.shape
    if n < 1 or d < 1:
        raise ValueError(f"angle matrix must be non-empty, got shape {Y.shape}")
    if not np.all(np.isfinite(Y)):
        raise ValueError("angle matrix contains non-finite entries")
    if np.any(Y < 0.0) or np.any(Y >= TWO_PI):
        raise ValueError("angle matrix entries must lie in [0, 2*pi)")
    return Y


def circular_mean(Y, axis=0):
    """Elementwise circular mean (atan2 of averaged sines/cosines), in [0, 2*pi)."""
    Y = np.asarray(Y, dtype=float)
    s = np.sin(Y).mean(axis=axis)
    c = np.cos(Y).mean(axis=axis)
    return wrap(np.arctan2(s, c))


def resultant_length(Y, axis=0):
    """Mean resultant length R-bar per component, in [0, 1]."""
    Y = np.asarray(Y, dtype=float)
    s = np.sin(Y).mean(axis=axis)
    c = np.cos(Y).mean(axis=axis)
    return np.hypot(s, c)
