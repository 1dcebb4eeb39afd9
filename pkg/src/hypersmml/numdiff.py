"""Central finite differences used as independent oracles."""

from __future__ import annotations

import numpy as np

DEFAULT_REL_STEP = 1e-5
# second differences lose ~eps/h^2 to roundoff, so they use a larger step
# and one Richardson extrapolation to cancel the O(h^2) truncation error
HESSIAN_REL_STEP = 5e-3


def _steps(x: np.ndarray, rel_step: float) -> np.ndarray:
    # near-zero coordinates borrow a tenth of the largest magnitude as their scale
    scale = max(float(np.max(np.abs(x))), 1e-8)
    return rel_step * np.maximum(np.abs(x), 0.1 * scale)


def jacobian(f, x, rel_step: float = DEFAULT_REL_STEP) -> np.ndarray:
    """Jacobian ``J[i, j] = d f_i / d x_j`` of a vector map by central differences."""
    x = np.asarray(x, dtype=float)
    h = _steps(x, rel_step)
    cols = []
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h[j]
        cols.append((np.asarray(f(x + e)) - np.asarray(f(x - e))) / (2 * h[j]))
    return np.stack(cols, axis=-1)


def hessian(f, x, rel_step: float = HESSIAN_REL_STEP, richardson: bool = True) -> np.ndarray:
    """Hessian of a scalar function by central differences."""
    if richardson:
        coarse = hessian(f, x, rel_step, richardson=False)
        fine = hessian(f, x, rel_step / 2, richardson=False)
        return (4.0 * fine - coarse) / 3.0
    x = np.asarray(x, dtype=float)
    h = _steps(x, rel_step)
    k = x.size
    H = np.empty((k, k))
    f0 = float(f(x))
    for i in range(k):
        ei = np.zeros(k)
        ei[i] = h[i]
        H[i, i] = (f(x + ei) - 2 * f0 + f(x - ei)) / h[i] ** 2
        for j in range(i + 1, k):
            ej = np.zeros(k)
            ej[j] = h[j]
            H[i, j] = (
                f(x + ei + ej) - f(x + ei - ej) - f(x - ei + ej) + f(x - ei - ej)
            ) / (4 * h[i] * h[j])
            H[j, i] = H[i, j]
    return H
