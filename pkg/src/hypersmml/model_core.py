"""The Gaussian linear regression model in canonical exponential-family form.

Data ``y ~ N_n(A beta, sigma^2 I_n)`` is summarised by the sufficient
statistic ``x = T(y) = (B^T y, ||y||^2)`` where the columns of ``B`` are an
orthonormal basis of ``col A``. The natural parameter is
``theta = (B^T A beta, -1/2) / sigma^2`` and the set of all sufficient
statistics is the solid paraboloid ``{x : x_{p+1} >= x_1^2 + ... + x_p^2}``.

Most functions accept stacked inputs along leading axes; the last axis always
holds the ``p + 1`` (or ``n``) coordinates.

The statistic depends on the choice of ``B`` only through an orthogonal change
of its first ``p`` coordinates. ``B = A (A^T A)^{-1/2}`` is fixed here so that
results are reproducible.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import DimensionError, DomainError, RankError, UnsupportedError

#: Relative eigenvalue threshold below which ``A^T A`` is treated as singular.
RANK_RTOL = 1e-10


def orthonormal_basis(A) -> np.ndarray:
    """Return ``B = A (A^T A)^{-1/2}`` using a symmetric eigendecomposition."""
    A = np.asarray(A, dtype=float)
    if A.ndim == 1:
        A = A[:, None]
    if A.ndim != 2:
        raise DimensionError(f"design matrix must be 2-D, got shape {A.shape}")
    n, p = A.shape
    if p == 0 or p > n:
        raise RankError(f"design matrix must satisfy 1 <= p <= n, got n={n}, p={p}")
    evals, evecs = np.linalg.eigh(A.T @ A)
    lo, hi = evals[0], evals[-1]
    if not hi > 0 or lo < RANK_RTOL * hi:
        cond = math.inf if lo <= 0 else math.sqrt(hi / lo)
        raise RankError(
            f"design matrix is rank deficient: smallest/largest eigenvalue of "
            f"A^T A = {lo:.3e}/{hi:.3e} (condition number {cond:.3e})"
        )
    inv_sqrt = (evecs / np.sqrt(evals)) @ evecs.T
    return A @ inv_sqrt


@dataclass(frozen=True)
class DesignBasis:
    """A design matrix together with its orthonormal column basis."""

    A: np.ndarray
    B: np.ndarray

    @classmethod
    def from_design(cls, A) -> "DesignBasis":
        A = np.asarray(A, dtype=float)
        if A.ndim == 1:
            A = A[:, None]
        return cls(A=A, B=orthonormal_basis(A))

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def p(self) -> int:
        return self.A.shape[1]

    def complement_vector(self) -> np.ndarray:
        """Deterministic unit vector orthogonal to ``col A`` (needs ``p < n``).

        Taken as the first extra column of a complete QR factorisation of
        ``B``; Householder QR is deterministic for a given input.
        """
        if self.p >= self.n:
            raise UnsupportedError("col A is all of R^n; no orthogonal complement")
        q, _ = np.linalg.qr(self.B, mode="complete")
        v = q[:, self.p]
        # remove any roundoff component inside col A
        v = v - self.B @ (self.B.T @ v)
        v = v / np.linalg.norm(v)
        # sign convention: first non-negligible entry positive
        lead = v[np.argmax(np.abs(v) > 1e-12)]
        return -v if lead < 0 else v


def residual_gap(x) -> np.ndarray | float:
    """``V(x) = x_{p+1} - x_1^2 - ... - x_p^2`` along the last axis."""
    x = np.asarray(x, dtype=float)
    return x[..., -1] - np.sum(x[..., :-1] ** 2, axis=-1)


def suff_stat(basis: DesignBasis, y) -> np.ndarray:
    """Sufficient statistic ``(B^T y, ||y||^2)``; ``y`` may be stacked."""
    y = np.asarray(y, dtype=float)
    if y.shape[-1] != basis.n:
        raise DimensionError(f"y has length {y.shape[-1]}, expected n={basis.n}")
    head = y @ basis.B
    tail = np.sum(y * y, axis=-1)
    # ||y||^2 >= ||B^T y||^2 holds exactly; only roundoff can break it
    tail = np.maximum(tail, np.sum(head * head, axis=-1))
    return np.concatenate([head, np.asarray(tail)[..., None]], axis=-1)


class PointClass(enum.Enum):
    INTERIOR = "interior"
    BOUNDARY = "boundary"
    OUTSIDE = "outside"


def classify_data_point(x, p: int, n: int | None = None) -> PointClass:
    """Locate ``x`` relative to the solid paraboloid of sufficient statistics.

    The boundary band is ``|V(x)| <= 1e-10 (1 + |x_{p+1}|)``. ``n`` is
    accepted for symmetry with the other operations; it does not change the
    classification (when ``p == n`` images of ``T`` are always Boundary).
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (p + 1,):
        raise DimensionError(f"expected a vector of length {p + 1}, got {x.shape}")
    v = float(residual_gap(x))
    tau = 1e-10 * (1.0 + abs(x[-1]))
    if v > tau:
        return PointClass.INTERIOR
    if v < -tau:
        return PointClass.OUTSIDE
    return PointClass.BOUNDARY


def check_natural(theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    if np.any(~(theta[..., -1] < 0)):
        raise DomainError("natural parameter requires theta_{p+1} < 0")
    return theta


def log_partition(theta, n: int) -> np.ndarray | float:
    """``log Z(theta) = -(n/2) log(-2 theta_{p+1}) - |theta_{1:p}|^2 / (4 theta_{p+1})``."""
    theta = check_natural(theta)
    last = theta[..., -1]
    lin = np.sum(theta[..., :-1] ** 2, axis=-1)
    return -0.5 * n * np.log(-2.0 * last) - lin / (4.0 * last)


def natural_from_beta_sigma(basis: DesignBasis, beta, sigma: float) -> np.ndarray:
    """``theta = (B^T A beta, -1/2) / sigma^2``."""
    if not sigma > 0:
        raise DomainError(f"sigma must be positive, got {sigma}")
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    head = basis.B.T @ (basis.A @ beta)
    return np.append(head, -0.5) / sigma**2


def log_pdf_y(basis: DesignBasis, beta, sigma: float, y) -> np.ndarray | float:
    """Log density of ``N_n(A beta, sigma^2 I)`` at ``y`` (stackable in ``y``)."""
    if not sigma > 0:
        raise DomainError(f"sigma must be positive, got {sigma}")
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    y = np.asarray(y, dtype=float)
    n = basis.n
    resid = y - basis.A @ beta
    return -0.5 * n * math.log(2 * math.pi * sigma**2) - np.sum(resid**2, axis=-1) / (
        2 * sigma**2
    )


def log_h_const(n: int, p: int) -> float:
    """``log c_h`` with ``c_h = (2^{n/2} pi^{p/2} Gamma((n-p)/2))^{-1}``."""
    return -(0.5 * n * math.log(2) + 0.5 * p * math.log(math.pi) + gammaln((n - p) / 2))


def log_base_measure(x, n: int, p: int) -> np.ndarray | float:
    """``log h_X(x) = log c_h + ((n-p-2)/2) log V(x)``."""
    if p >= n:
        raise UnsupportedError(f"X has no density on R^(p+1) when p >= n (n={n}, p={p})")
    v = residual_gap(x)
    expo = 0.5 * (n - p - 2)
    if np.any(v < 0) or (expo != 0 and np.any(v <= 0)):
        raise DomainError("sufficient statistic must satisfy V(x) > 0")
    if expo == 0:
        return log_h_const(n, p) + np.zeros_like(v)
    return log_h_const(n, p) + expo * np.log(v)


def log_pdf_suffstat(x, theta, n: int, p: int) -> np.ndarray | float:
    """Log density of ``X = T(Y)`` under natural parameter ``theta``."""
    x = np.asarray(x, dtype=float)
    theta = check_natural(theta)
    return (
        np.sum(theta * x, axis=-1)
        + log_base_measure(x, n, p)
        - log_partition(theta, n)
    )


def _sigma2_and_mean(theta) -> tuple[float, np.ndarray]:
    theta = check_natural(theta)
    sigma2 = -1.0 / (2.0 * theta[-1])
    return sigma2, theta[:-1] * sigma2


def sample_suffstat(theta, n: int, p: int, count: int, seed: int) -> np.ndarray:
    """Draw ``count`` sufficient statistics under ``theta``; rows are samples.

    ``x_{1:p} ~ N(B^T A beta, sigma^2 I_p)`` and
    ``x_{p+1} = |x_{1:p}|^2 + sigma^2 Q`` with ``Q ~ chi^2(n - p)``.
    """
    if p >= n:
        raise UnsupportedError(f"sampling requires p < n (n={n}, p={p})")
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (p + 1,):
        raise DimensionError(f"theta must have length {p + 1}")
    sigma2, mean = _sigma2_and_mean(theta)
    rng = np.random.default_rng(seed)
    head = mean + math.sqrt(sigma2) * rng.standard_normal((count, p))
    q = rng.chisquare(n - p, size=count)
    tail = np.sum(head**2, axis=1) + sigma2 * q
    return np.column_stack([head, tail])


def lift_to_data(basis: DesignBasis, x) -> np.ndarray:
    """A data vector ``y`` with ``T(y) = x``: ``y = B x_{1:p} + sqrt(V(x)) v``."""
    x = np.asarray(x, dtype=float)
    if x.shape != (basis.p + 1,):
        raise DimensionError(f"x must have length {basis.p + 1}")
    v_gap = float(residual_gap(x))
    tau = 1e-10 * (1.0 + abs(x[-1]))
    if v_gap < -tau:
        raise DomainError("x lies outside the data space (V(x) < 0)")
    y = basis.B @ x[:-1]
    if v_gap <= 0:
        return y
    if basis.p >= basis.n:
        raise UnsupportedError("no lift exists for V(x) > 0 when p = n")
    return y + math.sqrt(v_gap) * basis.complement_vector()
