"""Natural, expectation and upper half-space coordinates and their Fisher metrics.

All three coordinate systems live in ``R^{p+1}``, so points passed through
:func:`reparameterize` carry an explicit :class:`System` tag. The bare array
maps (``theta_to_xi`` and friends) accept stacked inputs along leading axes.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, DomainError
from .model_core import DesignBasis, check_natural, residual_gap


class System(enum.Enum):
    NATURAL = "natural"
    EXPECTATION = "expectation"
    UPPER_HALF = "upper-half"


def check_expectation(xi) -> np.ndarray:
    xi = np.asarray(xi, dtype=float)
    if np.any(~(residual_gap(xi) > 0)):
        raise DomainError("expectation parameter requires V(xi) > 0")
    return xi


def check_upper_half(u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if np.any(~(u[..., -1] > 0)):
        raise DomainError("upper half-space point requires u_{p+1} > 0")
    return u


_CHECKS = {
    System.NATURAL: check_natural,
    System.EXPECTATION: check_expectation,
    System.UPPER_HALF: check_upper_half,
}


@dataclass(frozen=True)
class ModelPoint:
    """A point of the model tagged with its coordinate system."""

    coords: np.ndarray
    system: System

    def __post_init__(self):
        coords = _CHECKS[self.system](self.coords)
        if coords.ndim != 1 or coords.size < 2:
            raise DimensionError("a model point is a single (p+1)-vector with p >= 1")
        object.__setattr__(self, "coords", coords)

    @property
    def p(self) -> int:
        return self.coords.size - 1


# -- Table of reparameterisation maps ------------------------------------


def theta_to_xi(theta, n: int) -> np.ndarray:
    theta = check_natural(theta)
    s = -2.0 * theta[..., -1:]
    head = theta[..., :-1] / s
    tail = (n + np.sum(theta[..., :-1] ** 2, axis=-1, keepdims=True) / s) / s
    return np.concatenate([head, tail], axis=-1)


def xi_to_theta(xi, n: int) -> np.ndarray:
    xi = check_expectation(xi)
    scale = n / residual_gap(xi)[..., None]
    half = np.full(xi.shape[:-1] + (1,), -0.5)
    return scale * np.concatenate([xi[..., :-1], half], axis=-1)


def u_to_xi(u) -> np.ndarray:
    u = check_upper_half(u)
    head = u[..., :-1]
    tail = np.sum(head**2, axis=-1, keepdims=True) + 0.5 * u[..., -1:] ** 2
    return np.concatenate([head, tail], axis=-1)


def xi_to_u(xi) -> np.ndarray:
    xi = check_expectation(xi)
    tail = np.sqrt(2.0 * residual_gap(xi))[..., None]
    return np.concatenate([xi[..., :-1], tail], axis=-1)


def theta_to_u(theta, n: int) -> np.ndarray:
    theta = check_natural(theta)
    s = -2.0 * theta[..., -1:]
    tail = np.sqrt(-4.0 * n * theta[..., -1:])
    return np.concatenate([theta[..., :-1], tail], axis=-1) / s


def u_to_theta(u, n: int) -> np.ndarray:
    u = check_upper_half(u)
    scale = 2.0 * n / u[..., -1:] ** 2
    half = np.full(u.shape[:-1] + (1,), -0.5)
    return scale * np.concatenate([u[..., :-1], half], axis=-1)


_MAPS = {
    (System.NATURAL, System.EXPECTATION): theta_to_xi,
    (System.EXPECTATION, System.NATURAL): xi_to_theta,
    (System.UPPER_HALF, System.EXPECTATION): lambda u, n: u_to_xi(u),
    (System.EXPECTATION, System.UPPER_HALF): lambda xi, n: xi_to_u(xi),
    (System.NATURAL, System.UPPER_HALF): theta_to_u,
    (System.UPPER_HALF, System.NATURAL): u_to_theta,
}


def reparameterize(point: ModelPoint, to: System, n: int) -> ModelPoint:
    """Express ``point`` in the coordinate system ``to``."""
    to = System(to)
    if point.system is to:
        return point
    return ModelPoint(_MAPS[point.system, to](point.coords, n), to)


def from_beta_sigma(basis: DesignBasis, beta, sigma: float) -> ModelPoint:
    """Upper half-space coordinates ``(B^T A beta, sigma sqrt(2n))``."""
    if not sigma > 0:
        raise DomainError(f"sigma must be positive, got {sigma}")
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    head = basis.B.T @ (basis.A @ beta)
    return ModelPoint(np.append(head, sigma * math.sqrt(2 * basis.n)), System.UPPER_HALF)


# -- Fisher information ---------------------------------------------------


@dataclass(frozen=True)
class FisherMatrix:
    g: np.ndarray
    system: System

    def __post_init__(self):
        g = np.asarray(self.g, dtype=float)
        if g.ndim != 2 or g.shape[0] != g.shape[1]:
            raise DimensionError(f"Fisher matrix must be square, got {g.shape}")
        if not np.allclose(g, g.T, rtol=0, atol=1e-12 * max(1.0, np.abs(g).max())):
            raise DomainError("Fisher matrix is not symmetric")
        np.linalg.cholesky(g)  # raises LinAlgError unless positive definite
        object.__setattr__(self, "g", g)

    def __array__(self, dtype=None, copy=None):
        return self.g if dtype is None else self.g.astype(dtype)


def fisher_upper_half(u, n: int) -> FisherMatrix:
    """``2n u_{p+1}^{-2} I_{p+1}``."""
    u = check_upper_half(u)
    return FisherMatrix(2.0 * n / u[-1] ** 2 * np.eye(u.size), System.UPPER_HALF)


def fisher_natural(theta, n: int) -> FisherMatrix:
    """Hessian of the log-partition function, in closed block form."""
    theta = check_natural(theta)
    t = theta[-1]
    head = theta[:-1]
    k = theta.size
    g = np.zeros((k, k))
    g[:-1, :-1] = np.eye(k - 1)
    g[:-1, -1] = g[-1, :-1] = -head / t
    g[-1, -1] = -n / t + np.dot(head, head) / t**2
    return FisherMatrix(g / (-2.0 * t), System.NATURAL)


def fisher_expectation(xi, n: int) -> FisherMatrix:
    """Inverse of the natural-coordinate Fisher matrix at ``theta(xi)``."""
    g = np.linalg.inv(fisher_natural(xi_to_theta(xi, n), n).g)
    return FisherMatrix(0.5 * (g + g.T), System.EXPECTATION)


def pullback_metric(J, g) -> np.ndarray:
    """``J^T g J`` for a Jacobian ``J`` of shape (m, k) and metric ``g`` (m, m)."""
    J = np.asarray(J, dtype=float)
    g = np.asarray(g, dtype=float)
    if J.ndim != 2 or g.shape != (J.shape[0], J.shape[0]):
        raise DimensionError(f"cannot pull back metric {g.shape} through Jacobian {J.shape}")
    out = J.T @ g @ J
    return 0.5 * (out + out.T)


# -- Monte-Carlo estimate of the upper half-space Fisher matrix -----------


def loglik_upper_half(basis: DesignBasis, u, y) -> np.ndarray:
    """Log-likelihood of data ``y`` (stackable) at upper half-space point ``u``."""
    u = check_upper_half(u)
    n = basis.n
    y = np.asarray(y, dtype=float)
    r = y - basis.B @ u[:-1]
    h = u[-1]
    return -0.5 * n * math.log(math.pi / n) - n * math.log(h) - n * np.sum(r * r, axis=-1) / h**2


def score_and_hessian_upper_half(basis: DesignBasis, u, y) -> tuple[np.ndarray, np.ndarray]:
    """Per-sample gradient (N, k) and Hessian (N, k, k) of :func:`loglik_upper_half`."""
    u = check_upper_half(u)
    n, p = basis.n, basis.p
    y = np.atleast_2d(np.asarray(y, dtype=float))
    h = u[-1]
    r = y - basis.B @ u[:-1]
    rb = r @ basis.B  # (N, p)
    rr = np.sum(r * r, axis=1)
    N = y.shape[0]
    grad = np.empty((N, p + 1))
    grad[:, :p] = 2 * n / h**2 * rb
    grad[:, p] = -n / h + 2 * n * rr / h**3
    hess = np.zeros((N, p + 1, p + 1))
    hess[:, np.arange(p), np.arange(p)] = -2 * n / h**2
    hess[:, :p, p] = hess[:, p, :p] = -4 * n / h**3 * rb
    hess[:, p, p] = n / h**2 - 6 * n * rr / h**4
    return grad, hess


@dataclass
class MonteCarloFisher:
    neg_hessian: np.ndarray
    neg_hessian_se: np.ndarray
    score_outer: np.ndarray
    score_outer_se: np.ndarray
    count: int


def monte_carlo_fisher_upper_half(
    basis: DesignBasis, u, count: int, seed: int, chunk: int = 20000
) -> MonteCarloFisher:
    """Estimate ``-E[Hess l]`` and ``E[grad l grad l^T]`` by simulating datasets."""
    u = check_upper_half(u)
    n, p = basis.n, basis.p
    sigma = u[-1] / math.sqrt(2 * n)
    mean = basis.B @ u[:-1]
    rng = np.random.default_rng(seed)
    k = p + 1
    sums = {name: np.zeros((k, k)) for name in ("h", "h2", "s", "s2")}
    done = 0
    while done < count:
        m = min(chunk, count - done)
        y = mean + sigma * rng.standard_normal((m, n))
        grad, hess = score_and_hessian_upper_half(basis, u, y)
        outer = grad[:, :, None] * grad[:, None, :]
        sums["h"] += -hess.sum(axis=0)
        sums["h2"] += (hess**2).sum(axis=0)
        sums["s"] += outer.sum(axis=0)
        sums["s2"] += (outer**2).sum(axis=0)
        done += m

    def _mean_se(s1, s2):
        mu = s1 / count
        var = np.maximum(s2 / count - mu**2, 0.0) * count / max(count - 1, 1)
        return mu, np.sqrt(var / count)

    h_mu, h_se = _mean_se(sums["h"], sums["h2"])
    s_mu, s_se = _mean_se(sums["s"], sums["s2"])
    return MonteCarloFisher(h_mu, h_se, s_mu, s_se, count)
