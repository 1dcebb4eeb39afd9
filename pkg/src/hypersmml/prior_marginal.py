"""Jeffreys prior, the marginal density of the sufficient statistic, and grids.

With the (improper) Jeffreys prior on the natural parameters the marginal
density of ``X`` is ``r(x) = c_r V(x)^{-(p+2)/2}``, a constant multiple of the
hyperbolic volume density. ``r`` is not integrable on the whole data space, so
everything downstream works on a compact box of upper half-space coordinates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.special import gammaln

from .errors import DomainError, UnsupportedError
from .hyperbolic_geom import volume_to_marginal_ratio
from .model_core import check_natural, residual_gap
from .param_maps import u_to_xi


def jeffreys_prior_natural(theta, n: int, p: int | None = None) -> np.ndarray | float:
    """``sqrt(det g_Theta) = sqrt(n) 2^{-(p+1)/2} (-theta_{p+1})^{-(p+2)/2}``."""
    theta = check_natural(theta)
    if p is None:
        p = theta.shape[-1] - 1
    return np.exp(
        0.5 * math.log(n) - 0.5 * (p + 1) * math.log(2) - 0.5 * (p + 2) * np.log(-theta[..., -1])
    )


def log_marginal_const(n: int, p: int) -> float:
    """``log c_r`` with ``c_r = sqrt(n) 2^{(p-1)/2} Gamma(n/2) / Gamma((n-p)/2)``."""
    if p >= n:
        raise UnsupportedError(f"the marginal density needs p < n (n={n}, p={p})")
    return 0.5 * math.log(n) + 0.5 * (p - 1) * math.log(2) + gammaln(n / 2) - gammaln((n - p) / 2)


def log_marginal_density(x, n: int, p: int) -> np.ndarray | float:
    v = residual_gap(x)
    if np.any(~(v > 0)):
        raise DomainError("marginal density requires V(x) > 0")
    return log_marginal_const(n, p) - 0.5 * (p + 2) * np.log(v)


def marginal_density(x, n: int, p: int) -> np.ndarray | float:
    """``r(x) = c_r V(x)^{-(p+2)/2}``."""
    return np.exp(log_marginal_density(x, n, p))


def density_ratio_constant(n: int, p: int) -> float:
    """Volume density divided by marginal density; constant in ``x``."""
    if p >= n:
        raise UnsupportedError(f"ratio needs p < n (n={n}, p={p})")
    return volume_to_marginal_ratio(n, p)


# -- truncated domain ---------------------------------------------------------


@dataclass(frozen=True)
class TruncatedDomain:
    """Axis-aligned box in upper half-space coordinates, split into a grid."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]
    resolution: int = 64

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lower)
        hi = tuple(float(v) for v in self.upper)
        if len(lo) != len(hi) or len(lo) < 2:
            raise DomainError("domain bounds must be (p+1)-vectors with p >= 1")
        if not all(a < b for a, b in zip(lo, hi)):
            raise DomainError("domain requires lower < upper componentwise")
        if not lo[-1] > 0:
            raise DomainError("domain requires lower_{p+1} > 0")
        if int(self.resolution) < 2:
            raise DomainError("resolution must be at least 2")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        object.__setattr__(self, "resolution", int(self.resolution))

    @property
    def p(self) -> int:
        return len(self.lower) - 1

    @classmethod
    def default(cls, p: int = 1, resolution: int = 64) -> "TruncatedDomain":
        return cls((-2.0,) * p + (0.5,), (2.0,) * p + (4.0,), resolution)

    def with_resolution(self, resolution: int) -> "TruncatedDomain":
        return TruncatedDomain(self.lower, self.upper, resolution)


@dataclass(frozen=True)
class QuadratureGrid:
    """Midpoint-rule cells of a :class:`TruncatedDomain`.

    ``u`` are cell centres, ``x`` their expectation/data coordinates and
    ``mass`` the unnormalised marginal mass ``r(x(u)) u_{p+1} dU`` per cell.
    Points are in C order over the axes, which fixes every reduction order.
    """

    domain: TruncatedDomain
    n: int
    u: np.ndarray
    x: np.ndarray
    mass: np.ndarray

    @cached_property
    def total(self) -> float:
        return float(math.fsum(self.mass))

    @cached_property
    def weights(self) -> np.ndarray:
        return self.mass / self.total

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.domain.resolution,) * (self.domain.p + 1)


def build_grid(domain: TruncatedDomain, n: int, p: int | None = None) -> QuadratureGrid:
    if p is None:
        p = domain.p
    if p != domain.p:
        raise DomainError(f"domain has dimension {domain.p + 1}, expected {p + 1}")
    if p >= n:
        raise UnsupportedError(f"the marginal density needs p < n (n={n}, p={p})")
    k = domain.resolution
    lo = np.array(domain.lower)
    hi = np.array(domain.upper)
    width = (hi - lo) / k
    axes = [lo[i] + width[i] * (np.arange(k) + 0.5) for i in range(p + 1)]
    u = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, p + 1)
    x = u_to_xi(u)
    # V(x(u)) = u_{p+1}^2 / 2 exactly; use it rather than the cancelling difference
    h = u[:, -1]
    log_r = log_marginal_const(n, p) - 0.5 * (p + 2) * np.log(0.5 * h * h)
    mass = np.exp(log_r) * h * float(np.prod(width))
    return QuadratureGrid(domain, n, u, x, mass)


def truncated_mass(domain: TruncatedDomain, n: int, p: int | None = None, resolution: int | None = None) -> float:
    """Marginal mass of the image of the u-box, by the midpoint rule in u."""
    if resolution is not None:
        domain = domain.with_resolution(resolution)
    return build_grid(domain, n, p).total
