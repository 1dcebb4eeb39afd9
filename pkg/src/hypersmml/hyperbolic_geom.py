"""Geometry of the upper half-space with metric ``2n u_{p+1}^{-2} I``.

This is ordinary hyperbolic space with every length multiplied by
``sqrt(2n)``, so sectional curvatures are ``-1/(2n)``. The horomap pushes a
point straight down towards the boundary by a unit-curvature distance of
``log sqrt 2``; conjugated into expectation coordinates it carries affine
hyperplanes to hyperbolic ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .errors import DegenerateGeodesicError, DimensionError, DomainError, EmptyPlaneError, ExpansionError
from .model_core import residual_gap
from .param_maps import check_expectation, check_upper_half

SQRT2 = math.sqrt(2.0)


def hyperbolic_distance(u, w, n: int) -> np.ndarray | float:
    """Fisher-metric distance ``sqrt(2n) arcosh(1 + |u-w|^2 / (2 u_{p+1} w_{p+1}))``.

    Evaluated as ``2 asinh(|u-w| / (2 sqrt(u_{p+1} w_{p+1})))``, which is the
    same quantity without the cancellation near ``u = w``.
    """
    u = check_upper_half(u)
    w = check_upper_half(w)
    chord = np.linalg.norm(u - w, axis=-1)
    return math.sqrt(2 * n) * 2.0 * np.arcsinh(chord / (2.0 * np.sqrt(u[..., -1] * w[..., -1])))


def geodesic_point(u, w, t: float, n: int | None = None) -> np.ndarray:
    """Point at arclength fraction ``t`` along the geodesic from ``u`` to ``w``.

    The constant metric factor does not change geodesics, so ``n`` is accepted
    only for interface symmetry. The interpolation is done on the hyperboloid
    model, where the geodesic is ``(sinh((1-t)D) X_u + sinh(tD) X_w) / sinh D``.
    In half-space terms only the quantities ``1/h`` and ``x/h`` are blended, with
    positive weights for ``0 <= t <= 1``, which stays accurate for nearly vertical
    geodesics where a semicircle parametrisation loses digits.
    """
    u = check_upper_half(u)
    w = check_upper_half(w)
    if np.array_equal(u, w):
        raise DegenerateGeodesicError("geodesic between identical points is undefined")
    D = 2.0 * math.asinh(float(np.linalg.norm(u - w)) / (2.0 * math.sqrt(u[-1] * w[-1])))
    if D == 0.0:
        raise DegenerateGeodesicError("points are numerically identical")
    wu = math.sinh((1.0 - t) * D) / math.sinh(D)
    ww = math.sinh(t * D) / math.sinh(D)
    inv_h = wu / u[-1] + ww / w[-1]
    out = np.empty_like(u)
    out[:-1] = (wu * u[:-1] / u[-1] + ww * w[:-1] / w[-1]) / inv_h
    out[-1] = 1.0 / inv_h
    return out


def horomap_uh(u, inverse: bool = False) -> np.ndarray:
    """``(u_{1:p}, u_{p+1}/sqrt 2)``, or its inverse."""
    u = check_upper_half(u).copy()
    u[..., -1] = u[..., -1] * SQRT2 if inverse else u[..., -1] / SQRT2
    return u


def horomap_xi(xi, direction: str = "forward") -> np.ndarray:
    """The horomap in expectation coordinates.

    forward: ``(xi_{1:p}, xi_{p+1} - V(xi)/2)``;
    inverse: ``(xi_{1:p}, xi_{p+1} + V(xi))``.
    """
    xi = check_expectation(xi).copy()
    v = residual_gap(xi)
    if direction == "forward":
        xi[..., -1] = xi[..., -1] - 0.5 * v
    elif direction == "inverse":
        xi[..., -1] = xi[..., -1] + v
    else:
        raise ValueError(f"direction must be 'forward' or 'inverse', got {direction!r}")
    return xi


@dataclass(frozen=True)
class AffineFunctional:
    """``L(xi) = a . xi + b``."""

    a: np.ndarray
    b: float

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        if a.ndim != 1 or not np.any(a != 0):
            raise DomainError("affine functional needs a non-zero coefficient vector")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", float(self.b))

    def __call__(self, xi):
        return np.asarray(xi, dtype=float) @ self.a + self.b


@dataclass(frozen=True)
class HyperbolicPlane:
    """A hyperbolic hyperplane in upper half-space coordinates.

    ``kind == "sphere"``: ``{|u - c| = R}`` with ``c_{p+1} = 0``.
    ``kind == "vertical"``: ``{c . u = d}`` with ``c_{p+1} = 0``.

    ``orientation`` is the sign relating :meth:`level` to the affine
    functional the plane came from: ``L(horomap preimage of u)`` has the sign of
    ``orientation * level(u)``.
    """

    kind: str
    c: np.ndarray
    R: float | None = None
    d: float | None = None
    orientation: float = field(default=1.0, compare=False)

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float)
        object.__setattr__(self, "c", c)
        if c[-1] != 0:
            raise DomainError("plane centre/normal must have zero last coordinate")
        if self.kind == "sphere":
            if self.R is None or not self.R > 0:
                raise DomainError("sphere plane requires R > 0")
        elif self.kind == "vertical":
            if self.d is None or not np.any(c != 0):
                raise DomainError("vertical plane requires c != 0 and an offset d")
        else:
            raise ValueError(f"unknown plane kind {self.kind!r}")

    def level(self, u) -> np.ndarray:
        """``|u-c|^2 - R^2`` (sphere) or ``c . u - d`` (vertical)."""
        u = np.asarray(u, dtype=float)
        if self.kind == "sphere":
            return np.sum((u - self.c) ** 2, axis=-1) - self.R**2
        return u @ self.c - self.d

    def residual(self, u) -> np.ndarray:
        """Unsquared distance-like residual used for membership tolerances."""
        u = np.asarray(u, dtype=float)
        if self.kind == "sphere":
            return np.linalg.norm(u - self.c, axis=-1) - self.R
        return self.level(u)

    def to_dict(self) -> dict:
        out = {"variant": self.kind, "c": self.c.tolist()}
        if self.kind == "sphere":
            out["R"] = self.R
        else:
            out["d"] = self.d
        return out


def affine_to_hyperbolic_plane(
    L: AffineFunctional, p: int | None = None, vertical_tol: float = 1e-12
) -> HyperbolicPlane:
    """Hyperbolic plane (in u-coordinates) holding the horomap image of ``{L = 0}``.

    A last coefficient below ``vertical_tol * max|a'|`` is treated as zero, so
    facets that are vertical up to rounding do not become spheres with
    astronomically large radii.
    """
    a, b = L.a, L.b
    if p is not None and a.size != p + 1:
        raise DimensionError(f"functional has {a.size} coefficients, expected {p + 1}")
    last = a[-1]
    head_scale = float(np.max(np.abs(a[:-1]))) if a.size > 1 else 0.0
    if abs(last) > vertical_tol * head_scale:
        c = np.zeros_like(a)
        c[:-1] = -a[:-1] / (2.0 * last)
        R2 = -b / last + np.sum(c**2)
        if not R2 > 0:
            raise EmptyPlaneError(f"zero set of L misses the expectation space (R^2 = {R2:.3e})")
        return HyperbolicPlane("sphere", c, R=math.sqrt(R2), orientation=math.copysign(1.0, last))
    if not np.any(a[:-1] != 0):
        raise EmptyPlaneError("constant functional has no hyperplane zero set")
    c = a.copy()
    c[-1] = 0.0
    return HyperbolicPlane("vertical", c, d=-b, orientation=1.0)


# -- curvature --------------------------------------------------------------


def _geodesic_rhs(state: np.ndarray) -> np.ndarray:
    # conformal metric lambda/h^2 I: Christoffel symbols do not depend on lambda
    k = state.shape[-1] // 2
    v = state[..., k:]
    h = state[..., k - 1 : k]
    acc = 2.0 * v * v[..., -1:] / h
    acc[..., -1] -= np.sum(v * v, axis=-1) / h[..., 0]
    return np.concatenate([v, acc], axis=-1)


def shoot_geodesic(u, velocity, length: float, steps: int = 64) -> np.ndarray:
    """Integrate the geodesic equation with classical RK4 over parameter ``[0, length]``.

    ``velocity`` may be stacked (one row per geodesic); the endpoints are
    returned with the same leading shape.
    """
    velocity = np.asarray(velocity, dtype=float)
    base = np.broadcast_to(np.asarray(u, dtype=float), velocity.shape)
    state = np.concatenate([base, velocity], axis=-1)
    dt = length / steps
    for _ in range(steps):
        k1 = _geodesic_rhs(state)
        k2 = _geodesic_rhs(state + 0.5 * dt * k1)
        k3 = _geodesic_rhs(state + 0.5 * dt * k2)
        k4 = _geodesic_rhs(state + dt * k3)
        state = state + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    return state[..., : velocity.shape[-1]]


def sectional_curvature_estimate(
    u,
    e1,
    e2,
    r: float | None = None,
    n: int = 1,
    points: int = 720,
    steps: int = 64,
) -> float:
    """Estimate the sectional curvature of span(e1, e2) at ``u``.

    Points at geodesic distance ``r`` are found by shooting unit-speed
    geodesics; the circle's length ``C`` (chord sum, Richardson-corrected
    against the half-resolution polygon) then gives
    ``K = 6 (1 - C / (2 pi r)) / r^2``. Default ``r`` makes
    ``sqrt(2n) r = 0.05``.
    """
    u = check_upper_half(u)
    if r is None:
        r = 0.05 / math.sqrt(2 * n)
    if not r > 0:
        raise DomainError("radius must be positive")
    if points % 2:
        raise ValueError("points must be even")
    e1 = np.asarray(e1, dtype=float)
    e2 = np.asarray(e2, dtype=float)
    # the metric is conformal, so Euclidean Gram-Schmidt gives g-orthogonal directions
    f1 = e1 / np.linalg.norm(e1)
    f2 = e2 - np.dot(e2, f1) * f1
    nrm = np.linalg.norm(f2)
    if nrm < 1e-12 * np.linalg.norm(e2):
        raise DomainError("tangent directions are linearly dependent")
    f2 = f2 / nrm
    speed = u[-1] / math.sqrt(2 * n)  # Euclidean length of a g-unit vector at u
    angles = 2 * math.pi * np.arange(points) / points
    dirs = np.cos(angles)[:, None] * f1 + np.sin(angles)[:, None] * f2
    ring = shoot_geodesic(u, speed * dirs, r, steps)

    def perimeter(pts):
        return float(np.sum(hyperbolic_distance(pts, np.roll(pts, -1, axis=0), n)))

    C = (4.0 * perimeter(ring) - perimeter(ring[::2])) / 3.0
    K = 6.0 * (1.0 - C / (2 * math.pi * r)) / r**2
    # next term of 2 pi r (1 - K r^2/6 + K^2 r^4/120 - ...) relative to the r^2 term
    if abs(K) * r**2 / 20.0 > 0.1:
        raise ExpansionError(f"radius {r} too large for the small-circle expansion (K ~ {K:.3g})")
    return K


# -- volume -----------------------------------------------------------------


def hyperbolic_volume_density(xi, n: int, p: int) -> np.ndarray | float:
    """Riemannian volume density ``n^{(p+1)/2} 2^{-1/2} V(xi)^{-(p+2)/2}`` on expectation space."""
    xi = check_expectation(xi)
    v = residual_gap(xi)
    return np.exp(0.5 * (p + 1) * math.log(n) - 0.5 * math.log(2) - 0.5 * (p + 2) * np.log(v))


def volume_to_marginal_ratio(n: int, p: int) -> float:
    """``Gamma((n-p)/2) / Gamma(n/2) (n/2)^{p/2}``."""
    return math.exp(gammaln((n - p) / 2) - gammaln(n / 2) + 0.5 * p * math.log(n / 2))
