"""Composite Gauss-Legendre product rules and the integral checks built on them."""

from __future__ import annotations

import math

import numpy as np
from scipy.stats import chi2

from .model_core import log_pdf_suffstat
from .prior_marginal import jeffreys_prior_natural


def gauss_legendre_nodes(a: float, b: float, panels: int, order: int = 16):
    """Nodes and weights of a composite Gauss-Legendre rule on ``[a, b]``."""
    t, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    nodes = (mid[:, None] + half[:, None] * t).ravel()
    weights = (half[:, None] * w).ravel()
    return nodes, weights


def product_rule_2d(f, x_rule, y_rule) -> float:
    """``sum_ij wx_i wy_j f(x_i, y_j)`` for a vectorised ``f(X, Y)``."""
    (xs, wx), (ys, wy) = x_rule, y_rule
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    vals = f(X, Y)
    return float(np.sum(wx[:, None] * wy[None, :] * vals))


def suffstat_density_mass(theta, n: int, panels: int = 24, order: int = 16) -> float:
    """Integral of the ``p = 1`` sufficient-statistic density over the data space.

    Integrates in ``(x_1, s)`` with ``x_2 = x_1^2 + s^2`` (Jacobian ``2s``),
    over a box holding all but ~1e-14 of the probability in each direction.
    """
    theta = np.asarray(theta, dtype=float)
    sigma2 = -1.0 / (2.0 * theta[-1])
    sigma = math.sqrt(sigma2)
    mean = theta[0] * sigma2
    x_rule = gauss_legendre_nodes(mean - 12 * sigma, mean + 12 * sigma, panels, order)
    s_max = math.sqrt(sigma2 * chi2.isf(1e-15, n - 1))
    s_rule = gauss_legendre_nodes(0.0, s_max, panels, order)

    def integrand(x1, s):
        x = np.stack([x1, x1 * x1 + s * s], axis=-1)
        return np.exp(log_pdf_suffstat(x, theta, n, 1)) * 2.0 * s

    return product_rule_2d(integrand, x_rule, s_rule)


def marginal_by_prior_integral(
    x,
    n: int,
    theta1_range=(-8.0, 8.0),
    theta2_range=(-40.0, -1e-3),
    panels: int = 64,
    order: int = 16,
) -> float:
    """``int pi_Theta(theta) p_X(x | theta) d theta`` over a ``p = 1`` parameter box."""
    x = np.asarray(x, dtype=float)
    t1_rule = gauss_legendre_nodes(*theta1_range, panels, order)
    # the integrand decays like exp(theta_2 V) with a power-law factor near 0:
    # panel edges are geometric in |theta_2|
    lo, hi = theta2_range
    edges = -np.geomspace(-lo, -hi, panels + 1)
    t, w = np.polynomial.legendre.leggauss(order)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    t2_rule = ((mid[:, None] + half[:, None] * t).ravel(), (half[:, None] * w).ravel())

    def integrand(t1, t2):
        theta = np.stack([t1, t2], axis=-1)
        return jeffreys_prior_natural(theta, n, 1) * np.exp(log_pdf_suffstat(x, theta, n, 1))

    return product_rule_2d(integrand, t1_rule, t2_rule)
