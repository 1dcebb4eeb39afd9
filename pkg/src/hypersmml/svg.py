"""SVG figures of SMML partitions for ``p = 1``.

The affine view draws the cells in data coordinates ``(x_1, x_2)``, clipped
to the image of the truncated domain, along with the boundary parabola
``x_2 = x_1^2``. The hyperbolic view draws the horomap image of the cells in
the upper half-plane, where cell boundaries become vertical lines or
semicircles centred on the boundary.
"""

from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

from .errors import UnsupportedError
from .hyperbolic_geom import SQRT2
from .param_maps import theta_to_u, theta_to_xi, xi_to_u
from .prior_marginal import build_grid
from .smml_estimator import SmmlCode, cell_polytope, lambda_matrix, tessellation_hyperbolic

PALETTE = ["#8dd3c7", "#ffffb3", "#bebada", "#fb8072", "#80b1d3", "#fdb462", "#b3de69", "#fccde5", "#d9d9d9", "#bc80bd"]
WIDTH = 640
MARGIN = 40


def _clip(poly: np.ndarray, a: np.ndarray, b: float) -> np.ndarray:
    """Sutherland-Hodgman clip of a closed polygon to ``a . x + b <= 0``."""
    if len(poly) == 0:
        return poly
    out = []
    vals = poly @ a + b
    for k in range(len(poly)):
        cur, nxt = poly[k], poly[(k + 1) % len(poly)]
        fc, fn = vals[k], vals[(k + 1) % len(poly)]
        if fc <= 0:
            out.append(cur)
        if (fc < 0 < fn) or (fn < 0 < fc):
            t = fc / (fc - fn)
            out.append(cur + t * (nxt - cur))
    return np.array(out).reshape(-1, poly.shape[1])


def domain_outline(code: SmmlCode, samples: int = 200) -> np.ndarray:
    """Polygon (in data coordinates) approximating the image of the u-box."""
    (lo1, lo2), (hi1, hi2) = code.domain.lower, code.domain.upper
    t = np.linspace(lo1, hi1, samples)
    s = np.linspace(lo2, hi2, samples)
    bottom = np.column_stack([t, t**2 + lo2**2 / 2])
    right = np.column_stack([np.full(samples, hi1), hi1**2 + s**2 / 2])
    top = np.column_stack([t[::-1], t[::-1] ** 2 + hi2**2 / 2])
    left = np.column_stack([np.full(samples, lo1), lo1**2 + s[::-1] ** 2 / 2])
    return np.concatenate([bottom, right[1:], top[1:], left[1:-1]])


def cell_polygons(code: SmmlCode, n: int) -> list[np.ndarray]:
    outline = domain_outline(code)
    polys = []
    for i in range(code.m):
        poly = outline
        for _, a, b in cell_polytope(code, i, n).inequalities:
            poly = _clip(poly, a, b)
        polys.append(poly)
    return polys


def adjacent_pairs(code: SmmlCode, n: int) -> set[tuple[int, int]]:
    """Pairs of cells that share a boundary somewhere on the domain grid."""
    if code.m < 2:
        return set()
    grid = build_grid(code.domain, n, code.p)
    lam = lambda_matrix(grid.x, code.assertions, code.coding_probs, n)
    order = np.argsort(lam, axis=1, kind="stable")[:, :2]
    k = code.domain.resolution
    labels = order[:, 0].reshape(k, k)
    pairs = set()
    for axis in (0, 1):
        a = np.moveaxis(labels, axis, 0)
        diff = a[1:] != a[:-1]
        for i, j in zip(a[1:][diff].ravel(), a[:-1][diff].ravel()):
            pairs.add((min(i, j), max(i, j)))
    return {(int(i), int(j)) for i, j in pairs}


def _subdivide(poly: np.ndarray, pieces: int) -> np.ndarray:
    if len(poly) < 2:
        return poly
    nxt = np.roll(poly, -1, axis=0)
    t = np.arange(pieces)[None, :, None] / pieces
    return (poly[:, None, :] + t * (nxt - poly)[:, None, :]).reshape(-1, poly.shape[1])


class _Canvas:
    def __init__(self, lo, hi, equal_aspect: bool):
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        span = hi - lo
        inner = WIDTH - 2 * MARGIN
        if equal_aspect:
            scale = inner / max(span)
            self.sx = self.sy = scale
        else:
            self.sx, self.sy = inner / span[0], inner / span[1]
        self.lo, self.hi = lo, hi
        self.width = int(round(2 * MARGIN + span[0] * self.sx))
        self.height = int(round(2 * MARGIN + span[1] * self.sy))
        self.parts: list[str] = []

    def x(self, v):
        return MARGIN + (v - self.lo[0]) * self.sx

    def y(self, v):
        return self.height - MARGIN - (v - self.lo[1]) * self.sy

    def pts(self, poly) -> str:
        return " ".join(f"{self.x(p[0]):.3f},{self.y(p[1]):.3f}" for p in poly)

    def render(self, title: str) -> str:
        head = (
            f'<?xml version="1.0" encoding="UTF-8"?>\n'
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.width}" height="{self.height}" '
            f'viewBox="0 0 {self.width} {self.height}">\n'
            f"<title>{escape(title)}</title>\n"
            f'<defs><clipPath id="view"><rect x="{MARGIN}" y="{MARGIN}" '
            f'width="{self.width - 2 * MARGIN}" height="{self.height - 2 * MARGIN}"/></clipPath></defs>\n'
        )
        return head + "\n".join(self.parts) + "\n</svg>\n"


def _cell_path(canvas: _Canvas, poly: np.ndarray, i: int) -> str:
    d = "" if len(poly) == 0 else "M " + " L ".join(canvas.pts([p]) for p in poly) + " Z"
    colour = PALETTE[i % len(PALETTE)]
    return f'<path class="cell" data-cell="{i}" d="{d}" fill="{colour}" stroke="none"/>'


def render_affine(code: SmmlCode, n: int) -> str:
    if code.p != 1:
        raise UnsupportedError(f"plots need p = 1, got p = {code.p}")
    outline = domain_outline(code)
    canvas = _Canvas(outline.min(axis=0), outline.max(axis=0), equal_aspect=False)
    for i, poly in enumerate(cell_polygons(code, n)):
        canvas.parts.append(_cell_path(canvas, poly, i))
    canvas.parts.append(
        f'<polygon class="domain" points="{canvas.pts(outline)}" fill="none" stroke="#333" stroke-width="1"/>'
    )
    t = np.linspace(canvas.lo[0], canvas.hi[0], 200)
    parab = np.column_stack([t, t**2])
    canvas.parts.append(
        f'<polyline class="paraboloid" points="{canvas.pts(parab)}" fill="none" stroke="#000" '
        f'stroke-dasharray="4 3" clip-path="url(#view)"/>'
    )
    for i, xi in enumerate(theta_to_xi(code.assertions, n)):
        canvas.parts.append(
            f'<circle class="assertion" data-cell="{i}" cx="{canvas.x(xi[0]):.3f}" cy="{canvas.y(xi[1]):.3f}" r="3" fill="#000"/>'
        )
    return canvas.render(f"SMML partition, affine view (m={code.m}, n={n})")


def _eta_u(x: np.ndarray) -> np.ndarray:
    u = xi_to_u(x)
    u[:, -1] /= SQRT2
    return u


def render_hyperbolic(code: SmmlCode, n: int) -> str:
    if code.p != 1:
        raise UnsupportedError(f"plots need p = 1, got p = {code.p}")
    (lo1, lo2), (hi1, hi2) = code.domain.lower, code.domain.upper
    lo = np.array([lo1, 0.0])
    hi = np.array([hi1, hi2 / SQRT2])
    canvas = _Canvas(lo, hi, equal_aspect=True)
    for i, poly in enumerate(cell_polygons(code, n)):
        canvas.parts.append(_cell_path(canvas, _eta_u(_subdivide(poly, 8)) if len(poly) else poly, i))
    canvas.parts.append(
        f'<line class="boundary-at-infinity" x1="{canvas.x(lo1):.3f}" y1="{canvas.y(0):.3f}" '
        f'x2="{canvas.x(hi1):.3f}" y2="{canvas.y(0):.3f}" stroke="#000"/>'
    )
    adjacent = adjacent_pairs(code, n)
    for i, planes in tessellation_hyperbolic(code, n):
        for j, plane in planes:
            if i > j or (i, j) not in adjacent:
                continue
            if plane.kind == "vertical":
                x0 = plane.d / plane.c[0]
                canvas.parts.append(
                    f'<line class="facet" data-cells="{i} {j}" x1="{canvas.x(x0):.3f}" y1="{canvas.y(0):.3f}" '
                    f'x2="{canvas.x(x0):.3f}" y2="{canvas.y(hi[1]):.3f}" stroke="#000" clip-path="url(#view)"/>'
                )
            else:
                c, R = plane.c[0], plane.R
                r = R * canvas.sx
                canvas.parts.append(
                    f'<path class="facet" data-cells="{i} {j}" d="M {canvas.x(c - R):.3f} {canvas.y(0):.3f} '
                    f'A {r:.3f} {r:.3f} 0 0 1 {canvas.x(c + R):.3f} {canvas.y(0):.3f}" fill="none" '
                    f'stroke="#000" clip-path="url(#view)"/>'
                )
    for i, u in enumerate(theta_to_u(code.assertions, n)):
        canvas.parts.append(
            f'<circle class="assertion" data-cell="{i}" cx="{canvas.x(u[0]):.3f}" cy="{canvas.y(u[1]):.3f}" r="3" fill="#000"/>'
        )
    return canvas.render(f"SMML partition, hyperbolic view (m={code.m}, n={n})")


def render(code: SmmlCode, n: int, view: str = "hyperbolic") -> str:
    if view == "affine":
        return render_affine(code, n)
    if view == "hyperbolic":
        return render_hyperbolic(code, n)
    raise ValueError(f"view must be 'affine' or 'hyperbolic', got {view!r}")
