"""Strict minimum message length codes on a truncated data domain.

A code is ``m`` assertions ``theta_i`` with coding probabilities ``q_i``. Each
data point goes to the cell minimising the affine score
``lambda_i(x) = -log q_i - x . theta_i + log Z(theta_i)``, so cells are convex
polytopes. The expected message length ``I1`` is taken under the marginal
density renormalised on a :class:`TruncatedDomain` and evaluated on its
midpoint grid; all lengths are in nats.

:func:`fit_smml` minimises ``I1`` by block-coordinate descent: reassign grid
points, then set each ``q_i`` to its cell's mass and each ``theta_i`` to the
natural parameter of its cell's centroid. Both blocks are exact minimisers on
the grid, so ``I1`` never increases between reseeding events.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DomainError, EmptyCellError, EmptyPlaneError, UnsupportedError
from .hyperbolic_geom import AffineFunctional, HyperbolicPlane, affine_to_hyperbolic_plane
from .model_core import check_natural, log_base_measure, log_partition
from .param_maps import xi_to_theta
from .prior_marginal import QuadratureGrid, TruncatedDomain, build_grid

logger = logging.getLogger(__name__)

THREADS_ENV = "HYPERSMML_THREADS"
MIN_DOMAIN_MASS = 1e-12


@dataclass(frozen=True)
class SmmlCode:
    assertions: np.ndarray
    coding_probs: np.ndarray
    domain: TruncatedDomain
    I1: float = math.nan
    iterations: int = 0
    history: tuple = field(default=(), compare=False, repr=False)
    converged: bool = field(default=False, compare=False)

    def __post_init__(self):
        thetas = np.atleast_2d(np.asarray(self.assertions, dtype=float))
        q = np.atleast_1d(np.asarray(self.coding_probs, dtype=float))
        if thetas.shape[0] != q.size:
            raise DomainError("need one coding probability per assertion")
        if thetas.shape[1] != self.domain.p + 1:
            raise DomainError("assertion dimension does not match the domain")
        if np.any(~(q > 0)):
            raise DomainError("coding probabilities must be positive")
        if abs(math.fsum(q) - 1.0) > 1e-9:
            raise DomainError(f"coding probabilities sum to {math.fsum(q)!r}, not 1")
        check_natural(thetas)
        object.__setattr__(self, "assertions", thetas)
        object.__setattr__(self, "coding_probs", q)

    @property
    def m(self) -> int:
        return self.coding_probs.size

    @property
    def p(self) -> int:
        return self.domain.p


@dataclass(frozen=True)
class CellPolytope:
    """Cell ``index`` is ``{x : a . x + b <= 0}`` for every ``(j, a, b)``."""

    index: int
    inequalities: list

    def contains(self, x, slack: float = 1e-9) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        ok = np.ones(x.shape[0], dtype=bool)
        for _, a, b in self.inequalities:
            ok &= x @ a + b <= slack
        return ok


# -- scores and assignment ----------------------------------------------------


def lambda_score(x, theta_i, q_i: float, n: int) -> np.ndarray | float:
    """``-log q_i - x . theta_i + log Z(theta_i)``."""
    if not q_i > 0:
        raise DomainError("coding probability must be positive")
    x = np.asarray(x, dtype=float)
    theta_i = check_natural(theta_i)
    return -math.log(q_i) - x @ theta_i + float(log_partition(theta_i, n))


def lambda_matrix(x, thetas, q, n: int) -> np.ndarray:
    """Scores of every point (rows) against every assertion (columns)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    offsets = -np.log(q) + log_partition(thetas, n)
    return offsets[None, :] - x @ np.asarray(thetas).T


def assign_cell(x, code: SmmlCode, n: int) -> np.ndarray | int:
    """Index of the cell containing ``x``; ties go to the lowest index."""
    x = np.asarray(x, dtype=float)
    labels = np.argmin(lambda_matrix(x, code.assertions, code.coding_probs, n), axis=1)
    return int(labels[0]) if x.ndim == 1 else labels


def _expected_length(grid: QuadratureGrid, log_h: np.ndarray, labels, thetas, q) -> float:
    # -log q_i - log p(x|theta_i) = lambda_i(x) - log h(x)
    lam = lambda_matrix(grid.x, thetas, q, grid.n)
    chosen = lam[np.arange(labels.size), labels]
    return float(np.dot(grid.weights, chosen - log_h))


class _Problem:
    """Grid, base measure and dimensions shared by the routines below."""

    def __init__(self, domain: TruncatedDomain, n: int, p: int):
        if p >= n:
            raise UnsupportedError(f"SMML codes need p < n (n={n}, p={p})")
        self.grid = build_grid(domain, n, p)
        if self.grid.total < MIN_DOMAIN_MASS:
            raise DomainError(f"domain marginal mass {self.grid.total:.3e} is too small")
        self.n, self.p, self.domain = n, p, domain
        self.log_h = log_base_measure(self.grid.x, n, p)

    def assign(self, thetas, q) -> np.ndarray:
        return np.argmin(lambda_matrix(self.grid.x, thetas, q, self.n), axis=1)

    def length(self, labels, thetas, q) -> float:
        return _expected_length(self.grid, self.log_h, labels, thetas, q)

    def cell_stats(self, labels, m: int):
        w = self.grid.weights
        mass = np.bincount(labels, weights=w, minlength=m)
        moments = np.stack(
            [np.bincount(labels, weights=w * self.grid.x[:, j], minlength=m) for j in range(self.p + 1)],
            axis=1,
        )
        return mass, moments

    def partition_length(self, labels, m: int) -> float:
        """``I1`` of the best code whose cells are ``labels``."""
        mass, moments = self.cell_stats(labels, m)
        return float(np.sum(_cell_cost(mass, moments, self.n))) - float(np.dot(self.grid.weights, self.log_h))

    def update(self, labels, m: int):
        mass, moments = self.cell_stats(labels, m)
        empty = np.flatnonzero(mass <= 0)
        if empty.size:
            raise EmptyCellError(empty)
        q = mass / math.fsum(mass)
        thetas = xi_to_theta(moments / mass[:, None], self.n)
        return thetas, q


_PROBLEMS: dict = {}


def _problem(domain: TruncatedDomain, n: int, p: int) -> _Problem:
    key = (domain, n, p)
    prob = _PROBLEMS.get(key)
    if prob is None:
        if len(_PROBLEMS) > 8:
            _PROBLEMS.clear()
        prob = _PROBLEMS[key] = _Problem(domain, n, p)
    return prob


def message_length_I1(code: SmmlCode, n: int, p: int | None = None) -> float:
    """Expected two-part message length (nats) of ``code`` on its domain grid."""
    prob = _problem(code.domain, n, code.p if p is None else p)
    labels = prob.assign(code.assertions, code.coding_probs)
    return prob.length(labels, code.assertions, code.coding_probs)


def update_weights_and_assertions(code: SmmlCode, n: int, p: int | None = None) -> SmmlCode:
    """One update of coding probabilities and assertions with cells held fixed."""
    prob = _problem(code.domain, n, code.p if p is None else p)
    labels = prob.assign(code.assertions, code.coding_probs)
    thetas, q = prob.update(labels, code.m)
    return SmmlCode(thetas, q, code.domain, prob.length(labels, thetas, q), code.iterations + 1)


# -- fitting ----------------------------------------------------------------------


@dataclass
class _RestartResult:
    thetas: np.ndarray
    q: np.ndarray
    I1: float
    iterations: int
    history: list
    converged: bool


def _reseed(prob: _Problem, labels, thetas, q, empty) -> tuple[np.ndarray, np.ndarray]:
    """Move each empty cell's assertion to the worst-covered grid point."""
    thetas = thetas.copy()
    q = q.copy()
    lam_min = lambda_matrix(prob.grid.x, thetas, q, prob.n).min(axis=1)
    order = np.argsort(-lam_min, kind="stable")
    m = q.size
    for rank, j in enumerate(empty):
        k = order[rank]
        thetas[j] = xi_to_theta(prob.grid.x[k], prob.n)
        q[j] = 1.0 / m
    return thetas, q / math.fsum(q)


def _cell_cost(mass, moments, n: int) -> np.ndarray:
    """Message length contributed by cells with optimal ``q`` and ``theta``.

    For a cell of mass ``M`` and first moment ``S`` this is
    ``-M log M + M (n/2) (log(V(S/M)/n) + 1)``; summing over cells and
    subtracting ``E[log h]`` gives ``I1``.
    """
    mass = np.asarray(mass, dtype=float)
    mean = moments / mass[..., None]
    gap = mean[..., -1] - np.sum(mean[..., :-1] ** 2, axis=-1)
    return -mass * np.log(mass) + mass * 0.5 * n * (np.log(gap / n) + 1.0)


def _polish(prob: _Problem, labels: np.ndarray, m: int, max_moves: int, history: list) -> int:
    """Move single grid points between cells while that strictly lowers ``I1``.

    Lloyd iterations on a grid can stall with a cell boundary one grid line
    away from where the continuous update would put it; exact point transfers
    get past that. ``labels`` is modified in place; returns the move count.
    """
    w = prob.grid.weights
    x = prob.grid.x
    mass, moments = prob.cell_stats(labels, m)
    cost = _cell_cost(mass, moments, prob.n)
    const = -float(np.dot(w, prob.log_h))
    moves = 0
    while moves < max_moves:
        src = labels
        wm = w[:, None] * x
        # cost of each point's source cell after removing the point
        rem_mass = mass[src] - w
        ok = rem_mass > 0
        safe_mass = np.where(ok, rem_mass, 1.0)
        rem_cost = np.where(ok, _cell_cost(safe_mass, moments[src] - wm, prob.n), np.inf)
        best_gain, best_k, best_dst = 0.0, -1, -1
        for dst in range(m):
            add_cost = _cell_cost(mass[dst] + w, moments[dst] + wm, prob.n)
            delta = rem_cost + add_cost - cost[src] - cost[dst]
            delta[src == dst] = np.inf
            k = int(np.argmin(delta))
            if delta[k] < best_gain:
                best_gain, best_k, best_dst = float(delta[k]), k, dst
        total = float(np.sum(cost)) + const
        if best_k < 0 or best_gain > -1e-14 * max(1.0, abs(total)):
            break
        a, b = int(labels[best_k]), best_dst
        for c, sign in ((a, -1.0), (b, 1.0)):
            mass[c] += sign * w[best_k]
            moments[c] += sign * w[best_k] * x[best_k]
        labels[best_k] = b
        cost[[a, b]] = _cell_cost(mass[[a, b]], moments[[a, b]], prob.n)
        moves += 1
        history.append(("transfer", float(np.sum(cost)) + const))
    return moves


def _lloyd(prob: _Problem, labels, thetas, q, tol: float, max_iter: int, history: list):
    """Alternate update/assign from ``labels``; returns the final state or ``None``."""
    m = q.size
    failures = 0
    prev = math.inf
    for it in range(1, max_iter + 1):
        mass, _ = prob.cell_stats(labels, m)
        empty = np.flatnonzero(mass <= 0)
        if empty.size:
            thetas, q = _reseed(prob, labels, thetas, q, empty)
            labels = prob.assign(thetas, q)
            history.append(("reseed", math.nan))
            if np.any(np.bincount(labels, minlength=m) == 0):
                failures += 1
                if failures >= 2:
                    logger.debug("restart abandoned after repeated empty cells")
                    return None
            continue
        thetas, q = prob.update(labels, m)
        history.append(("update", prob.length(labels, thetas, q)))
        new_labels = prob.assign(thetas, q)
        current = prob.length(new_labels, thetas, q)
        history.append(("assign", current))
        if np.array_equal(new_labels, labels):
            return labels, thetas, q, current, it, True
        labels = new_labels
        if prev - current <= tol * abs(current) and np.all(np.bincount(labels, minlength=m) > 0):
            # stalled on ties: finish with one more update so the code matches its cells
            thetas, q = prob.update(labels, m)
            final = prob.length(prob.assign(thetas, q), thetas, q)
            history.append(("update", final))
            return labels, thetas, q, final, it, False
        prev = current
    return labels, thetas, q, history[-1][1], max_iter, False


def _shift_boundaries(prob: _Problem, thetas, q, current: float, history: list, quantiles=(0.0, 0.01, 0.02, 0.05, 0.1, 0.2)):
    """Try moving whole facets by re-weighting pairs of coding probabilities.

    For each ordered pair ``(i, j)`` the points of cell ``i`` whose runner-up
    is ``j`` are sorted by score margin; shifting ``log q_i`` down by a margin
    hands every point below it to ``j``. The best strict improvement of
    ``I1`` over all candidates (with ``q`` and ``theta`` re-optimised for the
    new cells) is returned as ``(labels, I1)``, or ``None``.
    """
    m = q.size
    lam = lambda_matrix(prob.grid.x, thetas, q, prob.n)
    order = np.argsort(lam, axis=1, kind="stable")
    best_idx, second_idx = order[:, 0], order[:, 1]
    rows = np.arange(lam.shape[0])
    margin = lam[rows, second_idx] - lam[rows, best_idx]
    best = None
    log_q = np.log(q)
    for i in range(m):
        for j in range(m):
            if i == j:
                continue
            sel = np.sort(margin[(best_idx == i) & (second_idx == j)])
            if sel.size < 2:
                continue
            for frac in quantiles:
                k = min(int(frac * sel.size), sel.size - 2)
                shift = 0.5 * (sel[k] + sel[k + 1])
                trial = log_q.copy()
                trial[i] -= shift
                q_new = np.exp(trial - np.max(trial))
                q_new /= math.fsum(q_new)
                labels = prob.assign(thetas, q_new)
                if np.any(np.bincount(labels, minlength=m) == 0):
                    continue
                val = prob.partition_length(labels, m)
                if val < current - 1e-14 * abs(current) and (best is None or val < best[1]):
                    best = (labels, val)
    if best is not None:
        history.append(("shift", best[1]))
    return best


def _run_restart(
    prob: _Problem, thetas, q, tol: float, max_iter: int, polish: bool = True
) -> _RestartResult | None:
    history: list = []
    labels = prob.assign(thetas, q)
    iterations = 0
    m = q.size
    max_moves = 4 * prob.grid.x.shape[0]
    while True:
        state = _lloyd(prob, labels, thetas, q, tol, max_iter - iterations, history)
        if state is None:
            return None
        labels, thetas, q, I1, its, converged = state
        iterations += its
        if not (polish and converged) or iterations >= max_iter:
            break
        shifted = _shift_boundaries(prob, thetas, q, I1, history)
        if shifted is not None:
            labels = shifted[0]
            continue
        labels = labels.copy()
        if _polish(prob, labels, m, max_moves, history) == 0:
            break
    return _RestartResult(thetas, q, I1, iterations, history, converged)


def _initial_code(prob: _Problem, m: int, rng: np.random.Generator):
    idx = rng.choice(prob.grid.x.shape[0], size=m, replace=False, p=prob.grid.weights)
    idx.sort()
    thetas = xi_to_theta(prob.grid.x[idx], prob.n)
    return thetas, np.full(m, 1.0 / m)


def resolve_threads(threads: int | None = None) -> int:
    if threads is None:
        env = os.environ.get(THREADS_ENV)
        threads = int(env) if env else 1
    return max(1, int(threads))


def fit_smml(
    m: int,
    domain: TruncatedDomain,
    n: int,
    p: int | None = None,
    restarts: int = 8,
    seed: int = 0,
    tol: float = 1e-9,
    max_iter: int = 500,
    threads: int | None = None,
    polish: bool = True,
) -> SmmlCode:
    """Best code with ``m`` cells over ``restarts`` random initialisations.

    Restart ``k`` uses the ``k``-th child of ``SeedSequence(seed)``, and the
    winner is the lowest ``I1`` (earliest restart on ties), so the result does
    not depend on ``threads``.
    """
    if m < 1:
        raise DomainError("m must be at least 1")
    p = domain.p if p is None else p
    prob = _problem(domain, n, p)
    if m == 1:
        labels = np.zeros(prob.grid.x.shape[0], dtype=np.intp)
        thetas, q = prob.update(labels, 1)
        I1 = prob.length(labels, thetas, q)
        return SmmlCode(thetas, q, domain, I1, 1, (("update", I1),), converged=True)

    children = np.random.SeedSequence(seed).spawn(max(1, restarts))

    def one(child):
        rng = np.random.default_rng(child)
        thetas, q = _initial_code(prob, m, rng)
        return _run_restart(prob, thetas, q, tol, max_iter, polish)

    workers = min(resolve_threads(threads), len(children))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, children))
    else:
        results = [one(c) for c in children]

    best = None
    for res in results:
        if res is not None and (best is None or res.I1 < best.I1):
            best = res
    if best is None:
        raise EmptyCellError(range(m))
    return SmmlCode(best.thetas, best.q, domain, best.I1, best.iterations, tuple(best.history), best.converged)


# -- exporting the partition --------------------------------------------------


def facet_functional(code: SmmlCode, i: int, j: int, n: int) -> tuple[np.ndarray, float]:
    """Coefficients of ``lambda_i - lambda_j = a . x + b``."""
    ti, tj = code.assertions[i], code.assertions[j]
    qi, qj = code.coding_probs[i], code.coding_probs[j]
    a = tj - ti
    b = -math.log(qi) + math.log(qj) + float(log_partition(ti, n)) - float(log_partition(tj, n))
    return a, b


def cell_polytope(code: SmmlCode, i: int, n: int) -> CellPolytope:
    ineqs = []
    for j in range(code.m):
        if j != i:
            a, b = facet_functional(code, i, j, n)
            ineqs.append((j, a, b))
    return CellPolytope(i, ineqs)


@dataclass
class HyperbolicTessellation:
    """Per-cell bounding planes of the horomap image of an SMML partition.

    ``cells[i]`` lists ``(j, plane)``; cell ``i`` lies where
    ``plane.orientation * plane.level(u) <= 0``. Facets whose zero set misses
    the expectation space are listed in ``dropped`` as ``(i, j)``.
    """

    cells: list = field(default_factory=list)
    dropped: list = field(default_factory=list)

    def __iter__(self):
        return iter(self.cells)

    def __len__(self):
        return len(self.cells)


def tessellation_hyperbolic(code: SmmlCode, n: int) -> HyperbolicTessellation:
    out = HyperbolicTessellation()
    for i in range(code.m):
        planes: list[tuple[int, HyperbolicPlane]] = []
        for j, a, b in cell_polytope(code, i, n).inequalities:
            try:
                planes.append((j, affine_to_hyperbolic_plane(AffineFunctional(a, b), code.p)))
            except (EmptyPlaneError, DomainError):
                out.dropped.append((i, j))
        out.cells.append((i, planes))
    return out


def with_I1(code: SmmlCode, n: int) -> SmmlCode:
    """``code`` with its message length recomputed on its grid."""
    return replace(code, I1=message_length_I1(code, n))
