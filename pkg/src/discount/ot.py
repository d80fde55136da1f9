"""Empirical distributions and exact one-dimensional optimal transport.

Everything here works on uniform empirical measures. One-dimensional
transport is solved exactly by sorting: the quantile functions of both
samples are step functions, so merging their breakpoints gives the integral
of the squared quantile gap in closed form, and the same merged grid yields
the monotone (north-west corner) coupling.

Sliced quantities project d-dimensional samples on the rows of a
:class:`ProjectionSet` and average the 1-D results over directions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from itertools import permutations
from typing import Sequence

import numpy as np
from scipy.optimize import linprog

from .errors import InvalidArgumentError

__all__ = [
    "EmpiricalSample",
    "ProjectionSet",
    "TransportPlan",
    "QuantileView",
    "sample_projections",
    "wasserstein1d_sq",
    "sliced_wasserstein_sq",
    "monotone_plan",
    "monotone_plans",
    "q_x",
    "q_y",
    "lp_ot_oracle",
]

MARGINAL_TOL = 1e-9
LP_ORACLE_MAX = 8


@dataclass
class EmpiricalSample:
    """An ``n x d`` point cloud with per-column metadata.

    ``feature_kinds`` holds ``"numeric"`` or the name of the one-hot group a
    column belongs to.
    """

    points: np.ndarray
    feature_names: list[str] = field(default_factory=list)
    feature_kinds: list[str] = field(default_factory=list)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise InvalidArgumentError(f"points must be a non-empty n x d matrix, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise InvalidArgumentError("points contain non-finite entries")
        self.points = pts
        d = pts.shape[1]
        if not self.feature_names:
            self.feature_names = [f"x{j}" for j in range(d)]
        if not self.feature_kinds:
            self.feature_kinds = ["numeric"] * d
        if len(self.feature_names) != d or len(self.feature_kinds) != d:
            raise InvalidArgumentError("feature metadata length does not match the number of columns")

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def with_points(self, points: np.ndarray) -> "EmpiricalSample":
        return EmpiricalSample(points, list(self.feature_names), list(self.feature_kinds))

    def one_hot_groups(self) -> dict[str, list[int]]:
        groups: dict[str, list[int]] = {}
        for j, kind in enumerate(self.feature_kinds):
            if kind != "numeric":
                groups.setdefault(kind, []).append(j)
        return groups


@dataclass(frozen=True)
class ProjectionSet:
    """``N`` unit directions in ``R^d`` together with the seed that drew them."""

    directions: np.ndarray
    seed: int

    @property
    def count(self) -> int:
        return self.directions.shape[0]

    @property
    def dim(self) -> int:
        return self.directions.shape[1]

    def project(self, points) -> np.ndarray:
        """Return the ``n x N`` matrix of projections ``theta_k^T x_i``."""
        pts = _as_points(points)
        if pts.shape[1] != self.dim:
            raise InvalidArgumentError(f"points have dimension {pts.shape[1]}, projections {self.dim}")
        return pts @ self.directions.T


def sample_projections(d: int, N: int, seed: int) -> ProjectionSet:
    """Draw ``N`` i.i.d. directions uniformly on the unit sphere of ``R^d``.

    Normalised standard-normal vectors; the same ``seed`` always reproduces
    the same matrix.
    """
    if d < 1 or N < 1:
        raise InvalidArgumentError(f"need d >= 1 and N >= 1, got d={d}, N={N}")
    if seed < 0:
        raise InvalidArgumentError("seed must be unsigned")
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((N, d))
    norms = np.linalg.norm(g, axis=1)
    # a zero draw has probability zero; redraw rather than divide by zero
    while np.any(norms == 0.0):
        bad = norms == 0.0
        g[bad] = rng.standard_normal((int(bad.sum()), d))
        norms = np.linalg.norm(g, axis=1)
    return ProjectionSet(g / norms[:, None], int(seed))


@dataclass(frozen=True)
class QuantileView:
    """Right-continuous empirical quantile function of a 1-D sample.

    ``F^{-1}(u)`` is the order statistic of rank ``ceil(u * n)``, clamped to
    ``[1, n]``.
    """

    sorted_values: np.ndarray

    @classmethod
    def of(cls, sample) -> "QuantileView":
        return cls(np.sort(_as_1d(sample)))

    @property
    def n(self) -> int:
        return self.sorted_values.shape[0]

    def ranks(self, u) -> np.ndarray:
        return quantile_index(u, self.n)

    def __call__(self, u):
        return self.sorted_values[self.ranks(u)]


def quantile_index(u, n: int) -> np.ndarray:
    """Zero-based order-statistic index of ``F_n^{-1}(u)``."""
    # rounding first keeps u = k/n on rank k despite floating error in u * n
    k = np.ceil(np.round(np.asarray(u, dtype=float) * n, 9)).astype(np.int64)
    return np.clip(k, 1, n) - 1


@dataclass
class TransportPlan:
    """Coupling matrix between two uniform empirical measures."""

    weights: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        if self.weights.ndim != 2:
            raise InvalidArgumentError("transport plan must be a matrix")

    @property
    def shape(self) -> tuple[int, int]:
        return self.weights.shape

    def marginal_error(self) -> float:
        n, m = self.weights.shape
        rows = np.abs(self.weights.sum(axis=1) - 1.0 / n).max()
        cols = np.abs(self.weights.sum(axis=0) - 1.0 / m).max()
        return float(max(rows, cols))

    def is_coupling(self, tol: float = MARGINAL_TOL) -> bool:
        return bool(self.weights.min() >= -tol and self.marginal_error() <= tol)

    def validate(self, tol: float = MARGINAL_TOL) -> "TransportPlan":
        if not self.is_coupling(tol):
            raise InvalidArgumentError(
                f"plan is not a coupling of uniform marginals (marginal error {self.marginal_error():.3g}, "
                f"min entry {self.weights.min():.3g})"
            )
        return self

    def cost(self, a, b) -> float:
        """Transport cost under squared Euclidean ground cost."""
        return float(np.sum(_sq_cost(a, b) * self.weights))


def _as_1d(sample) -> np.ndarray:
    arr = np.asarray(sample, dtype=float).reshape(-1)
    if arr.size == 0:
        raise InvalidArgumentError("empty sample")
    return arr


def _as_points(x) -> np.ndarray:
    if isinstance(x, EmpiricalSample):
        return x.points
    pts = np.asarray(x, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2 or pts.shape[0] == 0:
        raise InvalidArgumentError("empty sample")
    return pts


def _sq_cost(a, b) -> np.ndarray:
    pa, pb = _as_points(a), _as_points(b)
    if pa.shape[1] != pb.shape[1]:
        raise InvalidArgumentError("dimension mismatch")
    diff = pa[:, None, :] - pb[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def _merged_grid(n: int, m: int):
    """Pieces on which both empirical quantile functions are constant.

    Breakpoints ``i/n`` and ``j/m`` are scaled by ``n*m`` so the merge is
    exact integer arithmetic. Returns the zero-based ranks used by each
    sample on every piece and the piece lengths.
    """
    g = np.union1d(np.arange(n + 1, dtype=np.int64) * m, np.arange(m + 1, dtype=np.int64) * n)
    right = g[1:]
    width = np.diff(g) / float(n * m)
    rank_a = -(-right // m) - 1
    rank_b = -(-right // n) - 1
    return rank_a, rank_b, width


def wasserstein1d_sq(a, b) -> float:
    """Squared 2-Wasserstein distance between two 1-D empirical measures.

    Exact integral over ``(0, 1)`` of the squared gap between the two
    empirical quantile functions.

    >>> wasserstein1d_sq([0.0, 1.0], [1.0, 2.0])
    1.0
    """
    sa, sb = np.sort(_as_1d(a)), np.sort(_as_1d(b))
    if sa.size == sb.size:
        return float(np.mean((sa - sb) ** 2))
    ra, rb, w = _merged_grid(sa.size, sb.size)
    return float(np.sum(w * (sa[ra] - sb[rb]) ** 2))


def _sliced_columns(pa: np.ndarray, pb: np.ndarray) -> np.ndarray:
    """Per-column squared W2 between two matrices of projected samples."""
    sa, sb = np.sort(pa, axis=0), np.sort(pb, axis=0)
    if sa.shape[0] == sb.shape[0]:
        return np.mean((sa - sb) ** 2, axis=0)
    ra, rb, w = _merged_grid(sa.shape[0], sb.shape[0])
    return w @ (sa[ra] - sb[rb]) ** 2


def sliced_wasserstein_sq(x, x_prime, theta: ProjectionSet) -> float:
    """Monte Carlo sliced squared Wasserstein distance over ``theta``."""
    px, pxp = theta.project(x), theta.project(x_prime)
    return float(np.mean(_sliced_columns(px, pxp)))


def monotone_plan(a, b) -> TransportPlan:
    """Optimal 1-D coupling: north-west corner rule on the sorted samples.

    Rows follow the original order of ``a`` and columns that of ``b``. Ties
    are broken by a stable sort, so equal inputs give the identity coupling.
    """
    va, vb = _as_1d(a), _as_1d(b)
    n, m = va.size, vb.size
    oa, ob = np.argsort(va, kind="stable"), np.argsort(vb, kind="stable")
    plan = np.zeros((n, m))
    if n == m:
        plan[oa, ob] = 1.0 / n
        return TransportPlan(plan)
    ra, rb, w = _merged_grid(n, m)
    np.add.at(plan, (oa[ra], ob[rb]), w)
    return TransportPlan(plan)


def monotone_plans(x, x_prime, theta: ProjectionSet) -> np.ndarray:
    """Stack of per-direction optimal plans, shape ``(N, n, m)``."""
    px, pxp = theta.project(x), theta.project(x_prime)
    return np.stack([monotone_plan(px[:, k], pxp[:, k]).weights for k in range(theta.count)])


def _plan_stack(plans, n: int, m: int, count: int) -> np.ndarray:
    if isinstance(plans, np.ndarray) and plans.ndim == 3:
        stack = plans
    else:
        stack = np.stack([p.weights if isinstance(p, TransportPlan) else np.asarray(p, float) for p in plans])
    if stack.shape != (count, n, m):
        raise InvalidArgumentError(f"expected {count} plans of shape {(n, m)}, got {stack.shape}")
    rows = np.abs(stack.sum(axis=2) - 1.0 / n).max()
    cols = np.abs(stack.sum(axis=1) - 1.0 / m).max()
    if stack.min() < -MARGINAL_TOL or max(rows, cols) > MARGINAL_TOL:
        raise InvalidArgumentError("a plan violates the uniform marginal constraints")
    return stack


def q_x(x, x_prime, theta: ProjectionSet, plans) -> float:
    """Projected transport cost of fixed plans, averaged over directions.

    With the monotone plan on every direction this equals
    :func:`sliced_wasserstein_sq`.
    """
    px, pxp = theta.project(x), theta.project(x_prime)
    stack = _plan_stack(plans, px.shape[0], pxp.shape[0], theta.count)
    total = 0.0
    for k in range(theta.count):
        diff = px[:, k][:, None] - pxp[:, k][None, :]
        total += float(np.sum(diff * diff * stack[k]))
    return total / theta.count


def q_y(x, y_star, model, nu) -> float:
    """Transport cost of the model outputs ``b(x)`` to ``y_star`` under ``nu``."""
    y = np.asarray(model.predict(_as_points(x)), dtype=float)
    ys = _as_1d(y_star)
    plan = nu if isinstance(nu, TransportPlan) else TransportPlan(nu)
    if plan.shape != (y.size, ys.size):
        raise InvalidArgumentError(f"plan shape {plan.shape} does not match samples {(y.size, ys.size)}")
    plan.validate()
    return float(np.sum((y[:, None] - ys[None, :]) ** 2 * plan.weights))


def lp_ot_oracle(a, b) -> tuple[float, TransportPlan]:
    """Globally optimal discrete OT between two small uniform samples.

    Test oracle, independent of the sorting path: equal sizes are solved by
    enumerating permutation couplings (the extreme points of the coupling
    polytope), unequal sizes by linear programming. Accepts 1-D samples or
    ``n x d`` point clouds with squared Euclidean cost.
    """
    pa, pb = _as_points(a), _as_points(b)
    n, m = pa.shape[0], pb.shape[0]
    if n > LP_ORACLE_MAX or m > LP_ORACLE_MAX:
        raise InvalidArgumentError(f"lp_ot_oracle handles at most {LP_ORACLE_MAX} points per side")
    cost = _sq_cost(pa, pb)
    if n == m:
        perms = _permutations(n)
        totals = cost[np.arange(n)[None, :], perms].sum(axis=1)
        best = perms[int(np.argmin(totals))]
        plan = np.zeros((n, n))
        plan[np.arange(n), best] = 1.0 / n
        return float(totals.min() / n), TransportPlan(plan)
    a_eq = np.zeros((n + m, n * m))
    for i in range(n):
        a_eq[i, i * m:(i + 1) * m] = 1.0
    for j in range(m):
        a_eq[n + j, j::m] = 1.0
    b_eq = np.concatenate([np.full(n, 1.0 / n), np.full(m, 1.0 / m)])
    res = linprog(cost.ravel(), A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    if not res.success:  # pragma: no cover - the polytope is never empty
        raise RuntimeError(f"LP solver failed: {res.message}")
    return float(res.fun), TransportPlan(res.x.reshape(n, m))


@lru_cache(maxsize=None)
def _permutations(n: int) -> np.ndarray:
    return np.array(list(permutations(range(n))))


def replicate(values: Sequence[float] | np.ndarray, times: int) -> np.ndarray:
    """Repeat every sample point ``times`` times (same empirical measure)."""
    return np.repeat(np.asarray(values, dtype=float), times, axis=0)
