"""Discount: block-coordinate descent for distributional counterfactuals.

Each iteration solves the transport plans exactly (sorting), evaluates both
upper confidence limits, picks the weight ``eta`` that balances the two
constraint gaps, and takes one retracted gradient step on the counterfactual
points for ``(1 - eta) * Q_x + eta * Q_y``.

The step follows the gradient in the Wasserstein metric on uniform
empirical measures, i.e. ``n`` times the Euclidean gradient with respect to
the point coordinates. Plan weights carry a ``1/n`` factor, so without this
the useful step size would shrink with the sample size.
"""

from __future__ import annotations

import bisect
import logging
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .confidence import UclConfig, ucl_sw2, ucl_w2
from .errors import AbortedRunError, InvalidArgumentError
from .ot import EmpiricalSample, ProjectionSet, monotone_plan, monotone_plans

logger = logging.getLogger(__name__)

__all__ = [
    "IntervalSchedule",
    "DiscreteSchedule",
    "DiscountConfig",
    "IterationRecord",
    "DiscountResult",
    "eta_balance",
    "interval_narrowing_step",
    "set_shrinking_step",
    "grad_q",
    "q_value",
    "retract",
    "default_box",
    "discount_run",
    "parse_eta_schedule",
]


@dataclass(frozen=True)
class IntervalSchedule:
    l: float = 0.0
    r: float = 1.0
    kappa: float = 0.01

    def __post_init__(self):
        if not 0.0 <= self.l <= self.r <= 1.0:
            raise InvalidArgumentError(f"need 0 <= l <= r <= 1, got [{self.l}, {self.r}]")
        if not 0.0 < self.kappa < 1.0:
            raise InvalidArgumentError(f"kappa must lie in (0, 1), got {self.kappa}")

    def describe(self) -> str:
        return f"interval:{self.l!r},{self.r!r},{self.kappa!r}"


@dataclass(frozen=True)
class DiscreteSchedule:
    candidates: tuple[float, ...] = (0.0, 0.25, 0.5, 0.75, 1.0)

    def __post_init__(self):
        if not self.candidates:
            raise InvalidArgumentError("candidate set must be nonempty")
        if any(not 0.0 <= v <= 1.0 for v in self.candidates):
            raise InvalidArgumentError("candidates must lie in [0, 1]")

    def describe(self) -> str:
        return "discrete:" + ",".join(repr(v) for v in self.candidates)


def parse_eta_schedule(text: str):
    """Parse ``interval:l,r,kappa`` or ``discrete:v1,v2,...``."""
    kind, _, rest = text.partition(":")
    try:
        values = [float(v) for v in rest.split(",") if v.strip()]
    except ValueError:
        raise InvalidArgumentError(f"bad eta schedule {text!r}") from None
    if kind == "interval":
        if len(values) != 3:
            raise InvalidArgumentError("interval schedule needs l,r,kappa")
        return IntervalSchedule(*values)
    if kind == "discrete":
        return DiscreteSchedule(tuple(values))
    raise InvalidArgumentError(f"unknown eta schedule {kind!r}")


@dataclass(frozen=True)
class DiscountConfig:
    U_x: float
    U_y: float
    alpha: float = 0.1
    tau: float = 0.05
    epsilon: float = 1e-4
    max_iters: int = 2000
    init_noise_std: float = 0.1
    eta_schedule: IntervalSchedule | DiscreteSchedule = field(default_factory=IntervalSchedule)
    box: np.ndarray | None = None
    seed: int = 0
    ucl: UclConfig = field(default_factory=UclConfig)

    def __post_init__(self):
        if self.U_x < 0 or self.U_y < 0:
            raise InvalidArgumentError("bounds must be nonnegative")
        if not 0 < self.alpha < 1:
            raise InvalidArgumentError("alpha must lie in (0, 1)")
        if self.tau <= 0 or self.epsilon <= 0:
            raise InvalidArgumentError("tau and epsilon must be positive")
        if self.max_iters < 1:
            raise InvalidArgumentError("max_iters must be at least 1")
        if self.init_noise_std < 0:
            raise InvalidArgumentError("init_noise_std must be nonnegative")
        if self.box is not None:
            box = np.asarray(self.box, dtype=float)
            if box.ndim != 2 or box.shape[1] != 2 or np.any(box[:, 0] > box[:, 1]):
                raise InvalidArgumentError("box must be a d x 2 array of [lo, hi] with lo <= hi")


@dataclass(frozen=True)
class IterationRecord:
    t: int
    ucl_sw2: float
    ucl_w2: float
    eta: float
    eta_lo: float
    eta_hi: float
    grad_norm: float
    q_value: float
    step_norm: float


@dataclass
class DiscountResult:
    status: str
    counterfactual: EmpiricalSample | None
    trace: list[IterationRecord]
    final_ucls: tuple[float, float]
    mu: np.ndarray
    nu: np.ndarray
    last_iterate: EmpiricalSample
    y_star: np.ndarray
    converged: bool

    @property
    def feasible(self) -> bool:
        return self.status == "feasible"


def eta_balance(a: float, b: float) -> float:
    """Weight on the output objective from the two constraint gaps.

    ``a = U_x - UCL_x`` and ``b = U_y - UCL_y``; a negative gap is a
    violation.
    """
    if a < 0 <= b:
        return 0.0
    if b < 0 <= a:
        return 1.0
    if a < 0 and b < 0:
        return b / (a + b)
    if a == 0 and b == 0:
        return 0.5
    return a / (a + b)


def interval_narrowing_step(l: float, r: float, kappa: float, ucls, bounds):
    """One Interval Narrowing update; returns ``(eta, l_new, r_new)``.

    The balanced weight decides which end of ``[l, r]`` moves inward by
    ``kappa`` of the width; the returned weight is clamped into the new
    interval.
    """
    raw = eta_balance(bounds[0] - ucls[0], bounds[1] - ucls[1])
    width = r - l
    if raw > (l + r) / 2.0:
        l = l + kappa * width
    else:
        r = r - kappa * width
    return min(max(raw, l), r), l, r


def set_shrinking_step(candidates: Sequence[float], ucls, bounds):
    """One Set Shrinking update; returns ``(eta, remaining candidates)``.

    Picks the candidate nearest the balanced weight (ties go to the lower
    value) and removes one copy of it unless it is the last one.
    """
    if not candidates:
        raise InvalidArgumentError("candidate set is empty")
    raw = eta_balance(bounds[0] - ucls[0], bounds[1] - ucls[1])
    pool = sorted(candidates)
    i = bisect.bisect_left(pool, raw)
    if i == len(pool):
        pick = i - 1
    elif i == 0:
        pick = 0
    else:
        pick = i - 1 if raw - pool[i - 1] <= pool[i] - raw else i
    eta = pool[pick]
    if len(pool) > 1:
        del pool[pick]
    return eta, pool


def _grad_qx(px: np.ndarray, pxp: np.ndarray, mu: np.ndarray, directions: np.ndarray) -> np.ndarray:
    # d/dx_i of (1/N) sum_k sum_j (p_ik - p'_jk)^2 mu_kij
    row_mass = mu.sum(axis=2)                                  # (N, n)
    pulled = np.einsum("kij,jk->ki", mu, pxp)                  # (N, n)
    coef = 2.0 * (px.T * row_mass - pulled)                    # (N, n)
    return coef.T @ directions / directions.shape[0]


def grad_q(x, x_prime, theta: ProjectionSet, mu, y_star, nu, model, eta: float) -> np.ndarray:
    """Euclidean gradient of ``(1 - eta) Q_x + eta Q_y`` with the plans fixed."""
    pts = np.asarray(getattr(x, "points", x), dtype=float)
    ptsp = np.asarray(getattr(x_prime, "points", x_prime), dtype=float)
    mu = _stack(mu)
    nu = np.asarray(getattr(nu, "weights", nu), dtype=float)
    if not 0.0 <= eta <= 1.0:
        raise InvalidArgumentError("eta must lie in [0, 1]")
    g = np.zeros_like(pts)
    if eta < 1.0:
        g = g + (1.0 - eta) * _grad_qx(theta.project(pts), theta.project(ptsp), mu, theta.directions)
    if eta > 0.0:
        ys = np.asarray(y_star, dtype=float).reshape(-1)
        y = np.asarray(model.predict(pts), dtype=float)
        coef = 2.0 * (y * nu.sum(axis=1) - nu @ ys)
        g = g + eta * coef[:, None] * np.asarray(model.input_gradient(pts), dtype=float)
    return g


def q_value(x, x_prime, theta: ProjectionSet, mu, y_star, nu, model, eta: float) -> float:
    """``(1 - eta) Q_x + eta Q_y`` at fixed plans (no marginal validation)."""
    pts = np.asarray(getattr(x, "points", x), dtype=float)
    mu = _stack(mu)
    nu = np.asarray(getattr(nu, "weights", nu), dtype=float)
    px, pxp = theta.project(pts), theta.project(x_prime)
    qx = 0.0
    for k in range(theta.count):
        diff = px[:, k][:, None] - pxp[:, k][None, :]
        qx += float(np.sum(diff * diff * mu[k]))
    qx /= theta.count
    qy = 0.0
    if eta > 0.0:
        y = np.asarray(model.predict(pts), dtype=float)
        ys = np.asarray(y_star, dtype=float).reshape(-1)
        qy = float(np.sum((y[:, None] - ys[None, :]) ** 2 * nu))
    return (1.0 - eta) * qx + eta * qy


def _stack(mu) -> np.ndarray:
    if isinstance(mu, np.ndarray):
        return mu
    return np.stack([np.asarray(getattr(p, "weights", p), dtype=float) for p in mu])


def _matched(px: np.ndarray, pxp: np.ndarray) -> np.ndarray:
    """For equal sizes: the factual projection each point is sent to, per direction."""
    order = np.argsort(px, axis=0, kind="stable")
    out = np.empty_like(px)
    np.put_along_axis(out, order, np.sort(pxp, axis=0), axis=0)
    return out


def _fast_objective(x, xp, theta, y, grad_b, ys_matched, eta):
    """Objective and Euclidean gradient when every plan is a scaled permutation."""
    n = x.shape[0]
    px = theta.project(x)
    gap = px - _matched(px, theta.project(xp))
    qx = float(np.sum(gap * gap)) / (n * theta.count)
    gx = (2.0 / (n * theta.count)) * gap @ theta.directions
    resid = y - ys_matched
    qy = float(np.sum(resid * resid)) / n
    gy = (2.0 / n) * resid[:, None] * grad_b if grad_b is not None else 0.0
    return (1.0 - eta) * qx + eta * qy, (1.0 - eta) * gx + eta * gy


def retract(x, step, box) -> np.ndarray:
    """Euclidean step followed by a per-coordinate clamp into ``box``."""
    pts = np.asarray(getattr(x, "points", x), dtype=float)
    box = np.asarray(box, dtype=float)
    return np.clip(pts + np.asarray(step, dtype=float), box[:, 0], box[:, 1])


def default_box(x_prime, margin: float = 0.1) -> np.ndarray:
    """Factual per-feature range widened by ``margin`` of its width on both sides.

    One-hot columns are always kept inside ``[0, 1]``.
    """
    sample = x_prime if isinstance(x_prime, EmpiricalSample) else EmpiricalSample(x_prime)
    pts = sample.points
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    pad = margin * (hi - lo)
    box = np.column_stack([lo - pad, hi + pad])
    for j, kind in enumerate(sample.feature_kinds):
        if kind != "numeric":
            box[j] = (0.0, 1.0)
    return box


def match_size(y_star, n: int) -> np.ndarray:
    """Resample ``y_star`` to ``n`` points by interpolating its quantiles."""
    ys = np.asarray(y_star, dtype=float).reshape(-1)
    if ys.size == 0:
        raise InvalidArgumentError("target sample is empty")
    if ys.size == n:
        return ys
    return np.quantile(ys, (np.arange(n) + 0.5) / n)


def discount_run(x_prime, y_star, model, theta: ProjectionSet, cfg: DiscountConfig) -> DiscountResult:
    """Search for a counterfactual sample satisfying both chance constraints.

    Returns a feasible result only if both UCLs, recomputed on the returned
    sample, are within their bounds. Raises :class:`AbortedRunError` with the
    partial trace if the model fails or the gradient becomes non-finite.
    """
    factual = x_prime if isinstance(x_prime, EmpiricalSample) else EmpiricalSample(x_prime)
    xp = factual.points
    n, d = xp.shape
    if theta.dim != d:
        raise InvalidArgumentError(f"projections have dimension {theta.dim}, data {d}")
    if model.input_dim != d:
        raise InvalidArgumentError(f"model expects dimension {model.input_dim}, data {d}")
    ys = match_size(y_star, n)
    box = default_box(factual) if cfg.box is None else np.asarray(cfg.box, dtype=float)
    if box.shape != (d, 2):
        raise InvalidArgumentError(f"box must have shape ({d}, 2)")

    rng = np.random.default_rng(cfg.seed)
    x = retract(xp, cfg.init_noise_std * rng.standard_normal((n, d)), box)

    schedule = cfg.eta_schedule
    if isinstance(schedule, IntervalSchedule):
        lo, hi = schedule.l, schedule.r
    else:
        pool = list(schedule.candidates)

    trace: list[IterationRecord] = []
    converged = False
    for t in range(cfg.max_iters):
        # both sides hold n points, so every optimal plan is a permutation / n
        try:
            y = np.asarray(model.predict(x), dtype=float)
            ys_matched = np.empty(n)
            ys_matched[np.argsort(y, kind="stable")] = np.sort(ys)
            u_w = ucl_w2(y, ys, cfg.alpha, cfg.ucl)
            u_sw = ucl_sw2(x, xp, theta, cfg.alpha, cfg.ucl)
            ucls, bounds = (u_sw, u_w), (cfg.U_x, cfg.U_y)
            if isinstance(schedule, IntervalSchedule):
                eta, lo, hi = interval_narrowing_step(lo, hi, schedule.kappa, ucls, bounds)
                band = (lo, hi)
            else:
                eta, pool = set_shrinking_step(pool, ucls, bounds)
                band = (min(pool + [eta]), max(pool + [eta]))
            grad_b = np.asarray(model.input_gradient(x), dtype=float) if eta > 0 else None
            q, g = _fast_objective(x, xp, theta, y, grad_b, ys_matched, eta)
        except Exception as exc:
            raise AbortedRunError(f"iteration {t}: model evaluation failed: {exc}", trace) from exc
        grad = n * g
        if not np.all(np.isfinite(grad)):
            raise AbortedRunError(f"iteration {t}: non-finite gradient", trace)
        x_new = retract(x, -cfg.tau * grad, box)
        step = float(np.linalg.norm(x_new - x))
        trace.append(IterationRecord(t, u_sw, u_w, float(eta), float(band[0]), float(band[1]),
                                     float(np.linalg.norm(grad)), q, step))
        x = x_new
        if step <= cfg.epsilon:
            converged = True
            break

    try:
        y = np.asarray(model.predict(x), dtype=float)
    except Exception as exc:
        raise AbortedRunError(f"final evaluation failed: {exc}", trace) from exc
    final = (ucl_sw2(x, xp, theta, cfg.alpha, cfg.ucl), ucl_w2(y, ys, cfg.alpha, cfg.ucl))
    mu = monotone_plans(x, xp, theta)
    nu = monotone_plan(y, ys).weights
    feasible = final[0] <= cfg.U_x and final[1] <= cfg.U_y
    last = factual.with_points(x)
    logger.info("discount: %d iterations, converged=%s, UCLs=(%.4g, %.4g), feasible=%s",
                len(trace), converged, final[0], final[1], feasible)
    return DiscountResult(
        status="feasible" if feasible else "infeasible",
        counterfactual=last if feasible else None,
        trace=trace,
        final_ucls=final,
        mu=mu,
        nu=nu,
        last_iterate=last,
        y_star=ys,
        converged=converged,
    )


def with_overrides(cfg: DiscountConfig, **kw) -> DiscountConfig:
    return replace(cfg, **{k: v for k, v in kw.items() if v is not None})
