"""Evaluation metrics for counterfactual samples.

Coverage of the desired outcome, OT and MMD proximity to the factual,
diversity, the combined DPC score and per-percentile feature changes.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy.spatial.distance import cdist, pdist

from .errors import InvalidArgumentError, UndefinedScoreError
from .ot import ProjectionSet, QuantileView, sliced_wasserstein_sq

__all__ = [
    "MetricReport",
    "coverage",
    "mmd_sq",
    "diversity",
    "dpc",
    "percentile_diffs",
    "evaluate",
    "DEFAULT_PERCENTILES",
]

DEFAULT_PERCENTILES = (0.1, 0.25, 0.5, 0.75, 0.9)


def _points(x) -> np.ndarray:
    pts = np.asarray(getattr(x, "points", x), dtype=float)
    return pts[:, None] if pts.ndim == 1 else pts


@dataclass
class MetricReport:
    coverage: float
    ot_proximity: float
    mmd: float
    diversity: float
    dpc: float | None
    percentile_diffs: dict[float, float] = field(default_factory=dict)

    def to_json(self) -> dict:
        doc = asdict(self)
        doc["percentile_diffs"] = {repr(float(k)): v for k, v in self.percentile_diffs.items()}
        return doc


def coverage(y, threshold: float = 0.5) -> float:
    """Fraction of predictions at or above ``threshold``."""
    y = np.asarray(y, dtype=float).reshape(-1)
    if y.size == 0:
        raise InvalidArgumentError("coverage of an empty sample is undefined")
    return float(np.mean(y >= threshold))


def mmd_sq(x, x_prime, bandwidth: float | str = "median") -> float:
    """Biased (V-statistic) squared MMD with a Gaussian kernel.

    ``bandwidth="median"`` uses the median pairwise distance of the pooled
    sample. If every pooled point coincides the result is 0.
    """
    a, b = _points(x), _points(x_prime)
    if a.shape[1] != b.shape[1]:
        raise InvalidArgumentError(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
    if bandwidth == "median":
        pooled = np.vstack([a, b])
        if pooled.shape[0] < 2:
            return 0.0
        h = float(np.median(pdist(pooled)))
        if h == 0.0:
            return 0.0
    else:
        h = float(bandwidth)
        if h <= 0:
            raise InvalidArgumentError("bandwidth must be positive")
    scale = -1.0 / (2.0 * h * h)
    kaa = np.exp(scale * cdist(a, a, "sqeuclidean")).mean()
    kbb = np.exp(scale * cdist(b, b, "sqeuclidean")).mean()
    kab = np.exp(scale * cdist(a, b, "sqeuclidean")).mean()
    return float(kaa + kbb - 2.0 * kab)


def diversity(x) -> float:
    """Mean Euclidean distance over unordered pairs; 0 for a single point."""
    pts = _points(x)
    if pts.shape[0] < 2:
        return 0.0
    return float(pdist(pts).mean())


def dpc(diversity_score: float, ot_proximity: float, coverage_score: float) -> float:
    """Diversity per unit of OT proximity, weighted by coverage."""
    if ot_proximity == 0:
        raise UndefinedScoreError("dpc is undefined when the OT proximity is zero")
    return float(diversity_score / ot_proximity * coverage_score)


def percentile_diffs(
    x_prime, x, percentiles: Sequence[float] = DEFAULT_PERCENTILES, epsilon_floor: float = 1e-6
) -> dict[float, float]:
    """Feature-averaged relative change of each percentile, in absolute value.

    Percentiles are levels in ``(0, 1]`` evaluated with the right-continuous
    empirical quantile.
    """
    a, b = _points(x_prime), _points(x)
    if a.shape[1] != b.shape[1]:
        raise InvalidArgumentError(f"feature mismatch: {a.shape[1]} vs {b.shape[1]}")
    out: dict[float, float] = {}
    for p in percentiles:
        if not 0.0 < p <= 1.0:
            raise InvalidArgumentError(f"percentile level must lie in (0, 1], got {p}")
        rel = []
        for j in range(a.shape[1]):
            qa = QuantileView.of(a[:, j])(p)
            qb = QuantileView.of(b[:, j])(p)
            rel.append(abs(qb - qa) / max(abs(qa), epsilon_floor))
        out[float(p)] = float(np.mean(rel))
    return out


def evaluate(
    x_prime,
    x,
    y,
    theta: ProjectionSet,
    threshold: float = 0.5,
    percentiles: Sequence[float] = DEFAULT_PERCENTILES,
    x_prime_raw=None,
    x_raw=None,
) -> MetricReport:
    """Compute every metric for a counterfactual ``x`` of factual ``x_prime``.

    Proximity and diversity are measured in model (standardized) space;
    percentile changes use the raw copies when given. ``dpc`` is ``None``
    when the OT proximity is zero.
    """
    cov = coverage(y, threshold)
    ot = sliced_wasserstein_sq(x, x_prime, theta)
    div = diversity(x)
    score = dpc(div, ot, cov) if ot > 0 else None
    pd = percentile_diffs(
        x_prime if x_prime_raw is None else x_prime_raw,
        x if x_raw is None else x_raw,
        percentiles,
    )
    return MetricReport(cov, ot, mmd_sq(x, x_prime), div, score, pd)
