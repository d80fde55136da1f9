"""End-to-end run: data, model, factual subset, target, search, artifacts."""

from __future__ import annotations

import logging
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .config import RunConfig
from .data import Preprocessor, Split, load_csv, make_synthetic, preprocess, table_from_arrays
from .errors import DiscountError, InvalidDatasetError
from .metrics import MetricReport, evaluate
from .models import ModelHandle, ModelSpec, external_model, load_model, train
from .optimizer import DiscountConfig, DiscountResult, default_box, discount_run
from .ot import EmpiricalSample, ProjectionSet, sample_projections
from .report import emit_report

logger = logging.getLogger(__name__)

__all__ = ["RunOutcome", "Prepared", "prepare", "execute", "run_command", "EXIT_FEASIBLE", "EXIT_ERROR", "EXIT_INFEASIBLE"]

EXIT_FEASIBLE = 0
EXIT_ERROR = 1
EXIT_INFEASIBLE = 2


@dataclass
class RunOutcome:
    result: DiscountResult
    metrics: MetricReport
    factual: EmpiricalSample
    model: ModelHandle
    theta: ProjectionSet
    preprocessor: Preprocessor
    test_accuracy: float
    files: list[Path] = field(default_factory=list)

    @property
    def exit_code(self) -> int:
        return EXIT_FEASIBLE if self.result.feasible else EXIT_INFEASIBLE


def _load_data(cfg: RunConfig) -> tuple[Split, Split, Preprocessor]:
    spec = cfg.data
    if spec.synthetic is not None:
        syn = spec.synthetic
        pts, labels = make_synthetic(int(syn.get("n", 1000)), int(syn.get("d", 2)), float(syn.get("sep", 4.0)),
                                     cfg.seed)
        table = table_from_arrays(pts, labels, label="label")
        return preprocess(table, "label", cfg.seed, spec.ratio)
    table = load_csv(cfg.resolve(spec.path), spec.schema)
    return preprocess(table, spec.label, cfg.seed, spec.ratio)


def _load_model(cfg: RunConfig, train_split: Split) -> ModelHandle:
    mc = cfg.model
    d = train_split.x.d
    if mc.path is not None:
        model = load_model(cfg.resolve(mc.path))
    elif mc.command is not None:
        model = external_model(mc.command, timeout=mc.timeout)
    else:
        if mc.kind == "logistic":
            dims = [d, 1]
        elif mc.kind == "mlp":
            dims = [d, *mc.hidden, 1]
        else:
            dims = [d, mc.n_centers]
        spec = ModelSpec(mc.kind, dims, activation=mc.activation, feature_names=train_split.x.feature_names)
        model, loss = train(spec, train_split.x, train_split.y, mc.epochs, mc.lr, cfg.seed)
        logger.info("trained %s model, final loss %.4g", mc.kind, loss)
    if model.input_dim != d:
        raise InvalidDatasetError(f"model expects {model.input_dim} features, data has {d}")
    return model


@dataclass
class Prepared:
    """Everything the search needs, built from a config."""

    train: Split
    test: Split
    preprocessor: Preprocessor
    model: ModelHandle
    factual: EmpiricalSample
    y_star: np.ndarray
    theta: ProjectionSet
    discount: DiscountConfig
    test_accuracy: float

    def close(self):
        close = getattr(self.model, "close", None)
        if close is not None:
            close()


def prepare(cfg: RunConfig) -> Prepared:
    """Load data and model, pick the factual subset, build target and projections."""
    train_split, test_split, prep = _load_data(cfg)
    model = _load_model(cfg, train_split)
    try:
        p_test = np.asarray(model.predict(test_split.x.points), dtype=float)
        acc = float(np.mean((p_test >= cfg.threshold) == (test_split.y == 1.0)))
        idx = np.flatnonzero(p_test < cfg.threshold)[: cfg.factual_size]
        if idx.size == 0:
            raise InvalidDatasetError("no test point is predicted as class 0; factual subset is empty")
        factual = test_split.x.with_points(test_split.x.points[idx])
        logger.info("test accuracy %.3f, factual subset of %d points", acc, idx.size)
        y_star = cfg.target.build(factual.n, cfg.seed, Path(cfg.base_dir))
        theta = sample_projections(factual.d, cfg.projections, cfg.seed)
        dcfg = cfg.discount
        if cfg.box == "data":
            dcfg = replace(dcfg, box=default_box(train_split.x))
    except Exception:
        close = getattr(model, "close", None)
        if close is not None:
            close()
        raise
    return Prepared(train_split, test_split, prep, model, factual, y_star, theta, dcfg, acc)


def execute(cfg: RunConfig, write: bool = True) -> RunOutcome:
    """Run the whole pipeline; raises on any error."""
    prep_ = prepare(cfg)
    model, factual, theta, prep = prep_.model, prep_.factual, prep_.theta, prep_.preprocessor
    try:
        result = discount_run(factual, prep_.y_star, model, theta, prep_.discount)
        x = result.last_iterate
        y_cf = np.asarray(model.predict(x.points), dtype=float)
        y_f = np.asarray(model.predict(factual.points), dtype=float)
        metrics = evaluate(factual.points, x.points, y_cf, theta, cfg.threshold,
                           x_prime_raw=prep.numeric_raw(factual) if prep.numeric else None,
                           x_raw=prep.numeric_raw(x) if prep.numeric else None)
        outcome = RunOutcome(result, metrics, factual, model, theta, prep, prep_.test_accuracy)
        if write:
            outcome.files = emit_report(
                result, metrics, cfg.resolve(cfg.out),
                config=cfg.echo(),
                counterfactual_columns=prep.inverse_transform(x.points) if result.feasible else None,
                theta=theta, factual=factual.points, y_factual=y_f, y_cf=y_cf,
                extra={
                    "test_accuracy": prep_.test_accuracy,
                    "n_factual": int(factual.n),
                    "metrics_on": "counterfactual" if result.feasible else "last_iterate",
                    "bounds": {"U_x": prep_.discount.U_x, "U_y": prep_.discount.U_y},
                },
            )
    finally:
        prep_.close()
    return outcome


def run_command(cfg: RunConfig) -> int:
    """Execute ``cfg`` and map the outcome to ``0`` feasible, ``2`` infeasible, ``1`` error."""
    try:
        outcome = execute(cfg)
    except (DiscountError, OSError, ValueError) as exc:
        print(f"discount: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    r = outcome.result
    print(f"discount: {r.status} after {len(r.trace)} iterations; "
          f"UCL_SW2={r.final_ucls[0]:.4g}, UCL_W2={r.final_ucls[1]:.4g}, "
          f"coverage={outcome.metrics.coverage:.3f}", file=sys.stderr)
    return outcome.exit_code
