"""Distributional counterfactual explanations with statistical guarantees.

Sliced and 1-D optimal transport, DKW-based upper confidence limits, and the
Discount block-coordinate search that moves a factual sample until both the
input-side and output-side distances are certified below their bounds.
"""

from .confidence import BandSpec, UclConfig, band_edges, d_u, dkw_beta, ucl_sw2, ucl_w2
from .config import RunConfig, load_config, parse_config
from .data import Preprocessor, Table, load_csv, make_synthetic, preprocess
from .errors import (
    AbortedRunError,
    ConfigError,
    CSVParseError,
    DiscountError,
    ExternalModelError,
    InvalidArgumentError,
    InvalidDatasetError,
    TrainingDivergedError,
    UndefinedScoreError,
)
from .metrics import MetricReport, coverage, diversity, dpc, evaluate, mmd_sq, percentile_diffs
from .models import (
    BuiltinModel,
    ExternalModel,
    ModelHandle,
    ModelSpec,
    external_model,
    init_spec,
    load_model,
    save_model,
    serve,
    train,
)
from .optimizer import (
    DiscountConfig,
    DiscountResult,
    DiscreteSchedule,
    IntervalSchedule,
    IterationRecord,
    discount_run,
    eta_balance,
    grad_q,
    interval_narrowing_step,
    parse_eta_schedule,
    q_value,
    retract,
    set_shrinking_step,
)
from .ot import (
    EmpiricalSample,
    ProjectionSet,
    QuantileView,
    TransportPlan,
    lp_ot_oracle,
    monotone_plan,
    monotone_plans,
    q_x,
    q_y,
    sample_projections,
    sliced_wasserstein_sq,
    wasserstein1d_sq,
)
from .report import emit_report
from .run import execute, run_command

__version__ = "0.1.0"
