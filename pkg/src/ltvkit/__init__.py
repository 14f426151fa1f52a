"""ltvkit: user lifetime-value forecasting toolkit.

Dilated recurrent networks with hand-derived backpropagation, a cohort /
age / calendar panel simulator, label pipelines for acquisition and rolling
forecasts, probabilistic and ridge baselines, and accuracy metrics.
"""

from .cells import (
    CellState,
    DrnnParams,
    GruParams,
    LstmParams,
    drnn_step,
    gru_step,
    lstm_step,
)
from .data import UserSeries, read_panel_csv, write_panel_csv
from .errors import (
    DataError,
    FittingError,
    LtvkitError,
    NumericError,
    ShapeError,
    TrainingError,
    UsageError,
)
from .metrics import MetricsReport, asmape, compare, mdape, rmse, smape
from .network import (
    BlockSpec,
    EmbeddingSpec,
    LayerSpec,
    NetworkParams,
    NetworkSpec,
    backward_sequence,
    default_spec,
    embed_lookup,
    forward_sequence,
    init_network_params,
    load_network,
    save_network,
)
from .numeric import (
    AdamState,
    RngStream,
    adam_step,
    affine,
    finite_diff_gradient,
    max_relative_error,
)
from .pipeline import (
    LabeledSequence,
    LabeledStep,
    NormStats,
    apply_normalizer,
    build_acquisition_labels,
    build_rolling_labels,
    calendar_features,
    fit_normalizer,
    invert_targets,
    split_dataset,
    subsample_zero_records,
)
from .simulate import SimConfig, simulate_bgnbd_population, simulate_cohorts
from .training import TrainConfig, predict_sequences, train

__version__ = "0.1.0"
