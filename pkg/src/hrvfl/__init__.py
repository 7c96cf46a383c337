"""Random vector functional link classifiers trained with the HawkEye loss."""

from .data import Dataset, NoiseSpec, NormStats, inject_label_noise, kfold_split, load_csv, normalize, save_csv
from .errors import (
    ConfigError,
    DataError,
    DivergenceError,
    DomainError,
    HRVFLError,
    LinAlgError,
    ShapeError,
    TrainingError,
)
from .feature_map import FeatureMap, FeatureMapConfig, build_T, init_feature_map
from .loss import HLossParams, hloss_grad, hloss_value, sqloss_grad, sqloss_value
from .model import (
    ModelConfig,
    TrainedModel,
    accuracy,
    curvature_bound,
    fit,
    fit_hrvfl,
    fit_hrvfl_grid,
    fit_ridge,
    load_model,
    objective,
    objective_grad,
    predict,
    predict_signs,
    save_model,
)
from .optimizer import ConvergenceReport, NAGConfig, NAGState, nag_minimize, nag_minimize_many, nag_step

__version__ = "0.1.0"
