"""Uncertainty for binary neural classifiers from gradient-sign input sweeps (MC-AA),
with an MC-dropout baseline and an uncertainty evaluation toolkit."""

from .data import (Dataset, StandardizerStats, gen_synthetic_2d, load_csv, load_elliptic,
                   load_ethereum, preprocess_ethereum, split_random, split_temporal_elliptic,
                   standardize_apply, standardize_fit)
from .errors import (DimensionError, DomainError, McaaError, NumericError, StateError,
                     UndefinedMetricError)
from .evaluation import (ConfusionCounts, CurveTable, UncertaintyRecords, confusion_at, evaluate,
                         metric_accuracy, metric_npv, metric_tpr, normalize_uncertainty, pr_curve,
                         roc_auc, uncertainty_curves)
from .neural import (ForwardTrace, Gradients, MlpModel, backward, fgsm, forward, init_model,
                     input_gradient, load_model, nll_loss, save_model, sign)
from .samplers import (EpsilonGrid, McSamples, ScoreTable, epsilon_grid, mc_dropout_sample,
                       mcaa_sample, mutual_information, predictive_entropy, predictive_mean,
                       score_testset)
from .training import AdamState, LossHistory, TrainConfig, adam_step, predict, train

__version__ = "0.1.0"
