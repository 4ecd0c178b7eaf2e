"""Data-shared lasso toolkit: solver, grouped models, resampling, reports."""

__version__ = "0.1.0"

from .errors import (ConfigurationError, ConvergenceError, DataError,
                     SharedLassoError, StructuralError)
from .lasso_solver import (CvResult, LassoFit, LassoOptions, LassoPath,
                           SparseCoefficients, cross_validate, fit, fit_cv,
                           fit_path, lambda_max, mse, predict)
from .sparse_core import SparseBinaryDesign
from .dsl import (DslFit, EvalResult, GroupedDataset, SeparateRegimeWarning,
                  WEIGHT_SCHEMES, build_augmented, compute_weights, evaluate,
                  fit_dsl, fit_pooled, fit_separate)
from .resampling import (BootstrapConfig, ReducedFeatureSet, StabilityCounts,
                         bootstrap_dsl, bootstrap_lasso_group, reduce_dataset,
                         stability_report)
from .denoise import (DenoiseSweep, apply_threshold, donoho_threshold,
                      estimate_sigma, sweep_gamma)
from .subgroup_analysis import (ActiveSet, RemovalReport, RemovalRow,
                                SubgroupSets, extract_sets, removal_effect,
                                removal_table, subgroups)
from .corpus import (CorpusSplit, Review, Vocabulary, build_vocab, featurize,
                     group_and_split, ingest, tokenize)

__all__ = [
    "__version__",
    "SharedLassoError", "StructuralError", "ConfigurationError", "DataError",
    "ConvergenceError",
    "SparseBinaryDesign",
    "LassoOptions", "LassoFit", "LassoPath", "CvResult", "SparseCoefficients",
    "fit", "fit_path", "fit_cv", "cross_validate", "lambda_max", "predict",
    "mse",
    "GroupedDataset", "DslFit", "EvalResult", "SeparateRegimeWarning",
    "WEIGHT_SCHEMES", "compute_weights", "build_augmented", "fit_dsl",
    "fit_pooled", "fit_separate", "evaluate",
    "BootstrapConfig", "StabilityCounts", "ReducedFeatureSet",
    "bootstrap_lasso_group", "bootstrap_dsl", "reduce_dataset",
    "stability_report",
    "DenoiseSweep", "donoho_threshold", "apply_threshold", "estimate_sigma",
    "sweep_gamma",
    "ActiveSet", "SubgroupSets", "RemovalRow", "RemovalReport",
    "extract_sets", "subgroups", "removal_effect", "removal_table",
    "Review", "Vocabulary", "CorpusSplit", "tokenize", "ingest",
    "build_vocab", "featurize", "group_and_split",
]
