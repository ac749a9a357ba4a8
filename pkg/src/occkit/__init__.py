"""occkit: one-class SVMs with pinball loss, SVDD, image preprocessing and benchmarks."""

__version__ = "0.1.0"

from .core import (
    Dataset,
    FeatureScaler,
    ScalerParams,
    SplitSpec,
    apply_scaler,
    dataset_from_arrays,
    fit_scaler,
    load_csv,
    load_dataset,
    load_libsvm,
    save_csv,
    split_one_class,
)
from .evaluation import ConfusionCounts, MetricsReport, confusion, evaluate, metrics, roc_auc
from .kernels import GramMatrix, KernelSpec, gram, kernel_eval
from .models import (
    SVDD,
    OneClassSVM,
    PinballOCSVM,
    TrainedModel,
    TrainParamsOCSVM,
    TrainParamsPB,
    TrainParamsSVDD,
    decision_function,
    load_model,
    pinball_loss,
    predict,
    sample_margin,
    save_model,
    train_model,
    train_ocsvm,
    train_pb_ocsvm,
    train_svdd,
)
from .solver import BoxQP, QPSolution, SolverConfig, kkt_residual, solve

__all__ = [
    "Dataset", "FeatureScaler", "ScalerParams", "SplitSpec", "apply_scaler", "dataset_from_arrays",
    "fit_scaler", "load_csv", "load_dataset", "load_libsvm", "save_csv", "split_one_class",
    "ConfusionCounts", "MetricsReport", "confusion", "evaluate", "metrics", "roc_auc",
    "GramMatrix", "KernelSpec", "gram", "kernel_eval",
    "SVDD", "OneClassSVM", "PinballOCSVM", "TrainedModel", "TrainParamsOCSVM", "TrainParamsPB",
    "TrainParamsSVDD", "decision_function", "load_model", "pinball_loss", "predict",
    "sample_margin", "save_model", "train_model", "train_ocsvm", "train_pb_ocsvm", "train_svdd",
    "BoxQP", "QPSolution", "SolverConfig", "kkt_residual", "solve",
]
