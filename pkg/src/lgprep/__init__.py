"""Laguerre-Gauss preprocessing: FFT-based edge-enhancing feature
reduction mapping an n-by-n image to a 2n line-profile vector, plus the
simple classifiers, dataset tooling, and evaluation metrics around it.
"""

from ._backend import active_backend, set_backend
from .evalmetrics import EvalReport, accuracy, auc, evaluate, f1_per_class, roc_curve
from .features import (
    apply_standardizer,
    feature_dim,
    fit_standardizer,
    flatten_baseline,
    lg_preprocess,
    lg_preprocess_batch,
    line_profiles,
)
from .imagecore import (
    LabeledDataset,
    augment_dataset,
    flip,
    load_dataset_dir,
    read_image,
    resize,
    rotate,
    to_grayscale,
    write_pgm,
)
from .learners import (
    KnnModel,
    MlpModel,
    TrainConfig,
    knn_fit,
    knn_predict,
    load_model,
    mlp_forward,
    mlp_init,
    mlp_train,
    model_size_bytes,
    save_model,
)
from .lgfilter import filter_spectrum, laguerre_gauss_filter
from .spectral import dft2_forward, dft2_inverse, dft2_naive, fftshift, magnitude, pointwise_mul
from .synthshapes import ShapeSpec, generate_binary_dataset, generate_dataset, render_shape

__version__ = "0.1.0"

__all__ = [
    "EvalReport",
    "KnnModel",
    "LabeledDataset",
    "MlpModel",
    "ShapeSpec",
    "TrainConfig",
    "accuracy",
    "active_backend",
    "apply_standardizer",
    "auc",
    "augment_dataset",
    "dft2_forward",
    "dft2_inverse",
    "dft2_naive",
    "evaluate",
    "f1_per_class",
    "feature_dim",
    "fftshift",
    "filter_spectrum",
    "fit_standardizer",
    "flatten_baseline",
    "flip",
    "generate_binary_dataset",
    "generate_dataset",
    "knn_fit",
    "knn_predict",
    "laguerre_gauss_filter",
    "lg_preprocess",
    "lg_preprocess_batch",
    "line_profiles",
    "load_dataset_dir",
    "load_model",
    "magnitude",
    "mlp_forward",
    "mlp_init",
    "mlp_train",
    "model_size_bytes",
    "pointwise_mul",
    "read_image",
    "render_shape",
    "resize",
    "roc_curve",
    "rotate",
    "save_model",
    "set_backend",
    "to_grayscale",
    "write_pgm",
]
