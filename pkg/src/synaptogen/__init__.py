"""Frozen biologically-inspired convolutional synapses on tiny datasets.

A small numpy library that samples convolutional kernel banks from three
synaptic-strength distributions (normal, log-normal, correlated
center-surround), trains only the fully connected head on 38-per-class
subsets of MNIST / CIFAR-10 / SVHN, and emits a mean +- std comparison grid
against a fully trained baseline.
"""

__version__ = "0.1.0"

from .data import (
    LabeledDataset,
    NormStats,
    SubsampleSpec,
    compute_norm_stats,
    load_cifar10_bin,
    load_idx,
    normalize,
    pad_to_32,
    subsample_per_class,
)
from .numerics import (
    NotPositiveDefiniteError,
    cholesky,
    conv2d_backward,
    conv2d_forward,
    dense_backward,
    dense_forward,
    derive_seed,
    fnv1a64,
    make_rng,
    maxpool_backward,
    maxpool_forward,
    relu,
    relu_backward,
    softmax_cross_entropy,
    softmax_cross_entropy_batch,
)
from .sampling import (
    CENTER_SURROUND,
    LOGNORMAL,
    NORMAL,
    KernelBank,
    KernelStats,
    SynapseDistribution,
    center_surround_covariance,
    export_kernels_pgm,
    generate_kernel_bank,
    kernel_stats,
    rescale_to_unit_fanin,
    sample_center_surround,
    sample_lognormal,
    sample_normal,
    write_stats_csv,
)
from .training import (
    DEFAULT_ARMS,
    FULLY_TRAINED,
    ExperimentResult,
    Model,
    TrainConfig,
    TrainHistory,
    build_model,
    config_for_arm,
    default_distribution,
    evaluate,
    forward,
    loss_and_gradients,
    predict,
    run_experiment,
    single_run,
    train,
)

__all__ = [
    "__version__",
    # numerics
    "NotPositiveDefiniteError",
    "cholesky",
    "conv2d_backward",
    "conv2d_forward",
    "dense_backward",
    "dense_forward",
    "derive_seed",
    "fnv1a64",
    "make_rng",
    "maxpool_backward",
    "maxpool_forward",
    "relu",
    "relu_backward",
    "softmax_cross_entropy",
    "softmax_cross_entropy_batch",
    # sampling
    "CENTER_SURROUND",
    "LOGNORMAL",
    "NORMAL",
    "KernelBank",
    "KernelStats",
    "SynapseDistribution",
    "center_surround_covariance",
    "export_kernels_pgm",
    "generate_kernel_bank",
    "kernel_stats",
    "rescale_to_unit_fanin",
    "sample_center_surround",
    "sample_lognormal",
    "sample_normal",
    "write_stats_csv",
    # data
    "LabeledDataset",
    "NormStats",
    "SubsampleSpec",
    "compute_norm_stats",
    "load_cifar10_bin",
    "load_idx",
    "normalize",
    "pad_to_32",
    "subsample_per_class",
    # training
    "DEFAULT_ARMS",
    "FULLY_TRAINED",
    "ExperimentResult",
    "Model",
    "TrainConfig",
    "TrainHistory",
    "build_model",
    "config_for_arm",
    "default_distribution",
    "evaluate",
    "forward",
    "loss_and_gradients",
    "predict",
    "run_experiment",
    "single_run",
    "train",
]
