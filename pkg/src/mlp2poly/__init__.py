"""Convert trained multilayer perceptrons into equivalent polynomials."""

from .activations import ActivationKind, UnsupportedActivationError, derivative_at_zero, taylor_coefficients
from .combinatorics import (
    Multiset,
    PartitionCache,
    PartitionCeilingError,
    build_cache,
    enumerate_partitions,
    partitions_for_label,
)
from .network import Layer, NetworkError, NetworkSpec, forward, load_network, save_network
from .polynomial import (
    Polynomial,
    PolynomialError,
    eval_poly,
    format_label,
    linear_combine,
    load_polynomial,
    save_polynomial,
    top_n_coefficients,
)
from .trainer import (
    DatasetSpec,
    TrainConfig,
    TrainingDivergedError,
    constraint_project,
    gen_poly_data,
    scale_to_unit,
    train,
)
from .transform import LayerPolynomials, TransformConfig, activation_step, transform

__version__ = "0.1.0"

__all__ = [
    "ActivationKind",
    "DatasetSpec",
    "Layer",
    "LayerPolynomials",
    "Multiset",
    "NetworkError",
    "NetworkSpec",
    "PartitionCache",
    "PartitionCeilingError",
    "Polynomial",
    "PolynomialError",
    "TrainConfig",
    "TrainingDivergedError",
    "TransformConfig",
    "UnsupportedActivationError",
    "activation_step",
    "build_cache",
    "constraint_project",
    "derivative_at_zero",
    "enumerate_partitions",
    "eval_poly",
    "format_label",
    "forward",
    "gen_poly_data",
    "linear_combine",
    "load_network",
    "load_polynomial",
    "partitions_for_label",
    "save_network",
    "save_polynomial",
    "scale_to_unit",
    "taylor_coefficients",
    "top_n_coefficients",
    "train",
    "transform",
]
