from .datasets import (
    LogisticDataset,
    generate_datasets,
    load_logistic_csv,
    synthetic_logistic,
    write_logistic_csv,
)
from .fhn import FhnDataset, FitzHughNagumoModel, fhn_solve, fhn_solve_batch, generate_fhn_dataset
from .gaussian import (
    ConstantMetric,
    DiagonalFunctionMetric,
    ExampleMetricModel,
    GaussianModel,
    PolynomialMetric,
    ScalarMetric,
)
from .logistic import LogisticModel

__all__ = [
    "ConstantMetric",
    "DiagonalFunctionMetric",
    "ExampleMetricModel",
    "FhnDataset",
    "FitzHughNagumoModel",
    "GaussianModel",
    "LogisticDataset",
    "LogisticModel",
    "PolynomialMetric",
    "ScalarMetric",
    "fhn_solve",
    "fhn_solve_batch",
    "generate_datasets",
    "generate_fhn_dataset",
    "load_logistic_csv",
    "synthetic_logistic",
    "write_logistic_csv",
]
