"""Asymptotic privacy-utility frontier of ridge logistic regression on the bi-level design."""

__version__ = "0.1.0"

from .errors import (
    BilevelMIError,
    ConvergenceError,
    DegenerateSigmaError,
    DegenerateSigmaTauError,
    IntegrationError,
    InvalidArgumentError,
    NumericDomainError,
    TrainingError,
)
from .kernels import BACKEND
from .metrics import (
    SampleContext,
    TradeoffPoint,
    advantage_average,
    advantage_sample,
    density_test,
    density_train,
    sweep,
    test_error,
    tune_lambda,
)
from .solver import BiLevelSpec, FixedPointState, SolveReport, closed_form_lambda_inf, solve
