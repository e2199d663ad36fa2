"""MDD significance tests for additive functional concurrent regression."""

__version__ = "0.1.0"

from .data import (  # noqa: E402
    ConcurrentDataset,
    center_variables,
    load_dataset,
    load_long_csv,
    load_wide_csv,
    save_long_csv,
    save_wide_csv,
    spline_fill,
)
from .errors import (  # noqa: E402
    DegenerateDataError,
    ExtrapolationError,
    InputError,
    MDDError,
    MissingDataError,
    ParseError,
)
from .inference import TestReport, global_test, partial_tests  # noqa: E402
from .integrated import statistic_td  # noqa: E402
from .matrices import u_center  # noqa: E402
from .pointwise import mdd_oracle, mdd_unbiased, pointwise_statistic  # noqa: E402
from .simulate import ScenarioConfig, TestConfig, ci_bounds, generate, run_monte_carlo  # noqa: E402

__all__ = [
    "__version__",
    "ConcurrentDataset",
    "center_variables",
    "load_dataset",
    "load_long_csv",
    "load_wide_csv",
    "save_long_csv",
    "save_wide_csv",
    "spline_fill",
    "DegenerateDataError",
    "ExtrapolationError",
    "InputError",
    "MDDError",
    "MissingDataError",
    "ParseError",
    "TestReport",
    "global_test",
    "partial_tests",
    "statistic_td",
    "u_center",
    "mdd_oracle",
    "mdd_unbiased",
    "pointwise_statistic",
    "ScenarioConfig",
    "TestConfig",
    "ci_bounds",
    "generate",
    "run_monte_carlo",
]
