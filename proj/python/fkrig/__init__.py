from ._core import (
    Config,
    Dataset,
    InputError,
    Model,
    NumericError,
    VarKind,
    benchmark,
    corr_t,
    fit,
    generate,
    main_effects,
    max_over_t,
    minimax,
    validate,
)

__all__ = [
    "Config",
    "Dataset",
    "InputError",
    "Model",
    "NumericError",
    "VarKind",
    "benchmark",
    "corr_t",
    "fit",
    "generate",
    "main_effects",
    "max_over_t",
    "minimax",
    "validate",
]
