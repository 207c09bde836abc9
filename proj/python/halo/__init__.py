"""Hallucination-awareness probing, direction fitting, attention blocking and
steering for LLaMA-family decoder models."""

from ._halo import (
    DataError,
    Engine,
    HaloError,
    ModelError,
    UsageError,
    __version__,
    effect_size,
    fit_directions,
    load_dataset,
    make_tiny_model,
    mean_difference_test,
    normality_screen,
    ols_simple,
    probe,
    run_command,
    selfcheck,
    steer,
    student_t_sf,
    ttest_greater,
)

__all__ = [
    "DataError",
    "Engine",
    "HaloError",
    "ModelError",
    "UsageError",
    "__version__",
    "effect_size",
    "fit_directions",
    "load_dataset",
    "make_tiny_model",
    "mean_difference_test",
    "normality_screen",
    "ols_simple",
    "probe",
    "run_command",
    "selfcheck",
    "steer",
    "student_t_sf",
    "ttest_greater",
]
