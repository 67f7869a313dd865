from .cramming import (AccessibilityGrid, CramConfig, CramResult, GridFit, OptimizerConfig,
                       accessibility_grid, cram_one, fit_grid, make_targets)
from .copying import CopyConfig, CopyEval, TrainLog, copy_eval, copy_finetune
from .fitting import LinearFit, SigmoidFit, sigmoid_fit, slope_fit

__all__ = ["AccessibilityGrid", "CramConfig", "CramResult", "GridFit", "OptimizerConfig",
           "accessibility_grid", "cram_one", "fit_grid", "make_targets", "CopyConfig", "CopyEval",
           "TrainLog", "copy_eval", "copy_finetune", "LinearFit", "SigmoidFit", "sigmoid_fit",
           "slope_fit"]
