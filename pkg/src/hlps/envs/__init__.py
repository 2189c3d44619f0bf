from .maze import (
    ACTION_DIM,
    LAYOUTS,
    OBS_DIM,
    EnvState,
    Layout,
    LayoutInfo,
    MazeConfig,
    PointMaze,
    StepResult,
    load_layout,
    parse_layout,
    print_all_layouts,
    reset,
    step,
    success_metric,
)

__all__ = [
    "OBS_DIM",
    "ACTION_DIM",
    "LAYOUTS",
    "LayoutInfo",
    "Layout",
    "MazeConfig",
    "EnvState",
    "StepResult",
    "PointMaze",
    "load_layout",
    "parse_layout",
    "print_all_layouts",
    "reset",
    "step",
    "success_metric",
]
