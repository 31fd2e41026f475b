"""Safety filtering for LIDAR-guided robots with a soft-min composite of per-point ellipse barriers."""

from .barrier import BarrierEvaluation, CompositeParams, EmptyScan, composite_evaluate, softmin_compose
from .config import ConfigError, ScenarioConfig, load_scenario
from .core import EstimatedPose, Pose2, RobotState, SafetyEllipsoid, Scan
from .filter import FilterConfig, FilterOutput, solve_safety_qp
from .planner import PlannerConfig, ViewReference, next_view_reference
from .runner import RunSummary, TickRecord, run_scenario

__all__ = [
    "BarrierEvaluation", "CompositeParams", "ConfigError", "EmptyScan", "EstimatedPose", "FilterConfig",
    "FilterOutput", "PlannerConfig", "Pose2", "RobotState", "RunSummary", "SafetyEllipsoid", "Scan",
    "ScenarioConfig", "TickRecord", "ViewReference", "composite_evaluate", "load_scenario",
    "next_view_reference", "run_scenario", "softmin_compose", "solve_safety_qp",
]
