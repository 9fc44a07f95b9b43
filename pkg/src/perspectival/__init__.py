"""Frame-relative quantum measurement outcomes: simulation and joint-distribution analysis."""

from .bell import CorrelationTable, JointDistribution, chsh, feasible_range, joint_feasible
from .relativity import LAB, Frame, SpacetimePoint
from .scenarios import build_four_party, build_gao, perspectival_consistency

__version__ = "0.1.0"

__all__ = [
    "CorrelationTable",
    "JointDistribution",
    "chsh",
    "feasible_range",
    "joint_feasible",
    "LAB",
    "Frame",
    "SpacetimePoint",
    "build_four_party",
    "build_gao",
    "perspectival_consistency",
]
