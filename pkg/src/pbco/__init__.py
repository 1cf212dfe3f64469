"""Pseudo-1d bandit convex optimization: learners, environments and a regret harness."""
from .geometry import ProblemConfig, ParameterNet, PredictionRange, build_net, prediction_range, project_ball, project_w_alpha
from .kernel1d import BinnedDensity, KernelParams

__version__ = "0.1.0"
