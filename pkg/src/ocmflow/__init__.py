"""Support-function flows toward solutions of c phi(h) sigma_k = f on the sphere."""
from .flow import ConvexityLostError, FlowConfig, FlowGuardError, FlowState, RunResult, run, step
from .geometry import body_geometry, curvature_bundle, convexity_margin
from .orlicz import OrliczModel, check_hypotheses
from .sphere import ScalarField, SphericalGrid, build_grid

__all__ = [
    "ConvexityLostError", "FlowConfig", "FlowGuardError", "FlowState", "OrliczModel", "RunResult",
    "ScalarField", "SphericalGrid", "body_geometry", "build_grid", "check_hypotheses", "convexity_margin",
    "curvature_bundle", "run", "step",
]
__version__ = "0.1.0"
