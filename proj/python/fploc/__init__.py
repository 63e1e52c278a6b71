"""Floor-plan based LiDAR localization (bindings to the C++ library)."""

from ._fploc import (
    Annf,
    DegenerateFit,
    Error,
    FloorPlan,
    FormatError,
    LidarScan,
    MotionProfile,
    OutOfBounds,
    ParseError,
    PlanarPose,
    PlanMap,
    Pose6,
    Scene,
    SensorModel,
    Tracker,
    TrackingLost,
    ValidationError,
    Waypoint,
    ate_cm,
    format_trajectory,
    parse_trajectory,
    plan_trajectory,
    plans,
    register_frame,
    rpe_cm,
    simulate_scan,
    vertical_state,
)

__all__ = [name for name in dir() if not name.startswith("_")]
