"""Packet-level simulation of multi-hop ad hoc networks on the unit sphere.

The package deploys uniform nodes on the unit-area sphere, builds a
certified Voronoi tessellation, colors it into a TDMA schedule, routes
connections along great circles (or arbitrary adjacency paths), runs a
slot-synchronous SINR-based packet simulation, and empirically checks
the geometric and throughput claims that motivate the design.
"""

from .engine import EngineConfig, RunMetrics, run, saturated_mode, throughput_summary
from .errors import ConfigurationError, GeometryError, RoutingError, SaturationError
from .links import (
    BpskPacketModel,
    ConstantPModel,
    LogisticModel,
    RadioParams,
    ThresholdModel,
    hop_success_with_retries,
    make_link_model,
    sinr,
    success_probability,
)
from .routing import Connection, Route, arbitrary_route, pick_connections, straight_line_route
from .scheduling import Schedule, build_conservative_schedule, build_schedule
from .tessellation import (
    Deployment,
    Tessellation,
    build_tessellation,
    deploy,
    min_cell_occupancy,
    rho_for_n,
)
from .verification import BoundSet, compute_bounds, throughput_ceilings

__all__ = [
    "BoundSet",
    "BpskPacketModel",
    "ConfigurationError",
    "Connection",
    "ConstantPModel",
    "Deployment",
    "EngineConfig",
    "GeometryError",
    "LogisticModel",
    "RadioParams",
    "Route",
    "RoutingError",
    "RunMetrics",
    "SaturationError",
    "Schedule",
    "Tessellation",
    "ThresholdModel",
    "arbitrary_route",
    "build_conservative_schedule",
    "build_schedule",
    "build_tessellation",
    "compute_bounds",
    "deploy",
    "hop_success_with_retries",
    "make_link_model",
    "min_cell_occupancy",
    "pick_connections",
    "rho_for_n",
    "run",
    "saturated_mode",
    "sinr",
    "straight_line_route",
    "success_probability",
    "throughput_ceilings",
    "throughput_summary",
]

__version__ = "0.1.0"
