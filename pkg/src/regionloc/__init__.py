"""Regional source localization by MAP hypothesis testing over planar partitions."""

from .asymptotic import ArcPosterior, arc_posteriors, radius_from_power, trilaterate, two_sensor_locate
from .bounds import BoundScenario, compute_region_bounds, q_function, theorem_one_check, theorem_two_check
from .channel import ChannelParams, MeasurementVector, mean_log_power, sample_measurement
from .decision import ABSTAIN, CommGraph, Decision, decide_all_to_all, decide_limited, majority_vote
from .geometry import (
    Environment,
    GeometryError,
    PolygonRegion,
    containing_region,
    rectangle,
    unit_square,
    voronoi_partition,
)
from .harness import Scenario, SweepResult, export_results, load_scenario, run_sweep
from .posterior import H0, HypothesisPosterior, joint_posterior, neighborhood_posterior, regional_log_density
from .quadrature import QuadratureError, QuadratureSpec

__version__ = "0.1.0"
