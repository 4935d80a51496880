"""Actuation-topology and centroidal-inertia analysis for legged robots."""

__version__ = "0.1.0"

from .model import (ActuatorDef, FrontalPlaneRule, GridSpec, JointDef, ModelError, RobotModel,
                    SpatialInertia, load_model, mirrored, standard_grid, parse_model,
                    relocate_actuators, save_model, serialize_model, validate_model)
from .topology import (ActuationTopology, Tello5Params, fit_polynomial_map, reflected_inertia,
                       tello_forward, tello_home_jacobian, tello_inverse, topology_jacobian,
                       torque_map)
from .spatial import ccrbi, centroidal_momentum, forward_kinematics
from .cii import cii, cii_sweep, rcii_compare, resolve_dependent
from .polytope import RequirementSet, capability_polytope, contains, min_gear_ratio
from .jump import SimConfig, bezier5, compare_topologies, run_jump

__all__ = [
    "ActuatorDef", "FrontalPlaneRule", "GridSpec", "JointDef", "ModelError", "RobotModel",
    "SpatialInertia", "load_model", "mirrored", "standard_grid", "parse_model", "relocate_actuators",
    "save_model", "serialize_model", "validate_model",
    "ActuationTopology", "Tello5Params", "fit_polynomial_map", "reflected_inertia",
    "tello_forward", "tello_home_jacobian", "tello_inverse", "topology_jacobian", "torque_map",
    "ccrbi", "centroidal_momentum", "forward_kinematics",
    "cii", "cii_sweep", "rcii_compare", "resolve_dependent",
    "RequirementSet", "capability_polytope", "contains", "min_gear_ratio",
    "SimConfig", "bezier5", "compare_topologies", "run_jump",
]
