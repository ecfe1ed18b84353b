"""Discrete-elastic-rod simulation of soft multi-tailed robots swimming in viscous fluid."""

__version__ = "0.1.0"

from .drag import DragModel, ExternalForces, TailDragNodes, drag_coefficients
from .elastic import ElasticModel, NaturalStrains, StiffnessSet, rod_stiffness
from .frames import DegenerateGeometryError, parallel_transport
from .measure import Measurement, efficiency, measure, measure_rotations, measure_speed
from .network import RodNetwork, State, initial_state
from .robot import Robot, RobotSpec, Trajectory, build_robot, simulate
from .stepper import MassModel, SolverConfig, Stepper, sparse_solve

__all__ = [
    "DragModel", "ExternalForces", "TailDragNodes", "drag_coefficients",
    "ElasticModel", "NaturalStrains", "StiffnessSet", "rod_stiffness",
    "DegenerateGeometryError", "parallel_transport",
    "Measurement", "efficiency", "measure", "measure_rotations", "measure_speed",
    "RodNetwork", "State", "initial_state",
    "Robot", "RobotSpec", "Trajectory", "build_robot", "simulate",
    "MassModel", "SolverConfig", "Stepper", "sparse_solve",
]
