"""Geometry of the n-tailed robot and the simulation driver."""

from __future__ import annotations

import logging
import math
import time as _time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .drag import DragModel, ExternalForces, TailDragNodes
from .elastic import NaturalStrains, StiffnessSet, natural_strains_from, rod_stiffness
from .network import RodNetwork, State, initial_state
from .stepper import MassModel, SolverConfig, Stepper

log = logging.getLogger(__name__)


class BuildError(ValueError):
    pass


@dataclass(frozen=True)
class RobotSpec:
    """Robot geometry and material.  Lengths in m, E in Pa, rho in kg/m^3."""

    n: int = 2
    a: float = 0.02  # head radius; head span L1 = 2a
    L2: float = 0.04  # disc diameter
    L3: float = 0.111  # tail length
    r0: float = 0.0032  # tail radius
    E: float = 1.2e6
    nu: float = 0.5
    rho: float = 1000.0
    target_edge_length: float = 4.11e-3
    head_mass: float = 0.035  # kg
    axis: tuple = (0.0, 0.0, 1.0)  # swimming axis; the head is at the + end

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise BuildError(f"n must be a positive integer, got {self.n}")
        for name in ("a", "L2", "L3", "r0", "E", "rho", "target_edge_length"):
            if not getattr(self, name) > 0:
                raise BuildError(f"{name} must be positive, got {getattr(self, name)}")
        if not (-1.0 < self.nu <= 0.5):
            raise BuildError(f"nu must lie in (-1, 0.5], got {self.nu}")
        if self.head_mass < 0:
            raise BuildError("head_mass must be non-negative")
        if not np.linalg.norm(self.axis) > 0:
            raise BuildError("axis must be a non-zero vector")

    @property
    def L1(self) -> float:
        return 2.0 * self.a

    @property
    def tail_edge_count(self) -> int:
        return max(1, int(round(self.L3 / self.target_edge_length)))


@dataclass
class Robot:
    spec: RobotSpec
    network: RodNetwork
    natural: NaturalStrains
    stiffness: StiffnessSet
    mass: MassModel
    positions: np.ndarray  # (N, 3) initial = undeformed
    tail_drag: TailDragNodes
    axis: np.ndarray
    joint_node: int
    spoke_edges: np.ndarray  # (n,)
    spoke_tips: np.ndarray  # (n,)
    tail_edges: np.ndarray  # (n, m) edge indices root -> tip
    flexible_springs: np.ndarray  # (ns,) bool
    head_node: int = 1
    head_edge: int = 0
    front_node: int = 0

    def initial_state(self) -> State:
        return initial_state(self.network, self.positions)

    def external_forces(self, drag: DragModel) -> ExternalForces:
        return ExternalForces(self.network.node_count, self.network.edges, self.tail_drag,
                              self.head_node, self.head_edge, drag)

    def stepper(self, drag: DragModel, config: SolverConfig = SolverConfig(),
                omega_T: float = 0.0) -> Stepper:
        st = Stepper(self.network, self.natural, self.stiffness, self.mass,
                     self.external_forces(drag), config)
        return st.with_actuation(omega_T)

    def with_tail_stiffness(self, factor: float) -> "Robot":
        """Copy with every flexible stretch/bend/twist stiffness multiplied by ``factor``."""
        stiff = self.stiffness.scaled(~self.network.rigid_edges, self.flexible_springs, factor)
        return _replace(self, stiffness=stiff)

    def with_mass_scale(self, factor: float) -> "Robot":
        return _replace(self, mass=self.mass.scaled(factor))


def _replace(robot: Robot, **kw) -> Robot:
    from dataclasses import replace

    return replace(robot, **kw)


def _rotation_to(axis) -> np.ndarray:
    """Rotation matrix taking +z onto unit ``axis``."""
    z = np.array([0.0, 0.0, 1.0])
    a = np.asarray(axis, dtype=np.float64)
    a = a / np.linalg.norm(a)
    c = float(z @ a)
    v = np.cross(z, a)
    s = np.linalg.norm(v)
    if s < 1e-14:
        return np.eye(3) if c > 0 else np.diag([1.0, -1.0, -1.0])
    k = v / s
    K = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    return np.eye(3) + s * K + (1 - c) * K @ K


def build_robot(spec: RobotSpec = RobotSpec(), rigid_multiplier: float = 1e4) -> Robot:
    """Build the robot along ``spec.axis``.

    Node order: 0 front of head, 1 head node x_h, 2 joint x_a, then for each
    tail its spoke tip followed by its tail nodes from root to tip.  Edge 0
    (front -> x_h) carries the head rotation angle, edge 1 joins x_h to x_a,
    then each spoke is followed by its tail edges.
    """
    if not rigid_multiplier > 0:
        raise BuildError("rigid_multiplier must be positive")
    n, a, m = int(spec.n), spec.a, spec.tail_edge_count
    dl = spec.L3 / m
    R = spec.L2 / 2.0
    pts = [(0.0, 0.0, 0.0), (0.0, 0.0, -a), (0.0, 0.0, -2.0 * a)]
    edges = [(0, 1), (1, 2)]
    rigid = [True, True]
    spoke_edges, spoke_tips, tail_edges = [], [], []
    for k in range(n):
        phi = 2.0 * math.pi * k / n
        tip = len(pts)
        pts.append((R * math.cos(phi), R * math.sin(phi), -2.0 * a))
        spoke_edges.append(len(edges))
        spoke_tips.append(tip)
        edges.append((2, tip))
        rigid.append(True)
        row = []
        prev = tip
        for i in range(1, m + 1):
            pts.append((R * math.cos(phi), R * math.sin(phi), -2.0 * a - i * dl))
            row.append(len(edges))
            edges.append((prev, len(pts) - 1))
            rigid.append(False)
            prev = len(pts) - 1
        tail_edges.append(row)

    axis = np.asarray(spec.axis, dtype=np.float64)
    axis = axis / np.linalg.norm(axis)
    x = np.asarray(pts) @ _rotation_to(axis).T
    rigid = np.asarray(rigid)
    net = RodNetwork.from_edges(x, edges, rigid, head_edge_index=0, head_node_index=1, root_node=0)

    EA, EI, GJ = rod_stiffness(spec.E, spec.r0, spec.nu)
    sp_rigid = rigid[net.springs.edges].any(axis=1)
    mult_e = np.where(rigid, rigid_multiplier, 1.0)
    mult_s = np.where(sp_rigid, rigid_multiplier, 1.0)
    stiffness = StiffnessSet(EA * mult_e, EI * mult_s, GJ * mult_s, rigid_multiplier)

    st0 = initial_state(net, x)
    natural = natural_strains_from(net, st0.q, st0.d1, st0.d2, st0.ref_twist)
    head_spring = int(np.flatnonzero(net.springs.nodes[:, 1] == 1)[0])
    natural.head_spring = head_spring

    mass = MassModel.lumped(net, spec.rho, spec.r0, spec.head_mass, head_node=1)

    # RFT nodes: every tail node, spoke tip included; tangent from the tail edges only
    t_nodes, t_edges, t_vor = [], [], []
    for k in range(n):
        row = tail_edges[k]
        lens = net.undeformed_lengths[row]
        t_nodes.append(spoke_tips[k])
        t_edges.append((row[0], -1))
        t_vor.append(0.5 * lens[0])
        for i in range(1, m):
            t_nodes.append(int(net.edges[row[i], 0]))
            t_edges.append((row[i - 1], row[i]))
            t_vor.append(0.5 * (lens[i - 1] + lens[i]))
        t_nodes.append(int(net.edges[row[-1], 1]))
        t_edges.append((row[-1], -1))
        t_vor.append(0.5 * lens[-1])
    t_edges = np.asarray(t_edges, dtype=np.int64)
    tail = TailDragNodes(
        np.asarray(t_nodes, dtype=np.int64),
        t_edges,
        np.where(t_edges >= 0, 1.0, 0.0),
        np.asarray(t_vor),
    )
    return Robot(
        spec=spec,
        network=net,
        natural=natural,
        stiffness=stiffness,
        mass=mass,
        positions=x,
        tail_drag=tail,
        axis=axis,
        joint_node=2,
        spoke_edges=np.asarray(spoke_edges),
        spoke_tips=np.asarray(spoke_tips),
        tail_edges=np.asarray(tail_edges),
        flexible_springs=~sp_rigid,
    )


@dataclass
class Trajectory:
    """Per-step record of one run (index 0 is the initial state)."""

    t: np.ndarray
    head: np.ndarray  # (K+1, 3) x_h
    s: np.ndarray  # axial displacement of x_h, + toward the head
    theta_h: np.ndarray
    spoke_angle: np.ndarray  # unwrapped azimuth of the first spoke about the axis
    residual: np.ndarray
    iters: np.ndarray
    omega_T: float
    dt: float
    wall_time: float = 0.0
    states: Optional[np.ndarray] = None  # (K+1, ndof) when requested
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.t)


def _perp_basis(axis):
    seed = np.array([1.0, 0.0, 0.0]) if abs(axis[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = seed - (seed @ axis) * axis
    e1 /= np.linalg.norm(e1)
    return e1, np.cross(axis, e1)


def simulate(robot: Robot, omega_T: float, duration: float, config: SolverConfig = SolverConfig(),
             drag: DragModel = DragModel(), keep_states: bool = False,
             callback: Optional[Callable[[State], None]] = None) -> Trajectory:
    """Run ``duration`` seconds with motor rate ``omega_T`` (rad/s)."""
    if not duration > 0:
        raise ValueError("duration must be positive")
    steps = int(round(duration / config.dt))
    stepper = robot.stepper(drag, config, omega_T)
    state = robot.initial_state()
    net = robot.network
    N = net.node_count
    axis = robot.axis
    e1, e2 = _perp_basis(axis)
    hn, th = robot.head_node, 3 * N + robot.head_edge
    sa, sb = robot.joint_node, int(robot.spoke_tips[0])

    t = np.empty(steps + 1)
    head = np.empty((steps + 1, 3))
    theta = np.empty(steps + 1)
    ang = np.empty(steps + 1)
    res = np.zeros(steps + 1)
    its = np.zeros(steps + 1, dtype=np.int64)
    states = np.empty((steps + 1, net.ndof)) if keep_states else None

    def record(i, st):
        x = st.q[: 3 * N].reshape(N, 3)
        t[i] = st.time
        head[i] = x[hn]
        theta[i] = st.q[th]
        sp = x[sb] - x[sa]
        raw = math.atan2(sp @ e2, sp @ e1)
        if i > 0:
            raw += 2.0 * math.pi * math.floor((ang[i - 1] - raw) / (2.0 * math.pi) + 0.5)
        ang[i] = raw
        if keep_states:
            states[i] = st.q

    record(0, state)
    t0 = _time.perf_counter()
    for k in range(1, steps + 1):
        state = stepper.step(state)
        record(k, state)
        res[k] = stepper.last_residual
        its[k] = stepper.last_iterations
        if callback is not None:
            callback(state)
    wall = _time.perf_counter() - t0
    s = (head - head[0]) @ axis
    return Trajectory(t, head, s, theta, ang, res, its, omega_T, config.dt, wall, states,
                      {"n": robot.spec.n})
