"""Backward-Euler stepping with Newton-Raphson on a fixed sparse pattern."""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .drag import ExternalForces
from .elastic import ElasticModel, NaturalStrains, StiffnessSet
from .frames import DegenerateGeometryError, reference_twists, time_update_frames
from .network import RodNetwork, State, split_q

log = logging.getLogger(__name__)


class StepFailure(RuntimeError):
    def __init__(self, message: str, time: float, residual: float, iterations: int):
        super().__init__(f"{message} (t = {time:.6g} s, residual = {residual:.3e}, "
                         f"iterations = {iterations})")
        self.time = time
        self.residual = residual
        self.iterations = iterations


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    dt: float = 1e-2
    newton_tolerance: Optional[float] = None  # N; None -> 1e-6 * (EA_tail * 1e-3)
    max_newton_iterations: int = 50
    rigid_multiplier: float = 1e4

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.newton_tolerance is not None and not self.newton_tolerance > 0:
            raise ValueError("newton_tolerance must be positive")
        if self.max_newton_iterations < 1:
            raise ValueError("max_newton_iterations must be >= 1")


@dataclass
class MassModel:
    """Lumped mass per DOF (kg for positions, kg m^2 for twist angles)."""

    masses: np.ndarray

    def __post_init__(self):
        if np.any(self.masses <= 0):
            raise ValueError("all lumped masses must be positive")

    @classmethod
    def lumped(cls, network: RodNetwork, rho: float, r0: float,
               head_mass: float = 0.0, head_node: Optional[int] = None) -> "MassModel":
        """Half of each edge's mass to both ends; twist inertia of a solid cylinder per edge."""
        A = np.pi * r0**2
        lbar = network.undeformed_lengths
        node_m = np.zeros(network.node_count)
        np.add.at(node_m, network.edges[:, 0], 0.5 * rho * A * lbar)
        np.add.at(node_m, network.edges[:, 1], 0.5 * rho * A * lbar)
        if head_node is not None:
            node_m[head_node] += head_mass
        twist_m = rho * A * lbar * r0**2 / 2.0
        return cls(np.concatenate([np.repeat(node_m, 3), twist_m]))

    def scaled(self, factor: float) -> "MassModel":
        return MassModel(self.masses * factor)


class SparsePattern:
    """Fixed CSC structure for a list of (row, col) triplets that may repeat."""

    def __init__(self, rows, cols, n: int):
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        keys = cols * n + rows
        uniq, self._inverse = np.unique(keys, return_inverse=True)
        self.n = n
        self.nnz = len(uniq)
        indices = (uniq % n).astype(np.int32)
        counts = np.bincount(uniq // n, minlength=n)
        indptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int32)
        self._matrix = sp.csc_matrix((np.zeros(self.nnz), indices, indptr), shape=(n, n))

    def assemble(self, values) -> sp.csc_matrix:
        m = self._matrix.copy()
        m.data = np.bincount(self._inverse, weights=values, minlength=self.nnz)
        return m


def sparse_solve(J, f) -> np.ndarray:
    """Solve ``J dq = f`` with a sparse LU factorisation."""
    J = sp.csc_matrix(J)
    f = np.asarray(f, dtype=np.float64)
    try:
        lu = spla.splu(J, permc_spec="MMD_AT_PLUS_A")
    except RuntimeError as exc:  # "Factor is exactly singular"
        raise SolverError(f"singular Jacobian: {exc}") from exc
    dq = lu.solve(f)
    # one step of iterative refinement; rigid parts make J poorly scaled
    r = f - J @ dq
    if np.linalg.norm(r) > 1e-13 * np.linalg.norm(f):
        dq += lu.solve(r)
    if not np.all(np.isfinite(dq)):
        diag = np.abs(lu.U.diagonal())
        raise SolverError(f"ill-conditioned Jacobian (|U_ii| ratio {diag.min() / diag.max():.2e})")
    return dq


class Stepper:
    """Advances one :class:`State` per call to :meth:`step`."""

    def __init__(self, network: RodNetwork, natural: NaturalStrains, stiffness: StiffnessSet,
                 mass: MassModel, external: Optional[ExternalForces], config: SolverConfig):
        self.network = network
        self.natural = natural
        self.stiffness = stiffness
        self.mass = mass
        self.external = external
        self.config = config
        self.elastic = ElasticModel(network, natural, stiffness)
        if config.newton_tolerance is None:
            flexible = stiffness.EA[~network.rigid_edges] if np.any(~network.rigid_edges) else stiffness.EA
            self.tolerance = 1e-6 * float(np.min(flexible)) * 1e-3
        else:
            self.tolerance = config.newton_tolerance
        n = network.ndof
        er, ec = self.elastic.hessian_pattern()
        parts_r, parts_c = [er], [ec]
        if external is not None:
            xr, xc = external.pattern()
            parts_r.append(xr)
            parts_c.append(xc)
        diag = np.arange(n)
        parts_r.append(diag)
        parts_c.append(diag)
        self.pattern = SparsePattern(np.concatenate(parts_r), np.concatenate(parts_c), n)
        self.last_iterations = 0
        self.last_residual = 0.0

    def with_actuation(self, omega_T: float) -> "Stepper":
        """Same stepper with head natural-twist rate ``omega_T`` (rad/s)."""
        self.natural = replace(self.natural, head_twist_rate=omega_T)
        self.elastic.natural = self.natural
        return self

    # ------------------------------------------------------------------
    def frames_at(self, q, state: State):
        x, _ = split_q(q, self.network.node_count)
        d1, d2, t = time_update_frames(state.d1, state.d2, state.tangents, x, self.network.edges)
        rt = reference_twists(d1, t, self.network.springs.edges, self.network.springs.signs,
                              state.ref_twist)
        return d1, d2, t, rt

    def _evaluate(self, q, state: State, dt: float, want_jac: bool = True):
        t_new = state.time + dt
        d1, d2, t, rt = self.frames_at(q, state)
        _, grad, hvals = self.elastic.evaluate(q, d1, d2, rt, t_new, want_hess=want_jac)
        m = self.mass.masses
        f = m / dt * ((q - state.q) / dt - state.q_dot) + grad
        parts = [hvals]
        if self.external is not None:
            fext, xvals = self.external.evaluate(q, state.q, dt)
            f -= fext
            parts.append(xvals)
        if not want_jac:
            return f, None
        parts.append(m / dt**2)
        return f, self.pattern.assemble(np.concatenate(parts))

    def residual(self, q, state: State, dt: Optional[float] = None) -> np.ndarray:
        """Equations-of-motion residual for the step from ``state`` to ``q``."""
        return self._evaluate(q, state, dt or self.config.dt, want_jac=False)[0]

    def jacobian(self, q, state: State, dt: Optional[float] = None) -> sp.csc_matrix:
        return self._evaluate(q, state, dt or self.config.dt)[1]

    # ------------------------------------------------------------------
    def step(self, state: State) -> State:
        """One time step; on Newton failure retry once as two half steps."""
        try:
            return self._solve(state, self.config.dt)
        except (StepFailure, DegenerateGeometryError, SolverError) as exc:
            log.warning("step at t=%.4f failed (%s); retrying with dt/2", state.time, exc)
            half = self.config.dt / 2.0
            iters = 0
            mid = self._solve(state, half)
            iters += self.last_iterations
            out = self._solve(mid, half)
            self.last_iterations += iters
            return out

    def _solve(self, state: State, dt: float) -> State:
        q = state.q.copy()
        err = np.inf
        for it in range(1, self.config.max_newton_iterations + 1):
            f, J = self._evaluate(q, state, dt)
            err = float(np.sum(np.abs(f)))
            if not np.isfinite(err):
                raise StepFailure("non-finite residual", state.time, err, it)
            q = q - sparse_solve(J, f)
            if err < self.tolerance:
                self.last_iterations = it
                self.last_residual = err
                break
        else:
            raise StepFailure("Newton did not converge", state.time, err,
                              self.config.max_newton_iterations)
        d1, d2, t, rt = self.frames_at(q, state)
        return State(q, (q - state.q) / dt, d1, d2, t, rt, state.time + dt)
