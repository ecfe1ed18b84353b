"""Resistive-force-theory drag on the tails plus Stokes-like drag on the head."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from numba import njit

from .frames import _dot, _norm


class InvalidGeometryError(ValueError):
    pass


def drag_coefficients(mu: float, L: float, r0: float) -> tuple[float, float]:
    """Tangential and perpendicular RFT coefficients of a slender rod of length L, radius r0."""
    if not (L > 0 and r0 > 0):
        raise InvalidGeometryError("tail length and radius must be positive")
    lg = math.log(2.0 * L / r0)
    if lg <= 0.5:
        raise InvalidGeometryError(f"rod not slender enough: log(2L/r0) = {lg:.3f} <= 1/2")
    return 2.0 * math.pi * mu / (lg - 0.5), 4.0 * math.pi * mu / (lg + 0.5)


@dataclass(frozen=True)
class DragModel:
    mu: float = 6.828  # Pa s
    C1: float = 2.420
    C2: float = 0.039
    a: float = 0.02  # head radius, m
    L: float = 0.111  # tail length, m
    r0: float = 0.0032  # tail radius, m

    @property
    def eta_t(self) -> float:
        return drag_coefficients(self.mu, self.L, self.r0)[0]

    @property
    def eta_p(self) -> float:
        return drag_coefficients(self.mu, self.L, self.r0)[1]

    @property
    def head_force_coeff(self) -> float:
        return 6.0 * math.pi * self.C1 * self.mu * self.a

    @property
    def head_torque_coeff(self) -> float:
        return 8.0 * math.pi * self.C2 * self.mu * self.a**3


def tail_node_force(v, t, dl: float, eta_t: float, eta_p: float) -> np.ndarray:
    """RFT force on one node: tangential and normal velocity parts resisted separately."""
    v = np.asarray(v, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    vt = (v @ t) * t
    return -eta_t * vt * dl - eta_p * (v - vt) * dl


def head_force(v_h, drag: DragModel) -> np.ndarray:
    return -drag.head_force_coeff * np.asarray(v_h, dtype=np.float64)


def head_torque(omega_h: float, drag: DragModel) -> float:
    return -drag.head_torque_coeff * omega_h


@dataclass(frozen=True)
class TailDragNodes:
    """Nodes that feel RFT drag.

    ``edges[k]`` lists up to two edges whose tangents are averaged at node
    ``nodes[k]`` (-1 marks an unused slot), ``signs[k]`` orients them along the
    tail, ``voronoi[k]`` is the length the node represents.
    """

    nodes: np.ndarray  # (nd,) int
    edges: np.ndarray  # (nd, 2) int
    signs: np.ndarray  # (nd, 2) float
    voronoi: np.ndarray  # (nd,)

    def __len__(self) -> int:
        return len(self.nodes)


@njit(cache=True)
def _rft_kernel(x, x_old, dt, nodes, tedges, tsigns, vor, edges, eta_t, eta_p, f_out, vals_out):
    """Accumulate RFT forces into ``f_out`` and write 45 values (-dF/dq) per node.

    Value layout per node: 3x3 block on the node itself, then for each of the
    two tangent edges a 3x3 block on its first and on its second node.
    """
    I3 = np.eye(3)
    for k in range(nodes.shape[0]):
        j = nodes[k]
        s = np.zeros(3)
        tl = np.zeros((2, 3))
        ln = np.zeros(2)
        for a in range(2):
            e = tedges[k, a]
            if e < 0:
                continue
            ev = x[edges[e, 1]] - x[edges[e, 0]]
            ln[a] = _norm(ev)
            tl[a] = ev / ln[a]
            s += tsigns[k, a] * tl[a]
        ns = _norm(s)
        t = s / ns
        v = (x[j] - x_old[j]) / dt
        vt = _dot(v, t)
        dl = vor[k]
        F = -dl * (eta_p * v + (eta_t - eta_p) * vt * t)
        for i in range(3):
            f_out[3 * j + i] += F[i]
        base = 45 * k
        # -dF/dx_j through the velocity
        for r in range(3):
            for c in range(3):
                vals_out[base + 3 * r + c] = dl / dt * (eta_p * I3[r, c] + (eta_t - eta_p) * t[r] * t[c])
        # -dF/dt
        dFdt = np.empty((3, 3))
        for r in range(3):
            for c in range(3):
                dFdt[r, c] = dl * (eta_t - eta_p) * (vt * I3[r, c] + t[r] * v[c])
        Pt = (I3 - np.outer(t, t)) / ns
        for a in range(2):
            off = base + 9 + 18 * a
            e = tedges[k, a]
            if e < 0:
                for m in range(18):
                    vals_out[off + m] = 0.0
                continue
            Pe = (I3 - np.outer(tl[a], tl[a])) * (tsigns[k, a] / ln[a])
            M = dFdt @ Pt @ Pe  # = -dF/de
            for r in range(3):
                for c in range(3):
                    vals_out[off + 3 * r + c] = -M[r, c]  # first node: de/dx = -I
                    vals_out[off + 9 + 3 * r + c] = M[r, c]


class ExternalForces:
    """Assemble RFT tail drag, head drag and head torque for one robot."""

    def __init__(self, node_count: int, edges, tail: TailDragNodes, head_node: int,
                 head_edge: int, drag: DragModel):
        self.node_count = node_count
        self.edges = np.ascontiguousarray(edges, dtype=np.int64)
        self.tail = tail
        self.head_node = head_node
        self.head_edge = head_edge
        self.drag = drag
        self.eta_t, self.eta_p = drag_coefficients(drag.mu, drag.L, drag.r0)

    @property
    def ndof(self) -> int:
        return 3 * self.node_count + len(self.edges)

    def pattern(self) -> tuple[np.ndarray, np.ndarray]:
        """Rows/cols matching the value layout of :meth:`evaluate`."""
        tl = self.tail
        rows, cols = [], []
        for k in range(len(tl)):
            j = tl.nodes[k]
            targets = [j]
            for a in range(2):
                e = tl.edges[k, a]
                if e < 0:
                    targets += [j, j]
                else:
                    targets += [self.edges[e, 0], self.edges[e, 1]]
            for c_node in targets:
                r, c = np.meshgrid(3 * j + np.arange(3), 3 * c_node + np.arange(3), indexing="ij")
                rows.append(r.ravel())
                cols.append(c.ravel())
        h = 3 * self.head_node + np.arange(3)
        th = 3 * self.node_count + self.head_edge
        rows += [h, [th]]
        cols += [h, [th]]
        return np.concatenate(rows).astype(np.int64), np.concatenate(cols).astype(np.int64)

    def evaluate(self, q_new, q_old, dt):
        """External force vector and the values of ``-d f_ext / d q`` in :meth:`pattern` order."""
        n = self.node_count
        x = np.ascontiguousarray(q_new[: 3 * n].reshape(n, 3))
        xo = np.ascontiguousarray(q_old[: 3 * n].reshape(n, 3))
        f = np.zeros(len(q_new))
        tl = self.tail
        vals = np.empty(45 * len(tl) + 4)
        _rft_kernel(x, xo, dt, tl.nodes, tl.edges, tl.signs, tl.voronoi, self.edges,
                    self.eta_t, self.eta_p, f, vals)
        ch = self.drag.head_force_coeff
        ct = self.drag.head_torque_coeff
        h = 3 * self.head_node
        th = 3 * n + self.head_edge
        f[h:h + 3] += -ch * (q_new[h:h + 3] - q_old[h:h + 3]) / dt
        f[th] += -ct * (q_new[th] - q_old[th]) / dt
        vals[-4:-1] = ch / dt
        vals[-1] = ct / dt
        return f, vals


def external_force_and_jacobian(q_new, q_old, dt, ext: ExternalForces):
    """``(f_ext, J_ext)`` with ``J_ext = -d f_ext / d q_new`` as a sparse CSR matrix."""
    f, vals = ext.evaluate(q_new, q_old, dt)
    r, c = ext.pattern()
    J = sp.coo_matrix((vals, (r, c)), shape=(ext.ndof, ext.ndof)).tocsr()
    return f, J
