"""Discrete strains, elastic energies and their analytic derivatives.

Bend-twist springs are evaluated in a local representation
``[x_in, theta_in, x_c, theta_out, x_out]`` (11 DOFs) in which both tangents
run through the center node.  A stored edge that points the other way is
flipped: frame ``{-d1, d2, -t}``, twist ``-theta``; the chain-rule sign is
applied to the theta rows/columns at assembly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .frames import DegenerateGeometryError, _cross, _dot, _norm, edge_tangents, time_update_frames
from .frames import material_frame, reference_twists
from .network import RodNetwork, split_q


@dataclass
class NaturalStrains:
    """Undeformed strains.  Only the head spring's twist moves in time."""

    edge_lengths: np.ndarray  # (ne,)
    kappa1: np.ndarray  # (ns,)
    kappa2: np.ndarray  # (ns,)
    twist: np.ndarray  # (ns,) value at t = 0
    head_spring: int = -1
    head_twist_rate: float = 0.0  # rad/s

    def twist_at(self, t: float) -> np.ndarray:
        tw = self.twist.copy()
        if self.head_spring >= 0:
            tw[self.head_spring] += self.head_twist_rate * t
        return tw


@dataclass
class StiffnessSet:
    EA: np.ndarray  # (ne,)
    EI: np.ndarray  # (ns,)
    GJ: np.ndarray  # (ns,)
    rigid_multiplier: float = 1e4

    def scaled(self, edge_mask=None, spring_mask=None, factor: float = 1.0) -> "StiffnessSet":
        EA, EI, GJ = self.EA.copy(), self.EI.copy(), self.GJ.copy()
        if edge_mask is not None:
            EA[edge_mask] *= factor
        if spring_mask is not None:
            EI[spring_mask] *= factor
            GJ[spring_mask] *= factor
        return StiffnessSet(EA, EI, GJ, self.rigid_multiplier)


def rod_stiffness(E: float, r0: float, nu: float = 0.5) -> tuple[float, float, float]:
    """EA, EI, GJ of a solid circular section.

    GJ uses the polar moment (pi/2) r0**4.  G = E / (2 (1 + nu)), i.e. E/3 at nu = 0.5.
    """
    G = E / (2.0 * (1.0 + nu))
    return E * math.pi * r0**2, 0.25 * math.pi * E * r0**4, 0.5 * math.pi * G * r0**4


# --------------------------------------------------------------------------
# scalar strain helpers
# --------------------------------------------------------------------------


def axial_stretch(edge_vector, undeformed_length: float) -> float:
    return float(np.linalg.norm(edge_vector) / undeformed_length - 1.0)


def curvature_binormal(e_in, e_out) -> np.ndarray:
    e_in = np.asarray(e_in, dtype=np.float64)
    e_out = np.asarray(e_out, dtype=np.float64)
    den = np.linalg.norm(e_in) * np.linalg.norm(e_out) + e_in @ e_out
    if den <= 1e-12 * np.linalg.norm(e_in) * np.linalg.norm(e_out):
        raise DegenerateGeometryError("antiparallel edges: curvature binormal undefined")
    return 2.0 * np.cross(e_in, e_out) / den


def material_curvatures(kb, m1_in, m2_in, m1_out, m2_out) -> tuple[float, float]:
    """Both curvatures are plain projections (no minus sign on the second)."""
    kb = np.asarray(kb, dtype=np.float64)
    k1 = 0.5 * (np.asarray(m2_in) + np.asarray(m2_out)) @ kb
    k2 = 0.5 * (np.asarray(m1_in) + np.asarray(m1_out)) @ kb
    return float(k1), float(k2)


def discrete_twist(theta_in, theta_out, ref_twist, flip_in=False, flip_out=False) -> float:
    t_in = -theta_in if flip_in else theta_in
    t_out = -theta_out if flip_out else theta_out
    return float(t_out - t_in + ref_twist)


# --------------------------------------------------------------------------
# numba kernels
# --------------------------------------------------------------------------


@njit(cache=True)
def _outer(a, b):
    m = np.empty((3, 3))
    for i in range(3):
        for j in range(3):
            m[i, j] = a[i] * b[j]
    return m


@njit(cache=True)
def _crossmat(a):
    m = np.zeros((3, 3))
    m[0, 1] = -a[2]
    m[0, 2] = a[1]
    m[1, 0] = a[2]
    m[1, 2] = -a[0]
    m[2, 0] = -a[1]
    m[2, 1] = a[0]
    return m


@njit(cache=True)
def _stretch_one(x0, x1, lbar, EA, grad, hess):
    """Energy, 6-gradient and 6x6 Hessian of one stretching spring."""
    e = x1 - x0
    ln = _norm(e)
    if ln == 0.0:
        raise DegenerateGeometryError("zero-length edge")
    t = e / ln
    eps = ln / lbar - 1.0
    g = EA * eps * t
    K = (EA / lbar) * _outer(t, t) + (EA * eps / ln) * (np.eye(3) - _outer(t, t))
    for i in range(3):
        grad[i] = -g[i]
        grad[3 + i] = g[i]
        for j in range(3):
            hess[i, j] = K[i, j]
            hess[i, 3 + j] = -K[i, j]
            hess[3 + i, j] = -K[i, j]
            hess[3 + i, 3 + j] = K[i, j]
    return 0.5 * EA * eps * eps * lbar


@njit(cache=True)
def _place_pos(H, A, B, C):
    # x_in = -e, x_c = e - f, x_out = f ; blocks at 0, 4, 8
    Bt = B.T
    for i in range(3):
        for j in range(3):
            H[i, j] += A[i, j]
            H[i, 4 + j] += -A[i, j] + B[i, j]
            H[i, 8 + j] += -B[i, j]
            H[4 + i, j] += -A[i, j] + Bt[i, j]
            H[4 + i, 4 + j] += A[i, j] - B[i, j] - Bt[i, j] + C[i, j]
            H[4 + i, 8 + j] += B[i, j] - C[i, j]
            H[8 + i, j] += -Bt[i, j]
            H[8 + i, 4 + j] += Bt[i, j] - C[i, j]
            H[8 + i, 8 + j] += C[i, j]


@njit(cache=True)
def _place_mixed(H, col, a, b):
    # a = d2/(de dtheta), b = d2/(df dtheta)
    for i in range(3):
        H[i, col] += -a[i]
        H[4 + i, col] += a[i] - b[i]
        H[8 + i, col] += b[i]
        H[col, i] += -a[i]
        H[col, 4 + i] += a[i] - b[i]
        H[col, 8 + i] += b[i]


@njit(cache=True)
def _place_grad(g, ge, gf):
    for i in range(3):
        g[i] = -ge[i]
        g[4 + i] = ge[i] - gf[i]
        g[8 + i] = gf[i]


@njit(cache=True)
def _bend_twist_one(
    x0, x1, x2, th_e, th_f, d1e, d2e, d1f, d2f, ref_twist,
    kbar1, kbar2, tbar, EI, GJ, vor, grad, hess, want_hess,
):
    """Energy, 11-gradient and 11x11 Hessian of one bend-twist spring (local form)."""
    ee = x1 - x0
    ef = x2 - x1
    ne = _norm(ee)
    nf = _norm(ef)
    if ne == 0.0 or nf == 0.0:
        raise DegenerateGeometryError("zero-length edge")
    te = ee / ne
    tf = ef / nf
    chi = 1.0 + _dot(te, tf)
    if chi <= 1e-12:
        raise DegenerateGeometryError("antiparallel edges: curvature binormal undefined")
    kb = 2.0 * _cross(te, tf) / chi
    tt = (te + tf) / chi

    ce, se = math.cos(th_e), math.sin(th_e)
    cf, sf = math.cos(th_f), math.sin(th_f)
    m1e = ce * d1e + se * d2e
    m2e = -se * d1e + ce * d2e
    m1f = cf * d1f + sf * d2f
    m2f = -sf * d1f + cf * d2f
    td1 = (m1e + m1f) / chi
    td2 = (m2e + m2f) / chi

    k1 = 0.5 * _dot(kb, m2e + m2f)
    k2s = -0.5 * _dot(kb, m1e + m1f)  # classical sign; the stored curvature is -k2s
    tau = th_f - th_e + ref_twist

    # ---- first derivatives (classical kappa2 convention) ----
    Dk1De = (-k1 * tt + _cross(tf, td2)) / ne
    Dk1Df = (-k1 * tt - _cross(te, td2)) / nf
    Dk2De = (-k2s * tt - _cross(tf, td1)) / ne
    Dk2Df = (-k2s * tt + _cross(te, td1)) / nf

    gk1 = np.zeros(11)
    gk2 = np.zeros(11)
    _place_grad(gk1, Dk1De, Dk1Df)
    _place_grad(gk2, Dk2De, Dk2Df)
    gk1[3] = -0.5 * _dot(kb, m1e)
    gk1[7] = -0.5 * _dot(kb, m1f)
    gk2[3] = -0.5 * _dot(kb, m2e)
    gk2[7] = -0.5 * _dot(kb, m2f)

    gt = np.zeros(11)
    _place_grad(gt, 0.5 * kb / ne, 0.5 * kb / nf)
    gt[3] = -1.0
    gt[7] = 1.0

    k2 = -k2s
    dk1 = k1 - kbar1
    dk2 = k2 - kbar2
    dtau = tau - tbar
    cb = EI / vor
    ct = GJ / vor
    energy = 0.5 * cb * (dk1 * dk1 + dk2 * dk2) + 0.5 * ct * dtau * dtau

    # stored kappa2 = -k2s, so its gradient is -gk2
    for i in range(11):
        grad[i] = cb * (dk1 * gk1[i] - dk2 * gk2[i]) + ct * dtau * gt[i]

    if not want_hess:
        return energy, k1, k2, tau

    I3 = np.eye(3)
    ne2 = ne * ne
    nf2 = nf * nf
    tt_tt = _outer(tt, tt)

    # ---- kappa1 second derivatives ----
    a = _cross(tf, td2)
    A1 = (2.0 * k1 * tt_tt - _outer(a, tt) - _outer(tt, a)) / ne2 \
        - k1 / (chi * ne2) * (I3 - _outer(te, te)) \
        + (_outer(kb, m2e) + _outer(m2e, kb)) / (4.0 * ne2)
    b = _cross(te, td2)
    C1 = (2.0 * k1 * tt_tt + _outer(b, tt) + _outer(tt, b)) / nf2 \
        - k1 / (chi * nf2) * (I3 - _outer(tf, tf)) \
        + (_outer(kb, m2f) + _outer(m2f, kb)) / (4.0 * nf2)
    B1 = -k1 / (chi * ne * nf) * (I3 + _outer(te, tf)) \
        + (2.0 * k1 * tt_tt - _outer(a, tt) + _outer(tt, b) - _crossmat(td2)) / (ne * nf)

    H1 = np.zeros((11, 11))
    _place_pos(H1, A1, B1, C1)
    H1[3, 3] = -0.5 * _dot(kb, m2e)
    H1[7, 7] = -0.5 * _dot(kb, m2f)
    _place_mixed(H1, 3,
                 (0.5 * _dot(kb, m1e) * tt - _cross(tf, m1e) / chi) / ne,
                 (0.5 * _dot(kb, m1e) * tt + _cross(te, m1e) / chi) / nf)
    _place_mixed(H1, 7,
                 (0.5 * _dot(kb, m1f) * tt - _cross(tf, m1f) / chi) / ne,
                 (0.5 * _dot(kb, m1f) * tt + _cross(te, m1f) / chi) / nf)

    # ---- kappa2 (classical) second derivatives ----
    a = _cross(tf, td1)
    A2 = (2.0 * k2s * tt_tt + _outer(a, tt) + _outer(tt, a)) / ne2 \
        - k2s / (chi * ne2) * (I3 - _outer(te, te)) \
        - (_outer(kb, m1e) + _outer(m1e, kb)) / (4.0 * ne2)
    b = _cross(te, td1)
    C2 = (2.0 * k2s * tt_tt - _outer(b, tt) - _outer(tt, b)) / nf2 \
        - k2s / (chi * nf2) * (I3 - _outer(tf, tf)) \
        - (_outer(kb, m1f) + _outer(m1f, kb)) / (4.0 * nf2)
    B2 = -k2s / (chi * ne * nf) * (I3 + _outer(te, tf)) \
        + (2.0 * k2s * tt_tt + _outer(a, tt) - _outer(tt, b) + _crossmat(td1)) / (ne * nf)

    H2 = np.zeros((11, 11))
    _place_pos(H2, A2, B2, C2)
    H2[3, 3] = 0.5 * _dot(kb, m1e)
    H2[7, 7] = 0.5 * _dot(kb, m1f)
    _place_mixed(H2, 3,
                 (0.5 * _dot(kb, m2e) * tt - _cross(tf, m2e) / chi) / ne,
                 (0.5 * _dot(kb, m2e) * tt + _cross(te, m2e) / chi) / nf)
    _place_mixed(H2, 7,
                 (0.5 * _dot(kb, m2f) * tt - _cross(tf, m2f) / chi) / ne,
                 (0.5 * _dot(kb, m2f) * tt + _cross(te, m2f) / chi) / nf)

    # ---- twist second derivatives ----
    tet = te + tt
    tft = tf + tt
    At = -0.25 / ne2 * (_outer(kb, tet) + _outer(tet, kb))
    Ct = -0.25 / nf2 * (_outer(kb, tft) + _outer(tft, kb))
    Bt = 0.5 / (ne * nf) * (2.0 / chi * _crossmat(te) - _outer(kb, tt))
    Ht = np.zeros((11, 11))
    _place_pos(Ht, At, Bt, Ct)

    for i in range(11):
        for j in range(11):
            hess[i, j] = cb * (gk1[i] * gk1[j] + gk2[i] * gk2[j] + dk1 * H1[i, j] - dk2 * H2[i, j]) \
                + ct * (gt[i] * gt[j] + dtau * Ht[i, j])
    return energy, k1, k2, tau


@njit(cache=True)
def _local_frames(d1, d2, t, edge, sign):
    return sign * d1[edge], d2[edge]


@njit(cache=True)
def stretch_kernel(x, edges, lbar, EA, grad_out, vals_out):
    """Accumulate stretching gradient into ``grad_out`` (ndof) and write 36 Hessian values per edge."""
    energy = 0.0
    g = np.empty(6)
    h = np.empty((6, 6))
    for j in range(edges.shape[0]):
        a = edges[j, 0]
        b = edges[j, 1]
        energy += _stretch_one(x[a], x[b], lbar[j], EA[j], g, h)
        for i in range(3):
            grad_out[3 * a + i] += g[i]
            grad_out[3 * b + i] += g[3 + i]
        base = 36 * j
        for i in range(6):
            for k in range(6):
                vals_out[base + 6 * i + k] = h[i, k]
    return energy


@njit(cache=True)
def bend_twist_kernel(
    x, theta, d1, d2, sp_edges, sp_nodes, sp_signs, ref_twist,
    kbar1, kbar2, tbar, EI, GJ, vor, grad_out, vals_out, want_hess,
):
    """Accumulate bend-twist gradient into ``grad_out`` and write 121 Hessian values per spring.

    ``grad_out`` is indexed by global DOF; theta rows carry the flip sign.
    """
    nnode = x.shape[0]
    energy = 0.0
    g = np.empty(11)
    h = np.empty((11, 11))
    s = np.ones(11)
    for k in range(sp_edges.shape[0]):
        ei = sp_edges[k, 0]
        eo = sp_edges[k, 1]
        si = sp_signs[k, 0]
        so = sp_signs[k, 1]
        n0 = sp_nodes[k, 0]
        n1 = sp_nodes[k, 1]
        n2 = sp_nodes[k, 2]
        e, _, _, _ = _bend_twist_one(
            x[n0], x[n1], x[n2], si * theta[ei], so * theta[eo],
            si * d1[ei], d2[ei], so * d1[eo], d2[eo], ref_twist[k],
            kbar1[k], kbar2[k], tbar[k], EI[k], GJ[k], vor[k], g, h, want_hess,
        )
        energy += e
        s[3] = si
        s[7] = so
        for i in range(3):
            grad_out[3 * n0 + i] += g[i]
            grad_out[3 * n1 + i] += g[4 + i]
            grad_out[3 * n2 + i] += g[8 + i]
        grad_out[3 * nnode + ei] += si * g[3]
        grad_out[3 * nnode + eo] += so * g[7]
        if want_hess:
            base = 121 * k
            for i in range(11):
                for j in range(11):
                    vals_out[base + 11 * i + j] = s[i] * s[j] * h[i, j]
    return energy


@njit(cache=True)
def spring_strains(x, theta, d1, d2, sp_edges, sp_nodes, sp_signs, ref_twist):
    """(kappa1, kappa2, tau) of every bend-twist spring."""
    ns = sp_edges.shape[0]
    out = np.empty((ns, 3))
    g = np.empty(11)
    h = np.empty((11, 11))
    for k in range(ns):
        ei = sp_edges[k, 0]
        eo = sp_edges[k, 1]
        si = sp_signs[k, 0]
        so = sp_signs[k, 1]
        _, k1, k2, tau = _bend_twist_one(
            x[sp_nodes[k, 0]], x[sp_nodes[k, 1]], x[sp_nodes[k, 2]],
            si * theta[ei], so * theta[eo], si * d1[ei], d2[ei], so * d1[eo], d2[eo],
            ref_twist[k], 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, g, h, False,
        )
        out[k, 0] = k1
        out[k, 1] = k2
        out[k, 2] = tau
    return out


def spring_dof_indices(network: RodNetwork) -> np.ndarray:
    """(ns, 11) global DOFs of every bend-twist spring in local order."""
    sp = network.springs
    n = network.node_count
    idx = np.empty((len(sp), 11), dtype=np.int64)
    for k in range(len(sp)):
        a, c, b = sp.nodes[k]
        ei, eo = sp.edges[k]
        idx[k] = [3 * a, 3 * a + 1, 3 * a + 2, 3 * n + ei,
                  3 * c, 3 * c + 1, 3 * c + 2, 3 * n + eo,
                  3 * b, 3 * b + 1, 3 * b + 2]
    return idx


def stretch_dof_indices(network: RodNetwork) -> np.ndarray:
    e = network.edges
    return np.concatenate([3 * e[:, :1] + np.arange(3), 3 * e[:, 1:] + np.arange(3)], axis=1)


# --------------------------------------------------------------------------
# whole-network evaluation
# --------------------------------------------------------------------------


class ElasticModel:
    """Elastic energy of a rod network with fixed natural strains and stiffnesses."""

    def __init__(self, network: RodNetwork, natural: NaturalStrains, stiffness: StiffnessSet):
        self.network = network
        self.natural = natural
        self.stiffness = stiffness
        sp = network.springs
        self._sp_edges = np.ascontiguousarray(sp.edges)
        self._sp_nodes = np.ascontiguousarray(sp.nodes)
        self._sp_signs = np.ascontiguousarray(sp.signs)
        self.spring_dofs = spring_dof_indices(network)
        self.stretch_dofs = stretch_dof_indices(network)

    def evaluate(self, q, d1, d2, ref_twist, time=0.0, want_hess=True):
        """Return ``(energy, gradient, hess_values)``.

        ``hess_values`` is the flat concatenation of the 6x6 stretch blocks
        followed by the 11x11 bend-twist blocks (see :meth:`hessian_pattern`).
        """
        net = self.network
        x, theta = split_q(q, net.node_count)
        x = np.ascontiguousarray(x)
        theta = np.ascontiguousarray(theta)
        grad = np.zeros(net.ndof)
        ne, ns = net.edge_count, len(net.springs)
        vals = np.zeros(36 * ne + 121 * ns)
        es = stretch_kernel(x, net.edges, self.natural.edge_lengths, self.stiffness.EA, grad, vals)
        eb = bend_twist_kernel(
            x, theta, d1, d2, self._sp_edges, self._sp_nodes, self._sp_signs, ref_twist,
            self.natural.kappa1, self.natural.kappa2, self.natural.twist_at(time),
            self.stiffness.EI, self.stiffness.GJ, net.voronoi_lengths,
            grad, vals[36 * ne:], want_hess,
        )
        return es + eb, grad, vals

    def hessian_pattern(self) -> tuple[np.ndarray, np.ndarray]:
        """Row and column index of every entry produced by :meth:`evaluate`."""
        sd = self.stretch_dofs
        bd = self.spring_dofs
        rows = np.concatenate([np.repeat(sd, 6, axis=1).ravel(), np.repeat(bd, 11, axis=1).ravel()])
        cols = np.concatenate([np.tile(sd, (1, 6)).ravel(), np.tile(bd, (1, 11)).ravel()])
        return rows, cols

    def energy(self, q, d1, d2, ref_twist, time=0.0) -> float:
        return self.evaluate(q, d1, d2, ref_twist, time, want_hess=False)[0]

    def strains(self, q, d1, d2, ref_twist) -> np.ndarray:
        x, theta = split_q(q, self.network.node_count)
        return spring_strains(
            np.ascontiguousarray(x), np.ascontiguousarray(theta), d1, d2,
            self._sp_edges, self._sp_nodes, self._sp_signs, ref_twist,
        )


def natural_strains_from(network: RodNetwork, q, d1, d2, ref_twist) -> NaturalStrains:
    """Natural strains that make ``q`` (with the given frames) stress free."""
    x, theta = split_q(np.asarray(q, dtype=np.float64), network.node_count)
    _, lens = edge_tangents(x, network.edges)
    st = spring_strains(
        np.ascontiguousarray(x), np.ascontiguousarray(theta), d1, d2,
        network.springs.edges, network.springs.nodes, network.springs.signs, ref_twist,
    )
    return NaturalStrains(lens.copy(), st[:, 0].copy(), st[:, 1].copy(), st[:, 2].copy())


class FrameTracker:
    """Frames and reference twists as functions of ``q``, relative to a stored base state.

    Mirrors one Newton iterate: frames are time-parallel transported from the
    base frames to the tangents of ``q``; reference twists are continued from
    the base values.
    """

    def __init__(self, network: RodNetwork, d1, d2, tangents, ref_twist):
        self.network = network
        self.d1, self.d2, self.tangents = d1, d2, tangents
        self.ref_twist = ref_twist

    def at(self, q):
        x, _ = split_q(q, self.network.node_count)
        d1, d2, t = time_update_frames(self.d1, self.d2, self.tangents, x, self.network.edges)
        rt = reference_twists(d1, t, self.network.springs.edges, self.network.springs.signs,
                              self.ref_twist)
        return d1, d2, t, rt


def total_energy(q, network, natural, stiffness, frames: FrameTracker, time=0.0) -> float:
    """Elastic energy at ``q`` with frames carried from ``frames``' base state."""
    d1, d2, _, rt = frames.at(q)
    return ElasticModel(network, natural, stiffness).energy(q, d1, d2, rt, time)


__all__ = [
    "NaturalStrains",
    "StiffnessSet",
    "ElasticModel",
    "FrameTracker",
    "axial_stretch",
    "curvature_binormal",
    "material_curvatures",
    "discrete_twist",
    "material_frame",
    "natural_strains_from",
    "rod_stiffness",
    "total_energy",
]
