"""Reference/material frame machinery for discrete rods.

All routines operate on plain ``float64`` arrays.  The per-vector kernels are
compiled with numba so that the time stepper can call them inside its Newton
loop without Python overhead; they are also directly callable from Python.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

# |t_from x t_to| below this is treated as "no rotation"
PARALLEL_EPS = 1e-10


class DegenerateGeometryError(ValueError):
    """Raised when a rod configuration has zero-length or folded-back edges."""


@njit(cache=True)
def _cross(a, b):
    return np.array(
        [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
    )


@njit(cache=True)
def _dot(a, b):
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


@njit(cache=True)
def _norm(a):
    return math.sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2])


@njit(cache=True)
def _transport(d, t_from, t_to):
    b = _cross(t_from, t_to)
    nb = _norm(b)
    if nb < PARALLEL_EPS:
        if _dot(t_from, t_to) < 0.0:
            raise DegenerateGeometryError("parallel transport between antiparallel tangents")
        # identity, then strip the (<1e-10) tangential drift so the result stays adapted
        nd = _norm(d)
        out = d - _dot(d, t_to) * t_to
        no = _norm(out)
        if no == 0.0:
            return d.copy()
        return out * (nd / no)
    b = b / nb
    # re-orthogonalise the axis against both tangents; helps when |b| is tiny
    b = b - _dot(b, t_from) * t_from
    b = b / _norm(b)
    b = b - _dot(b, t_to) * t_to
    b = b / _norm(b)
    n1 = _cross(t_from, b)
    n2 = _cross(t_to, b)
    return _dot(d, t_from) * t_to + _dot(d, n1) * n2 + _dot(d, b) * b


@njit(cache=True)
def _signed_angle(u, v, n):
    w = _cross(u, v)
    ang = math.atan2(_dot(w, n), _dot(u, v))
    if ang <= -math.pi:
        ang = math.pi
    return ang


def parallel_transport(d, t_from, t_to) -> np.ndarray:
    """Transport ``d`` from tangent ``t_from`` to ``t_to`` without twist.

    Rotation is about ``t_from x t_to``.  Parallel tangents give the identity
    map; antiparallel tangents raise :class:`DegenerateGeometryError`.
    """
    d = np.asarray(d, dtype=np.float64)
    t_from = np.asarray(t_from, dtype=np.float64)
    t_to = np.asarray(t_to, dtype=np.float64)
    if d.ndim == 1:
        return _transport(d, t_from, t_to)
    out = np.empty_like(d)
    for i in range(d.shape[0]):
        out[i] = _transport(d[i], t_from[i], t_to[i])
    return out


def signed_angle(u, v, n) -> float:
    """Angle from ``u`` to ``v`` about axis ``n``, in (-pi, pi]."""
    return float(
        _signed_angle(
            np.asarray(u, dtype=np.float64),
            np.asarray(v, dtype=np.float64),
            np.asarray(n, dtype=np.float64),
        )
    )


def rotate_about(v, axis, angle) -> np.ndarray:
    """Rodrigues rotation of ``v`` by ``angle`` about unit ``axis``."""
    v = np.asarray(v, dtype=np.float64)
    axis = np.asarray(axis, dtype=np.float64)
    c, s = math.cos(angle), math.sin(angle)
    return c * v + s * np.cross(axis, v) + np.dot(axis, v) * (1.0 - c) * axis


def material_frame(d1, d2, theta):
    """Rotate the reference directors by the twist angle.

    Works on single frames or stacks of frames (``theta`` broadcast per row).
    """
    d1 = np.asarray(d1, dtype=np.float64)
    d2 = np.asarray(d2, dtype=np.float64)
    c = np.cos(theta)
    s = np.sin(theta)
    if d1.ndim == 2:
        c = np.asarray(c)[:, None]
        s = np.asarray(s)[:, None]
    m1 = c * d1 + s * d2
    m2 = -s * d1 + c * d2
    return m1, m2


@njit(cache=True)
def _edge_tangents(x, edges):
    ne = edges.shape[0]
    t = np.empty((ne, 3))
    lens = np.empty(ne)
    for j in range(ne):
        e = x[edges[j, 1]] - x[edges[j, 0]]
        n = _norm(e)
        if n == 0.0:
            raise DegenerateGeometryError("zero-length edge")
        t[j] = e / n
        lens[j] = n
    return t, lens


def edge_tangents(positions, edges):
    """Unit tangents and lengths of all edges; ``positions`` is (N, 3)."""
    return _edge_tangents(np.ascontiguousarray(positions, dtype=np.float64), edges)


def initial_reference_frames(tangents) -> tuple[np.ndarray, np.ndarray]:
    """Adapted frames from a fixed global seed.

    ``d1`` is the global x axis projected off the tangent (y axis when the
    tangent is within ~8 degrees of x); ``d2 = t x d1``.
    """
    t = np.atleast_2d(np.asarray(tangents, dtype=np.float64))
    seed = np.tile([1.0, 0.0, 0.0], (t.shape[0], 1))
    near_x = np.abs(t[:, 0]) > 0.99
    seed[near_x] = [0.0, 1.0, 0.0]
    d1 = seed - np.sum(seed * t, axis=1)[:, None] * t
    d1 /= np.linalg.norm(d1, axis=1)[:, None]
    d2 = np.cross(t, d1)
    return d1, d2


def transported_reference_frames(tangents, pair_edges, pair_signs) -> tuple[np.ndarray, np.ndarray]:
    """Adapted frames that carry no reference twist across any spring.

    The first edge of each connected component takes the global-seed frame;
    every other edge receives its neighbour's ``d1`` by space-parallel
    transport across the spring joining them, using the signed tangents of
    the flip convention.  The result is equivariant under rigid rotations up
    to one rotation of the seed about its own tangent.
    """
    t = np.atleast_2d(np.asarray(tangents, dtype=np.float64))
    ne = t.shape[0]
    pairs = np.asarray(pair_edges, dtype=np.int64).reshape(-1, 2)
    signs = np.asarray(pair_signs, dtype=np.float64).reshape(-1, 2)
    adj = [[] for _ in range(ne)]
    for (i, j), (si, sj) in zip(pairs, signs):
        adj[i].append((j, si, sj))
        adj[j].append((i, sj, si))
    seed1, _ = initial_reference_frames(t)
    d1 = np.empty_like(t)
    done = np.zeros(ne, dtype=bool)
    for start in range(ne):
        if done[start]:
            continue
        d1[start] = seed1[start]
        done[start] = True
        stack = [start]
        while stack:
            i = stack.pop()
            for j, si, sj in adj[i]:
                if done[j]:
                    continue
                u = _transport(si * d1[i], si * t[i], sj * t[j])
                d1[j] = sj * u
                done[j] = True
                stack.append(j)
    d2 = np.cross(t, d1)
    return d1, d2


@njit(cache=True)
def _time_transport(d1, d2, t_old, t_new):
    ne = d1.shape[0]
    o1 = np.empty_like(d1)
    o2 = np.empty_like(d2)
    for j in range(ne):
        a = _transport(d1[j], t_old[j], t_new[j])
        # orthonormalise against the new tangent; the transported d2 fixes handedness
        a = a - _dot(a, t_new[j]) * t_new[j]
        a = a / _norm(a)
        o1[j] = a
        o2[j] = _cross(t_new[j], a)
    return o1, o2


def time_update_frames(d1, d2, t_old, positions, edges):
    """Time-parallel transport of every reference frame onto the tangents of ``positions``.

    Returns ``(d1, d2, t_new)``.
    """
    t_new, _ = edge_tangents(positions, edges)
    o1, o2 = _time_transport(
        np.ascontiguousarray(d1, dtype=np.float64),
        np.ascontiguousarray(d2, dtype=np.float64),
        np.ascontiguousarray(t_old, dtype=np.float64),
        t_new,
    )
    return o1, o2, t_new


@njit(cache=True)
def _reference_twists(d1, t, sp_edges, sp_signs, previous):
    ns = sp_edges.shape[0]
    out = np.empty(ns)
    for k in range(ns):
        ei = sp_edges[k, 0]
        eo = sp_edges[k, 1]
        si = sp_signs[k, 0]
        so = sp_signs[k, 1]
        d_in = si * d1[ei]
        t_in = si * t[ei]
        d_out = so * d1[eo]
        t_out = so * t[eo]
        dtmp = _transport(d_in, t_in, t_out)
        ang = _signed_angle(dtmp, d_out, t_out)
        # carry the branch of the previous value so accumulated holonomy is continuous
        p = previous[k]
        ang = ang + 2.0 * math.pi * math.floor((p - ang) / (2.0 * math.pi) + 0.5)
        out[k] = ang
    return out


def reference_twist(d1_in, t_in, d1_out, t_out) -> float:
    """Signed angle, about ``t_out``, from the transported incoming d1 to the outgoing d1.

    Inputs must already be in the spring's local (flipped) convention.
    Result lies in (-pi, pi].
    """
    d1_in = np.asarray(d1_in, dtype=np.float64)
    dtmp = _transport(d1_in, np.asarray(t_in, float), np.asarray(t_out, float))
    return float(_signed_angle(dtmp, np.asarray(d1_out, float), np.asarray(t_out, float)))


def reference_twists(d1, tangents, spring_edges, spring_signs, previous=None) -> np.ndarray:
    """Reference twist of every bend-twist spring.

    ``spring_signs`` holds +1/-1 per member edge; -1 flips the edge into the
    local convention ``{-d1, d2, -t}``.  With ``previous`` given, each value is
    moved by a multiple of 2*pi to the branch nearest to it; without it the
    result is in (-pi, pi].
    """
    ns = len(spring_edges)
    if previous is None:
        previous = np.zeros(ns)
    return _reference_twists(
        np.ascontiguousarray(d1, dtype=np.float64),
        np.ascontiguousarray(tangents, dtype=np.float64),
        np.asarray(spring_edges, dtype=np.int64).reshape(ns, 2),
        np.asarray(spring_signs, dtype=np.float64).reshape(ns, 2),
        np.asarray(previous, dtype=np.float64),
    )
