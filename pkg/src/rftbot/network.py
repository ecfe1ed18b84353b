"""Topology and DOF layout of a tree-shaped network of discrete rods."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .frames import edge_tangents, reference_twists, transported_reference_frames


class TopologyError(ValueError):
    """Raised for networks that are not connected trees."""


@dataclass(frozen=True)
class BendTwistSprings:
    """Bend-twist springs as parallel arrays.

    ``edges[k] = (edge_in, edge_out)``, ``nodes[k] = (node_in, center, node_out)``
    and ``signs[k]`` is -1 where the stored edge has to be flipped so that the
    local tangents run in -> center -> out.
    """

    edges: np.ndarray  # (ns, 2) int
    nodes: np.ndarray  # (ns, 3) int
    signs: np.ndarray  # (ns, 2) float, +1 / -1

    def __len__(self) -> int:
        return len(self.edges)

    @property
    def flips(self) -> np.ndarray:
        return self.signs < 0


@dataclass(frozen=True)
class RodNetwork:
    """Immutable rod network.  Build with :meth:`from_edges`."""

    node_count: int
    edges: np.ndarray  # (ne, 2) int, edge j runs edges[j,0] -> edges[j,1]
    rigid_edges: np.ndarray  # (ne,) bool
    undeformed_lengths: np.ndarray  # (ne,)
    springs: BendTwistSprings
    voronoi_lengths: np.ndarray  # (ns,) per bend-twist spring
    head_edge_index: int = 0
    head_node_index: int = 1
    root_node: int = 0

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    @property
    def ndof(self) -> int:
        return 3 * self.node_count + self.edge_count

    @property
    def stretch_springs(self) -> np.ndarray:
        return np.arange(self.edge_count)

    def node_dofs(self, i: int) -> np.ndarray:
        return np.arange(3 * i, 3 * i + 3)

    def edge_dof(self, j: int) -> int:
        return 3 * self.node_count + j

    def degree(self) -> np.ndarray:
        return np.bincount(self.edges.ravel(), minlength=self.node_count)

    @classmethod
    def from_edges(
        cls,
        positions,
        edges,
        rigid_edges=None,
        head_edge_index: int = 0,
        head_node_index: int = 1,
        root_node: int = 0,
    ) -> "RodNetwork":
        """Validate the tree, measure undeformed lengths and build the bend-twist springs."""
        x = np.asarray(positions, dtype=np.float64).reshape(-1, 3)
        e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        n = len(x)
        _check_tree(n, e)
        if rigid_edges is None:
            rigid_edges = np.zeros(len(e), dtype=bool)
        rigid = np.asarray(rigid_edges, dtype=bool)
        lengths = np.linalg.norm(x[e[:, 1]] - x[e[:, 0]], axis=1)
        if np.any(lengths <= 0.0):
            raise TopologyError("zero-length edge in undeformed configuration")
        springs = build_joint_springs(n, e, root_node)
        vor = 0.5 * (lengths[springs.edges[:, 0]] + lengths[springs.edges[:, 1]])
        return cls(
            node_count=n,
            edges=e,
            rigid_edges=rigid,
            undeformed_lengths=lengths,
            springs=springs,
            voronoi_lengths=vor,
            head_edge_index=head_edge_index,
            head_node_index=head_node_index,
            root_node=root_node,
        )


@dataclass
class State:
    """Mutable simulation state owned by one stepper."""

    q: np.ndarray
    q_dot: np.ndarray
    d1: np.ndarray  # (ne, 3)
    d2: np.ndarray  # (ne, 3)
    tangents: np.ndarray  # (ne, 3)
    ref_twist: np.ndarray  # (ns,) unwrapped reference twist
    time: float = 0.0

    def copy(self) -> "State":
        return State(
            self.q.copy(),
            self.q_dot.copy(),
            self.d1.copy(),
            self.d2.copy(),
            self.tangents.copy(),
            self.ref_twist.copy(),
            self.time,
        )


@dataclass(frozen=True)
class DofLayout:
    node_slots: np.ndarray  # (N, 3)
    edge_slots: np.ndarray  # (ne,)
    ndof: int


def dof_layout(network: RodNetwork) -> DofLayout:
    """Positions first (x0, y0, z0, x1, ...), then one twist slot per edge."""
    n, ne = network.node_count, network.edge_count
    nodes = np.arange(3 * n).reshape(n, 3)
    edges = 3 * n + np.arange(ne)
    return DofLayout(nodes, edges, 3 * n + ne)


def split_q(q: np.ndarray, node_count: int) -> tuple[np.ndarray, np.ndarray]:
    """View ``q`` as ((N, 3) positions, (ne,) twist angles)."""
    return q[: 3 * node_count].reshape(node_count, 3), q[3 * node_count :]


def initial_state(network: RodNetwork, positions) -> State:
    x = np.asarray(positions, dtype=np.float64).reshape(-1, 3)
    t, _ = edge_tangents(x, network.edges)
    d1, d2 = transported_reference_frames(t, network.springs.edges, network.springs.signs)
    rt = reference_twists(d1, t, network.springs.edges, network.springs.signs)
    q = np.concatenate([x.ravel(), np.zeros(network.edge_count)])
    return State(q, np.zeros_like(q), d1, d2, t, rt, 0.0)


def _check_tree(n: int, edges: np.ndarray) -> None:
    if n < 2:
        raise TopologyError("a rod network needs at least two nodes")
    if len(edges) != n - 1:
        raise TopologyError(f"a tree with {n} nodes has {n - 1} edges, got {len(edges)}")
    if edges.min() < 0 or edges.max() >= n:
        raise TopologyError("edge refers to a node outside the network")
    if np.any(edges[:, 0] == edges[:, 1]):
        raise TopologyError("self-loop edge")
    adj = _adjacency(n, edges)
    seen = np.zeros(n, dtype=bool)
    seen[0] = True
    queue = deque([0])
    while queue:
        i = queue.popleft()
        for nb, _ in adj[i]:
            if not seen[nb]:
                seen[nb] = True
                queue.append(nb)
    if not seen.all():
        # n-1 edges and not connected means there is a cycle somewhere
        raise TopologyError("network is not a connected tree (cycle or disconnected part)")


def _adjacency(n: int, edges: np.ndarray) -> list[list[tuple[int, int]]]:
    adj: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    for j, (a, b) in enumerate(edges):
        adj[a].append((int(b), j))
        adj[b].append((int(a), j))
    return adj


def build_joint_springs(n: int, edges, root: int = 0) -> BendTwistSprings:
    """One spring per (parent edge, child edge) pair at every non-terminal node.

    The tree is rooted at ``root``.  A degree-2 node gets a single spring; a
    joint of degree k > 2 pairs its parent edge with each of its k - 1 child
    edges (children are never paired with each other).  For the root itself,
    when it has degree 2, its first edge plays the parent.
    """
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    adj = _adjacency(n, edges)
    parent_edge = np.full(n, -1, dtype=np.int64)
    order = [root]
    seen = np.zeros(n, dtype=bool)
    seen[root] = True
    queue = deque([root])
    while queue:
        i = queue.popleft()
        for nb, j in adj[i]:
            if not seen[nb]:
                seen[nb] = True
                parent_edge[nb] = j
                order.append(nb)
                queue.append(nb)

    sp_edges, sp_nodes, sp_signs = [], [], []
    for c in order:
        inc = [j for _, j in adj[c]]
        if len(inc) < 2:
            continue
        if parent_edge[c] >= 0:
            e_in = int(parent_edge[c])
            children = [j for j in inc if j != e_in]
        else:
            e_in, children = inc[0], inc[1:]
        for e_out in children:
            a_in, b_in = edges[e_in]
            a_out, b_out = edges[e_out]
            s_in = 1.0 if b_in == c else -1.0
            s_out = 1.0 if a_out == c else -1.0
            n_in = int(a_in if b_in == c else b_in)
            n_out = int(b_out if a_out == c else a_out)
            sp_edges.append((e_in, e_out))
            sp_nodes.append((n_in, c, n_out))
            sp_signs.append((s_in, s_out))
    return BendTwistSprings(
        np.asarray(sp_edges, dtype=np.int64).reshape(-1, 2),
        np.asarray(sp_nodes, dtype=np.int64).reshape(-1, 3),
        np.asarray(sp_signs, dtype=np.float64).reshape(-1, 2),
    )
