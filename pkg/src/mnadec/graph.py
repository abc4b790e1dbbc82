"""Incidence matrices and the graph kernels that operate on them.

All kernels accept a *reduced* incidence matrix whose row ``i`` stands for
the virtual node ``i + 1``; node ``0`` is an implicit ground that owns no row.
Contracted matrices keep this convention, so every stage of the basis cascade
can reuse the same routines.  A column with a single nonzero is a branch to
ground and a zero column is a self-loop (both endpoints merged).
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .netlist import Circuit, Kind, as_kinds, kind_sorted_incidence_order

__all__ = [
    "SignMatrix",
    "ComponentPartition",
    "SpanningForest",
    "Contraction",
    "UnionFind",
    "incidence_unreduced",
    "incidence_reduced",
    "column_endpoints",
    "connected_components",
    "spanning_forest",
    "contract",
    "identify_last_nodes",
    "find_path",
]


# -- sign matrices --------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SignMatrix:
    """Immutable sparse integer matrix with entries in ``{-1, 0, +1}``."""

    sparse: sp.csc_array
    row_labels: tuple = ()
    col_labels: tuple = ()

    def __post_init__(self):
        m = sp.csc_array(self.sparse, dtype=np.int64)
        m.sum_duplicates()
        m.eliminate_zeros()
        if m.nnz and not np.all(np.abs(m.data) == 1):
            raise ValueError("SignMatrix entries must be -1, 0 or +1")
        object.__setattr__(self, "sparse", m)
        rl = tuple(self.row_labels) or tuple(str(i) for i in range(m.shape[0]))
        cl = tuple(self.col_labels) or tuple(str(j) for j in range(m.shape[1]))
        if len(rl) != m.shape[0] or len(cl) != m.shape[1]:
            raise ValueError("label count does not match the matrix shape")
        object.__setattr__(self, "row_labels", rl)
        object.__setattr__(self, "col_labels", cl)

    @classmethod
    def from_dense(cls, a, row_labels=(), col_labels=()):
        a = np.asarray(a, dtype=np.int64)
        if a.ndim != 2:
            raise ValueError("expected a 2-d array")
        return cls(sp.csc_array(a), row_labels, col_labels)

    @classmethod
    def empty(cls, rows, cols, row_labels=(), col_labels=()):
        return cls(sp.csc_array((rows, cols), dtype=np.int64), row_labels, col_labels)

    @property
    def shape(self):
        return self.sparse.shape

    @property
    def nnz(self):
        return self.sparse.nnz

    @property
    def T(self):
        return SignMatrix(self.sparse.T, self.col_labels, self.row_labels)

    def to_dense(self):
        return self.sparse.toarray()

    def __array__(self, dtype=None, copy=None):
        a = self.to_dense()
        return a if dtype is None else a.astype(dtype)

    def __matmul__(self, other):
        """Product of two sign matrices; the result must again be a sign matrix."""
        if not isinstance(other, SignMatrix):
            return self.sparse @ other
        return SignMatrix(self.sparse @ other.sparse, self.row_labels, other.col_labels)

    def columns(self, idx):
        idx = list(idx)
        return SignMatrix(self.sparse[:, idx], self.row_labels,
                          tuple(self.col_labels[j] for j in idx))

    def __eq__(self, other):
        if not isinstance(other, SignMatrix):
            return NotImplemented
        if self.shape != other.shape:
            return False
        return (self.sparse != other.sparse).nnz == 0

    __hash__ = None

    def __repr__(self):
        return f"SignMatrix(shape={self.shape}, nnz={self.nnz})"


def incidence_unreduced(c: Circuit, kinds=None, ic_types=None) -> SignMatrix:
    """Node-branch incidence over all nodes, columns in canonical kind order."""
    ks = as_kinds(kinds)
    cols = [j for j in kind_sorted_incidence_order(c, ic_types) if c.branches[j].kind in ks]
    n = c.num_nodes
    rows, cidx, vals = [], [], []
    for k, j in enumerate(cols):
        e = c.branches[j]
        rows += [e.from_node, e.to_node]
        cidx += [k, k]
        vals += [1, -1]
    m = sp.csc_array((vals, (rows, cidx)), shape=(n, len(cols)), dtype=np.int64)
    return SignMatrix(m, c.nodes, tuple(c.branches[j].id for j in cols))


def incidence_reduced(c: Circuit, kinds=None, ic_types=None) -> SignMatrix:
    """Incidence with the ground row removed; row ``i`` is node ``i + 1``."""
    full = incidence_unreduced(c, kinds, ic_types)
    return SignMatrix(full.sparse[1:, :], full.row_labels[1:], full.col_labels)


def column_endpoints(m: SignMatrix, reduced=True):
    """``(from, to)`` node pairs per column.

    For reduced matrices rows map to nodes ``1..rows`` and a missing endpoint
    is ground ``0``.  A zero column is reported as ``(0, 0)``.
    """
    a = m.sparse
    off = 1 if reduced else 0
    out = []
    for j in range(a.shape[1]):
        lo, hi = a.indptr[j], a.indptr[j + 1]
        u = v = 0
        npos = nneg = 0
        for r, val in zip(a.indices[lo:hi], a.data[lo:hi]):
            if val > 0:
                u = int(r) + off
                npos += 1
            else:
                v = int(r) + off
                nneg += 1
        if npos > 1 or nneg > 1:
            raise ValueError(f"column {j} is not an incidence column")
        out.append((u, v))
    return out


# -- components -----------------------------------------------------------------


class UnionFind:
    """Disjoint sets with path halving and union by size."""

    def __init__(self, n):
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, a):
        p = self.parent
        while p[a] != a:
            p[a] = p[p[a]]
            a = p[a]
        return a

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        return True


@dataclass(frozen=True)
class ComponentPartition:
    """Partition of nodes ``0..n-1`` (``0`` = ground).

    Components are ordered by their smallest node, except that the ground
    component is always last.  The *last node* of a component is its highest
    node index.
    """

    component_of: tuple
    component_nodes: tuple
    ground_component: int

    @property
    def node_count(self):
        return len(self.component_of)

    @property
    def count(self):
        return len(self.component_nodes)

    @property
    def non_ground(self):
        return [k for k in range(self.count) if k != self.ground_component]

    def last_node(self, k):
        return self.component_nodes[k][-1]

    @classmethod
    def from_labels(cls, labels):
        """Build from any per-node component labelling, normalizing the order."""
        groups = {}
        for node, lab in enumerate(labels):
            groups.setdefault(lab, []).append(node)
        ground_lab = labels[0]
        comps = sorted((g for lab, g in groups.items() if lab != ground_lab), key=lambda g: g[0])
        comps.append(groups[ground_lab])
        comp_of = [0] * len(labels)
        for k, g in enumerate(comps):
            for node in g:
                comp_of[node] = k
        return cls(tuple(comp_of), tuple(tuple(g) for g in comps), len(comps) - 1)

    @classmethod
    def singletons(cls, node_count):
        return cls.from_labels(list(range(node_count)))


def _node_count(m: SignMatrix, node_count, reduced):
    if node_count is None:
        return m.shape[0] + (1 if reduced else 0)
    return node_count


def connected_components(m: SignMatrix, node_count=None, reduced=True) -> ComponentPartition:
    """Components of the graph whose incidence is ``m`` (isolated nodes are singletons)."""
    n = _node_count(m, node_count, reduced)
    uf = UnionFind(n)
    for u, v in column_endpoints(m, reduced):
        uf.union(u, v)
    return ComponentPartition.from_labels([uf.find(i) for i in range(n)])


@dataclass(frozen=True)
class SpanningForest:
    """Column-order Kruskal forest of an incidence matrix.

    ``loop_tree_path[l]`` lists ``(tree_column, sign)`` pairs; the tree path
    runs from the loop branch's *to* node back to its *from* node and the
    sign is ``+1`` when that path crosses the tree branch in its own
    orientation.  With this convention ``e_l + sum(sign * e_t)`` lies in the
    kernel of the incidence matrix.
    """

    tree_branches: tuple
    loop_branches: tuple
    loop_tree_path: dict
    n_branches: int
    partition: ComponentPartition

    def tree_of_component(self, k):
        comp = self.partition.component_of
        return [t for t in self.tree_branches if comp[self._ends[t][0]] == k]

    _ends: tuple = field(default=(), repr=False, compare=False)


def spanning_forest(m: SignMatrix, node_count=None, reduced=True) -> SpanningForest:
    n = _node_count(m, node_count, reduced)
    ends = column_endpoints(m, reduced)
    uf = UnionFind(n)
    tree, loops = [], []
    adj = [[] for _ in range(n)]
    for j, (u, v) in enumerate(ends):
        if uf.union(u, v):
            tree.append(j)
            adj[u].append((v, j, 1))
            adj[v].append((u, j, -1))
        else:
            loops.append(j)
    paths = {}
    for j in loops:
        u, v = ends[j]
        paths[j] = tuple(_tree_path(adj, v, u)) if u != v else ()
    part = ComponentPartition.from_labels([uf.find(i) for i in range(n)])
    return SpanningForest(tuple(tree), tuple(loops), paths, len(ends), part, tuple(ends))


def _tree_path(adj, start, goal):
    """Signed tree branches on the unique path ``start -> goal``."""
    prev = {start: None}
    q = deque([start])
    while q:
        a = q.popleft()
        if a == goal:
            break
        for b, j, s in adj[a]:
            if b not in prev:
                prev[b] = (a, j, s)
                q.append(b)
    out = []
    node = goal
    while prev[node] is not None:
        a, j, s = prev[node]
        out.append((j, s))
        node = a
    out.reverse()
    return out


# -- contraction and identification ---------------------------------------------


@dataclass(frozen=True)
class Contraction:
    matrix: SignMatrix
    zero_row_branches: tuple
    """Columns that became zero (both endpoints in one component)."""

    row_nodes: tuple
    """For each row of ``matrix``, the representative (last) node of the component."""


def contract(m: SignMatrix, by: ComponentPartition, reduced=True) -> Contraction:
    """Quotient incidence over the non-ground components of ``by``.

    Equals ``Q^T m`` for the ``Q`` built from ``by``: component ``k`` becomes
    row ``k`` and the ground component absorbs the eliminated ground row.
    """
    n = by.node_count
    if m.shape[0] + (1 if reduced else 0) != n:
        raise ValueError("partition and matrix have different node counts")
    ground = by.ground_component
    comp = by.component_of
    nr = by.count - 1
    rows, cols, vals, zeros = [], [], [], []
    for j, (u, v) in enumerate(column_endpoints(m, reduced)):
        cu, cv = comp[u], comp[v]
        if cu == cv:
            zeros.append(j)
            continue
        if cu != ground:
            rows.append(cu)
            cols.append(j)
            vals.append(1)
        if cv != ground:
            rows.append(cv)
            cols.append(j)
            vals.append(-1)
    row_offset = 1 if reduced else 0
    row_nodes = tuple(by.last_node(k) for k in by.non_ground)
    labels = tuple(m.row_labels[r - row_offset] if r >= row_offset else "0"
                   for r in row_nodes)
    mat = sp.csc_array((vals, (rows, cols)), shape=(nr, m.shape[1]), dtype=np.int64)
    return Contraction(SignMatrix(mat, labels, m.col_labels), tuple(zeros), row_nodes)


def kept_nodes(by: ComponentPartition):
    """Nodes selected by ``P``: non-last nodes of non-ground components and
    every non-ground node of the ground component, in ascending order."""
    ground = by.ground_component
    keep = []
    for node in range(1, by.node_count):
        k = by.component_of[node]
        if k == ground or node != by.last_node(k):
            keep.append(node)
    return keep


def identify_last_nodes(m: SignMatrix, by: ComponentPartition) -> Contraction:
    """Merge every non-ground component's last node into ground (``P^T m``)."""
    keep = kept_nodes(by)
    row_of = {node: r for r, node in enumerate(keep)}
    rows, cols, vals, zeros = [], [], [], []
    for j, (u, v) in enumerate(column_endpoints(m)):
        ru, rv = row_of.get(u), row_of.get(v)
        if ru is None and rv is None:
            zeros.append(j)
            continue
        if ru is not None:
            rows.append(ru)
            cols.append(j)
            vals.append(1)
        if rv is not None:
            rows.append(rv)
            cols.append(j)
            vals.append(-1)
    mat = sp.csc_array((vals, (rows, cols)), shape=(len(keep), m.shape[1]), dtype=np.int64)
    labels = tuple(m.row_labels[node - 1] for node in keep)
    return Contraction(SignMatrix(mat, labels, m.col_labels), tuple(zeros), tuple(keep))


# -- path search ----------------------------------------------------------------


def find_path(c: Circuit, a: int, b: int, allowed_kinds, exclude=()):
    """Signed branches whose voltages sum to ``phi_a - phi_b``, or ``None``.

    Breadth-first over branches of ``allowed_kinds`` (scanned in canonical
    kind order, so the result is deterministic); ``exclude`` holds element
    ids that may not be used.
    """
    if a == b:
        return []
    ks = as_kinds(allowed_kinds)
    excluded = set(exclude)
    adj = [[] for _ in range(c.num_nodes)]
    for j in kind_sorted_incidence_order(c):
        e = c.branches[j]
        if e.kind not in ks or e.id in excluded:
            continue
        adj[e.from_node].append((e.to_node, j, 1))
        adj[e.to_node].append((e.from_node, j, -1))
    prev = {a: None}
    q = deque([a])
    while q:
        node = q.popleft()
        if node == b:
            break
        for nxt, j, s in adj[node]:
            if nxt not in prev:
                prev[nxt] = (node, j, s)
                q.append(nxt)
    if b not in prev:
        return None
    out = []
    node = b
    while prev[node] is not None:
        p, j, s = prev[node]
        out.append((j, s))
        node = p
    out.reverse()
    return out


VOLTAGE_KINDS = (Kind.VS, Kind.VC)
