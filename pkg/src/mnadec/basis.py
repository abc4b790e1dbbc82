"""Topological basis matrices and the five-stage splitting cascade.

Every basis matrix is read off a partition or a spanning forest of a
(contracted) incidence matrix, so no floating point arithmetic is involved
and all entries stay in ``{-1, 0, +1}``.

For a reduced incidence matrix ``A`` of a graph ``G``:

* ``Q`` has one indicator column per connected component of ``G`` that does
  not contain ground, so ``A^T Q = 0``;
* ``P`` selects every node except the last node of those components, so
  ``[P Q]`` is a permutation of an integer unimodular matrix;
* ``V`` selects the tree branches of a spanning forest and ``W`` holds one
  fundamental loop per remaining branch, so ``A W = 0``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import AssumptionViolation
from .graph import (
    ComponentPartition,
    SignMatrix,
    SpanningForest,
    connected_components,
    contract,
    incidence_reduced,
    kept_nodes,
    spanning_forest,
)
from .netlist import Circuit, Kind

__all__ = [
    "BasisQuad",
    "Stage",
    "SplitChain",
    "q_and_p_from_components",
    "vw_from_forest",
    "build_split_chain",
    "POTENTIAL_STAGES",
]

POTENTIAL_STAGES = (Kind.VS, Kind.C, Kind.VC, Kind.R)


@dataclass(frozen=True)
class BasisQuad:
    """Basis matrices of one source matrix; unrequested entries are ``None``."""

    P: SignMatrix | None = None
    Q: SignMatrix | None = None
    V: SignMatrix | None = None
    W: SignMatrix | None = None
    source: str = ""


def q_and_p_from_components(part: ComponentPartition, row_labels=()) -> tuple:
    """``(Q, P)`` for the reduced incidence whose components are ``part``.

    Rows follow node order ``1..n-1``.  Q columns follow the non-ground
    components; P columns are the kept nodes in ascending order.
    """
    nr = part.node_count - 1
    ng = part.non_ground
    rows, cols = [], []
    for k, comp in enumerate(ng):
        for node in part.component_nodes[comp]:
            rows.append(node - 1)
            cols.append(k)
    q = sp.csc_array((np.ones(len(rows), dtype=np.int64), (rows, cols)), shape=(nr, len(ng)))
    keep = kept_nodes(part)
    p = sp.csc_array((np.ones(len(keep), dtype=np.int64), ([v - 1 for v in keep],
                                                          list(range(len(keep))))),
                     shape=(nr, len(keep)))
    labels = tuple(row_labels) or tuple(str(i + 1) for i in range(nr))
    q_cols = tuple(labels[part.last_node(comp) - 1] for comp in ng)
    p_cols = tuple(labels[v - 1] for v in keep)
    return SignMatrix(q, labels, q_cols), SignMatrix(p, labels, p_cols)


def vw_from_forest(f: SpanningForest, col_labels=()) -> tuple:
    """``(V, W)`` for the incidence matrix the forest was built from."""
    b = f.n_branches
    labels = tuple(col_labels) or tuple(str(j) for j in range(b))
    tree = list(f.tree_branches)
    v = sp.csc_array((np.ones(len(tree), dtype=np.int64), (tree, list(range(len(tree))))),
                     shape=(b, len(tree)))
    rows, cols, vals = [], [], []
    for k, loop in enumerate(f.loop_branches):
        rows.append(loop)
        cols.append(k)
        vals.append(1)
        for t, s in f.loop_tree_path[loop]:
            rows.append(t)
            cols.append(k)
            vals.append(s)
    w = sp.csc_array((vals, (rows, cols)), shape=(b, len(f.loop_branches)), dtype=np.int64)
    return (SignMatrix(v, labels, tuple(labels[t] for t in tree)),
            SignMatrix(w, labels, tuple(labels[j] for j in f.loop_branches)))


@dataclass(frozen=True)
class Stage:
    """One step of the cascade.

    ``incidence`` is the kind's incidence matrix contracted by every earlier
    stage (the topological form of ``A^T Q_prev``, transposed); its rows are
    the columns of the previous composed ``Q``.  ``row_nodes`` gives, for each
    such row, the original node index representing the merged node set.
    """

    kind: Kind
    incidence: SignMatrix
    partition: ComponentPartition
    zero_row_branches: tuple
    row_nodes: tuple
    basis: BasisQuad
    forest: SpanningForest | None = None


@dataclass(frozen=True)
class SplitChain:
    """Stage bases ``(P,Q)`` for Vs, C, Vc, R and ``(V,W)`` for L, plus products."""

    circuit: Circuit
    stages: tuple
    Q_VsC: SignMatrix
    Q_VsCVc: SignMatrix
    Q_VsCVcR: SignMatrix

    def stage(self, kind):
        kind = Kind(kind) if not isinstance(kind, Kind) else kind
        for s in self.stages:
            if s.kind is kind:
                return s
        raise KeyError(kind)

    def _m(self, kind, name):
        return getattr(self.stage(kind).basis, name)

    P_Vs = property(lambda self: self._m(Kind.VS, "P"))
    Q_Vs = property(lambda self: self._m(Kind.VS, "Q"))
    P_C = property(lambda self: self._m(Kind.C, "P"))
    Q_C = property(lambda self: self._m(Kind.C, "Q"))
    P_Vc = property(lambda self: self._m(Kind.VC, "P"))
    Q_Vc = property(lambda self: self._m(Kind.VC, "Q"))
    P_R = property(lambda self: self._m(Kind.R, "P"))
    Q_R = property(lambda self: self._m(Kind.R, "Q"))
    V_L = property(lambda self: self._m(Kind.L, "V"))
    W_L = property(lambda self: self._m(Kind.L, "W"))

    def matrices(self):
        """Named chain matrices in a fixed order."""
        return {
            "P_Vs": self.P_Vs, "Q_Vs": self.Q_Vs,
            "P_C": self.P_C, "Q_C": self.Q_C,
            "P_Vc": self.P_Vc, "Q_Vc": self.Q_Vc,
            "P_R": self.P_R, "Q_R": self.Q_R,
            "V_L": self.V_L, "W_L": self.W_L,
            "Q_VsC": self.Q_VsC, "Q_VsCVc": self.Q_VsCVc, "Q_VsCVcR": self.Q_VsCVcR,
        }

    def dims(self):
        return {
            "phi_Vs": self.P_Vs.shape[1],
            "phi_C": self.P_C.shape[1],
            "phi_Vc": self.P_Vc.shape[1],
            "phi_R": self.P_R.shape[1],
            "phi_bar_R": self.Q_VsCVcR.shape[1],
            "i_L_tree": self.V_L.shape[1],
            "i_L_loop": self.W_L.shape[1],
        }

    def summary(self):
        out = []
        for s in self.stages:
            b = s.basis
            entry = {"stage": str(s.kind), "source": b.source,
                     "incidence_shape": list(s.incidence.shape),
                     "zero_row_branches": [s.incidence.col_labels[j] for j in s.zero_row_branches]}
            for name in ("P", "Q", "V", "W"):
                m = getattr(b, name)
                if m is not None:
                    entry[name] = {"shape": list(m.shape), "col_labels": list(m.col_labels)}
            out.append(entry)
        return out


_SOURCES = {
    Kind.VS: "A_Vs^T",
    Kind.C: "A_C^T Q_Vs",
    Kind.VC: "A_Vc^T Q_VsC",
    Kind.R: "A_R^T Q_VsCVc",
    Kind.L: "A_L^T Q_VsCVcR",
}


def _contract_through(m: SignMatrix, stages):
    """Contract ``m`` by each earlier stage partition; returns matrix and zero columns."""
    zeros = set(j for j in range(m.shape[1]) if m.sparse.indptr[j] == m.sparse.indptr[j + 1])
    for s in stages:
        res = contract(m, s.partition)
        m = res.matrix
        zeros.update(res.zero_row_branches)
    return m, tuple(sorted(zeros))


def build_split_chain(c: Circuit, check: bool = True) -> SplitChain:
    """Run the Vs, C, Vc, R, L cascade on the circuit graph.

    With ``check`` the topological prerequisites of the regular diagonal
    blocks are enforced: no Vs loop, full row rank of the contracted Vc
    incidence (no Vc in a C-V loop), and a connected contracted L graph.
    """
    stages = []
    row_nodes = tuple(range(1, c.num_nodes))
    problems = []
    for kind in POTENTIAL_STAGES:
        m, zeros = _contract_through(incidence_reduced(c, kind), stages)
        part = connected_components(m)
        q, p = q_and_p_from_components(part, m.row_labels)
        forest = None
        if check and kind in (Kind.VS, Kind.VC):
            forest = spanning_forest(m)
            if forest.loop_branches:
                ids = [m.col_labels[j] for j in forest.loop_branches]
                what = "voltage sources form a loop" if kind is Kind.VS else \
                    "controlled voltage sources lie in a C-V loop"
                problems.append((str(kind), ids, what))
        stages.append(Stage(kind, m, part, zeros, row_nodes, BasisQuad(P=p, Q=q,
                                                                       source=_SOURCES[kind]),
                            forest))
        row_nodes = tuple(row_nodes[part.last_node(k) - 1] for k in part.non_ground)
    m, zeros = _contract_through(incidence_reduced(c, Kind.L), stages)
    forest = spanning_forest(m)
    v, w = vw_from_forest(forest, m.col_labels)
    if check and forest.partition.count != 1:
        problems.append(("L", [], "current sources form a cutset with inductors"))
    stages.append(Stage(Kind.L, m, forest.partition, zeros, row_nodes,
                        BasisQuad(V=v, W=w, source=_SOURCES[Kind.L]), forest))
    if problems:
        msg = "; ".join(f"{what} ({', '.join(ids)})" if ids else what for _, ids, what in problems)
        raise AssumptionViolation(msg, problems)
    q_vs, q_c, q_vc, q_r = (s.basis.Q for s in stages[:4])
    q_vsc = q_vs @ q_c
    q_vscvc = q_vsc @ q_vc
    return SplitChain(c, tuple(stages), q_vsc, q_vscvc, q_vscvc @ q_r)
