"""The charge-oriented MNA system in the original unknowns.

Unknowns ``u = [phi (n-1), i_L, i_Vs, i_Vc]`` and equation rows
``[KCL (n-1), inductor (|L|), Vs (|Vs|), Vc (|Vc|)]``.  The residual is

    r(u', u, t) = E u' + K u + sum_k b_k f_k(a_k u) + s(t)

with ``E = blockdiag(A_C C A_C^T, L, 0, 0)``, the constant part ``K`` holding
every linear branch relation, and one *term* per nonlinear or controlled
element: ``a_k`` stacks the linear forms of its arguments (own branch voltage
first for resistors, then the controls), ``b_k`` is the column through which
its value enters.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import devices as dev
from .errors import InvalidParameter
from .graph import incidence_reduced
from .netlist import Circuit, ControlKind, Kind

__all__ = ["Term", "MnaLayout", "MnaModel", "build_mna"]


@dataclass(frozen=True)
class Term:
    element: str
    kind: Kind
    target: np.ndarray
    """Dense equation-space column ``b_k``."""
    args: np.ndarray
    """Dense ``(n_args, m)`` matrix of argument forms ``a_k``."""
    own_voltage: bool
    """Whether the first argument is the element's own branch voltage."""
    behavior: object

    def evaluate(self, argv):
        """Value and gradient with respect to the arguments."""
        if self.own_voltage:
            return self.behavior.current(argv[0], argv[1:])
        return self.behavior.value(argv)


@dataclass(frozen=True)
class MnaLayout:
    n_phi: int
    n_l: int
    n_vs: int
    n_vc: int

    @property
    def size(self):
        return self.n_phi + self.n_l + self.n_vs + self.n_vc

    @property
    def phi(self):
        return slice(0, self.n_phi)

    @property
    def i_l(self):
        return slice(self.n_phi, self.n_phi + self.n_l)

    @property
    def i_vs(self):
        a = self.n_phi + self.n_l
        return slice(a, a + self.n_vs)

    @property
    def i_vc(self):
        a = self.n_phi + self.n_l + self.n_vs
        return slice(a, a + self.n_vc)

    # equation rows share the same offsets
    kcl = phi
    ind = i_l
    vs = i_vs
    vc = i_vc

    def split(self, u):
        u = np.asarray(u, dtype=float)
        return u[self.phi], u[self.i_l], u[self.i_vs], u[self.i_vc]


@dataclass(frozen=True, eq=False)
class MnaModel:
    circuit: Circuit
    layout: MnaLayout
    incidence: dict
    E: sp.csr_array
    K: sp.csr_array
    terms: tuple
    C: np.ndarray
    L: np.ndarray
    vs_waveforms: tuple
    is_waveforms: tuple
    S_vs: sp.csr_array
    """Maps ``v_s(t)`` into equation space."""
    S_is: sp.csr_array
    """Maps ``i_s(t)`` into equation space."""

    @property
    def size(self):
        return self.layout.size

    def vs(self, t):
        return np.array([w.value(t) for w in self.vs_waveforms], dtype=float)

    def vs_dot(self, t):
        return np.array([w.derivative(t) for w in self.vs_waveforms], dtype=float)

    def is_(self, t):
        return np.array([w.value(t) for w in self.is_waveforms], dtype=float)

    def is_dot(self, t):
        return np.array([w.derivative(t) for w in self.is_waveforms], dtype=float)

    def source(self, t):
        return self.S_vs @ self.vs(t) + self.S_is @ self.is_(t)

    def f(self, u, t):
        """``K u + nonlinear terms + s(t)``."""
        u = np.asarray(u, dtype=float)
        r = self.K @ u + self.source(t)
        for term in self.terms:
            val, _ = term.evaluate(term.args @ u)
            r += term.target * val
        return r

    def jacobian(self, u, t):
        u = np.asarray(u, dtype=float)
        J = self.K.toarray().astype(float)
        for term in self.terms:
            _, grad = term.evaluate(term.args @ u)
            J += np.outer(term.target, grad @ term.args)
        return J

    def residual(self, udot, u, t):
        return self.E @ np.asarray(udot, dtype=float) + self.f(u, t)

    def pack(self, phi, i_l, i_vs, i_vc):
        return np.concatenate([np.ravel(phi), np.ravel(i_l), np.ravel(i_vs), np.ravel(i_vc)]
                              ).astype(float)

    def unknown_names(self):
        c = self.circuit
        names = [f"phi[{c.nodes[i]}]" for i in range(1, c.num_nodes)]
        for kind in (Kind.L, Kind.VS, Kind.VC):
            names += [f"i[{c.branches[j].id}]" for j in c.of_kind(kind)]
        return names


def _inductance_matrix(c: Circuit, l_ids):
    pos = {lid: k for k, lid in enumerate(l_ids)}
    diag = np.array([c.element(lid).behavior.L for lid in l_ids], dtype=float)
    L = np.diag(diag)
    for k in c.couplings:
        a, b = pos[k.first], pos[k.second]
        m = k.k * np.sqrt(diag[a] * diag[b])
        L[a, b] += m
        L[b, a] += m
    if len(l_ids) and np.linalg.eigvalsh(L).min() <= 0:
        raise InvalidParameter("coupled inductance matrix is not positive definite")
    return L


def build_mna(c: Circuit) -> MnaModel:
    """Stamp the MNA system of ``c`` (columns in canonical kind order)."""
    inc = {k: incidence_reduced(c, k) for k in (Kind.C, Kind.L, Kind.R, Kind.VS, Kind.VC,
                                                 Kind.IS, Kind.IC)}
    n1 = c.num_nodes - 1
    ids = {k: list(m.col_labels) for k, m in inc.items()}
    lay = MnaLayout(n1, len(ids[Kind.L]), len(ids[Kind.VS]), len(ids[Kind.VC]))
    m = lay.size
    A = {k: v.sparse.astype(float) for k, v in inc.items()}

    C = np.diag([c.element(i).behavior.C for i in ids[Kind.C]]) if ids[Kind.C] else \
        np.zeros((0, 0))
    L = _inductance_matrix(c, ids[Kind.L])
    E = np.zeros((m, m))
    if ids[Kind.C]:
        ac = A[Kind.C].toarray()
        E[lay.kcl, lay.phi] = ac @ C @ ac.T
    E[lay.ind, lay.i_l] = L

    # linear part
    K = np.zeros((m, m))
    K[lay.kcl, lay.i_l] = A[Kind.L].toarray()
    K[lay.kcl, lay.i_vs] = A[Kind.VS].toarray()
    K[lay.kcl, lay.i_vc] = A[Kind.VC].toarray()
    K[lay.ind, lay.phi] = -A[Kind.L].T.toarray()
    K[lay.vs, lay.phi] = A[Kind.VS].T.toarray()
    K[lay.vc, lay.phi] = A[Kind.VC].T.toarray()

    col_of = {}
    for kind in (Kind.L, Kind.VC):
        for k, eid in enumerate(ids[kind]):
            col_of[eid] = (lay.i_l if kind is Kind.L else lay.i_vc).start + k

    def voltage_row(a, b):
        row = np.zeros(m)
        if a:
            row[a - 1] += 1.0
        if b:
            row[b - 1] -= 1.0
        return row

    def control_row(ref):
        if ref.kind is ControlKind.NODE_PAIR_VOLTAGE:
            return voltage_row(*ref.nodes)
        if ref.kind is ControlKind.BRANCH_VOLTAGE:
            e = c.element(ref.element)
            return voltage_row(e.from_node, e.to_node)
        row = np.zeros(m)
        row[col_of[ref.element]] = 1.0
        return row

    terms = []
    for kind in (Kind.R, Kind.IC, Kind.VC):
        for k, eid in enumerate(ids[kind]):
            e = c.element(eid)
            beh = e.behavior
            if kind is Kind.R and isinstance(beh, dev.LinearG):
                col = A[Kind.R][:, [k]].toarray().ravel()
                K[lay.kcl, lay.phi] += beh.G * np.outer(col, col)
                continue
            target = np.zeros(m)
            if kind is Kind.VC:
                target[lay.vc.start + k] = -1.0
                rows = [control_row(r) for r in e.controls]
                own = False
            else:
                target[lay.kcl] = A[kind][:, [k]].toarray().ravel()
                rows = [control_row(r) for r in e.controls]
                own = kind is Kind.R
                if own:
                    rows.insert(0, voltage_row(e.from_node, e.to_node))
            terms.append(Term(eid, kind, target, np.array(rows).reshape(len(rows), m), own, beh))

    S_vs = np.zeros((m, lay.n_vs))
    S_vs[lay.vs, :] = -np.eye(lay.n_vs)
    S_is = np.zeros((m, len(ids[Kind.IS])))
    S_is[lay.kcl, :] = A[Kind.IS].toarray()
    return MnaModel(
        circuit=c, layout=lay, incidence=inc, E=sp.csr_array(E), K=sp.csr_array(K), terms=tuple(terms),
        C=C, L=L,
        vs_waveforms=tuple(c.element(i).behavior for i in ids[Kind.VS]),
        is_waveforms=tuple(c.element(i).behavior for i in ids[Kind.IS]),
        S_vs=sp.csr_array(S_vs), S_is=sp.csr_array(S_is),
    )
