"""Assembly of the semi-explicit index-1 system from the split chain.

The decoupled variables ``xi = [x, y, z]`` are related to the MNA unknowns by
an integer change of variables ``u = T xi`` and the decoupled equations are an
integer row transformation ``Pi`` of the MNA equations::

    x = [phi_C~, i_L-]                          differential
    y = [phi_Vs~, i_L~, phi_Vc~, phi_R~, i_Vc]  algebraic
    z = [i_Vs, phi_R-]                          output

    rows of Pi: d1 d2 | g1 g2 g3 g4 g5 | h1 h2

Both ``T`` and ``Pi`` are assembled from the chain matrices with sparse
integer products.  Evaluation works on small dense projections of the MNA
terms, computed once here.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from . import exact
from .basis import SplitChain, build_split_chain
from .errors import AssumptionViolation, DimensionMismatch, SingularStageMatrix
from .graph import SignMatrix
from .mna import MnaModel, build_mna
from .netlist import Circuit, Kind
from .verify import VerificationReport, verify_circuit

__all__ = [
    "X_BLOCKS",
    "Y_BLOCKS",
    "Z_BLOCKS",
    "ROW_BLOCKS",
    "VariablePartition",
    "DecoupledSystem",
    "variable_partition",
    "reconstruct_original",
    "assemble",
    "decouple",
]

X_BLOCKS = ("phi_C", "iL_loop")
Y_BLOCKS = ("phi_Vs", "iL_tree", "phi_Vc", "phi_R", "i_Vc")
Z_BLOCKS = ("i_Vs", "phi_bar_R")
ROW_BLOCKS = ("d1", "d2", "g1", "g2", "g3", "g4", "g5", "h1", "h2")


def _i(m):
    """Integer scipy sparse view of a SignMatrix (or sparse array)."""
    return (m.sparse if isinstance(m, SignMatrix) else sp.csc_array(m)).astype(np.int64)


def _slices(sizes):
    out, a = {}, 0
    for name, n in sizes:
        out[name] = slice(a, a + n)
        a += n
    return out, a


def _tidy(v):
    v = float(v)
    return int(v) if v.is_integer() else v


def _format_combination(coeffs, names):
    parts = []
    for j, v in coeffs:
        if v == 0:
            continue
        mag = "" if abs(v) == 1 else f"{abs(v)}*"
        sign = "-" if v < 0 else "+"
        parts.append((sign, f"{mag}{names[j]}"))
    if not parts:
        return "0"
    head = ("-" if parts[0][0] == "-" else "") + parts[0][1]
    return " ".join([head] + [f"{s} {t}" for s, t in parts[1:]])


@dataclass(frozen=True, eq=False)
class VariablePartition:
    """Named decoupled variables and the integer maps to and from ``u``.

    ``T`` maps decoupled to original unknowns (``u = T xi``) and ``S`` is its
    inverse, so row ``k`` of ``S`` is the expression of ``xi[k]`` in terms of
    the original unknowns.
    """

    chain: SplitChain
    blocks: dict
    names: tuple
    T: sp.csr_array
    S: sp.csr_array
    nx: int
    ny: int
    nz: int
    unknown_names: tuple

    @property
    def size(self):
        return self.nx + self.ny + self.nz

    @property
    def x_names(self):
        return self.names[:self.nx]

    @property
    def y_names(self):
        return self.names[self.nx:self.nx + self.ny]

    @property
    def z_names(self):
        return self.names[self.nx + self.ny:]

    def name_of(self, k):
        return self.names[k]

    def split(self, xi):
        xi = np.asarray(xi, dtype=float)
        return xi[:self.nx], xi[self.nx:self.nx + self.ny], xi[self.nx + self.ny:]

    def join(self, x, y, z=None):
        x = np.asarray(x, dtype=float).ravel()
        y = np.asarray(y, dtype=float).ravel()
        z = np.zeros(self.nz) if z is None else np.asarray(z, dtype=float).ravel()
        if x.size != self.nx or y.size != self.ny or z.size != self.nz:
            raise DimensionMismatch(
                f"expected |x|={self.nx}, |y|={self.ny}, |z|={self.nz}; "
                f"got {x.size}, {y.size}, {z.size}")
        return np.concatenate([x, y, z])

    def local(self, block):
        """Slice of ``block`` inside its own vector (x, y or z)."""
        s = self.blocks[block]
        off = 0 if block in X_BLOCKS else self.nx if block in Y_BLOCKS else self.nx + self.ny
        return slice(s.start - off, s.stop - off)

    def to_dict(self):
        def entries(lo, hi):
            return [{"index": k - lo, "name": self.names[k]} for k in range(lo, hi)]
        n1, n2 = self.nx, self.nx + self.ny
        return {
            "x": entries(0, n1), "y": entries(n1, n2), "z": entries(n2, self.size),
            "blocks": {b: [s.start, s.stop] for b, s in self.blocks.items()},
        }


def variable_partition(chain: SplitChain) -> VariablePartition:
    c = chain.circuit
    d = chain.dims()
    n_l = chain.V_L.shape[0]
    n_vs = d["phi_Vs"]
    n_vc = len(c.of_kind(Kind.VC))
    sizes = [("phi_C", d["phi_C"]), ("iL_loop", d["i_L_loop"]),
             ("phi_Vs", d["phi_Vs"]), ("iL_tree", d["i_L_tree"]), ("phi_Vc", d["phi_Vc"]),
             ("phi_R", d["phi_R"]), ("i_Vc", n_vc),
             ("i_Vs", len(c.of_kind(Kind.VS))), ("phi_bar_R", d["phi_bar_R"])]
    blocks, total = _slices(sizes)
    n1 = c.num_nodes - 1
    m = n1 + n_l + len(c.of_kind(Kind.VS)) + n_vc
    if total != m:
        raise DimensionMismatch(
            f"decoupled variable count {total} differs from MNA unknown count {m}; "
            "the circuit does not satisfy the decoupling assumptions")
    nx = d["phi_C"] + d["i_L_loop"]
    nz = sizes[-2][1] + sizes[-1][1]
    ny = total - nx - nz

    # u = T xi, assembled blockwise
    q_vs, q_vsc, q_vscvc = _i(chain.Q_Vs), _i(chain.Q_VsC), _i(chain.Q_VsCVc)
    cols = {
        "phi_Vs": _i(chain.P_Vs),
        "phi_C": q_vs @ _i(chain.P_C),
        "phi_Vc": q_vsc @ _i(chain.P_Vc),
        "phi_R": q_vscvc @ _i(chain.P_R),
        "phi_bar_R": _i(chain.Q_VsCVcR),
    }
    T = sp.lil_array((m, m), dtype=np.int64)
    for name, mat in cols.items():
        T[0:n1, blocks[name]] = mat.toarray()
    T[n1:n1 + n_l, blocks["iL_tree"]] = _i(chain.V_L).toarray()
    T[n1:n1 + n_l, blocks["iL_loop"]] = _i(chain.W_L).toarray()
    a = n1 + n_l
    nvs = len(c.of_kind(Kind.VS))
    T[a:a + nvs, blocks["i_Vs"]] = np.eye(nvs, dtype=np.int64)
    T[a + nvs:m, blocks["i_Vc"]] = np.eye(n_vc, dtype=np.int64)

    # xi = S u from the representative-node rule
    S = sp.lil_array((m, m), dtype=np.int64)
    stage_block = {Kind.VS: "phi_Vs", Kind.C: "phi_C", Kind.VC: "phi_Vc", Kind.R: "phi_R"}
    for st in chain.stages[:4]:
        part = st.partition
        p = _i(st.basis.P)
        rows = blocks[stage_block[st.kind]]
        for k in range(p.shape[1]):
            v = int(p[:, [k]].nonzero()[0][0]) + 1
            S[rows.start + k, st.row_nodes[v - 1] - 1] += 1
            comp = part.component_of[v]
            if comp != part.ground_component:
                S[rows.start + k, st.row_nodes[part.last_node(comp) - 1] - 1] -= 1
    r_stage = chain.stages[3]
    for k, comp in enumerate(r_stage.partition.non_ground):
        last = r_stage.partition.last_node(comp)
        S[blocks["phi_bar_R"].start + k, r_stage.row_nodes[last - 1] - 1] = 1
    forest = chain.stages[4].forest
    w = _i(chain.W_L).toarray()
    for k, loop in enumerate(forest.loop_branches):
        S[blocks["iL_loop"].start + k, n1 + loop] = 1
    for k, t in enumerate(forest.tree_branches):
        row = blocks["iL_tree"].start + k
        S[row, n1 + t] = 1
        for lk, loop in enumerate(forest.loop_branches):
            if w[t, lk]:
                S[row, n1 + loop] -= w[t, lk]
    S[blocks["i_Vs"], a:a + nvs] = np.eye(nvs, dtype=np.int64)
    S[blocks["i_Vc"], a + nvs:m] = np.eye(n_vc, dtype=np.int64)

    unknowns = [f"phi[{c.nodes[i]}]" for i in range(1, c.num_nodes)]
    for kind in (Kind.L, Kind.VS, Kind.VC):
        unknowns += [f"i[{c.branches[j].id}]" for j in c.of_kind(kind)]
    S = sp.csr_array(S)
    names = []
    for k in range(m):
        lo, hi = S.indptr[k], S.indptr[k + 1]
        names.append(_format_combination(zip(S.indices[lo:hi], S.data[lo:hi]), unknowns))
    return VariablePartition(chain, blocks, tuple(names), sp.csr_array(T), S, nx, ny, nz,
                             tuple(unknowns))


def reconstruct_original(x, y, z, part: VariablePartition):
    """``(phi, i_L, i_Vs, i_Vc)`` from decoupled variables."""
    xi = part.join(x, y, z)
    u = part.T @ xi
    c = part.chain.circuit
    n1 = c.num_nodes - 1
    n_l = part.chain.V_L.shape[0]
    n_vs = len(c.of_kind(Kind.VS))
    return u[:n1], u[n1:n1 + n_l], u[n1 + n_l:n1 + n_l + n_vs], u[n1 + n_l + n_vs:]


def _row_transform(chain: SplitChain, lay):
    """Integer sparse ``Pi`` and the slices of its row blocks."""
    q_vs, q_vsc, q_vscvc = _i(chain.Q_Vs), _i(chain.Q_VsC), _i(chain.Q_VsCVc)
    kcl_blocks = {
        "d1": (q_vs @ _i(chain.P_C)).T,
        "g2": _i(chain.Q_VsCVcR).T,
        "g4": (q_vscvc @ _i(chain.P_R)).T,
        "g5": (q_vsc @ _i(chain.P_Vc)).T,
        "h1": _i(chain.P_Vs).T,
    }
    m = lay.size
    sizes = []
    parts = []
    for name in ROW_BLOCKS:
        blk = sp.lil_array((0, m), dtype=np.int64)
        if name in kcl_blocks:
            b = kcl_blocks[name]
            blk = sp.hstack([b, sp.csc_array((b.shape[0], m - lay.n_phi), dtype=np.int64)])
        elif name in ("d2", "h2"):
            b = _i(chain.W_L if name == "d2" else chain.V_L).T
            blk = sp.hstack([sp.csc_array((b.shape[0], lay.n_phi), dtype=np.int64), b,
                             sp.csc_array((b.shape[0], lay.n_vs + lay.n_vc), dtype=np.int64)])
        elif name == "g1":
            blk = sp.csc_array((np.ones(lay.n_vs, dtype=np.int64),
                                (np.arange(lay.n_vs), np.arange(lay.vs.start, lay.vs.stop))),
                               shape=(lay.n_vs, m))
        elif name == "g3":
            blk = sp.csc_array((np.ones(lay.n_vc, dtype=np.int64),
                                (np.arange(lay.n_vc), np.arange(lay.vc.start, lay.vc.stop))),
                               shape=(lay.n_vc, m))
        sizes.append((name, blk.shape[0]))
        parts.append(sp.csr_array(blk, dtype=np.int64))
    rows, total = _slices(sizes)
    return sp.csr_array(sp.vstack(parts, format="csr")), rows


def _check_block(stage, mat):
    a = np.asarray(mat.toarray() if sp.issparse(mat) else mat)
    if a.shape[0] != a.shape[1]:
        raise SingularStageMatrix(stage, f"block has shape {a.shape}, expected square")
    if exact.det(a) == 0:
        raise SingularStageMatrix(stage)
    return a.astype(float)


class _Factor:
    """LU factor of a small constant block (empty blocks allowed)."""

    def __init__(self, a):
        self.n = a.shape[0]
        self.lu = sla.lu_factor(a) if self.n else None

    def solve(self, b, trans=0):
        b = np.asarray(b, dtype=float)
        if self.n == 0:
            return np.zeros(b.shape)
        return sla.lu_solve(self.lu, b, trans=trans)


class DecoupledSystem:
    """The decoupled equations ``M x' = -q(x, y, t)``, ``0 = g(x, y, t)``, ``h = 0``.

    Stateless after construction; every evaluator is a pure function of its
    arguments.
    """

    def __init__(self, circuit: Circuit, chain: SplitChain, report: VerificationReport,
                 model: MnaModel | None = None):
        self.circuit = circuit
        self.chain = chain
        self.report = report
        self.model = model or build_mna(circuit)
        self.partition = variable_partition(chain)
        part = self.partition
        lay = self.model.layout
        Pi_i, self.rows = _row_transform(chain, lay)
        if Pi_i.shape[0] != lay.size:
            raise DimensionMismatch("row transformation is not square")
        self.Pi_int = Pi_i
        self.T_int = part.T
        Pi = sp.csr_array(Pi_i, dtype=float)
        T = sp.csr_array(part.T, dtype=float)
        self.Pi = Pi
        self.T = T
        mdl = self.model
        # sparse products; the small results are kept dense for evaluation
        self._KT = (Pi @ mdl.K @ T).toarray()
        self._ET = (Pi @ mdl.E @ T).toarray()
        self._Svs = (Pi @ mdl.S_vs).toarray()
        self._Sis = (Pi @ mdl.S_is).toarray()
        self._terms = [(term, Pi @ term.target, (T.T @ term.args.T).T) for term in mdl.terms]
        self.nx, self.ny, self.nz = part.nx, part.ny, part.nz

        # constant diagonal blocks, checked exactly
        self.A1 = _check_block("A1", self._int_block("g1", "phi_Vs"))
        self.A2 = _check_block("A2", self._int_block("g2", "iL_tree"))
        self.A3 = _check_block("A3", self._int_block("g3", "phi_Vc"))
        self.A5 = _check_block("A5", self._int_block("g5", "i_Vc"))
        self.H1 = _check_block("H1", self._int_block("h1", "i_Vs"))
        self.H2 = _check_block("H2", self._int_block("h2", "phi_bar_R"))
        self._f1, self._f2, self._f3, self._f5, self._fh1, self._fh2 = (
            _Factor(a) for a in (self.A1, self.A2, self.A3, self.A5, self.H1, self.H2))

        xs = slice(0, self.nx)
        d = slice(self.rows["d1"].start, self.rows["d2"].stop)
        self.M = self._ET[d, xs].copy()
        if self.nx and not np.allclose(self.M, self.M.T, rtol=1e-12, atol=0):
            raise SingularStageMatrix("M", "leading differential matrix is not symmetric")
        self._cho = sla.cho_factor(self.M) if self.nx else None

    # -- structure --------------------------------------------------------------

    def _int_block(self, rname, cname):
        """Exact integer block of the affine part ``Pi K T``."""
        pi = self.Pi_int[self.rows[rname]].toarray()
        t = self.T_int[:, self.partition.blocks[cname]].toarray()
        blk = pi @ (self.model.K @ t)
        r = np.rint(blk)
        if not np.allclose(blk, r, rtol=0, atol=1e-12):
            raise SingularStageMatrix(rname, "block is not integral")
        return r.astype(np.int64)

    @property
    def leading_matrices(self):
        """``(P_C^T Q_Vs^T A_C C A_C^T Q_Vs P_C, W_L^T L W_L)``."""
        b = self.partition.blocks
        r1, r2 = self.rows["d1"], self.rows["d2"]
        return self._ET[r1, b["phi_C"]], self._ET[r2, b["iL_loop"]]

    def y_block_slices(self):
        p = self.partition
        return [p.local(n) for n in Y_BLOCKS]

    def g_row_slices(self):
        g0 = self.rows["g1"].start
        return [slice(self.rows[n].start - g0, self.rows[n].stop - g0)
                for n in ("g1", "g2", "g3", "g4", "g5")]

    # -- evaluation -------------------------------------------------------------

    def _xi(self, x, y, z=None):
        return self.partition.join(x, y, z)

    def projected(self, xi, t, jac=False):
        """``Pi f(T xi, t)`` and optionally its Jacobian in ``xi``."""
        mdl = self.model
        r = self._KT @ xi + self._Svs @ mdl.vs(t) + self._Sis @ mdl.is_(t)
        J = self._KT.copy() if jac else None
        for term, tgt, args in self._terms:
            val, grad = term.evaluate(args @ xi)
            r = r + tgt * val
            if jac:
                J += np.outer(tgt, grad @ args)
        return (r, J) if jac else r

    def known_ydot(self, t):
        """Time derivatives of ``phi_Vs~`` and ``i_L~`` (pure source functions)."""
        mdl = self.model
        ydot = np.zeros(self.partition.size)
        b = self.partition.blocks
        vsd, isd = mdl.vs_dot(t), mdl.is_dot(t)
        for rname, cname, fac in (("g1", "phi_Vs", self._f1), ("g2", "iL_tree", self._f2)):
            rows = self.rows[rname]
            rhs = self._Svs[rows] @ vsd + self._Sis[rows] @ isd
            ydot[b[cname]] = -fac.solve(rhs)
        return ydot

    def q(self, x, y, t, jac=False):
        """Differential residual without the ``M x'`` term."""
        xi = self._xi(x, y)
        d = slice(self.rows["d1"].start, self.rows["d2"].stop)
        known = self._ET[d] @ self.known_ydot(t)
        if jac:
            r, J = self.projected(xi, t, jac=True)
            return r[d] + known, J[d, :self.nx], J[d, self.nx:self.nx + self.ny]
        return self.projected(xi, t)[d] + known

    def diff_residual(self, xdot, x, y, t):
        return self.M @ np.asarray(xdot, dtype=float) + self.q(x, y, t)

    def f(self, x, y, t):
        """Right-hand side ``x' = f(x, y, t)``."""
        if self.nx == 0:
            return np.zeros(0)
        return -sla.cho_solve(self._cho, self.q(x, y, t))

    def g(self, x, y, t):
        g = slice(self.rows["g1"].start, self.rows["g5"].stop)
        return self.projected(self._xi(x, y), t)[g]

    def g_jacobian(self, x, y, t):
        """``(dg/dx, dg/dy)``."""
        g = slice(self.rows["g1"].start, self.rows["g5"].stop)
        _, J = self.projected(self._xi(x, y), t, jac=True)
        return J[g, :self.nx], J[g, self.nx:self.nx + self.ny]

    def A4(self, x, y, t):
        _, gy = self.g_jacobian(x, y, t)
        rs = self.g_row_slices()[3]
        cs = self.partition.local("phi_R")
        return gy[rs, cs]

    def h(self, xdot, x, y, z, t):
        xi = self._xi(x, y, z)
        xidot = self.known_ydot(t)
        xidot[:self.nx] = xdot
        h = slice(self.rows["h1"].start, self.rows["h2"].stop)
        return self._ET[h] @ xidot + self.projected(xi, t)[h]

    def solve_outputs(self, x, y, t, xdot=None):
        """``z = [i_Vs, phi_R-]`` from the output block (``phi_R-`` first)."""
        if xdot is None:
            xdot = self.f(x, y, t)
        p = self.partition
        z = np.zeros(self.nz)
        zl_r, zl_v = p.local("phi_bar_R"), p.local("i_Vs")
        r = self.h(xdot, x, y, z, t)
        nh1 = self.rows["h1"].stop - self.rows["h1"].start
        z[zl_r] = -self._fh2.solve(r[nh1:])
        r = self.h(xdot, x, y, z, t)
        z[zl_v] = -self._fh1.solve(r[:nh1])
        return z

    def residual(self, xidot, xi, t):
        """Full transformed residual ``Pi r(T xi', T xi, t)``."""
        return self._ET @ xidot + self.projected(np.asarray(xi, dtype=float), t)

    def original_state(self, x, y, z):
        return self.T @ self._xi(x, y, z)

    def original_derivative(self, xdot, t):
        xidot = self.known_ydot(t)
        xidot[:self.nx] = xdot
        return self.T @ xidot

    def mna_residual(self, x, y, z, t, xdot=None):
        """Original MNA residual of the reconstructed state (round-trip oracle)."""
        if xdot is None:
            xdot = self.f(x, y, t)
        u = self.original_state(x, y, z)
        return self.model.residual(self.original_derivative(xdot, t), u, t)

    # -- export -----------------------------------------------------------------

    def wiring(self):
        """Which row blocks each nonlinear element feeds and what it reads."""
        names = self.partition.names
        out = []
        for term, tgt, args in self._terms:
            feeds = [n for n in ROW_BLOCKS if np.any(tgt[self.rows[n]] != 0)]
            reads = [_format_combination([(j, _tidy(v)) for j, v in enumerate(row)], names)
                     for row in args]
            out.append({"element": term.element, "kind": str(term.kind),
                        "model": type(term.behavior).__name__, "feeds": feeds,
                        "arguments": reads})
        return out

    def description(self):
        return {
            "circuit": self.circuit.name,
            "sizes": {"x": self.nx, "y": self.ny, "z": self.nz},
            "row_blocks": {n: [s.start, s.stop] for n, s in self.rows.items()},
            "variables": self.partition.to_dict(),
            "wiring": self.wiring(),
            "ic_types": dict(self.report.ic_type_of),
        }

    def to_json(self):
        return json.dumps(self.description(), indent=2, sort_keys=True) + "\n"


def assemble(c: Circuit, chain: SplitChain | None = None,
             report: VerificationReport | None = None) -> DecoupledSystem:
    """Verify (unless a report is given), build the chain and assemble."""
    report = report or verify_circuit(c)
    if not report.passed:
        raise AssumptionViolation(
            "circuit violates the decoupling assumptions: " + ", ".join(report.codes),
            report.violations)
    chain = chain or build_split_chain(c)
    return DecoupledSystem(c, chain, report)


decouple = assemble
