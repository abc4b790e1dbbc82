"""Independent dense MNA stamping and implicit Euler for linear circuits.

Written from the element list only (no use of the package's incidence or MNA
code), so it can serve as an oracle for the decoupled system.
"""

from __future__ import annotations

import numpy as np

from mnadec import devices as dev
from mnadec.netlist import ControlKind, Kind


class DenseMna:
    """``E u' + K u + s = 0`` with unknowns ``[phi, i_L, i_Vs, i_Vc]``."""

    def __init__(self, c):
        self.c = c
        n1 = c.num_nodes - 1
        by = {k: [e for e in c.branches if e.kind is k] for k in Kind}
        self.L_ids = [e.id for e in by[Kind.L]]
        self.Vs = by[Kind.VS]
        self.Is = by[Kind.IS]
        m = n1 + len(by[Kind.L]) + len(by[Kind.VS]) + len(by[Kind.VC])
        self.m = m
        E = np.zeros((m, m))
        K = np.zeros((m, m))
        cur = {}
        off = n1
        for kind in (Kind.L, Kind.VS, Kind.VC):
            for e in by[kind]:
                cur[e.id] = off
                off += 1

        def add_kcl(node, col, val, mat):
            if node:
                mat[node - 1, col] += val

        def vrow(a, b):
            row = np.zeros(m)
            if a:
                row[a - 1] += 1
            if b:
                row[b - 1] -= 1
            return row

        def ctrl_row(ref):
            if ref.kind is ControlKind.NODE_PAIR_VOLTAGE:
                return vrow(*ref.nodes)
            if ref.kind is ControlKind.BRANCH_VOLTAGE:
                el = c.element(ref.element)
                return vrow(el.from_node, el.to_node)
            row = np.zeros(m)
            row[cur[ref.element]] = 1
            return row

        for e in c.branches:
            a, b = e.from_node, e.to_node
            if e.kind is Kind.C:
                cap = e.behavior.C
                for p, sp in ((a, 1), (b, -1)):
                    for q, sq in ((a, 1), (b, -1)):
                        if p and q:
                            E[p - 1, q - 1] += sp * sq * cap
            elif e.kind is Kind.R:
                if not isinstance(e.behavior, dev.LinearG):
                    raise ValueError("reference handles linear conductances only")
                g = e.behavior.G
                for p, sp in ((a, 1), (b, -1)):
                    for q, sq in ((a, 1), (b, -1)):
                        if p and q:
                            K[p - 1, q - 1] += sp * sq * g
            elif e.kind in (Kind.L, Kind.VS, Kind.VC):
                j = cur[e.id]
                add_kcl(a, j, 1, K)
                add_kcl(b, j, -1, K)
                if e.kind is Kind.L:
                    E[j, j] = e.behavior.L
                    K[j] -= vrow(a, b)
                else:
                    K[j] += vrow(a, b)
                    if e.kind is Kind.VC:
                        K[j] -= self._linear_gain(e, ctrl_row)
            elif e.kind is Kind.IC:
                row = self._linear_gain(e, ctrl_row)
                if a:
                    K[a - 1] += row
                if b:
                    K[b - 1] -= row
        self.E, self.K = E, K
        self.n1 = n1
        self._cur = cur

    @staticmethod
    def _linear_gain(e, ctrl_row):
        beh = e.behavior
        if not isinstance(beh, dev.PolynomialSource) or beh.coeffs[0] != 0 \
                or len(beh.coeffs) > 1 + len(e.controls):
            raise ValueError("reference handles linear controlled sources only")
        row = 0.0
        for k, ref in enumerate(e.controls):
            if k + 1 < len(beh.coeffs):
                row = row + beh.coeffs[k + 1] * ctrl_row(ref)
        return row

    def source(self, t):
        s = np.zeros(self.m)
        for e in self.Vs:
            s[self._cur[e.id]] -= e.behavior.value(t)
        for e in self.Is:
            i = e.behavior.value(t)
            if e.from_node:
                s[e.from_node - 1] += i
            if e.to_node:
                s[e.to_node - 1] -= i
        return s

    def residual(self, udot, u, t):
        return self.E @ udot + self.K @ u + self.source(t)

    def implicit_euler(self, u0, t0, h, steps):
        A = self.E / h + self.K
        out = [np.array(u0, dtype=float)]
        u = out[0]
        for k in range(1, steps + 1):
            t = t0 + k * h
            u = np.linalg.solve(A, self.E @ u / h - self.source(t))
            out.append(u)
        return np.array(out)
