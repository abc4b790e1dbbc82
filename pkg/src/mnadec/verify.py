"""Topological checks that decide whether a circuit can be decoupled.

Violation codes:

``WP1``  circuit graph is disconnected
``WP2``  loop made of voltage sources only
``WP3``  cutset made of current sources only
``CS1``  controlled voltage source inside a C-V loop
``CS1D`` controlled voltage source with a control outside ``A_CVs^T phi, i_L``
``CS2``  controlled current source controlled by a voltage outside ``A_CRV^T phi``
         without a Vs-only path between its terminals
``CS3``  controlled current source controlled by ``i_Vc`` without a C-Vs-only
         path between its terminals
``CS4``  controlled current source controlled by a voltage outside ``A_CV^T phi``
         without a C-V-only path between its terminals
``CS5``  controlled current source in an L-I cutset (no C-R-V-only path)
``RD``   controlled resistor with a control outside ``A_CRV^T phi, i_L``
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from . import exact
from .graph import (
    connected_components,
    contract,
    find_path,
    incidence_reduced,
    spanning_forest,
)
from .netlist import Circuit, ControlKind, Kind

__all__ = [
    "Violation",
    "VerificationReport",
    "check_well_posedness",
    "check_controlled_vsources",
    "classify_controlled_isources",
    "check_controlled_resistors",
    "verify_circuit",
]

_CV = (Kind.C, Kind.VS, Kind.VC)
_CVS = (Kind.C, Kind.VS)
_CRV = (Kind.C, Kind.R, Kind.VS, Kind.VC)
_TYPE_PATH_KINDS = {1: (Kind.VS,), 2: _CVS, 3: _CV, 4: _CRV}


@dataclass(frozen=True)
class Violation:
    code: str
    element_ids: tuple
    witness: tuple = ()
    message: str = ""

    def to_dict(self):
        return {"code": self.code, "element_ids": list(self.element_ids),
                "witness": list(self.witness), "message": self.message}


@dataclass
class VerificationReport:
    violations: list = field(default_factory=list)
    ic_type_of: dict = field(default_factory=dict)
    control_rewrites: dict = field(default_factory=dict)

    @property
    def passed(self):
        return not self.violations

    @property
    def codes(self):
        return sorted({v.code for v in self.violations})

    def to_dict(self):
        return {
            "passed": self.passed,
            "violations": [v.to_dict() for v in self.violations],
            "ic_types": dict(self.ic_type_of),
            "rewrites": {k: [[bid, s] for bid, s in path]
                         for k, path in self.control_rewrites.items()},
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _signed_ids(c, path):
    return [(c.branches[j].id, s) for j, s in path]


def _control_nodes(c: Circuit, ref):
    """Node pair ``(a, b)`` of a voltage control, ``phi_a - phi_b``."""
    if ref.kind is ControlKind.NODE_PAIR_VOLTAGE:
        return ref.nodes
    e = c.element(ref.element)
    return e.from_node, e.to_node


def _voltage_path(c, ref, kinds):
    a, b = _control_nodes(c, ref)
    return find_path(c, a, b, kinds)


def check_well_posedness(c: Circuit) -> list:
    """Connectivity, V-loops and I-cutsets."""
    out = []
    everything = incidence_reduced(c)
    part = connected_components(everything)
    if part.count != 1:
        nodes = [c.nodes[v] for v in part.component_nodes[0]]
        out.append(Violation("WP1", (), tuple(nodes), "circuit graph is not connected"))
    av = incidence_reduced(c, (Kind.VS, Kind.VC))
    if exact.rank(av) < av.shape[1]:
        forest = spanning_forest(av)
        for loop in forest.loop_branches:
            ids = [av.col_labels[loop]] + [av.col_labels[t] for t, _ in forest.loop_tree_path[loop]]
            out.append(Violation("WP2", tuple(ids), tuple(ids),
                                 "loop made of voltage sources only"))
    aclrv = incidence_reduced(c, (Kind.C, Kind.L, Kind.R, Kind.VS, Kind.VC))
    if exact.rank(aclrv) < c.num_nodes - 1:
        sub = connected_components(aclrv)
        for k in sub.non_ground:
            nodes = tuple(c.nodes[v] for v in sub.component_nodes[k])
            ids = tuple(e.id for e in c.branches if e.kind in (Kind.IS, Kind.IC)
                        and (sub.component_of[e.from_node] == k)
                        != (sub.component_of[e.to_node] == k))
            out.append(Violation("WP3", ids, nodes, "cutset made of current sources only"))
    return out


def check_controlled_vsources(c: Circuit, report: VerificationReport | None = None) -> list:
    """C-V loops through controlled voltage sources and their control lists."""
    out = []
    vcs = c.of_kind(Kind.VC)
    if not vcs:
        return out
    m = incidence_reduced(c, Kind.VC)
    zeros = set()
    # contract A_Vc by the Vs partition, then by the C partition of the contracted graph
    p1 = connected_components(incidence_reduced(c, Kind.VS))
    res = contract(m, p1)
    zeros.update(res.zero_row_branches)
    ac = contract(incidence_reduced(c, Kind.C), p1).matrix
    p2 = connected_components(ac)
    res2 = contract(res.matrix, p2)
    zeros.update(res2.zero_row_branches)
    forest = spanning_forest(res2.matrix)
    bad = sorted(zeros | set(forest.loop_branches))
    for j in bad:
        vid = m.col_labels[j]
        e = c.element(vid)
        path = find_path(c, e.to_node, e.from_node, _CV, exclude=(vid,))
        witness = tuple([vid] + [bid for bid, _ in _signed_ids(c, path or [])])
        out.append(Violation("CS1", (vid,), witness,
                             f"controlled voltage source {vid} is part of a C-V loop"))
    for j in vcs:
        e = c.branches[j]
        for ref in e.controls:
            key = f"{e.id}:{ref.describe(c)}"
            if ref.is_voltage:
                path = _voltage_path(c, ref, _CVS)
                if path is None:
                    out.append(Violation("CS1D", (e.id,), _control_nodes_labels(c, ref),
                                         f"{key} is not a C-Vs branch voltage combination"))
                elif report is not None:
                    report.control_rewrites[key] = _signed_ids(c, path)
            elif ref.kind is not ControlKind.INDUCTOR_CURRENT:
                out.append(Violation("CS1D", (e.id, ref.element), (),
                                     f"{key}: controlled voltage sources may only depend on "
                                     "inductor currents"))
    return out


def _control_nodes_labels(c, ref):
    a, b = _control_nodes(c, ref)
    return (c.nodes[a], c.nodes[b])


def _classify_voltage(c, ref):
    """Smallest required type for a voltage control: 4 (CV), 3 (CRV) or 1."""
    p = _voltage_path(c, ref, _CV)
    if p is not None:
        return 4, p
    p = _voltage_path(c, ref, _CRV)
    if p is not None:
        return 3, p
    return 1, None


def classify_controlled_isources(c: Circuit, report: VerificationReport | None = None):
    """Assign each controlled current source a type in ``1..4``.

    Returns ``(ic_type_of, violations)``.  The type is the smallest one whose
    terminal-path condition holds; its control allowance is the widest among
    the admissible types, so any control it does not cover is a violation.
    """
    types = {}
    out = []
    for j in c.of_kind(Kind.IC):
        e = c.branches[j]
        k0 = None
        for k in (1, 2, 3, 4):
            if find_path(c, e.from_node, e.to_node, _TYPE_PATH_KINDS[k]) is not None:
                k0 = k
                break
        if k0 is None:
            sub = connected_components(incidence_reduced(c, _CRV))
            side = sub.component_of[e.from_node]
            if side == sub.ground_component:
                side = sub.component_of[e.to_node]
            nodes = tuple(c.nodes[v] for v in sub.component_nodes[side])
            out.append(Violation("CS5", (e.id,), nodes,
                                 f"controlled current source {e.id} is part of an L-I cutset"))
            continue
        types[e.id] = k0
        for ref in e.controls:
            key = f"{e.id}:{ref.describe(c)}"
            if ref.is_voltage:
                need, path = _classify_voltage(c, ref)
                if need < k0:
                    code = "CS2" if need == 1 else "CS4"
                    out.append(Violation(code, (e.id,), _control_nodes_labels(c, ref),
                                         f"{key} needs type {need} but the terminals only "
                                         f"admit type {k0}"))
                elif path is not None and report is not None:
                    report.control_rewrites[key] = _signed_ids(c, path)
            elif ref.kind is ControlKind.VC_CURRENT and k0 > 2:
                out.append(Violation("CS3", (e.id, ref.element), (),
                                     f"{key}: i_Vc controls need a C-Vs-only terminal path, "
                                     f"terminals only admit type {k0}"))
    return types, out


def check_controlled_resistors(c: Circuit, report: VerificationReport | None = None) -> list:
    out = []
    for j in c.of_kind(Kind.R):
        e = c.branches[j]
        for ref in e.controls:
            key = f"{e.id}:{ref.describe(c)}"
            if ref.is_voltage:
                path = _voltage_path(c, ref, _CV) or _voltage_path(c, ref, _CRV)
                if path is None:
                    out.append(Violation("RD", (e.id,), _control_nodes_labels(c, ref),
                                         f"{key} is not a C-R-V branch voltage combination"))
                elif report is not None:
                    report.control_rewrites[key] = _signed_ids(c, path)
            elif ref.kind is not ControlKind.INDUCTOR_CURRENT:
                out.append(Violation("RD", (e.id, ref.element), (),
                                     f"{key}: resistors may only depend on inductor currents"))
    return out


def verify_circuit(c: Circuit) -> VerificationReport:
    """Run every check; controlled-source checks only on well-posed circuits."""
    report = VerificationReport()
    wp = check_well_posedness(c)
    report.violations.extend(wp)
    if wp:
        return report
    report.violations.extend(check_controlled_vsources(c, report))
    types, viol = classify_controlled_isources(c, report)
    report.ic_type_of.update(types)
    report.violations.extend(viol)
    report.violations.extend(check_controlled_resistors(c, report))
    return report
