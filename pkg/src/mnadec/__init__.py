"""Topological decoupling of MNA circuit equations into semi-explicit index-1 DAEs."""

from .basis import SplitChain, build_split_chain
from .decouple import DecoupledSystem, VariablePartition, assemble, decouple, reconstruct_original
from .errors import (
    AssumptionViolation,
    MnadecError,
    NetlistError,
    NewtonDivergence,
    NumericalFailure,
    SingularStageMatrix,
)
from .graph import SignMatrix, incidence_reduced, incidence_unreduced
from .mna import build_mna
from .netlist import Circuit, Element, Kind, load_netlist, parse_netlist, serialize_netlist
from .numeric import SolverConfig, Trajectory, consistent_initial_conditions, integrate, solve_algebraic
from .verify import VerificationReport, verify_circuit

__version__ = "0.1.0"

__all__ = [
    "AssumptionViolation", "Circuit", "DecoupledSystem", "Element", "Kind", "MnadecError",
    "NetlistError", "NewtonDivergence", "NumericalFailure", "SignMatrix", "SingularStageMatrix",
    "SolverConfig", "SplitChain", "Trajectory", "VariablePartition", "VerificationReport",
    "assemble", "build_mna", "build_split_chain", "consistent_initial_conditions", "decouple",
    "incidence_reduced", "incidence_unreduced", "integrate", "load_netlist", "parse_netlist",
    "reconstruct_original", "serialize_netlist", "solve_algebraic", "verify_circuit",
]
