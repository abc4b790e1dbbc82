"""Exception hierarchy shared across the package."""


class MnadecError(Exception):
    """Base class for all package errors."""


class NetlistError(MnadecError, ValueError):
    """Invalid netlist content."""


class NetlistSyntaxError(NetlistError):
    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f"line {line}"
            if column is not None:
                where += f", column {column}"
            where += ": "
        super().__init__(where + message)


class UnknownModel(NetlistError):
    pass


class InvalidParameter(NetlistError):
    pass


class InvalidControl(NetlistError):
    pass


class DanglingNode(NetlistError):
    pass


class SelfLoop(NetlistError):
    pass


class DisconnectedCircuit(NetlistError):
    pass


class DuplicateElementId(NetlistError):
    pass


class AssumptionViolation(MnadecError):
    """The circuit violates a topological assumption required for decoupling."""

    def __init__(self, message, violations=()):
        self.violations = list(violations)
        super().__init__(message)


class SingularStageMatrix(MnadecError):
    """A diagonal block that the theory guarantees to be regular is singular."""

    def __init__(self, stage, message=""):
        self.stage = stage
        super().__init__(f"stage {stage}: {message or 'matrix is singular'}")


class DimensionMismatch(MnadecError, ValueError):
    pass


class NumericalFailure(MnadecError):
    pass


class NewtonDivergence(NumericalFailure):
    def __init__(self, message, iterate=None, residual=None, iterations=0, trajectory=None):
        self.iterate = iterate
        self.residual = residual
        self.iterations = iterations
        self.trajectory = trajectory
        super().__init__(message)


class SingularJacobian(NumericalFailure):
    pass
