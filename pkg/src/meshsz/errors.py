"""Exception hierarchy shared by all meshsz modules."""


class MeshszError(Exception):
    """Base class for every error raised by meshsz."""


class InvalidValue(MeshszError, ValueError):
    pass


class EmptyInput(InvalidValue):
    pass


class InvalidMesh(MeshszError, ValueError):
    pass


class NonManifoldMesh(InvalidMesh):
    pass


class UnsupportedMesh(InvalidMesh):
    pass


class DegenerateCell(MeshszError, ArithmeticError):
    def __init__(self, cell_index, jacobian=0.0):
        super().__init__(f"cell {cell_index} is degenerate (|J| = {jacobian:.3e})")
        self.cell_index = cell_index
        self.jacobian = jacobian


class CorruptStream(MeshszError):
    """Malformed or truncated payload. ``position`` is a byte offset when known."""

    def __init__(self, message, position=None):
        if position is not None:
            message = f"{message} (at byte {position})"
        super().__init__(message)
        self.position = position


class UnsupportedVersion(CorruptStream):
    pass


class DigestMismatch(MeshszError):
    pass


class ParseError(MeshszError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
