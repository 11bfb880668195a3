"""Exception types raised across the package.

Each error carries the CLI exit code it maps to, so the command layer can
translate failures without a lookup table.
"""


class RoofPrimError(Exception):
    exit_code = 4


class InputError(RoofPrimError):
    """Bad user input: unreadable files, malformed records, bad flags."""

    exit_code = 2


class ParseError(InputError):
    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        prefix = ":".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)


class EmptyInputError(InputError):
    pass


class InsufficientDataError(InputError):
    pass


class InvalidParameterError(InputError):
    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class SchemaError(ParseError):
    def __init__(self, field, message, path=None):
        self.field = field
        super().__init__(f"field '{field}': {message}", path=path)


class ShapeError(InputError):
    pass


class GeometryError(RoofPrimError):
    exit_code = 3


class DegenerateGeometryError(GeometryError):
    pass


class AlphaTooSmallError(GeometryError):
    pass


class OutOfExtentError(GeometryError):
    pass


class InvalidBaseError(GeometryError):
    pass


class ClassificationError(GeometryError):
    def __init__(self, causes):
        self.causes = dict(causes)
        detail = "; ".join(f"{k}: {v}" for k, v in self.causes.items())
        super().__init__(f"every primitive fit failed ({detail})")


class BoundsError(RoofPrimError):
    pass


class ObjectiveEvaluationError(RoofPrimError):
    def __init__(self, coordinate, value):
        self.coordinate = coordinate
        self.value = value
        super().__init__(f"objective is {value} when perturbing coordinate {coordinate}")


class WriteError(RoofPrimError):
    pass
