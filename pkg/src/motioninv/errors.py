"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class MotionInvError(Exception):
    exit_code = 1


class ParseError(MotionInvError, ValueError):
    """Malformed input file. ``line`` is 1-based when known."""

    exit_code = 3

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}" if where else f"line {line}"
        super().__init__(f"{where}: {message}" if where else message)


class ValidationError(MotionInvError, ValueError):
    exit_code = 3


class NumericalError(MotionInvError):
    exit_code = 4
