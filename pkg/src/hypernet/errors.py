"""Exception hierarchy. Every error carries a short machine-readable code."""


class HypernetError(Exception):
    code = "E_INTERNAL"

    def __init__(self, message, **context):
        super().__init__(message)
        self.context = context

    def __str__(self):
        msg = super().__str__()
        if self.context:
            extra = ", ".join(f"{k}={v}" for k, v in sorted(self.context.items()))
            return f"{msg} ({extra})"
        return msg


class ValidationError(HypernetError, ValueError):
    code = "E_INPUT"


class ParseError(HypernetError, ValueError):
    code = "E_PARSE"


class DisconnectedError(HypernetError, ValueError):
    code = "E_DISCONNECTED"

    def __init__(self, message, components=None, **context):
        super().__init__(message, **context)
        self.components = components or []


class SolverError(HypernetError, RuntimeError):
    code = "E_SOLVER"


class ConvergenceError(SolverError):
    code = "E_CONVERGENCE"

    def __init__(self, message, diagnostics=None, **context):
        super().__init__(message, **context)
        self.diagnostics = diagnostics or {}


class OracleSizeError(HypernetError, ValueError):
    code = "E_ORACLE_SIZE"
