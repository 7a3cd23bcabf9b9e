"""Exception types shared across the engine."""


class TaintflowError(Exception):
    """Base class; every error the CLI maps to exit code 2 derives from it."""


class ParseError(TaintflowError):
    def __init__(self, message: str, line: int = 0, column: int = 0, filename: str = "<input>"):
        self.line = line
        self.column = column
        self.filename = filename
        super().__init__(f"{filename}:{line}:{column}: {message}")


class ResolveError(TaintflowError):
    pass


class SsaError(TaintflowError):
    def __init__(self, message: str, variable: str | None = None):
        self.variable = variable
        super().__init__(message)


class SpecError(TaintflowError):
    pass


class BudgetExceeded(TaintflowError):
    def __init__(self, budget: int):
        self.budget = budget
        super().__init__(f"step budget of {budget} worklist pops exceeded")


class UnreachableCase(TaintflowError):
    """A flow function was handed a statement it does not model."""


class UnknownPredecessor(TaintflowError):
    pass


class InvalidSummary(TaintflowError):
    pass


class TraceCorrupt(TaintflowError):
    pass
