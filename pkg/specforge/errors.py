"""Exception hierarchy shared by the IR, the runtime and the policy layer."""


class SpecforgeError(Exception):
    """Base class for every error raised by specforge."""


class IRSyntaxError(SpecforgeError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{line}:{column}: {message}")
        self.message = message
        self.line = line
        self.column = column


class IRValidationError(SpecforgeError):
    def __init__(self, diagnostics: list[str]):
        super().__init__("; ".join(diagnostics))
        self.diagnostics = list(diagnostics)


class Trap(SpecforgeError):
    """Defined runtime error of handler code, such as div-by-zero or out-of-bounds."""

    def __init__(self, kind: str, message: str):
        super().__init__(f"{kind}: {message}")
        self.kind = kind


class GuardFailure(SpecforgeError):
    """Control signal raised by a failing specialization guard.

    Only the engine trampoline catches it; callers of a handler never see it.
    """

    def __init__(self, label: str):
        super().__init__(f"guard failed for '{label}'")
        self.label = label


class InvocationError(SpecforgeError):
    """Arity or argument type mismatch when calling a handler function."""


class UnboundExternalError(SpecforgeError):
    def __init__(self, names: list[str]):
        super().__init__(f"unbound external state: {', '.join(names)}")
        self.names = list(names)


class UnknownHandlerError(SpecforgeError):
    def __init__(self, name: str):
        super().__init__(f"unknown handler '{name}'")
        self.name = name


class ConfigError(SpecforgeError):
    """Invalid specialization configuration or pipeline definition."""


class SpecializationError(SpecforgeError):
    """The specializer could not produce a valid module for a configuration."""


class RuntimeStateError(SpecforgeError):
    """Operation not allowed in the runtime's current state."""


class RuleError(SpecforgeError):
    """Invalid longest-prefix-match rule."""
