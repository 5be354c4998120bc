"""Shared exception types."""


class InvalidDocument(ValueError):
    """An input document failed to parse or violated a schema invariant."""


class NoFeasibleTiling(RuntimeError):
    """No candidate tiling fits the accelerator's caches (or an explicit tiling does not fit).

    ``op_index`` identifies the offending operator when the error is raised
    while mapping a subnet; it is ``None`` for single-operator calls.
    """

    def __init__(self, message: str, op_index: int | None = None):
        super().__init__(message)
        self.op_index = op_index


class SpaceTooLarge(RuntimeError):
    """Exhaustive enumeration was requested on a space above the safety guard."""
