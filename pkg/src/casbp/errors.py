"""Exception types shared across the solver."""

from __future__ import annotations


class ExpressionError(ValueError):
    """Syntax error in an expression string; carries the byte offset."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class UnknownIdentifierError(ExpressionError):
    """Identifier outside the allowed variable/function set."""

    def __init__(self, name: str, offset: int):
        super().__init__(f"unknown identifier '{name}'", offset)
        self.name = name


class EvalError(ValueError):
    """Domain violation or non-finite result while evaluating an expression."""


class DegenerateFieldError(RuntimeError):
    """A positive field lost usable positivity (blow-down, zero mass, ...).

    Carries enough location info to trace the failure: a human label for the
    field, the offending node if there is a single culprit, and, once the
    Sinkhorn driver re-raises, the iteration index.
    """

    def __init__(self, label: str, detail: str, node=None, step=None, time=None):
        msg = f"degenerate field '{label}': {detail}"
        if node is not None:
            msg += f" at node {node}"
        if step is not None:
            msg += f" at step {step}"
        if time is not None:
            msg += f" (t={time:g})"
        super().__init__(msg)
        self.label = label
        self.node = node
        self.step = step
        self.time = time
        self.iteration = None


class BlowUpError(RuntimeError):
    """Explicit time march exceeded the growth guard or went non-finite."""

    def __init__(self, which: str, step: int, time: float, detail: str):
        super().__init__(f"{which} pass blew up at step {step} (t={time:g}): {detail}")
        self.which = which
        self.step = step
        self.time = time
        self.iteration = None


class ValidationError(ValueError):
    """Raised when the solver refuses to run on a hard validation failure."""

    def __init__(self, report):
        super().__init__("problem validation failed:\n" + report.format())
        self.report = report


class ConfigError(ValueError):
    """Malformed configuration document; message names the field path."""
