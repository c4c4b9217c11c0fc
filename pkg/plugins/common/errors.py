"""
Error hierarchy shared by every plugin and by the command-line/HTTP front ends.

All errors carry an optional ``param_info`` (what was received) and
``suggestion`` (what to do about it) so front ends can render actionable
messages without parsing strings.
"""


class BoundError(Exception):
    """Base class for errors raised while computing or estimating bounds"""
    def __init__(self, message, param_info=None, suggestion=None):
        self.message = message
        self.param_info = param_info
        self.suggestion = suggestion
        super().__init__(self.message)

    def describe(self):
        """Render the message together with parameter info and suggestion."""
        text = self.message
        if self.param_info:
            text += f"\nParameter: {self.param_info}"
        if self.suggestion:
            text += f"\nSuggestion: {self.suggestion}"
        return text


class ValidationError(BoundError, ValueError):
    """Invalid inputs: malformed pmfs, mismatched supports, out-of-range sizes"""
    pass


class DomainError(ValidationError):
    """Argument outside the mathematical domain of a formula"""
    pass


class ResourceExceededError(BoundError):
    """Enumeration or memory budget exceeded"""
    pass


class InvariantViolation(BoundError):
    """A verified identity or inequality did not hold"""
    def __init__(self, invariant, message, param_info=None, suggestion=None):
        self.invariant = invariant
        super().__init__(f"[{invariant}] {message}", param_info=param_info, suggestion=suggestion)


class DataExhaustedError(BoundError):
    """A data source cannot supply the requested number of points"""
    pass
