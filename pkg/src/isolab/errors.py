"""Exception hierarchy shared by the numerical modules."""


class IsolabError(Exception):
    """Base class; ``payload`` carries structured diagnostics for reports."""

    def __init__(self, message, **payload):
        super().__init__(message)
        self.payload = payload


class DomainError(IsolabError, ValueError):
    """Input outside an operation's domain (point outside chart, volume cap, ...)."""


class RangeError(IsolabError):
    """A geodesic left the chart; ``payload['exit_time']`` in [0, 1]."""


class ConvergenceError(IsolabError):
    """An iteration did not converge; payload holds the final residual/trace."""


class GeometryError(IsolabError):
    """Degenerate embedded hypersurface (e.g. the graph folds over)."""


class FitError(IsolabError):
    """Ill-conditioned least-squares fit."""


class SearchError(IsolabError):
    """Random search exhausted its trial budget."""


class ResolutionError(IsolabError, ValueError):
    """Grid mesh too small for the voxel lattice."""


class InputError(IsolabError, ValueError):
    """Malformed input data."""


class ParseError(IsolabError, ValueError):
    """Expression syntax error at ``position`` (0-based offset)."""

    def __init__(self, message, text, position, expected):
        super().__init__(message, position=position, expected=expected)
        self.text = text
        self.position = position
        self.expected = expected

    def caret(self):
        return f"{self.text}\n{' ' * self.position}^"
