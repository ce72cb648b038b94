class DomainError(ValueError):
    """Argument outside the mathematical domain of an operation."""


class PotentialOverflowError(FloatingPointError):
    """A potential evaluated to a non-finite value on the mesh."""

    def __init__(self, name, node, r, value):
        self.name = name
        self.node = node
        self.r = r
        self.value = value
        super().__init__(
            f"{name} is not finite at node {node} (r={r:.6g}, value={value!r}); "
            "shrink r_max or change the potential"
        )


class NotInSpaceError(DomainError):
    """The profile has infinite Orlicz modular for every scaling."""


class EndpointSearchError(RuntimeError):
    pass


class SolverDivergenceError(RuntimeError):
    def __init__(self, message, iterate=None, history=None):
        super().__init__(message)
        self.iterate = iterate
        self.history = history
