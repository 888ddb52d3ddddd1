"""Exception hierarchy shared by the analysis engine, the MT harness and the
external-engine adapter."""


class TapError(Exception):
    """Base class for every error raised by this package."""


class InvalidInputError(TapError, ValueError):
    """Input violates a documented precondition."""


class CatalogMissError(TapError, KeyError):
    """Identifier not found in a built-in catalog (constituents, mutants)."""

    def __init__(self, kind, name):
        self.kind = kind
        self.name = name
        super().__init__(f"unknown {kind}: {name!r}")

    def __str__(self):
        return self.args[0]


class UnderDeterminedError(TapError):
    """Fewer observations than model parameters."""

    def __init__(self, n_obs, n_params):
        self.n_obs = n_obs
        self.n_params = n_params
        super().__init__(
            f"under-determined fit: {n_obs} observations for {n_params} parameters"
        )


class IllConditionedError(TapError):
    """Design matrix is rank deficient or too poorly conditioned."""

    def __init__(self, rcond, floor):
        self.rcond = rcond
        self.floor = floor
        super().__init__(
            f"ill-conditioned design matrix: rcond={rcond:.3e} < {floor:.3e}"
        )


class PreconditionError(TapError, ValueError):
    """A metamorphic relation or campaign was invoked outside its domain."""


class EngineError(TapError):
    """The system under test failed to produce an output."""


class EngineTimeout(EngineError):
    pass


class EngineFailure(EngineError):
    pass


class ProtocolError(EngineError):
    """External engine replied with something that is not a valid response."""

    def __init__(self, message, line_no=None, line=None):
        self.line_no = line_no
        self.line = line
        where = f"line {line_no}: " if line_no is not None else ""
        super().__init__(f"protocol error: {where}{message}")
