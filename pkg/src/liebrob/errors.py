"""Exception types shared across the package."""


class InvalidInputError(ValueError):
    """Malformed matrix or argument."""


class InvalidSpecError(ValueError):
    """Ensemble or plan description that cannot be built."""


class RegimeError(ValueError):
    """Bound parameters outside the validity regime of a formula."""


class PreconditionError(ValueError):
    """A distribution or state violates a stated hypothesis."""


class UnsupportedError(ValueError):
    """Operation not defined for the given geometry or mode."""


class ConfigError(ValueError):
    """Configuration validation failure; carries every problem found."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class ResourceError(RuntimeError):
    """A requested size exceeds a configured cap."""

    def __init__(self, what, required, allowed):
        self.what = what
        self.required = required
        self.allowed = allowed
        super().__init__(f"{what}: required {required}, allowed {allowed}")
