"""Exception types shared across the package."""


class EquidecompError(Exception):
    """Base class for all package errors."""


class BudgetExceededError(EquidecompError):
    """A configured enumeration/memory budget would be exceeded."""


class WindowTooSmallError(EquidecompError):
    """The window cannot host the requested operation at its locality radius."""


class FreenessError(EquidecompError):
    """No generator set passing the window-freeness audit was found."""


class CoverageAuditError(EquidecompError):
    """A strip cover fails to cover the window within its declared radius."""


class GateViolationError(EquidecompError):
    """The rounding gate inequality fails for some toast layer/component."""


class CompletionError(EquidecompError):
    """No integer flow meets the completion demands inside a component."""


class ScheduleError(EquidecompError):
    """Invalid toast schedule parameters."""


class ConfigError(EquidecompError):
    """Invalid experiment configuration."""
