"""Exception hierarchy for the hcb package."""


class HcbError(ValueError):
    """Root of every error raised on purpose by hcb."""


class InstanceError(HcbError):
    """Invalid instance, reward function or action."""


class EnumerationCapError(HcbError):
    """Exact enumeration requested beyond the 2^20 cap."""


class ScheduleError(HcbError):
    """Infeasible stage split or round-range violation."""


class PolicyError(HcbError):
    """A policy emitted an action outside its action set."""


class AdversaryError(HcbError):
    """Lower-bound construction preconditions do not hold."""


class ConfigError(HcbError):
    """Bad experiment config or generator spec."""
