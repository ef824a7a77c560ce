"""Exception hierarchy for levychaos."""


class LevyChaosError(Exception):
    """Base class for all library errors."""


class NotIntegrable(LevyChaosError):
    """A function failed its integrability certificate."""


class NotSquareIntegrable(NotIntegrable):
    """A function is not in L2 of the relevant measure."""


class EmptySystem(LevyChaosError):
    """Every member of a function system was dropped."""


class TailConditionFailed(LevyChaosError):
    """The exponential tail moment needed for power-jump martingales diverges."""


class DensityRequired(LevyChaosError):
    """An operation needs an absolutely continuous jump measure."""


class IntervalTouchesZero(LevyChaosError):
    """An indicator interval contains or touches the origin."""


class InfiniteActivityWithoutTruncation(LevyChaosError):
    """A density jump measure was simulated without a positive truncation."""


class PathMismatch(LevyChaosError):
    """Series that must share one simulated path do not."""


class OrderMismatch(LevyChaosError):
    """Index tuple and tensor have different orders."""


class UnsupportedOrder(LevyChaosError):
    """A closed-form reference was requested beyond its supported order."""


class FamilyNotClosed(LevyChaosError):
    """A family is not closed under compensated covariation."""


class NotNormalized(LevyChaosError):
    """A function expected to have unit norm does not."""


class IllConditioned(LevyChaosError):
    """A normalizing constant is numerically zero."""


class GaussianPartPresent(LevyChaosError):
    """The exact event-driven oracle only handles pure-jump models."""


class ConfigInvalid(LevyChaosError):
    """An experiment configuration failed validation.

    Parameters
    ----------
    problems : list of (field, message)
        Field-level diagnostics.
    """

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [("config", problems)]
        self.problems = list(problems)
        text = "; ".join(f"{field}: {msg}" for field, msg in self.problems)
        super().__init__(text)


class IoFailure(LevyChaosError):
    """Writing an output file failed."""
