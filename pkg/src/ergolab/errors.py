"""Package-wide exception types, mapped onto CLI exit codes."""


class ConfigError(ValueError):
    """Scenario configuration or schema violation (CLI exit code 2)."""


class HypothesisViolation(ValueError):
    """Operation invoked outside its mathematical hypotheses (CLI exit code 3)."""


class NumericalFailure(RuntimeError):
    """A certificate or asserted verdict failed numerically (CLI exit code 4)."""
