"""Error categories shared across the library.

The CLI maps these onto exit codes: ConfigError -> 2, NumericalError -> 3,
RefusalError -> 4.  Library code raises them directly so programmatic callers
can distinguish bad inputs from failed computations from declined hypotheses.
"""


class ConfigError(ValueError):
    """Invalid parameters, malformed configs, violated preconditions."""


class NumericalError(RuntimeError):
    """A computation ran but failed: divergence, overflow, no convergence."""


class RefusalError(RuntimeError):
    """A hypothesis guard declined to run (e.g. nonzero exponents where a
    zero-exponent hypothesis is required)."""
