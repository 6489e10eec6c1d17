"""Exception types shared across the toolkit.

The CLI maps these onto its exit-code contract: bad arguments exit 2,
DataError exits 3, ConstraintError and NumericalError exit 4.
"""


class DataError(Exception):
    """Malformed or unreadable input data (CSV files, model files)."""


class ConstraintError(Exception):
    """A model violates a structural precondition of a converter.

    The message names the violated constraint and the offending rule or
    unit index so it can be surfaced verbatim.
    """


class NumericalError(Exception):
    """A fit or solve failed for numerical reasons (rank deficiency, ...)."""


class DegenerateRuleError(NumericalError):
    """A per-rule local fit has too little effective weight mass or rank."""

    def __init__(self, rule_index: int, message: str):
        self.rule_index = rule_index
        super().__init__(f"rule {rule_index}: {message}")
