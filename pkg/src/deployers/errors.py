"""Exception hierarchy shared by all Deployers services."""


class DeployersError(Exception):
    """Base class for every error raised by the package."""


class TableFormatError(DeployersError):
    """A table document does not follow its grammar.

    Attributes:
        line: 1-based line number of the offending text (None when unknown)
        column: Column label or index of the offending cell (None when unknown)
    """

    def __init__(self, message: str, line: int | None = None, column: str | None = None) -> None:
        self.line = line
        self.column = column
        where = []
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column}")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(f"{prefix}{message}")


class TableBalanceError(DeployersError):
    """Row and column totals of an account disagree beyond tolerance."""

    def __init__(self, account: str, relative_error: float, tolerance: float) -> None:
        self.account = account
        self.relative_error = relative_error
        self.tolerance = tolerance
        super().__init__(
            f"Account {account} is unbalanced: relative error {relative_error:.3e} "
            f"exceeds tolerance {tolerance:.1e}"
        )


class ExtractionError(DeployersError):
    """A country SAM cannot be extracted from an inter-country table."""


class ScalingError(DeployersError):
    """Targets cannot be derived from a SAM."""


class RuleError(DeployersError):
    """A behavioural rule was called outside its domain."""


class LedgerAuditError(DeployersError):
    """Net financial assets no longer add up to the issued base money."""

    def __init__(self, drift: int, month: int) -> None:
        self.drift = drift
        self.month = month
        super().__init__(f"Ledger audit failed at month {month}: drift {drift}")


class DeadCounterpartError(DeployersError):
    """An agent references a counterpart that no longer exists."""


class SnapshotError(DeployersError):
    """A snapshot file cannot be written or read back.

    Attributes:
        section: Name of the container section that failed
    """

    def __init__(self, section: str, message: str) -> None:
        self.section = section
        super().__init__(f"Snapshot section '{section}': {message}")


class ScenarioError(DeployersError):
    """A scenario override references an unknown parameter."""


class WorldError(DeployersError):
    """A multi-country world cannot be built or a worker failed.

    Attributes:
        country: Country code of the failing member (None when not country-specific)
    """

    def __init__(self, message: str, country: str | None = None) -> None:
        self.country = country
        prefix = f"[{country}] " if country else ""
        super().__init__(f"{prefix}{message}")


class ConvergenceWarning(UserWarning):
    """Deployment or calibration stopped before meeting its tolerance."""


class OverdraftError(DeployersError):
    """A household or firm payment exceeds the payer's money."""


class AnalysisError(DeployersError):
    """A survey or input-output computation is outside its domain."""
