"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes: configuration problems exit
with 2, solver aborts with 3, and violated structural invariants with 4.
"""


class DockwaveError(Exception):
    """Base class for all package errors."""


class ConfigError(DockwaveError):
    """Invalid or inconsistent run configuration.

    Carries the full list of violations so a user sees every problem at once.
    """

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class GeometryError(DockwaveError):
    """Curve or mesh construction failed (non-closed, folded, out of chart)."""


class OutOfChartError(GeometryError):
    """Point query outside the tubular chart half-width."""


class SolverAbort(DockwaveError):
    """Time integration stopped (drying, loss of subcriticality, NaN).

    Attributes:
        reason: short machine-readable tag ("wet_dry", "subcritical", "nan",
            "supercritical_trace").
        step: step index at which the abort fired.
        location: (i, j) cell index or s-node index, when meaningful.
    """

    def __init__(self, reason, step=None, location=None, detail=""):
        self.reason = reason
        self.step = step
        self.location = location
        msg = f"solver abort: {reason}"
        if step is not None:
            msg += f" at step {step}"
        if location is not None:
            msg += f", cell {location}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class InvariantViolation(DockwaveError):
    """A structural invariant failed beyond tolerance (e.g. DtN assembly)."""

    def __init__(self, what, measured, tol):
        self.what = what
        self.measured = measured
        self.tol = tol
        super().__init__(f"{what}: defect {measured:.3e} exceeds tolerance {tol:.1e}")
