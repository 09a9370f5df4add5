"""Exception hierarchy shared by all mpukit engines."""


class MpuKitError(Exception):
    """Base class for every error raised by mpukit."""


class InvalidConfigError(MpuKitError):
    """An operation that requires a well-formed MpuConfig received one
    that fails validation.  Carries the violation list."""

    def __init__(self, violations):
        self.violations = list(violations)
        head = "; ".join(v.message for v in self.violations[:3])
        super().__init__(f"configuration is not valid: {head}")


class InexpressiblePermissionsError(MpuKitError):
    """The permission set has no AP/XN register encoding."""


class MalformedEncodingError(MpuKitError):
    """Register words do not carry a well-formed region encoding."""


class RegionBudgetExhaustedError(MpuKitError):
    """No packing fits within the available region slots."""


class UnsatisfiableFixedPlacementError(MpuKitError):
    """A fixed allocation cannot be realized as an aligned region."""


class OverlappingPolicyRulesError(MpuKitError):
    """Two policy rules for the same mode overlap."""


class UnknownTaskError(MpuKitError):
    """A trace switches to a task with no region-count entry."""


class TraceParseError(MpuKitError):
    """A trace file line is not one of the known event directives."""


class DocumentError(MpuKitError):
    """A project document is structurally invalid."""
