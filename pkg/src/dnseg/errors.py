"""Exception types shared across the package."""


class DnsegError(Exception):
    """Base class for all errors raised by dnseg."""


class InvalidInput(DnsegError, ValueError):
    """Input array is malformed (wrong shape, non-finite samples, wrong space)."""


class DegenerateImage(DnsegError, ValueError):
    """Mean luminance is too small for contrasts to be defined."""


class EmptyDataset(DnsegError, ValueError):
    pass


class EmptyRequest(DnsegError, ValueError):
    pass


class EmptyTarget(DnsegError, ValueError):
    """Every pixel of a target mask carries the ignore label."""


class InvalidSpec(DnsegError, ValueError):
    pass


class InvalidSpectralTable(DnsegError, ValueError):
    pass


class DepthRequired(DnsegError, ValueError):
    pass


class ShapeError(DnsegError, ValueError):
    pass


class SplitError(DnsegError, ValueError):
    pass


class TrainingDiverged(DnsegError, RuntimeError):
    """Loss became non-finite; ``checkpoint`` holds the last good state."""

    def __init__(self, message, checkpoint=None):
        super().__init__(message)
        self.checkpoint = checkpoint


class ConfigError(DnsegError, ValueError):
    pass
