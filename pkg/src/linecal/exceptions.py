"""Exception hierarchy shared by all linecal modules."""

from __future__ import annotations


class CalibrationError(Exception):
    """Base class for every error raised by linecal."""


class NetworkError(CalibrationError):
    """Invalid network description. ``ident`` names the offending bus or line."""

    def __init__(self, message: str, ident: str | None = None):
        super().__init__(message if ident is None else f"{message}: {ident!r}")
        self.ident = ident


class DegenerateModelError(CalibrationError):
    pass


class InvalidLineError(CalibrationError):
    pass


class IllConditionedError(CalibrationError):
    def __init__(self, message: str, condition: float):
        super().__init__(f"{message} (condition estimate {condition:.3e})")
        self.condition = condition


class SingularLineError(CalibrationError):
    pass


class UnderdeterminedError(CalibrationError):
    def __init__(self, message: str, channels: list):
        super().__init__(f"{message}: {channels}")
        self.channels = list(channels)


class UnreachableError(CalibrationError):
    def __init__(self, lines: list[str]):
        super().__init__(f"lines unreachable from the root: {lines}")
        self.lines = list(lines)


class ConfigError(CalibrationError):
    pass
