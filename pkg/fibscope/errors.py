# © Copyright 2021 Łukasz Langa.  Licensed under Apache License, Version 2.0.

from __future__ import annotations
from typing import *


class FibscopeError(Exception):
    """Base class for domain errors.  The CLI maps these to exit code 1."""

    def diagnostic(self) -> str:
        return f'error: kind={type(self).__name__} message="{self}"'


class MapSpecError(FibscopeError, ValueError):
    def __init__(
        self, message: str, line: int | None = None, column: int | None = None
    ) -> None:
        super().__init__(message)
        self.message = message
        self.line = line
        self.column = column

    def __str__(self) -> str:
        if self.line is None:
            return self.message
        return f"{self.message} (line {self.line}, column {self.column})"

    def diagnostic(self) -> str:
        position = ""
        if self.line is not None:
            position = f" line={self.line} col={self.column}"
        return f'error: kind={type(self).__name__}{position} message="{self.message}"'


class SpecSyntaxError(MapSpecError):
    pass


class SpecSemanticError(MapSpecError):
    pass


class PolynomialError(FibscopeError, ValueError):
    pass


class DegeneratePresentation(FibscopeError, ValueError):
    pass


class SamplingStarved(FibscopeError, LookupError):
    def __init__(self, radius: float) -> None:
        super().__init__(f"sampling starved at radius {radius:g}")
        self.radius = radius

    def __str__(self) -> str:
        return self.args[0]


class ChartEvaluationError(FibscopeError, ArithmeticError):
    pass


class ProjectionError(FibscopeError, ValueError):
    pass


class ConfigurationError(FibscopeError, ValueError):
    """A parameter outside the range an operation accepts."""


class UsageError(Exception):
    """Bad command line or config file.  The CLI maps these to exit code 2."""

    def diagnostic(self) -> str:
        return f'error: kind=UsageError message="{self}"'
