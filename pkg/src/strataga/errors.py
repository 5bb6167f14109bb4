"""Exception types raised across the library."""

from __future__ import annotations


class StratagaError(Exception):
    """Base class for all library errors."""


class EmptyFrameError(StratagaError):
    """Input contained a header but no usable data rows."""


class MissingColumnError(StratagaError):
    def __init__(self, name: str):
        super().__init__(f"column {name!r} not found in input")
        self.name = name


class ValueParseError(StratagaError):
    def __init__(self, row: int, column: str, value: str):
        super().__init__(f"row {row}, column {column!r}: cannot parse {value!r} as a number")
        self.row = row
        self.column = column
        self.value = value


class MissingValueError(StratagaError):
    def __init__(self, row: int, column: str):
        super().__init__(f"row {row}, column {column!r}: missing value")
        self.row = row
        self.column = column


class KTooLargeError(StratagaError):
    def __init__(self, k: int, distinct: int):
        super().__init__(f"k={k} exceeds the number of distinct values ({distinct})")
        self.k = k
        self.distinct = distinct


class EmptyGroupError(StratagaError):
    """A stratum merge was requested over zero atomic strata."""


class LengthMismatchError(StratagaError):
    def __init__(self, expected: int, got: int):
        super().__init__(f"expected length {expected}, got {got}")
        self.expected = expected
        self.got = got


class LabelOutOfRangeError(StratagaError):
    def __init__(self, label: int, upper: int):
        super().__init__(f"label {label} outside the valid range [1, {upper}]")
        self.label = label
        self.upper = upper


class ZeroTotalError(StratagaError):
    """A target variable sums to zero, so its CV is undefined."""

    def __init__(self, target: int):
        super().__init__(f"target {target} has zero total; CV constraint is undefined")
        self.target = target


class PartitionTooLargeError(StratagaError):
    def __init__(self, k: int, bell: int):
        super().__init__(
            f"refusing to enumerate all partitions of {k} items "
            f"(Bell({k}) = {bell}); pass allow_large=True to override"
        )
        self.k = k
        self.bell = bell


class AllocationMismatchError(StratagaError):
    """An allocation does not fit the stratification it is applied to."""


class InvalidArgsError(StratagaError):
    """Arguments violate a documented precondition."""
