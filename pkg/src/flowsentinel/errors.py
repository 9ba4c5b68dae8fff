"""Error taxonomy shared by every module, with stable CLI exit codes."""

from __future__ import annotations


class FlowSentinelError(Exception):
    """Base class; `exit_code` is what the CLI returns for this failure."""

    exit_code = 1


# -- flowdata ----------------------------------------------------------------

class MissingColumnError(FlowSentinelError):
    exit_code = 10

    def __init__(self, column: str):
        super().__init__(f"required column absent: {column!r}")
        self.column = column


class UnparsableCellError(FlowSentinelError):
    exit_code = 11

    def __init__(self, row: int, column: str, raw: str):
        super().__init__(f"row {row}, column {column!r}: cannot parse {raw!r} as a number")
        self.row = row
        self.column = column
        self.raw = raw


class EmptyFileError(FlowSentinelError):
    exit_code = 12


class UnknownLabelError(FlowSentinelError):
    exit_code = 13

    def __init__(self, raw: str):
        super().__init__(f"unknown class label: {raw!r}")
        self.raw = raw


class NotLabeledError(FlowSentinelError):
    exit_code = 14


class SampleTooLargeError(FlowSentinelError):
    exit_code = 15


# -- preprocess --------------------------------------------------------------

class EmptyAfterCleanError(FlowSentinelError):
    exit_code = 16


class EmptyDatasetError(FlowSentinelError):
    exit_code = 17


class SchemaMismatchError(FlowSentinelError):
    exit_code = 18


class EmptyClassError(FlowSentinelError):
    exit_code = 19

    def __init__(self, class_id: int):
        super().__init__(f"class {class_id} has no records; stratified operation impossible")
        self.class_id = class_id


# -- features ----------------------------------------------------------------

class KTooLargeError(FlowSentinelError):
    exit_code = 20


class DegenerateDataError(FlowSentinelError):
    exit_code = 21


# -- learn -------------------------------------------------------------------

class InvalidHyperparameterError(FlowSentinelError):
    exit_code = 22


class InsufficientDataError(FlowSentinelError):
    exit_code = 23


class NonFiniteInputError(FlowSentinelError):
    exit_code = 24


class VersionMismatchError(FlowSentinelError):
    exit_code = 25


class CorruptFileError(FlowSentinelError):
    exit_code = 26


# -- eval --------------------------------------------------------------------

class LengthMismatchError(FlowSentinelError):
    exit_code = 27


class LabelOutOfRangeError(FlowSentinelError):
    exit_code = 28


class EmptyMatrixError(FlowSentinelError):
    exit_code = 29


class DegenerateClassError(FlowSentinelError):
    exit_code = 30

    def __init__(self, class_id: int, message: str | None = None):
        super().__init__(message or f"class {class_id} lacks positives or negatives for a ROC curve")
        self.class_id = class_id


# -- trafficgen / service / IO ------------------------------------------------

class EmptySpecError(FlowSentinelError):
    exit_code = 31


class ConnectionFailureError(FlowSentinelError):
    exit_code = 32

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


class IoFailureError(FlowSentinelError):
    exit_code = 33
