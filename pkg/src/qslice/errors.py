"""Exception hierarchy shared across the testbed."""

from __future__ import annotations


class QsliceError(Exception):
    """Base class for all testbed errors."""


class TopologyError(QsliceError):
    """Topology file or referential-integrity violation.

    The message always names the offending element (JSON-ish path or id).
    """


class DeviceError(QsliceError):
    """Device agent failure: unknown device/path, offline, injected fault."""

    def __init__(self, message: str, device_id: str | None = None):
        super().__init__(message)
        self.device_id = device_id


class TransactionError(DeviceError):
    """A configuration transaction failed and was reverted.

    ``command_index`` identifies the failing command within the transaction.
    """

    def __init__(self, message: str, txn_id: str, command_index: int | None = None,
                 device_id: str | None = None):
        super().__init__(message, device_id=device_id)
        self.txn_id = txn_id
        self.command_index = command_index


class KmsError(QsliceError):
    """Key management failure (exhausted section, unknown key, bad request)."""


class PathComputationError(QsliceError):
    """No feasible path. ``reason`` is one of the structured reason codes:

    ``disconnected``, ``no_security_match``, ``no_capacity``,
    ``latency_bound_exceeded``.
    """

    def __init__(self, message: str, reason: str):
        super().__init__(message)
        self.reason = reason


class SliceError(QsliceError):
    """Slice lifecycle violation (unknown id, bad state, invalid descriptor).

    ``details`` carries structured context for API surfacing, e.g.
    ``{"role": "backhaul", "reason": "no_capacity"}`` for an infeasible
    connection or ``{"field": "connections[2].role"}`` for a schema error.
    """

    def __init__(self, message: str, details: dict | None = None):
        super().__init__(message)
        self.details = details or {}
