"""qslice: a desk-scale, software-only 5G network-slicing testbed.

The package models a small multi-site optical/Ethernet network whose links
carry different key-exchange methods (none, DH+AES, QRA+AES, QKD+AES), a key
management system with QKD trusted-node relay, a security-aware path
computation element, and a slicing orchestrator that provisions three-legged
slices sequentially under a global configuration lock with full rollback.
"""

__version__ = "0.1.0"

from .errors import (
    DeviceError,
    KmsError,
    PathComputationError,
    QsliceError,
    SliceError,
    TopologyError,
)
from .pce import SecurityLevel

__all__ = [
    "DeviceError",
    "KmsError",
    "PathComputationError",
    "QsliceError",
    "SecurityLevel",
    "SliceError",
    "TopologyError",
    "__version__",
]
