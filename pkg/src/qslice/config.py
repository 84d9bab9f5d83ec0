"""Runtime configuration.

Everything tunable lives in one dataclass so a whole runtime can be rebuilt
reproducibly from a single JSON file (``QSLICE_CONFIG`` env var or an explicit
path).  Defaults model the lab testbed; tests override ``time_scale`` and the
seed.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from importlib import resources
from typing import Any, Optional


@dataclass(frozen=True)
class LatencyParams:
    """Per-command latency distribution for one device kind.

    ``lognormal`` draws exp(N(mu, sigma)) seconds; ``constant`` returns mu.
    """
    distribution: str = "lognormal"
    mu: float = 0.0
    sigma: float = 0.0


# Mean per-command apply times (simulated seconds) are set so that a full
# provisioning run lands between one and two minutes: Ethernet flow edits are
# the slowest (table sync), optical cross-connects slightly slower still,
# card client edits fastest.  mu = ln(mean) - sigma^2/2.
DEFAULT_LATENCY: dict[str, LatencyParams] = {
    "ethernet_switch": LatencyParams("lognormal", 0.717040, 0.04),
    "optical_switch": LatencyParams("lognormal", 0.787657, 0.04),
    "encryption_card": LatencyParams("lognormal", 0.370764, 0.04),
    "otn_mux": LatencyParams("lognormal", 0.370764, 0.04),
}


@dataclass
class RuntimeConfig:
    topology_path: Optional[str] = None      # None -> packaged testbed
    seed: int = 20260101
    # Wall seconds slept per simulated second.  1.0 is real time; tests use
    # small values so a two-minute provisioning run completes in seconds.
    time_scale: float = 0.02
    latency: dict[str, LatencyParams] = field(
        default_factory=lambda: dict(DEFAULT_LATENCY))
    kms_verify_latency_s: float = 0.2
    key_refresh_interval_s: float = 3.0
    retired_key_grace_factor: float = 2.0
    # QKD chain: ordered node list; sections run between adjacent nodes.
    qkd_chain_nodes: list[str] = field(default_factory=lambda: [
        "adastral-park", "exchange-1", "exchange-2", "exchange-3", "cambridge"])
    qkd_section_rate_bps: float = 2000.0
    qkd_section_buffer_keys: int = 64
    qkd_key_bytes: int = 32
    enable_test_endpoints: bool = True
    api_token: Optional[str] = None
    cors_origin: Optional[str] = "*"

    @staticmethod
    def from_dict(doc: dict[str, Any]) -> "RuntimeConfig":
        cfg = RuntimeConfig()
        for key in ("topology_path", "seed", "time_scale", "kms_verify_latency_s",
                    "key_refresh_interval_s", "retired_key_grace_factor",
                    "qkd_chain_nodes", "qkd_section_rate_bps",
                    "qkd_section_buffer_keys", "qkd_key_bytes",
                    "enable_test_endpoints", "api_token", "cors_origin"):
            if key in doc:
                setattr(cfg, key, doc[key])
        for kind, params in doc.get("latency", {}).items():
            cfg.latency[kind] = LatencyParams(
                distribution=params.get("distribution", "lognormal"),
                mu=float(params.get("mu", 0.0)),
                sigma=float(params.get("sigma", 0.0)),
            )
        if cfg.time_scale <= 0:
            raise ValueError("time_scale must be > 0")
        if len(cfg.qkd_chain_nodes) < 2:
            raise ValueError("qkd_chain_nodes needs at least two nodes")
        return cfg

    @staticmethod
    def load(path: Optional[str] = None) -> "RuntimeConfig":
        """Load from an explicit path, else $QSLICE_CONFIG, else defaults."""
        path = path or os.environ.get("QSLICE_CONFIG")
        if not path:
            return RuntimeConfig()
        with open(path, "r", encoding="utf-8") as fh:
            return RuntimeConfig.from_dict(json.load(fh))


def packaged_data(name: str) -> dict[str, Any]:
    """Parse one of the JSON documents shipped under ``qslice/data``."""
    with resources.files("qslice.data").joinpath(name).open("r", encoding="utf-8") as fh:
        return json.load(fh)
