"""Wires one complete testbed instance: clock, topology, device fabric, key
manager (with its QKD chain), orchestrator, and data plane.

Every encrypted channel gets its key schedule bound at startup, mirroring a
network whose encryptors run continuously whether or not a slice is using
them; slice provisioning then only verifies freshness against the KMS.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

from .clock import SimClock
from .config import RuntimeConfig, packaged_data
from .device_sim import DeviceFabric
from .frames import ChannelDataPlane
from .kms import KeyManager, QkdChain
from .orchestrator import (Orchestrator, SliceRecord, descriptor_from_dict,
                           timing_report)
from .topology import Topology, load_topology, load_topology_file

log = logging.getLogger(__name__)

QKD_CHAIN_ID = "ukqntel"


@dataclass
class Runtime:
    config: RuntimeConfig
    clock: SimClock
    topology: Topology
    fabric: DeviceFabric
    chain: QkdChain
    kms: KeyManager
    orchestrator: Orchestrator
    dataplane: ChannelDataPlane

    @staticmethod
    def from_config(config: Optional[RuntimeConfig] = None,
                    topology: Optional[Topology] = None) -> "Runtime":
        cfg = config or RuntimeConfig()
        clock = SimClock(time_scale=cfg.time_scale)
        if topology is None:
            if cfg.topology_path:
                topology = load_topology_file(cfg.topology_path)
            else:
                topology = load_topology(packaged_data("testbed.topo.json"))
        fabric = DeviceFabric(topology, clock, cfg.latency, cfg.seed)
        chain = QkdChain(
            QKD_CHAIN_ID, cfg.qkd_chain_nodes, cfg.qkd_section_rate_bps,
            cfg.qkd_key_bytes, cfg.qkd_section_buffer_keys,
            initial_fill=cfg.qkd_section_buffer_keys, seed=cfg.seed, clock=clock)
        kms = KeyManager(topology, clock, cfg.seed, chain,
                         refresh_interval_s=cfg.key_refresh_interval_s,
                         grace_factor=cfg.retired_key_grace_factor)
        orchestrator = Orchestrator(topology, fabric, kms, clock,
                                    kms_verify_latency_s=cfg.kms_verify_latency_s)
        dataplane = ChannelDataPlane(topology, kms, clock)
        runtime = Runtime(cfg, clock, topology, fabric, chain, kms,
                          orchestrator, dataplane)
        for channel_id, channel in sorted(topology.channels.items()):
            if channel.security_method != "none":
                kms.bind_channel(channel_id)
        log.info("runtime up: %d sites, %d devices, %d channels",
                 len(topology.sites), len(topology.devices),
                 len(topology.channels))
        return runtime

    def state_hash(self) -> str:
        return self.topology.state_hash()


def usecase_descriptor_doc(use_case: int) -> dict:
    if use_case not in (1, 2):
        raise ValueError("use_case must be 1 or 2")
    return packaged_data(f"usecase{use_case}.slice.json")


def run_timing_suite(use_case: int, runs: int,
                     config: Optional[RuntimeConfig] = None,
                     runtime: Optional[Runtime] = None) -> list[SliceRecord]:
    """Provision and deprovision the shipped use-case slice ``runs`` times.

    Each run submits a uniquely suffixed copy of the shipped descriptor on a
    shared runtime, so device latency sampling continues one seeded stream.
    """
    rt = runtime or Runtime.from_config(config)
    base = usecase_descriptor_doc(use_case)
    records: list[SliceRecord] = []
    for i in range(runs):
        doc = dict(base)
        doc["slice_id"] = f"{base['slice_id']}-r{i:03d}"
        descriptor = descriptor_from_dict(doc)
        rt.orchestrator.request_slice(descriptor, use_case=use_case)
        record = rt.orchestrator.provision_slice(descriptor.slice_id)
        if record.state != "active":
            log.error("run %d: provision ended %s", i, record.state)
            records.append(record)
            continue
        rt.orchestrator.deprovision_slice(descriptor.slice_id)
        records.append(record)
    return records


__all__ = ["Runtime", "run_timing_suite", "usecase_descriptor_doc",
           "timing_report", "QKD_CHAIN_ID"]
