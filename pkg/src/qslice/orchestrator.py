"""Slice lifecycle: request, provision, deprovision, audit, timing.

All network mutation runs under one global FIFO configuration lock, so only
one slice operation changes state at a time.  A provision takes a snapshot,
re-computes paths with fresh port selections under the lock, reserves
resources, then walks each connection in the fixed order control_plane,
access, backhaul, configuring one entity at a time: Ethernet switch flows at
every site along the path, optical cross-connects where a site has an optical
switch on the route, and client-port enablement on both encryption cards of
every channel hop, followed by a key check against the KMS for encrypted
hops.  Every transaction's inverse commands are recorded as it commits; a
failure replays the recorded inverses in reverse and verifies the diff
against the snapshot is empty.  Deprovision replays the same inverses in
reverse as its teardown procedure.

Durations are simulated seconds: the span of a record's step log, which the
device latency models drive.
"""

from __future__ import annotations

import csv
import io
import logging
import threading
import zlib
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Optional

from .clock import SimClock
from .device_sim import (ConfigCommand, ConfigTransaction, DeviceFabric, invert,
                         next_txn_id)
from .errors import DeviceError, PathComputationError, QsliceError, SliceError
from .kms import KeyManager
from .pce import (POLICIES, ROLES, ConnectionRequest, PathSolution, SecurityLevel,
                  check_compute, compute_path, security_metric)
from .topology import Channel, Topology, diff

log = logging.getLogger(__name__)

HISTOGRAM_BIN_S = 5.0
HISTOGRAM_RANGE_S = (0.0, 180.0)


@dataclass
class SliceDescriptor:
    slice_id: str
    name: str
    compute_site: str
    compute_units: int
    connections: list[ConnectionRequest]
    policy: str = "upgrade_allowed"

    def connection(self, role: str) -> ConnectionRequest:
        for conn in self.connections:
            if conn.role == role:
                return conn
        raise SliceError(f"descriptor {self.slice_id}: no {role} connection")

    def to_dict(self) -> dict[str, Any]:
        return {
            "slice_id": self.slice_id,
            "name": self.name,
            "compute_site": self.compute_site,
            "compute_units": self.compute_units,
            "policy": self.policy,
            "connections": [
                {
                    "role": c.role,
                    "src_site": c.src_site,
                    "dst_site": c.dst_site,
                    "bandwidth_gbps": c.bandwidth_gbps,
                    "required_security": c.required_security.wire_name,
                    **({"max_latency_us": c.max_latency_us}
                       if c.max_latency_us is not None else {}),
                }
                for c in self.connections
            ],
        }


def descriptor_from_dict(doc: Any) -> SliceDescriptor:
    """Parse and validate a descriptor document; errors name the field path."""
    def fail(field_path: str, problem: str) -> SliceError:
        return SliceError(f"{field_path}: {problem}", {"field": field_path})

    if not isinstance(doc, dict):
        raise fail("$", "descriptor must be a JSON object")
    slice_id = doc.get("slice_id")
    if not isinstance(slice_id, str) or not slice_id:
        raise fail("slice_id", "required non-empty string")
    name = doc.get("name", "")
    if not isinstance(name, str):
        raise fail("name", "must be a string")
    compute_site = doc.get("compute_site")
    if not isinstance(compute_site, str) or not compute_site:
        raise fail("compute_site", "required non-empty string")
    compute_units = doc.get("compute_units", 0)
    if not isinstance(compute_units, int) or isinstance(compute_units, bool) \
            or compute_units < 0:
        raise fail("compute_units", "must be a non-negative integer")
    policy = doc.get("policy", "upgrade_allowed")
    if policy not in POLICIES:
        raise fail("policy", f"must be one of {'|'.join(POLICIES)}")
    raw_conns = doc.get("connections")
    if not isinstance(raw_conns, list) or len(raw_conns) != 3:
        raise fail("connections", "exactly 3 connections required")

    connections: list[ConnectionRequest] = []
    for i, raw in enumerate(raw_conns):
        where = f"connections[{i}]"
        if not isinstance(raw, dict):
            raise fail(where, "must be an object")
        for key in ("role", "src_site", "dst_site", "bandwidth_gbps",
                    "required_security"):
            if key not in raw:
                raise fail(f"{where}.{key}", "required")
        try:
            level = SecurityLevel.from_name(raw["required_security"])
        except ValueError as exc:
            raise fail(f"{where}.required_security", str(exc)) from None
        max_latency = raw.get("max_latency_us")
        try:
            connections.append(ConnectionRequest(
                src_site=raw["src_site"],
                dst_site=raw["dst_site"],
                bandwidth_gbps=float(raw["bandwidth_gbps"]),
                required_security=level,
                role=raw["role"],
                max_latency_us=None if max_latency is None else float(max_latency),
            ))
        except (TypeError, ValueError) as exc:
            raise fail(where, str(exc)) from None

    roles_seen = sorted(c.role for c in connections)
    if roles_seen != sorted(ROLES):
        raise fail("connections", "exactly one connection per role "
                   "(control_plane, access, backhaul) required")
    return SliceDescriptor(slice_id, name, compute_site, compute_units,
                           connections, policy)


@dataclass(frozen=True)
class StepEvent:
    entity: str
    action: str
    started_at: float
    ended_at: float
    txn_id: Optional[str] = None
    ok: bool = True

    def to_dict(self) -> dict[str, Any]:
        return {"entity": self.entity, "action": self.action,
                "started_at": self.started_at, "ended_at": self.ended_at,
                "txn_id": self.txn_id, "ok": self.ok}


_STATE_TRANSITIONS = {
    ("requested", "validated"),
    ("validated", "provisioning"),
    ("provisioning", "active"),
    ("provisioning", "failed"),
    ("failed", "rolled_back"),
    ("active", "deprovisioning"),
    ("deprovisioning", "deleted"),
    ("deprovisioning", "failed"),
}


@dataclass
class _AppliedTxn:
    txn_id: str
    entity: str
    action: str
    inverse_commands: list[ConfigCommand]


@dataclass
class SliceRecord:
    descriptor: SliceDescriptor
    state: str = "requested"
    paths: dict[str, PathSolution] = field(default_factory=dict)
    step_log: list[StepEvent] = field(default_factory=list)
    provision_duration_s: Optional[float] = None
    deprovision_duration_s: Optional[float] = None
    provision_span: Optional[tuple[float, float]] = None
    deprovision_span: Optional[tuple[float, float]] = None
    use_case: Optional[int] = None
    failure: Optional[dict[str, Any]] = None
    applied: list[_AppliedTxn] = field(default_factory=list)

    def set_state(self, state: str) -> None:
        if (self.state, state) not in _STATE_TRANSITIONS:
            raise SliceError(
                f"slice {self.descriptor.slice_id}: illegal state transition "
                f"{self.state} -> {state}")
        self.state = state

    def to_dict(self) -> dict[str, Any]:
        return {
            "descriptor": self.descriptor.to_dict(),
            "state": self.state,
            "use_case": self.use_case,
            "paths": {
                role: {
                    "hops": list(sol.hops),
                    "reserved_ports": [list(p) for p in sol.reserved_ports],
                    "total_latency_us": sol.total_latency_us,
                    "min_security_on_path": sol.min_security_on_path.wire_name,
                    "policy_used": sol.policy_used,
                }
                for role, sol in self.paths.items()
            },
            "step_log": [e.to_dict() for e in self.step_log],
            "timings": {
                "provision_duration_s": self.provision_duration_s,
                "deprovision_duration_s": self.deprovision_duration_s,
            },
            "failure": self.failure,
        }


class FifoLock:
    """Mutual exclusion with strict FIFO handover and a grant-order log."""

    def __init__(self) -> None:
        self._mutex = threading.Lock()
        self._waiters: deque[tuple[str, threading.Event]] = deque()
        self._held_by: Optional[str] = None
        self.grant_log: list[str] = []

    def acquire(self, owner: str, timeout_s: Optional[float] = None) -> None:
        event = threading.Event()
        with self._mutex:
            if self._held_by is None and not self._waiters:
                self._held_by = owner
                self.grant_log.append(owner)
                return
            self._waiters.append((owner, event))
        if not event.wait(timeout_s):
            with self._mutex:
                try:
                    self._waiters.remove((owner, event))
                except ValueError:
                    # Granted between the timeout and this cleanup; pass the
                    # grant straight on, then still report the timeout.
                    if self._held_by == owner:
                        self._release_locked_next()
            raise SliceError(f"configuration lock acquisition timeout for {owner}")

    def release(self, owner: str) -> None:
        with self._mutex:
            if self._held_by != owner:
                raise SliceError(f"{owner} does not hold the configuration lock")
            self._release_locked_next()

    def _release_locked_next(self) -> None:
        if self._waiters:
            next_owner, event = self._waiters.popleft()
            self._held_by = next_owner
            self.grant_log.append(next_owner)
            event.set()
        else:
            self._held_by = None


class Orchestrator:
    def __init__(self, topology: Topology, fabric: DeviceFabric, kms: KeyManager,
                 clock: SimClock, kms_verify_latency_s: float = 0.2,
                 lock_timeout_s: Optional[float] = None):
        self.topology = topology
        self.fabric = fabric
        self.kms = kms
        self.clock = clock
        self.kms_verify_latency_s = kms_verify_latency_s
        self.lock_timeout_s = lock_timeout_s
        self.lock = FifoLock()
        self.slices: dict[str, SliceRecord] = {}
        self._registry_lock = threading.Lock()

    # -- request ---------------------------------------------------------------

    def request_slice(self, descriptor: SliceDescriptor,
                      use_case: Optional[int] = None) -> SliceRecord:
        self._check_descriptor_against_topology(descriptor)
        with self._registry_lock:
            if descriptor.slice_id in self.slices:
                raise SliceError(f"duplicate slice_id '{descriptor.slice_id}'",
                                 {"slice_id": descriptor.slice_id})
            record = SliceRecord(descriptor=descriptor, use_case=use_case)
            self.slices[descriptor.slice_id] = record
        try:
            for conn in _ordered(descriptor.connections):
                record.paths[conn.role] = compute_path(
                    self.topology, conn, descriptor.policy)
            if not check_compute(self.topology, descriptor.compute_site,
                                 descriptor.compute_units):
                raise SliceError(
                    f"insufficient compute at {descriptor.compute_site}",
                    {"reason": "no_compute", "site": descriptor.compute_site})
        except PathComputationError as exc:
            with self._registry_lock:
                del self.slices[descriptor.slice_id]
            role = next((c.role for c in descriptor.connections
                         if record.paths.get(c.role) is None), "unknown")
            raise SliceError(f"{role}: {exc}",
                             {"role": role, "reason": exc.reason}) from exc
        except SliceError:
            with self._registry_lock:
                del self.slices[descriptor.slice_id]
            raise
        record.set_state("validated")
        log.info("slice %s validated", descriptor.slice_id)
        return record

    def _check_descriptor_against_topology(self, d: SliceDescriptor) -> None:
        site = self.topology.sites.get(d.compute_site)
        if site is None:
            raise SliceError(f"compute_site: unknown site '{d.compute_site}'",
                             {"field": "compute_site"})
        if site.kind not in ("metro", "aggregation"):
            raise SliceError(
                f"compute_site: site '{d.compute_site}' is a {site.kind} site, "
                "compute lives at metro or aggregation sites",
                {"field": "compute_site"})
        kinds = {}
        for conn in d.connections:
            for attr in ("src_site", "dst_site"):
                sid = getattr(conn, attr)
                if sid not in self.topology.sites:
                    raise SliceError(
                        f"{conn.role}.{attr}: unknown site '{sid}'",
                        {"field": f"{conn.role}.{attr}"})
                kinds[sid] = self.topology.sites[sid].kind
        control = d.connection("control_plane")
        access = d.connection("access")
        backhaul = d.connection("backhaul")
        checks = [
            (kinds[control.src_site] == "cell",
             "control_plane.src_site must be a cell site"),
            (kinds[control.dst_site] == "core",
             "control_plane.dst_site must be a core site"),
            (kinds[access.src_site] == "cell",
             "access.src_site must be a cell site"),
            (access.dst_site == d.compute_site,
             "access.dst_site must be the compute_site"),
            (backhaul.src_site == d.compute_site,
             "backhaul.src_site must be the compute_site"),
            (kinds[backhaul.dst_site] == "core",
             "backhaul.dst_site must be a core site"),
        ]
        for ok, problem in checks:
            if not ok:
                raise SliceError(problem, {"field": problem.split()[0]})

    # -- provision ---------------------------------------------------------------

    def provision_slice(self, slice_id: str) -> SliceRecord:
        record = self.get_slice(slice_id)
        if record.state != "validated":
            raise SliceError(f"slice {slice_id} is {record.state}, not validated")
        self.lock.acquire(f"provision:{slice_id}", self.lock_timeout_s)
        try:
            record.set_state("provisioning")
            self._mark(record, "orchestrator", "acquire configuration lock")
            snapshot = self.topology.snapshot()
            self._mark(record, "orchestrator", "snapshot network state")

            # Re-route and reserve connection by connection so the second and
            # third connections see the first one's port and bandwidth claims.
            try:
                for conn in _ordered(record.descriptor.connections):
                    record.paths[conn.role] = compute_path(
                        self.topology, conn, record.descriptor.policy)
                    self._reserve_connection(record, conn)
                if not check_compute(self.topology, record.descriptor.compute_site,
                                     record.descriptor.compute_units):
                    raise SliceError(
                        f"insufficient compute at {record.descriptor.compute_site}",
                        {"reason": "no_compute"})
                if record.descriptor.compute_units > 0:
                    self.topology.sites[record.descriptor.compute_site] \
                        .compute_allocations[slice_id] = \
                        record.descriptor.compute_units
            except (PathComputationError, SliceError) as exc:
                self._release(record)
                record.failure = {"stage": "admission", "error": str(exc)}
                record.set_state("failed")
                record.set_state("rolled_back")
                log.warning("slice %s admission failed under lock: %s",
                            slice_id, exc)
                return record

            self._mark(record, "orchestrator", "reserve ports and compute")
            started = self.clock.now()
            try:
                for conn in _ordered(record.descriptor.connections):
                    self._provision_connection(record, conn)
            except (DeviceError, QsliceError) as exc:
                self._rollback(record, snapshot, exc)
                return record
            self._mark(record, "orchestrator", "slice active")
            record.provision_span = (started, self.clock.now())
            record.provision_duration_s = record.provision_span[1] - started
            record.set_state("active")
            log.info("slice %s active in %.1f simulated s", slice_id,
                     record.provision_duration_s)
            return record
        finally:
            self.lock.release(f"provision:{slice_id}")

    def _provision_connection(self, record: SliceRecord,
                              conn: ConnectionRequest) -> None:
        slice_id = record.descriptor.slice_id
        path = record.paths[conn.role]
        sites = _sites_along(self.topology, conn.src_site, path.hops)
        port_by_channel = dict(path.reserved_ports)
        self._mark(record, "controller", f"plan {conn.role} path "
                   f"({' > '.join(path.hops) or 'local'})")

        for i, site_id in enumerate(sites):
            incoming = path.hops[i - 1] if i > 0 else None
            outgoing = path.hops[i] if i < len(path.hops) else None
            self._eth_step(record, conn, site_id, incoming, outgoing)
            if self._needs_cross_connect(site_id, incoming, outgoing):
                self._osw_step(record, conn, site_id, incoming, outgoing)
            if outgoing is not None and outgoing in self.topology.channels:
                channel = self.topology.channels[outgoing]
                port = port_by_channel[outgoing]
                near, far = _card_order(self.topology, channel, site_id)
                self._card_step(record, conn, channel, near, port)
                self._card_step(record, conn, channel, far, port)
                channel.set_port_state(port, "in_use", slice_id)
                if channel.security_method != "none":
                    self._kms_step(record, channel)

    def _eth_step(self, record: SliceRecord, conn: ConnectionRequest,
                  site_id: str, incoming: Optional[str],
                  outgoing: Optional[str]) -> None:
        device = self.topology.site_device_of_kind(site_id, "ethernet_switch")
        if device is None:
            return
        slice_id = record.descriptor.slice_id
        base = f"flows/{slice_id}:{conn.role}"
        vlan = 100 + zlib.crc32(f"{slice_id}:{conn.role}".encode()) % 3894
        commands = [
            ConfigCommand(device.id, "set", f"{base}/ingress", incoming or "client"),
            ConfigCommand(device.id, "set", f"{base}/egress", outgoing or "client"),
            ConfigCommand(device.id, "set", f"{base}/vlan", str(vlan)),
        ]
        self._apply_step(record, device.id, f"{conn.role}: ethernet flows at {site_id}",
                         commands)

    def _needs_cross_connect(self, site_id: str, incoming: Optional[str],
                             outgoing: Optional[str]) -> bool:
        if self.topology.site_device_of_kind(site_id, "optical_switch") is None:
            return False
        return any(h in self.topology.channels
                   for h in (incoming, outgoing) if h is not None)

    def _osw_step(self, record: SliceRecord, conn: ConnectionRequest,
                  site_id: str, incoming: Optional[str],
                  outgoing: Optional[str]) -> None:
        device = self.topology.site_device_of_kind(site_id, "optical_switch")
        assert device is not None
        base = f"xc/{record.descriptor.slice_id}:{conn.role}"
        commands = [
            ConfigCommand(device.id, "set", f"{base}/in", incoming or "client"),
            ConfigCommand(device.id, "set", f"{base}/out", outgoing or "client"),
        ]
        self._apply_step(record, device.id,
                         f"{conn.role}: optical cross-connect at {site_id}", commands)

    def _card_step(self, record: SliceRecord, conn: ConnectionRequest,
                   channel: Channel, device_id: str, port: int) -> None:
        slice_id = record.descriptor.slice_id
        commands = [
            ConfigCommand(device_id, "set", f"clients/{port}/service",
                          f"{slice_id}:{conn.role}"),
            ConfigCommand(device_id, "set", f"clients/{port}/key_group",
                          f"kg-{channel.id}"),
        ]
        self._apply_step(record, device_id,
                         f"{conn.role}: enable client port {port} on {channel.id}",
                         commands)

    def _kms_step(self, record: SliceRecord, channel: Channel) -> None:
        started = self.clock.now()
        key = self.kms.active_key(channel.id)
        self.clock.advance(self.kms_verify_latency_s)
        record.step_log.append(StepEvent(
            "kms", f"verify {channel.security_method} key for {channel.id} "
            f"(key {key.key_id[:8]}...)", started, self.clock.now()))

    def _apply_step(self, record: SliceRecord, device_id: str, action: str,
                    commands: list[ConfigCommand]) -> None:
        priors = {}
        tree = self.fabric.get_config(device_id)
        for cmd in commands:
            priors[cmd.path] = tree.get(cmd.path)
        txn = ConfigTransaction(next_txn_id(), commands)
        started = self.clock.now()
        try:
            self.fabric.apply_transaction(txn)
        except QsliceError:
            record.step_log.append(StepEvent(
                device_id, action, started, self.clock.now(), txn.txn_id, ok=False))
            raise
        inverses = [invert(cmd, priors[cmd.path]) for cmd in commands]
        record.applied.append(_AppliedTxn(txn.txn_id, device_id, action, inverses))
        record.step_log.append(StepEvent(
            device_id, action, started, self.clock.now(), txn.txn_id))

    # -- reservations -------------------------------------------------------------

    def _reserve_connection(self, record: SliceRecord,
                            conn: ConnectionRequest) -> None:
        slice_id = record.descriptor.slice_id
        path = record.paths[conn.role]
        for channel_id, port in path.reserved_ports:
            self.topology.channels[channel_id].set_port_state(
                port, "reserved", slice_id)
        for hop in path.hops:
            link = self.topology.access_links.get(hop)
            if link is not None:
                link.reservations[(slice_id, conn.role)] = conn.bandwidth_gbps

    def _release(self, record: SliceRecord) -> None:
        slice_id = record.descriptor.slice_id
        for channel in self.topology.channels.values():
            for port in channel.client_ports:
                if port.owner_slice_id == slice_id:
                    channel.set_port_state(port.index, "free", None)
        for link in self.topology.access_links.values():
            for key in [k for k in link.reservations if k[0] == slice_id]:
                del link.reservations[key]
        for site in self.topology.sites.values():
            site.compute_allocations.pop(slice_id, None)

    # -- rollback and teardown ------------------------------------------------------

    def _rollback(self, record: SliceRecord, snapshot, cause: Exception) -> None:
        slice_id = record.descriptor.slice_id
        log.warning("slice %s provisioning failed (%s); rolling back",
                    slice_id, cause)
        record.failure = {"stage": "provision", "error": str(cause)}
        record.set_state("failed")
        self._mark(record, "orchestrator", "begin rollback")
        for applied in reversed(record.applied):
            txn = ConfigTransaction(next_txn_id("rbk"), applied.inverse_commands)
            started = self.clock.now()
            self.fabric.apply_transaction(txn)
            record.step_log.append(StepEvent(
                applied.entity, f"rollback: {applied.action}", started,
                self.clock.now(), txn.txn_id))
        record.applied.clear()
        self._release(record)
        residue = diff(snapshot, self.topology)
        if residue:
            record.failure["residue"] = [vars(r) for r in residue]
            raise SliceError(
                f"rollback of {slice_id} left {len(residue)} residual changes")
        record.set_state("rolled_back")
        self._mark(record, "orchestrator", "rollback complete, state restored")

    def deprovision_slice(self, slice_id: str) -> SliceRecord:
        record = self.get_slice(slice_id)
        if record.state != "active":
            raise SliceError(f"slice {slice_id} is {record.state}, not active")
        self.lock.acquire(f"deprovision:{slice_id}", self.lock_timeout_s)
        try:
            record.set_state("deprovisioning")
            self._mark(record, "orchestrator", "acquire configuration lock")
            started = self.clock.now()
            try:
                for applied in reversed(record.applied):
                    txn = ConfigTransaction(next_txn_id("dpv"),
                                            applied.inverse_commands)
                    step_start = self.clock.now()
                    self.fabric.apply_transaction(txn)
                    record.step_log.append(StepEvent(
                        applied.entity, f"teardown: {applied.action}", step_start,
                        self.clock.now(), txn.txn_id))
            except QsliceError as exc:
                record.failure = {"stage": "deprovision", "error": str(exc),
                                  "remediation": "manual intervention required"}
                record.set_state("failed")
                log.error("slice %s teardown failed: %s", slice_id, exc)
                return record
            record.applied.clear()
            self._release(record)
            self._verify_no_residue(slice_id)
            record.deprovision_span = (started, self.clock.now())
            record.deprovision_duration_s = self.clock.now() - started
            record.set_state("deleted")
            self._mark(record, "orchestrator", "slice deleted")
            log.info("slice %s deleted in %.1f simulated s", slice_id,
                     record.deprovision_duration_s)
            return record
        finally:
            self.lock.release(f"deprovision:{slice_id}")

    def _verify_no_residue(self, slice_id: str) -> None:
        marker = f"{slice_id}:"
        for device in self.topology.devices.values():
            for path in device.config_tree:
                if marker in path:
                    raise SliceError(
                        f"teardown residue: {device.id} still holds {path}")
        for channel in self.topology.channels.values():
            for port in channel.client_ports:
                if port.owner_slice_id == slice_id:
                    raise SliceError(
                        f"teardown residue: {channel.id} port {port.index}")

    # -- read side ---------------------------------------------------------------

    def get_slice(self, slice_id: str) -> SliceRecord:
        with self._registry_lock:
            record = self.slices.get(slice_id)
        if record is None:
            raise SliceError(f"unknown slice '{slice_id}'")
        return record

    def audit_slice(self, slice_id: str) -> dict[str, Any]:
        record = self.get_slice(slice_id)
        if record.state != "active":
            raise SliceError(f"slice {slice_id} is {record.state}, not active")
        per_connection = {}
        for role, path in record.paths.items():
            required = record.descriptor.connection(role).required_security
            achieved = min(
                (security_metric(self.topology.channels.get(h)
                                 or self.topology.access_links[h])
                 for h in path.hops),
                default=SecurityLevel.QKD_AES)
            per_connection[role] = {
                "required": required.wire_name,
                "achieved_min": achieved.wire_name,
                "ok": achieved >= required,
            }
        return {"slice_id": slice_id, "per_connection": per_connection,
                "ok": all(c["ok"] for c in per_connection.values())}

    def _mark(self, record: SliceRecord, entity: str, action: str) -> None:
        now = self.clock.now()
        record.step_log.append(StepEvent(entity, action, now, now))


def _ordered(connections: list[ConnectionRequest]) -> list[ConnectionRequest]:
    by_role = {c.role: c for c in connections}
    return [by_role[r] for r in ROLES]


def _sites_along(topology: Topology, src: str, hops: tuple[str, ...]) -> list[str]:
    sites = [src]
    for hop in hops:
        a, b = topology.link_sites(hop)
        sites.append(b if sites[-1] == a else a)
    return sites


def _card_order(topology: Topology, channel: Channel,
                near_site: str) -> tuple[str, str]:
    a_dev = channel.a_device_port.device_id
    b_dev = channel.b_device_port.device_id
    if topology.devices[a_dev].site_id == near_site:
        return a_dev, b_dev
    return b_dev, a_dev


# -- timing ---------------------------------------------------------------------

@dataclass(frozen=True)
class TimingRow:
    slice_id: str
    use_case: Optional[int]
    operation: str
    start_s: float
    end_s: float
    duration_s: float


@dataclass
class TimingBucket:
    count: int = 0
    total: float = 0.0
    min_s: float = float("inf")
    max_s: float = float("-inf")
    bins: dict[float, int] = field(default_factory=dict)
    out_of_range: int = 0

    def add(self, value: float) -> None:
        self.count += 1
        self.total += value
        self.min_s = min(self.min_s, value)
        self.max_s = max(self.max_s, value)
        lo, hi = HISTOGRAM_RANGE_S
        if lo <= value < hi:
            bin_lo = HISTOGRAM_BIN_S * (value // HISTOGRAM_BIN_S)
            self.bins[bin_lo] = self.bins.get(bin_lo, 0) + 1
        else:
            self.out_of_range += 1

    @property
    def mean_s(self) -> float:
        return self.total / self.count if self.count else 0.0


class TimingTable:
    def __init__(self) -> None:
        self.rows: list[TimingRow] = []
        self.buckets: dict[tuple[Optional[int], str], TimingBucket] = {}

    def summary(self) -> dict[str, Any]:
        out = {}
        for (use_case, op), bucket in sorted(
                self.buckets.items(), key=lambda kv: (kv[0][0] or 0, kv[0][1])):
            out[f"uc{use_case}/{op}" if use_case else op] = {
                "count": bucket.count,
                "mean_s": bucket.mean_s,
                "min_s": bucket.min_s,
                "max_s": bucket.max_s,
                "bins_5s": {f"{lo:g}": n for lo, n in sorted(bucket.bins.items())},
                "out_of_range": bucket.out_of_range,
            }
        return out

    def to_csv(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out)
        writer.writerow(["slice_id", "use_case", "operation",
                         "start_s", "end_s", "duration_s"])
        for row in self.rows:
            writer.writerow([
                row.slice_id,
                "" if row.use_case is None else row.use_case,
                row.operation,
                f"{row.start_s:.6f}", f"{row.end_s:.6f}", f"{row.duration_s:.6f}",
            ])
        return out.getvalue()


def timing_report(runs: list[SliceRecord]) -> TimingTable:
    if not runs:
        raise SliceError("timing_report: no records")
    table = TimingTable()
    for record in runs:
        spans = [("provision", record.provision_span,
                  record.provision_duration_s),
                 ("deprovision", record.deprovision_span,
                  record.deprovision_duration_s)]
        for operation, span, duration in spans:
            if duration is None or span is None:
                continue
            table.rows.append(TimingRow(
                record.descriptor.slice_id, record.use_case, operation,
                span[0], span[1], duration))
            bucket = table.buckets.setdefault(
                (record.use_case, operation), TimingBucket())
            bucket.add(duration)
    return table
