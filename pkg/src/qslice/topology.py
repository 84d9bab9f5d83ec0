"""Network data model: sites, devices, channels, access links.

The topology is a flat, validated document.  Four site kinds (cell,
aggregation, metro, core) host devices (optical switches, Ethernet switches,
encryption cards, OTN muxes).  Inter-site capacity comes in two forms:

* ``Channel`` — a 100G DWDM wave terminated on a transceiver/encryption card
  at each end, carrying 10 x 10G client ports.  All clients of one channel
  share a single security method and a single active key.
* ``AccessLink`` — a plain site-to-site adjacency (cell/aggregation patches)
  with scalar capacity, for the short links not carried on the DWDM system.

A ``ConfigSnapshot`` captures every device config tree plus all allocation
state so that provisioning can be verified (and rolled back) by diffing.
"""

from __future__ import annotations

import copy
import hashlib
import json
import uuid
from dataclasses import dataclass, field
from typing import Any, Iterable, Optional

from .errors import TopologyError

SITE_KINDS = ("cell", "aggregation", "metro", "core")
DEVICE_KINDS = ("optical_switch", "ethernet_switch", "encryption_card", "otn_mux")
SECURITY_METHODS = ("none", "dh_aes", "qra_aes", "qkd_aes")
WAVELENGTH_ROLES = ("data", "management", "qkd_discussion", "quantum")
PORT_STATES = ("free", "reserved", "in_use")

# One-way delay added by the transceiver/encryption card pair on an encrypted
# hop (card processing plus FEC in the pluggable module).
ENCRYPTION_LATENCY_US = 15.0

CLIENT_PORTS_PER_CHANNEL = 10
CLIENT_PORT_GBPS = 10.0

# Legal client-port transitions.  reserved -> free is the rollback path.
_PORT_TRANSITIONS = {
    ("free", "reserved"),
    ("reserved", "in_use"),
    ("reserved", "free"),
    ("in_use", "free"),
}


@dataclass
class Site:
    id: str
    kind: str
    device_ids: list[str] = field(default_factory=list)
    compute_capacity_units: int = 0
    # slice_id -> reserved units (runtime state, not part of the file schema)
    compute_allocations: dict[str, int] = field(default_factory=dict)

    def compute_free_units(self) -> int:
        return self.compute_capacity_units - sum(self.compute_allocations.values())


@dataclass
class Device:
    id: str
    site_id: str
    kind: str
    config_tree: dict[str, str] = field(default_factory=dict)
    latency_model_id: str = "default"


@dataclass(frozen=True)
class Endpoint:
    device_id: str
    port: str


@dataclass
class ClientPort:
    index: int
    state: str = "free"
    owner_slice_id: Optional[str] = None


@dataclass
class Channel:
    id: str
    a_device_port: Endpoint
    b_device_port: Endpoint
    security_method: str
    line_rate_gbps: float = 100.0
    client_ports: list[ClientPort] = field(default_factory=list)
    active_key_id: Optional[str] = None
    refresh_interval_s: float = 3.0
    base_latency_us: float = 0.0
    wavelength_role: str = "data"

    def effective_latency_us(self) -> float:
        if self.security_method != "none":
            return self.base_latency_us + ENCRYPTION_LATENCY_US
        return self.base_latency_us

    def free_port_indices(self) -> list[int]:
        return [p.index for p in self.client_ports if p.state == "free"]

    def lowest_free_port(self) -> Optional[int]:
        free = self.free_port_indices()
        return min(free) if free else None

    def set_port_state(self, index: int, state: str, owner: Optional[str]) -> None:
        port = self.client_ports[index]
        if (port.state, state) not in _PORT_TRANSITIONS:
            raise TopologyError(
                f"channel {self.id} port {index}: illegal transition "
                f"{port.state} -> {state}"
            )
        if state == "free":
            owner = None
        elif owner is None:
            raise TopologyError(
                f"channel {self.id} port {index}: {state} requires an owner"
            )
        port.state = state
        port.owner_slice_id = owner


@dataclass
class AccessLink:
    id: str
    a_site: str
    b_site: str
    capacity_gbps: float
    security_method: str = "none"
    latency_us: float = 0.0
    # (slice_id, role) -> reserved gbps (runtime state)
    reservations: dict[tuple[str, str], float] = field(default_factory=dict)

    def effective_latency_us(self) -> float:
        if self.security_method != "none":
            return self.latency_us + ENCRYPTION_LATENCY_US
        return self.latency_us

    def free_gbps(self) -> float:
        return self.capacity_gbps - sum(self.reservations.values())


@dataclass(frozen=True)
class ChangeRecord:
    entity: str
    path: str
    old: Optional[str]
    new: Optional[str]


class Topology:
    """Validated network state.  All mutation happens under the orchestrator's
    global configuration lock; reads may use :meth:`snapshot`."""

    def __init__(self, sites: dict[str, Site], devices: dict[str, Device],
                 channels: dict[str, Channel], access_links: dict[str, AccessLink]):
        self.lineage_id = uuid.uuid4().hex
        self.sites = sites
        self.devices = devices
        self.channels = channels
        self.access_links = access_links
        self.validate()

    # -- validation ---------------------------------------------------------

    def validate(self) -> None:
        if not self.sites:
            raise TopologyError("no sites")
        for sid, site in self.sites.items():
            if site.kind not in SITE_KINDS:
                raise TopologyError(f"sites[{sid}].kind: unknown kind '{site.kind}'")
            if site.compute_capacity_units < 0:
                raise TopologyError(f"sites[{sid}].compute_capacity_units: negative")
            if site.compute_capacity_units > 0 and site.kind not in ("aggregation", "metro"):
                raise TopologyError(
                    f"sites[{sid}]: compute hosted on '{site.kind}' site "
                    "(only aggregation or metro sites host compute)"
                )
            for did in site.device_ids:
                if did not in self.devices:
                    raise TopologyError(f"sites[{sid}].device_ids: unknown device '{did}'")
        for did, dev in self.devices.items():
            if dev.kind not in DEVICE_KINDS:
                raise TopologyError(f"devices[{did}].kind: unknown kind '{dev.kind}'")
            if dev.site_id not in self.sites:
                raise TopologyError(f"devices[{did}].site_id: unknown site '{dev.site_id}'")
            for path in dev.config_tree:
                if not path or path.startswith("/") or path.endswith("/"):
                    raise TopologyError(f"devices[{did}].config_tree: bad path '{path}'")
        for cid, ch in self.channels.items():
            if ch.security_method not in SECURITY_METHODS:
                raise TopologyError(
                    f"channels[{cid}].security_method: unknown '{ch.security_method}'")
            if ch.wavelength_role not in WAVELENGTH_ROLES:
                raise TopologyError(
                    f"channels[{cid}].wavelength_role: unknown '{ch.wavelength_role}'")
            for side, ep in (("a_device_port", ch.a_device_port),
                             ("b_device_port", ch.b_device_port)):
                if ep.device_id not in self.devices:
                    raise TopologyError(
                        f"channels[{cid}].{side}.device_id: unknown device '{ep.device_id}'")
            if len(ch.client_ports) != CLIENT_PORTS_PER_CHANNEL:
                raise TopologyError(
                    f"channels[{cid}].client_ports: expected "
                    f"{CLIENT_PORTS_PER_CHANNEL}, got {len(ch.client_ports)}")
            for i, port in enumerate(ch.client_ports):
                if port.index != i:
                    raise TopologyError(f"channels[{cid}].client_ports[{i}]: bad index")
                if port.state not in PORT_STATES:
                    raise TopologyError(
                        f"channels[{cid}].client_ports[{i}].state: '{port.state}'")
                if (port.state == "free") != (port.owner_slice_id is None):
                    raise TopologyError(
                        f"channels[{cid}].client_ports[{i}]: free/owner mismatch")
            if ch.refresh_interval_s <= 0:
                raise TopologyError(f"channels[{cid}].refresh_interval_s: must be > 0")
            if ch.base_latency_us < 0:
                raise TopologyError(f"channels[{cid}].base_latency_us: negative")
            if self.channel_site(cid, "a") == self.channel_site(cid, "b"):
                raise TopologyError(f"channels[{cid}]: both endpoints on one site")
        for lid, link in self.access_links.items():
            if link.a_site == link.b_site:
                raise TopologyError(f"access_links[{lid}]: a_site == b_site")
            for side, sid in (("a_site", link.a_site), ("b_site", link.b_site)):
                if sid not in self.sites:
                    raise TopologyError(f"access_links[{lid}].{side}: unknown site '{sid}'")
            if link.security_method not in SECURITY_METHODS:
                raise TopologyError(
                    f"access_links[{lid}].security_method: unknown '{link.security_method}'")
            if link.capacity_gbps <= 0:
                raise TopologyError(f"access_links[{lid}].capacity_gbps: must be > 0")
            if link.latency_us < 0:
                raise TopologyError(f"access_links[{lid}].latency_us: negative")

    # -- graph accessors ----------------------------------------------------

    def channel_site(self, channel_id: str, side: str) -> str:
        ch = self.channels[channel_id]
        ep = ch.a_device_port if side == "a" else ch.b_device_port
        return self.devices[ep.device_id].site_id

    def link_sites(self, link_id: str) -> tuple[str, str]:
        """Endpoint sites of a channel or access link id."""
        if link_id in self.channels:
            return self.channel_site(link_id, "a"), self.channel_site(link_id, "b")
        link = self.access_links[link_id]
        return link.a_site, link.b_site

    def links_at(self, site_id: str) -> list[str]:
        out = []
        for cid in self.channels:
            if site_id in self.link_sites(cid):
                out.append(cid)
        for lid, link in self.access_links.items():
            if site_id in (link.a_site, link.b_site):
                out.append(lid)
        return sorted(out)

    def site_device_of_kind(self, site_id: str, kind: str) -> Optional[Device]:
        for did in self.sites[site_id].device_ids:
            dev = self.devices[did]
            if dev.kind == kind:
                return dev
        return None

    # -- snapshot / diff ----------------------------------------------------

    def snapshot(self) -> "ConfigSnapshot":
        return ConfigSnapshot(
            lineage_id=self.lineage_id,
            device_trees={d: dict(dev.config_tree) for d, dev in self.devices.items()},
            port_states={
                c: [(p.state, p.owner_slice_id) for p in ch.client_ports]
                for c, ch in self.channels.items()
            },
            compute_allocations={s: dict(site.compute_allocations)
                                 for s, site in self.sites.items()},
            access_reservations={l: dict(link.reservations)
                                 for l, link in self.access_links.items()},
            key_bindings={c: (ch.security_method, ch.active_key_id is not None)
                          for c, ch in self.channels.items()},
        )

    def state_hash(self) -> str:
        """SHA-256 over the canonical allocation + configuration state.

        Key identity is excluded: keys rotate on a schedule independent of
        slice operations, so two equivalent histories may hold different ids.
        Presence and method of the binding are included.
        """
        snap = self.snapshot()
        doc = {
            "devices": snap.device_trees,
            "ports": {c: list(map(list, v)) for c, v in snap.port_states.items()},
            "compute": snap.compute_allocations,
            "access": {l: {f"{k[0]}:{k[1]}": v for k, v in r.items()}
                       for l, r in snap.access_reservations.items()},
            "keys": {c: list(v) for c, v in snap.key_bindings.items()},
        }
        blob = json.dumps(doc, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    # -- serialization ------------------------------------------------------

    def serialize(self) -> dict[str, Any]:
        """Canonical document form; ``load_topology(serialize(t))`` is identity."""
        return {
            "sites": [
                {
                    "id": s.id,
                    "kind": s.kind,
                    "device_ids": list(s.device_ids),
                    "compute_capacity_units": s.compute_capacity_units,
                    "compute_allocations": dict(s.compute_allocations),
                }
                for s in self._sorted(self.sites)
            ],
            "devices": [
                {
                    "id": d.id,
                    "site_id": d.site_id,
                    "kind": d.kind,
                    "config_tree": dict(sorted(d.config_tree.items())),
                    "latency_model_id": d.latency_model_id,
                }
                for d in self._sorted(self.devices)
            ],
            "channels": [
                {
                    "id": c.id,
                    "a_device_port": {"device_id": c.a_device_port.device_id,
                                      "port": c.a_device_port.port},
                    "b_device_port": {"device_id": c.b_device_port.device_id,
                                      "port": c.b_device_port.port},
                    "line_rate_gbps": c.line_rate_gbps,
                    "security_method": c.security_method,
                    "client_ports": [
                        {"index": p.index, "state": p.state,
                         "owner_slice_id": p.owner_slice_id}
                        for p in c.client_ports
                    ],
                    "active_key_id": c.active_key_id,
                    "refresh_interval_s": c.refresh_interval_s,
                    "base_latency_us": c.base_latency_us,
                    "wavelength_role": c.wavelength_role,
                }
                for c in self._sorted(self.channels)
            ],
            "access_links": [
                {
                    "id": l.id,
                    "a_site": l.a_site,
                    "b_site": l.b_site,
                    "capacity_gbps": l.capacity_gbps,
                    "security_method": l.security_method,
                    "latency_us": l.latency_us,
                }
                for l in self._sorted(self.access_links)
            ],
        }

    @staticmethod
    def _sorted(mapping: dict[str, Any]) -> Iterable[Any]:
        return (mapping[k] for k in sorted(mapping))


@dataclass(frozen=True)
class ConfigSnapshot:
    """Deep, immutable copy of device configuration and allocation state."""

    lineage_id: str
    device_trees: dict[str, dict[str, str]]
    port_states: dict[str, list[tuple[str, Optional[str]]]]
    compute_allocations: dict[str, dict[str, int]]
    access_reservations: dict[str, dict[tuple[str, str], float]]
    key_bindings: dict[str, tuple[str, bool]]


def diff(before: ConfigSnapshot, after: Topology) -> list[ChangeRecord]:
    """Minimal change set between a snapshot and the live topology.

    Empty iff the states are identical.  Raises if the snapshot was taken
    from a different topology instance lineage.
    """
    if before.lineage_id != after.lineage_id:
        raise TopologyError("snapshot was taken from a different topology instance")
    records: list[ChangeRecord] = []
    now = after.snapshot()

    for dev_id in sorted(set(before.device_trees) | set(now.device_trees)):
        old_tree = before.device_trees.get(dev_id, {})
        new_tree = now.device_trees.get(dev_id, {})
        for path in sorted(set(old_tree) | set(new_tree)):
            old_v, new_v = old_tree.get(path), new_tree.get(path)
            if old_v != new_v:
                records.append(ChangeRecord(dev_id, path, old_v, new_v))

    for ch_id in sorted(before.port_states):
        for i, (old_state, new_state) in enumerate(
                zip(before.port_states[ch_id], now.port_states[ch_id])):
            if old_state[0] != new_state[0]:
                records.append(ChangeRecord(
                    ch_id, f"client_ports/{i}/state", old_state[0], new_state[0]))
            if old_state[1] != new_state[1]:
                records.append(ChangeRecord(
                    ch_id, f"client_ports/{i}/owner", old_state[1], new_state[1]))

    for site_id in sorted(before.compute_allocations):
        old_alloc = before.compute_allocations[site_id]
        new_alloc = now.compute_allocations.get(site_id, {})
        for slice_id in sorted(set(old_alloc) | set(new_alloc)):
            o, n = old_alloc.get(slice_id), new_alloc.get(slice_id)
            if o != n:
                records.append(ChangeRecord(
                    site_id, f"compute/{slice_id}",
                    None if o is None else str(o), None if n is None else str(n)))

    for link_id in sorted(before.access_reservations):
        old_res = before.access_reservations[link_id]
        new_res = now.access_reservations.get(link_id, {})
        for key in sorted(set(old_res) | set(new_res)):
            o, n = old_res.get(key), new_res.get(key)
            if o != n:
                records.append(ChangeRecord(
                    link_id, f"reservations/{key[0]}:{key[1]}",
                    None if o is None else str(o), None if n is None else str(n)))

    for ch_id in sorted(before.key_bindings):
        if before.key_bindings[ch_id] != now.key_bindings.get(ch_id):
            records.append(ChangeRecord(
                ch_id, "key_binding", str(before.key_bindings[ch_id]),
                str(now.key_bindings.get(ch_id))))
    return records


# -- document loading --------------------------------------------------------

def _require(doc: dict, key: str, where: str) -> Any:
    if key not in doc:
        raise TopologyError(f"{where}: missing field '{key}'")
    return doc[key]


def load_topology(document: dict[str, Any]) -> Topology:
    """Build and validate a :class:`Topology` from its document form.

    Client ports may be omitted per channel; they default to 10 free ports.
    Errors name the path of the offending element.
    """
    if not isinstance(document, dict):
        raise TopologyError("topology document must be a JSON object")
    doc = copy.deepcopy(document)

    sites: dict[str, Site] = {}
    for i, raw in enumerate(doc.get("sites", [])):
        where = f"sites[{i}]"
        sid = _require(raw, "id", where)
        if sid in sites:
            raise TopologyError(f"{where}: duplicate site id '{sid}'")
        sites[sid] = Site(
            id=sid,
            kind=_require(raw, "kind", where),
            device_ids=list(raw.get("device_ids", [])),
            compute_capacity_units=int(raw.get("compute_capacity_units", 0)),
            compute_allocations={k: int(v) for k, v in
                                 raw.get("compute_allocations", {}).items()},
        )

    devices: dict[str, Device] = {}
    for i, raw in enumerate(doc.get("devices", [])):
        where = f"devices[{i}]"
        did = _require(raw, "id", where)
        if did in devices:
            raise TopologyError(f"{where}: duplicate device id '{did}'")
        devices[did] = Device(
            id=did,
            site_id=_require(raw, "site_id", where),
            kind=_require(raw, "kind", where),
            config_tree=dict(raw.get("config_tree", {})),
            latency_model_id=raw.get("latency_model_id", "default"),
        )

    channels: dict[str, Channel] = {}
    for i, raw in enumerate(doc.get("channels", [])):
        where = f"channels[{i}]"
        cid = _require(raw, "id", where)
        if cid in channels:
            raise TopologyError(f"{where}: duplicate channel id '{cid}'")
        ports_raw = raw.get("client_ports")
        if ports_raw is None:
            ports = [ClientPort(index=j) for j in range(CLIENT_PORTS_PER_CHANNEL)]
        else:
            ports = [ClientPort(index=int(p["index"]),
                                state=p.get("state", "free"),
                                owner_slice_id=p.get("owner_slice_id"))
                     for p in ports_raw]
        a_raw = _require(raw, "a_device_port", where)
        b_raw = _require(raw, "b_device_port", where)
        channels[cid] = Channel(
            id=cid,
            a_device_port=Endpoint(a_raw["device_id"], a_raw.get("port", "line0")),
            b_device_port=Endpoint(b_raw["device_id"], b_raw.get("port", "line0")),
            line_rate_gbps=float(raw.get("line_rate_gbps", 100.0)),
            security_method=_require(raw, "security_method", where),
            client_ports=ports,
            active_key_id=raw.get("active_key_id"),
            refresh_interval_s=float(raw.get("refresh_interval_s", 3.0)),
            base_latency_us=float(raw.get("base_latency_us", 0.0)),
            wavelength_role=raw.get("wavelength_role", "data"),
        )

    access_links: dict[str, AccessLink] = {}
    for i, raw in enumerate(doc.get("access_links", [])):
        where = f"access_links[{i}]"
        lid = _require(raw, "id", where)
        if lid in access_links or lid in channels:
            raise TopologyError(f"{where}: duplicate link id '{lid}'")
        access_links[lid] = AccessLink(
            id=lid,
            a_site=_require(raw, "a_site", where),
            b_site=_require(raw, "b_site", where),
            capacity_gbps=float(_require(raw, "capacity_gbps", where)),
            security_method=raw.get("security_method", "none"),
            latency_us=float(raw.get("latency_us", 0.0)),
        )

    return Topology(sites, devices, channels, access_links)


def load_topology_file(path: str) -> Topology:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise TopologyError(f"{path}: not valid JSON ({exc})") from exc
    return load_topology(doc)
