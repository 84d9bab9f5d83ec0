"""Shared test helpers: runtime factories, random topology generation, and
the independent brute-force path oracle the search results are checked
against."""

from __future__ import annotations

import random
from typing import Optional

from qslice.config import LatencyParams, RuntimeConfig
from qslice.pce import ConnectionRequest, SecurityLevel
from qslice.runtime import Runtime
from qslice.topology import Topology, load_topology

FAST_SCALE = 1e-7

SECURITY_NAMES = ("none", "dh_aes", "qra_aes", "qkd_aes")

# acceptance tests append their [PASS]/[FAIL] lines here; conftest replays
# them in a terminal-summary section so they survive output capture
ACCEPTANCE_LINES: list[str] = []


def fast_config(**overrides) -> RuntimeConfig:
    cfg = RuntimeConfig(time_scale=FAST_SCALE)
    for key, value in overrides.items():
        setattr(cfg, key, value)
    return cfg


def constant_latency(value_s: float = 1e-9) -> dict[str, LatencyParams]:
    params = LatencyParams("constant", value_s, 0.0)
    return {kind: params for kind in
            ("ethernet_switch", "optical_switch", "encryption_card", "otn_mux")}


def make_runtime(constant_s: Optional[float] = None,
                 topology: Optional[Topology] = None,
                 **overrides) -> Runtime:
    cfg = fast_config(**overrides)
    if constant_s is not None:
        cfg.latency = constant_latency(constant_s)
    return Runtime.from_config(cfg, topology=topology)


# -- random topologies ----------------------------------------------------------

def random_topology(rng: random.Random, max_sites: int = 8, max_links: int = 14,
                    for_slices: bool = False) -> Topology:
    """Small random network with integer latencies (so latency sums compare
    exactly).  With ``for_slices`` the site-kind mix always supports a
    three-connection slice and channel refresh is effectively off, keeping
    fuzz runs off the key-exchange hot path."""
    n = rng.randint(3 if for_slices else 2, max_sites)
    kinds = []
    if for_slices:
        kinds = ["cell", "core", rng.choice(["metro", "aggregation"])]
    while len(kinds) < n:
        kinds.append(rng.choice(["cell", "aggregation", "metro", "core"]))
    rng.shuffle(kinds)

    sites = []
    devices = []
    for i, kind in enumerate(kinds):
        site_id = f"s{i}"
        compute = rng.choice([0, 4, 8, 16]) if kind in ("metro", "aggregation") else 0
        device_ids = [f"eth-{site_id}"]
        devices.append({"id": f"eth-{site_id}", "site_id": site_id,
                        "kind": "ethernet_switch"})
        if kind in ("metro", "aggregation") and rng.random() < 0.3:
            device_ids.append(f"osw-{site_id}")
            devices.append({"id": f"osw-{site_id}", "site_id": site_id,
                            "kind": "optical_switch"})
        sites.append({"id": site_id, "kind": kind, "device_ids": device_ids,
                      "compute_capacity_units": compute})

    channels = []
    access_links = []
    m = rng.randint(1, max_links)
    for j in range(m):
        a, b = rng.sample(range(n), 2)
        security = rng.choice(SECURITY_NAMES)
        latency = float(rng.randint(1, 500))
        if rng.random() < 0.7:
            cid = f"ch{j}"
            for side, site_index in (("a", a), ("b", b)):
                devices.append({"id": f"card-{cid}-{side}",
                                "site_id": f"s{site_index}",
                                "kind": "encryption_card"})
                sites[site_index]["device_ids"].append(f"card-{cid}-{side}")
            channels.append({
                "id": cid,
                "a_device_port": {"device_id": f"card-{cid}-a"},
                "b_device_port": {"device_id": f"card-{cid}-b"},
                "security_method": security,
                "base_latency_us": latency,
                "refresh_interval_s": 3600.0 if for_slices else 3.0,
            })
        else:
            access_links.append({
                "id": f"al{j}",
                "a_site": f"s{a}", "b_site": f"s{b}",
                "capacity_gbps": float(rng.choice([5, 10, 20, 100])),
                "security_method": security,
                "latency_us": latency,
            })
    return load_topology({"sites": sites, "devices": devices,
                          "channels": channels, "access_links": access_links})


def random_request(rng: random.Random, topology: Topology) -> ConnectionRequest:
    src, dst = rng.sample(sorted(topology.sites), 2)
    return ConnectionRequest(
        src_site=src, dst_site=dst,
        bandwidth_gbps=float(rng.choice([1, 5, 10])),
        required_security=SecurityLevel(rng.randint(0, 3)),
        role=rng.choice(("control_plane", "access", "backhaul")),
        max_latency_us=float(rng.randint(50, 3000)) if rng.random() < 0.3 else None,
    )


def random_descriptor_doc(rng: random.Random, topology: Topology,
                          slice_id: str) -> Optional[dict]:
    """Structurally valid descriptor over the topology, or None when the
    topology lacks the site kinds a slice needs."""
    by_kind: dict[str, list[str]] = {}
    for site_id in sorted(topology.sites):
        by_kind.setdefault(topology.sites[site_id].kind, []).append(site_id)
    cells = by_kind.get("cell", [])
    cores = by_kind.get("core", [])
    compute_sites = by_kind.get("metro", []) + by_kind.get("aggregation", [])
    if not cells or not cores or not compute_sites:
        return None
    cell = rng.choice(cells)
    core = rng.choice(cores)
    compute = rng.choice(sorted(compute_sites))
    security = lambda: rng.choice(SECURITY_NAMES)  # noqa: E731
    return {
        "slice_id": slice_id,
        "name": "fuzz",
        "compute_site": compute,
        "compute_units": rng.choice([0, 1, 2, 4]),
        "policy": rng.choice(("exact", "upgrade_allowed")),
        "connections": [
            {"role": "control_plane", "src_site": cell, "dst_site": core,
             "bandwidth_gbps": rng.choice([1.0, 2.0]),
             "required_security": security()},
            {"role": "access", "src_site": cell, "dst_site": compute,
             "bandwidth_gbps": rng.choice([1.0, 5.0]),
             "required_security": security()},
            {"role": "backhaul", "src_site": compute, "dst_site": core,
             "bandwidth_gbps": rng.choice([5.0, 10.0]),
             "required_security": security()},
        ],
    }


# -- brute-force path oracle ------------------------------------------------------

def _oracle_feasible(link, required: SecurityLevel, policy: str,
                     bandwidth: float, check_security: bool,
                     check_capacity: bool) -> bool:
    from qslice.pce import security_metric
    from qslice.topology import Channel
    if check_security:
        level = security_metric(link)
        if policy == "exact":
            if level != required:
                return False
        elif level < required:
            return False
    if check_capacity:
        if isinstance(link, Channel):
            if link.lowest_free_port() is None:
                return False
        elif link.free_gbps() < bandwidth:
            return False
    return True


def oracle_enumerate(topology: Topology, request: ConnectionRequest, policy: str,
                     check_security: bool = True, check_capacity: bool = True):
    """All simple src->dst paths that pass the filters, as
    (latency, security_sum, hops) keys plus the path's min security level."""
    results = []

    def visit(site: str, seen: frozenset, hops: tuple, latency: float,
              sec_sum: int, min_sec: SecurityLevel) -> None:
        if site == request.dst_site:
            results.append(((latency, sec_sum, hops), min_sec))
            return
        for link_id in topology.links_at(site):
            a, b = topology.link_sites(link_id)
            far = b if site == a else a
            if far in seen:
                continue
            link = topology.channels.get(link_id) or topology.access_links[link_id]
            if not _oracle_feasible(link, request.required_security, policy,
                                    request.bandwidth_gbps, check_security,
                                    check_capacity):
                continue
            from qslice.pce import security_metric
            level = security_metric(link)
            visit(far, seen | {far}, hops + (link_id,),
                  latency + link.effective_latency_us(),
                  sec_sum + int(level), min(min_sec, level))

    visit(request.src_site, frozenset([request.src_site]), (), 0.0, 0,
          SecurityLevel.QKD_AES)
    return results


def oracle_verdict(topology: Topology, request: ConnectionRequest, policy: str):
    """Mirror of the staged feasibility contract, computed by enumeration.

    Returns ("ok", key, min_sec) or ("error", reason).
    """
    full = oracle_enumerate(topology, request, policy, True, True)
    if full:
        key, min_sec = min(full)
        if request.max_latency_us is not None and key[0] > request.max_latency_us:
            return ("error", "latency_bound_exceeded")
        return ("ok", key, min_sec)
    if not oracle_enumerate(topology, request, policy, False, False):
        return ("error", "disconnected")
    if not oracle_enumerate(topology, request, policy, True, False):
        return ("error", "no_security_match")
    return ("error", "no_capacity")
