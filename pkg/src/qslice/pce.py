"""Path computation with a security ordinal as a routing constraint.

Every link carries one of four security methods, ordered none < dh_aes <
qra_aes < qkd_aes.  A connection request names the level it needs; under the
``exact`` policy every hop must match it, under ``upgrade_allowed`` every hop
must meet or exceed it.  Among feasible paths the objective is minimum total
latency, tie-broken by the lowest summed hop security (premium links are
conserved for requests that need them) and then by the lexicographically
smallest link-id sequence, which makes results deterministic.

Infeasibility is reported with a staged reason: ``disconnected`` when no path
exists at all, ``no_security_match`` when paths exist but none satisfies the
security constraint, ``no_capacity`` when security-feasible paths all lack a
free client port or access bandwidth, and ``latency_bound_exceeded`` when the
best candidate misses the request's latency bound.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from enum import IntEnum
from typing import Optional, Union

from .errors import PathComputationError, TopologyError
from .topology import AccessLink, Channel, Topology


class SecurityLevel(IntEnum):
    NONE = 0
    DH_AES = 1
    QRA_AES = 2
    QKD_AES = 3

    @staticmethod
    def from_name(name: str) -> "SecurityLevel":
        try:
            return _LEVEL_BY_NAME[name]
        except KeyError:
            raise ValueError(f"unknown security level '{name}'") from None

    @property
    def wire_name(self) -> str:
        return _NAME_BY_LEVEL[self]


_LEVEL_BY_NAME = {
    "none": SecurityLevel.NONE,
    "dh_aes": SecurityLevel.DH_AES,
    "qra_aes": SecurityLevel.QRA_AES,
    "qkd_aes": SecurityLevel.QKD_AES,
}
_NAME_BY_LEVEL = {v: k for k, v in _LEVEL_BY_NAME.items()}

ROLES = ("control_plane", "access", "backhaul")
POLICIES = ("exact", "upgrade_allowed")


@dataclass(frozen=True)
class ConnectionRequest:
    src_site: str
    dst_site: str
    bandwidth_gbps: float
    required_security: SecurityLevel
    role: str
    max_latency_us: Optional[float] = None

    def __post_init__(self) -> None:
        if self.src_site == self.dst_site:
            raise ValueError(f"{self.role}: src_site equals dst_site")
        if not 0 < self.bandwidth_gbps <= 10:
            raise ValueError(
                f"{self.role}: bandwidth_gbps must be in (0, 10] "
                "(one client-port pair per channel traversal)")
        if self.role not in ROLES:
            raise ValueError(f"unknown role '{self.role}'")
        if self.max_latency_us is not None and self.max_latency_us <= 0:
            raise ValueError(f"{self.role}: max_latency_us must be > 0")


@dataclass(frozen=True)
class PathSolution:
    hops: tuple[str, ...]
    reserved_ports: tuple[tuple[str, int], ...]
    total_latency_us: float
    min_security_on_path: SecurityLevel
    policy_used: str       # exact | upgrade


def security_metric(link: Union[Channel, AccessLink]) -> SecurityLevel:
    return SecurityLevel.from_name(link.security_method)


def check_compute(topology: Topology, site_id: str, units: int) -> bool:
    site = topology.sites.get(site_id)
    if site is None:
        raise TopologyError(f"unknown site '{site_id}'")
    return site.compute_free_units() >= units


def _link_obj(topology: Topology, link_id: str) -> Union[Channel, AccessLink]:
    return topology.channels.get(link_id) or topology.access_links[link_id]


def _security_ok(level: SecurityLevel, required: SecurityLevel, policy: str) -> bool:
    if policy == "exact":
        return level == required
    return level >= required


def _capacity_ok(link: Union[Channel, AccessLink], bandwidth_gbps: float) -> bool:
    if isinstance(link, Channel):
        return link.lowest_free_port() is not None
    return link.free_gbps() >= bandwidth_gbps


def _edges(topology: Topology, site: str) -> list[tuple[str, str]]:
    """(link_id, far_site) pairs leaving ``site``, id-ordered."""
    out = []
    for link_id in topology.links_at(site):
        a, b = topology.link_sites(link_id)
        out.append((link_id, b if a == site else a))
    return out


def compute_path(topology: Topology, request: ConnectionRequest,
                 policy: str = "upgrade_allowed") -> PathSolution:
    if policy not in POLICIES:
        raise ValueError(f"unknown policy '{policy}'")
    for name, site in (("src_site", request.src_site), ("dst_site", request.dst_site)):
        if site not in topology.sites:
            raise PathComputationError(f"{name} '{site}' not in topology",
                                       "disconnected")

    best = _search(topology, request, policy, check_security=True,
                   check_capacity=True)
    if best is not None:
        hops, latency, min_sec = best
        if request.max_latency_us is not None and latency > request.max_latency_us:
            raise PathComputationError(
                f"best path latency {latency:.1f} us exceeds bound "
                f"{request.max_latency_us:.1f} us", "latency_bound_exceeded")
        ports = []
        for hop in hops:
            link = _link_obj(topology, hop)
            if isinstance(link, Channel):
                index = link.lowest_free_port()
                assert index is not None
                ports.append((link.id, index))
        return PathSolution(
            hops=tuple(hops),
            reserved_ports=tuple(ports),
            total_latency_us=latency,
            min_security_on_path=min_sec,
            policy_used="exact" if policy == "exact" else "upgrade",
        )

    # Infeasible: re-run with constraints relaxed in stages to name the cause.
    if _search(topology, request, policy, check_security=False,
               check_capacity=False) is None:
        raise PathComputationError(
            f"no path between {request.src_site} and {request.dst_site}",
            "disconnected")
    if _search(topology, request, policy, check_security=True,
               check_capacity=False) is None:
        raise PathComputationError(
            f"no path satisfies security {request.required_security.wire_name} "
            f"under policy {policy}", "no_security_match")
    raise PathComputationError(
        "security-feasible paths lack free client ports or bandwidth",
        "no_capacity")


def _search(topology: Topology, request: ConnectionRequest, policy: str,
            check_security: bool, check_capacity: bool,
            ) -> Optional[tuple[tuple[str, ...], float, SecurityLevel]]:
    """Least-(latency, security sum, id sequence) path, or None.

    Uniform-cost search.  Every key component is monotone under extension and
    the id sequence grows strictly, so the first settled arrival at the
    destination is optimal; a path revisiting a site is always dominated by
    its own prefix there, so results are loop-free without an explicit check.
    """
    start = (0.0, 0, (), request.src_site, SecurityLevel.QKD_AES)
    heap: list[tuple[float, int, tuple[str, ...], str, SecurityLevel]] = [start]
    best_key: dict[str, tuple[float, int, tuple[str, ...]]] = {}
    while heap:
        latency, sec_sum, hops, site, min_sec = heapq.heappop(heap)
        key = (latency, sec_sum, hops)
        if best_key.get(site, key) < key:
            continue
        if site == request.dst_site:
            return hops, latency, min_sec
        for link_id, far in _edges(topology, site):
            link = _link_obj(topology, link_id)
            level = security_metric(link)
            if check_security and not _security_ok(level, request.required_security,
                                                   policy):
                continue
            if check_capacity and not _capacity_ok(link, request.bandwidth_gbps):
                continue
            new_key = (latency + link.effective_latency_us(),
                       sec_sum + int(level), hops + (link_id,))
            if far in best_key and best_key[far] <= new_key:
                continue
            best_key[far] = new_key
            heapq.heappush(heap, (*new_key, far, min(min_sec, level)))
    return None
