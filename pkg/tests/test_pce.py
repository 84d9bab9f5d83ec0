from __future__ import annotations

import random

import pytest

from qslice.errors import PathComputationError, TopologyError
from qslice.pce import (POLICIES, ConnectionRequest, SecurityLevel, check_compute,
                        compute_path)
from qslice.topology import load_topology
from support import oracle_verdict, random_request, random_topology


def parallel_doc(specs: list[tuple[str, str, float]]) -> dict:
    """Two sites x (cell) and y (core) joined by one channel per spec
    (link_id, security_method, base_latency_us)."""
    devices = [
        {"id": "eth-x", "site_id": "x", "kind": "ethernet_switch"},
        {"id": "eth-y", "site_id": "y", "kind": "ethernet_switch"},
    ]
    channels = []
    for lid, sec, base in specs:
        for side in ("x", "y"):
            devices.append({"id": f"card-{lid}-{side}", "site_id": side,
                            "kind": "encryption_card"})
        channels.append({"id": lid,
                         "a_device_port": {"device_id": f"card-{lid}-x"},
                         "b_device_port": {"device_id": f"card-{lid}-y"},
                         "security_method": sec, "base_latency_us": base})
    sites = [
        {"id": "x", "kind": "cell",
         "device_ids": [d["id"] for d in devices if d["site_id"] == "x"]},
        {"id": "y", "kind": "core",
         "device_ids": [d["id"] for d in devices if d["site_id"] == "y"]},
    ]
    return {"sites": sites, "devices": devices, "channels": channels}


def request(src="x", dst="y", security=SecurityLevel.DH_AES, bw=1.0,
            role="control_plane", max_latency=None) -> ConnectionRequest:
    return ConnectionRequest(src, dst, bw, security, role, max_latency)


class TestRequestValidation:
    def test_src_equals_dst(self):
        with pytest.raises(ValueError, match="src_site equals dst_site"):
            request(src="x", dst="x")

    def test_bandwidth_range(self):
        with pytest.raises(ValueError, match="bandwidth_gbps"):
            request(bw=0.0)
        with pytest.raises(ValueError, match="bandwidth_gbps"):
            request(bw=10.5)

    def test_role(self):
        with pytest.raises(ValueError, match="unknown role"):
            request(role="transport")

    def test_latency_bound(self):
        with pytest.raises(ValueError, match="max_latency_us"):
            request(max_latency=0.0)

    def test_security_names(self):
        assert SecurityLevel.from_name("qkd_aes") is SecurityLevel.QKD_AES
        assert SecurityLevel.QRA_AES.wire_name == "qra_aes"
        with pytest.raises(ValueError, match="unknown security level"):
            SecurityLevel.from_name("aes")

    def test_ordering(self):
        order = [SecurityLevel.NONE, SecurityLevel.DH_AES,
                 SecurityLevel.QRA_AES, SecurityLevel.QKD_AES]
        assert order == sorted(order)
        assert [int(level) for level in order] == [0, 1, 2, 3]


class TestTestbedPaths:
    def test_direct_dh_exact(self, quick_runtime):
        sol = compute_path(quick_runtime.topology,
                           request(src="cell1", dst="core1"), "exact")
        # [DERIVED] 605 base + 15 encryption
        assert sol.hops == ("ch-dh",)
        assert sol.total_latency_us == 620.0
        assert sol.min_security_on_path is SecurityLevel.DH_AES
        assert sol.reserved_ports == (("ch-dh", 0),)
        assert sol.policy_used == "exact"

    def test_plain_path_via_access_link(self, quick_runtime):
        sol = compute_path(quick_runtime.topology,
                           request(src="cell1", dst="metro1",
                                   security=SecurityLevel.NONE), "exact")
        # [DERIVED] 605 (plain channel) + 5 (plain access link)
        assert sol.hops == ("ch-plain", "al-agg1-metro1")
        assert sol.total_latency_us == 610.0
        # access links have no client ports to pin
        assert sol.reserved_ports == (("ch-plain", 0),)

    def test_upgrade_policy_label(self, quick_runtime):
        sol = compute_path(quick_runtime.topology,
                           request(src="metro1", dst="core1",
                                   security=SecurityLevel.QKD_AES))
        assert sol.hops == ("ch-qkd1",)
        assert sol.policy_used == "upgrade"

    def test_three_hop_mixed_path(self, quick_runtime):
        sol = compute_path(quick_runtime.topology,
                           request(src="cell2", dst="core1"))
        # [DERIVED] 20 (encrypted access) + 620 + 620
        assert sol.hops == ("al-cell2-agg1", "ch-qkd2", "ch-qkd1")
        assert sol.total_latency_us == 1260.0
        assert sol.min_security_on_path is SecurityLevel.DH_AES

    def test_whatif_does_not_reserve(self, quick_runtime):
        topo = quick_runtime.topology
        first = compute_path(topo, request(src="cell1", dst="core1"))
        second = compute_path(topo, request(src="cell1", dst="core1"))
        assert first.reserved_ports == second.reserved_ports
        assert topo.channels["ch-dh"].lowest_free_port() == 0


class TestInfeasibilityReasons:
    def test_no_security_match(self, quick_runtime):
        with pytest.raises(PathComputationError) as err:
            compute_path(quick_runtime.topology,
                         request(src="cell1", dst="core1",
                                 security=SecurityLevel.QKD_AES))
        assert err.value.reason == "no_security_match"

    def test_exact_policy_rejects_upgrades(self, quick_runtime):
        with pytest.raises(PathComputationError) as err:
            compute_path(quick_runtime.topology,
                         request(src="metro1", dst="core1",
                                 security=SecurityLevel.QRA_AES), "exact")
        assert err.value.reason == "no_security_match"

    def test_no_capacity_on_channel(self, quick_runtime):
        topo = quick_runtime.topology
        for i in range(10):
            topo.channels["ch-dh"].set_port_state(i, "reserved", "hog")
        with pytest.raises(PathComputationError) as err:
            compute_path(topo, request(src="cell1", dst="core1"), "exact")
        assert err.value.reason == "no_capacity"

    def test_no_capacity_on_access_link(self, quick_runtime):
        topo = quick_runtime.topology
        topo.access_links["al-cell2-agg1"].reservations[("hog", "access")] = 6.0
        with pytest.raises(PathComputationError) as err:
            compute_path(topo, request(src="cell2", dst="agg1", bw=5.0), "exact")
        assert err.value.reason == "no_capacity"
        sol = compute_path(topo, request(src="cell2", dst="agg1", bw=4.0), "exact")
        assert sol.hops == ("al-cell2-agg1",)

    def test_latency_bound_exceeded(self, quick_runtime):
        with pytest.raises(PathComputationError) as err:
            compute_path(quick_runtime.topology,
                         request(src="cell1", dst="metro1",
                                 security=SecurityLevel.QRA_AES, max_latency=500.0))
        assert err.value.reason == "latency_bound_exceeded"

    def test_latency_bound_inclusive(self, quick_runtime):
        sol = compute_path(quick_runtime.topology,
                           request(src="cell1", dst="metro1",
                                   security=SecurityLevel.QRA_AES,
                                   max_latency=620.0))
        assert sol.total_latency_us == 620.0

    def test_disconnected(self):
        doc = parallel_doc([("ch-a", "dh_aes", 10.0)])
        doc["sites"].append({"id": "z", "kind": "core", "device_ids": ["eth-z"]})
        doc["devices"].append({"id": "eth-z", "site_id": "z",
                               "kind": "ethernet_switch"})
        topo = load_topology(doc)
        with pytest.raises(PathComputationError) as err:
            compute_path(topo, request(src="x", dst="z"))
        assert err.value.reason == "disconnected"

    def test_unknown_site_reported_as_disconnected(self, quick_runtime):
        with pytest.raises(PathComputationError) as err:
            compute_path(quick_runtime.topology, request(src="cell1", dst="mars"))
        assert err.value.reason == "disconnected"
        assert "not in topology" in str(err.value)

    def test_unknown_policy(self, quick_runtime):
        with pytest.raises(ValueError, match="unknown policy"):
            compute_path(quick_runtime.topology,
                         request(src="cell1", dst="core1"), "best_effort")


class TestTieBreaks:
    def test_latency_dominates_security(self):
        topo = load_topology(parallel_doc([("a-ch", "dh_aes", 100.0),
                                           ("b-ch", "qkd_aes", 10.0)]))
        sol = compute_path(topo, request())
        assert sol.hops == ("b-ch",)
        assert sol.total_latency_us == 25.0

    def test_equal_latency_prefers_lower_security_sum(self):
        topo = load_topology(parallel_doc([("a-ch", "qkd_aes", 10.0),
                                           ("b-ch", "dh_aes", 10.0)]))
        sol = compute_path(topo, request())
        # premium QKD wave is conserved even though its id sorts first
        assert sol.hops == ("b-ch",)

    def test_full_tie_prefers_smaller_id_sequence(self):
        topo = load_topology(parallel_doc([("b-ch", "dh_aes", 10.0),
                                           ("a-ch", "dh_aes", 10.0)]))
        sol = compute_path(topo, request())
        assert sol.hops == ("a-ch",)

    def test_equal_latency_arrival_keeps_best_security(self):
        doc = parallel_doc([("ch-a", "dh_aes", 10.0), ("ch-b", "qkd_aes", 10.0)])
        doc["sites"][1]["kind"] = "metro"   # y becomes an intermediate site
        doc["sites"].append({"id": "z", "kind": "core", "device_ids": []})
        doc["devices"].append({"id": "card-ch-c-y", "site_id": "y",
                               "kind": "encryption_card"})
        doc["devices"].append({"id": "card-ch-c-z", "site_id": "z",
                               "kind": "encryption_card"})
        doc["sites"][1]["device_ids"].append("card-ch-c-y")
        doc["sites"][2]["device_ids"].append("card-ch-c-z")
        doc["channels"].append({"id": "ch-c",
                                "a_device_port": {"device_id": "card-ch-c-y"},
                                "b_device_port": {"device_id": "card-ch-c-z"},
                                "security_method": "dh_aes",
                                "base_latency_us": 10.0})
        topo = load_topology(doc)
        sol = compute_path(topo, request(dst="z"))
        assert sol.hops == ("ch-a", "ch-c")
        assert sol.min_security_on_path is SecurityLevel.DH_AES


class TestCompute:
    def test_free_units(self, quick_runtime):
        topo = quick_runtime.topology
        assert check_compute(topo, "metro1", 16)
        assert not check_compute(topo, "metro1", 17)
        topo.sites["metro1"].compute_allocations["s1"] = 10
        assert check_compute(topo, "metro1", 6)
        assert not check_compute(topo, "metro1", 7)

    def test_unknown_site(self, quick_runtime):
        with pytest.raises(TopologyError, match="unknown site"):
            check_compute(quick_runtime.topology, "mars", 1)


class TestOracleAgreement:
    """Uniform-cost search vs exhaustive simple-path enumeration on random
    graphs: identical best key or identical infeasibility reason."""

    def test_random_graphs(self):
        rng = random.Random(20260816)
        checked = feasible = 0
        for _ in range(120):
            topo = random_topology(rng)
            for _ in range(8):
                req = random_request(rng, topo)
                policy = rng.choice(POLICIES)
                expected = oracle_verdict(topo, req, policy)
                try:
                    sol = compute_path(topo, req, policy)
                    got = ("ok", (sol.total_latency_us,
                                  sum(int(SecurityLevel.from_name(
                                      (topo.channels.get(h) or
                                       topo.access_links[h]).security_method))
                                      for h in sol.hops),
                                  sol.hops), sol.min_security_on_path)
                    feasible += 1
                except PathComputationError as exc:
                    got = ("error", exc.reason)
                assert got == expected, (topo.serialize(), req, policy)
                checked += 1
        assert checked == 960
        assert feasible > 150   # the comparison must not be vacuous

    def test_occupancy_aware(self):
        rng = random.Random(99)
        hits = 0
        for _ in range(40):
            topo = random_topology(rng)
            # claim every port on a random subset of channels
            for ch in topo.channels.values():
                if rng.random() < 0.5:
                    for i in range(10):
                        ch.set_port_state(i, "reserved", "bg")
                    hits += 1
            req = random_request(rng, topo)
            policy = rng.choice(POLICIES)
            expected = oracle_verdict(topo, req, policy)
            try:
                sol = compute_path(topo, req, policy)
                got = ("ok", (sol.total_latency_us,
                              sum(int(SecurityLevel.from_name(
                                  (topo.channels.get(h) or
                                   topo.access_links[h]).security_method))
                                  for h in sol.hops),
                              sol.hops), sol.min_security_on_path)
            except PathComputationError as exc:
                got = ("error", exc.reason)
            assert got == expected
        assert hits > 10
