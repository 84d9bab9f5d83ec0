from __future__ import annotations

import hashlib
import random

import pytest

from qslice.clock import SimClock
from qslice.config import packaged_data
from qslice.errors import KmsError
from qslice.kms import (KEY_BYTES, MODP_GROUP_14_G, MODP_GROUP_14_P, DhProvider,
                        KeyManager, KeyRecord, QkdChain, QkdSection,
                        SimulatedKemProvider, qrng_key, relay_key)
from qslice.topology import load_topology


def xor(a: bytes, b: bytes) -> bytes:
    return bytes(x ^ y for x, y in zip(a, b))


def make_chain(nodes: int = 2, rate: float = 2000.0, key_bytes: int = KEY_BYTES,
               cap: int = 64, fill: int = 64, seed: int = 9,
               clock: SimClock | None = None) -> tuple[QkdChain, SimClock]:
    clock = clock or SimClock(time_scale=1e-7)
    names = [f"n{i}" for i in range(nodes)]
    return QkdChain("c", names, rate, key_bytes, cap, fill, seed, clock), clock


def make_manager(seed: int = 20260101, fill: int = 64):
    topo = load_topology(packaged_data("testbed.topo.json"))
    clock = SimClock(time_scale=1e-7)
    chain, _ = make_chain(nodes=5, fill=fill, clock=clock)
    return KeyManager(topo, clock, seed, chain), clock, topo


class TestQrng:
    def test_golden_first_key(self):
        # [DERIVED] random.Random(0).randbytes(32), frozen
        assert qrng_key(random.Random(0)).hex() == (
            "cd072cd8be6f9f62ac4c09c28206e7e35594aa6b342f5d0a3a5e4842fab428f7")

    def test_bit_frequency(self):
        rng = random.Random(123)
        bits = "".join(f"{byte:08b}" for _ in range(40) for byte in qrng_key(rng))
        assert len(bits) == 10_240
        ones = bits.count("1") / len(bits)
        assert abs(ones - 0.5) < 0.02

    def test_length(self):
        assert len(qrng_key(random.Random(1))) == 32


class TestQkdSection:
    def test_initial_stock(self):
        chain, _ = make_chain(fill=5)
        assert chain.sections[0].available() == 5

    def test_rate_production(self):
        chain, clock = make_chain(fill=0)
        section = chain.sections[0]
        assert section.available() == 0
        clock.advance(1.0)
        # [DERIVED] floor(2000 * 1.0 / 256)
        assert section.available() == 7
        for _ in range(7):
            section.draw()
        with pytest.raises(KmsError, match="insufficient"):
            section.draw()

    def test_rate_limit_over_drained_window(self):
        # fresh chain, empty buffer, cap too large to bind: production over
        # 60 s is exactly rate-limited
        chain, clock = make_chain(fill=0, cap=10_000)
        section = chain.sections[0]
        drawn = 0
        for _ in range(120):
            clock.advance(0.5)
            while section.available() > 0:
                section.draw()
                drawn += 1
        # [DERIVED] floor(2000 * 60 / 256) = 468
        assert drawn == 468

    def test_buffer_cap_bounds_available(self):
        chain, clock = make_chain(fill=0, cap=10)
        clock.advance(1000.0)
        assert chain.sections[0].available() == 10

    def test_draw_is_one_time(self):
        chain, _ = make_chain(fill=3)
        section = chain.sections[0]
        keys = [section.draw() for _ in range(3)]
        assert len(set(keys)) == 3
        assert section.consumed_counts == {0: 1, 1: 1, 2: 1}

    def test_rate_must_be_positive(self):
        clock = SimClock(time_scale=1e-7)
        with pytest.raises(KmsError, match="rate must be > 0"):
            QkdSection("s", "a", "b", 0.0, 32, 64, 0, 1, clock)


class TestRelay:
    def test_single_section_wire_is_key_xor_pad(self):
        seed = 77
        chain, _ = make_chain(nodes=2, fill=4, seed=seed)
        end_key = qrng_key(random.Random(5))
        delivered = relay_key(chain, end_key)
        # independent reconstruction of the section's pad stream
        expected_pad = random.Random(seed).randbytes(32)
        assert delivered.wire_values == (xor(end_key, expected_pad),)
        assert delivered.material == end_key
        assert delivered.sections_consumed == 1

    def test_four_sections_three_trusted_nodes(self):
        chain, _ = make_chain(nodes=5, fill=4)
        assert len(chain.sections) == 4
        assert chain.trusted_nodes == ["n1", "n2", "n3"]

    def test_wire_values_never_expose_key(self):
        chain, _ = make_chain(nodes=5, fill=4, seed=31)
        end_key = qrng_key(random.Random(6))
        delivered = relay_key(chain, end_key)
        assert end_key not in delivered.wire_values

    def test_exhaustive_one_byte_chains(self):
        """All 256 end keys across chain lengths 1..6 sections, with the wire
        sequence checked against a cloned-stream XOR oracle."""
        for sections in range(1, 7):
            seed = 1000 + sections
            chain, _ = make_chain(nodes=sections + 1, key_bytes=1,
                                  cap=300, fill=300, seed=seed)
            oracle_streams = [random.Random(seed + 101 * i)
                              for i in range(sections)]
            for value in range(256):
                end_key = bytes([value])
                delivered = relay_key(chain, end_key)
                assert delivered.material == end_key
                pads = [s.randbytes(1) for s in oracle_streams]
                carried = end_key
                for hop, pad in enumerate(pads):
                    expected_wire = xor(carried, pad)
                    assert delivered.wire_values[hop] == expected_wire
                    carried = xor(expected_wire, pad)
            for section in chain.sections:
                assert all(n == 1 for n in section.consumed_counts.values())
                assert sorted(section.consumed_counts) == list(range(256))

    def test_dry_section_fails_before_any_consumption(self):
        clock = SimClock(time_scale=1e-7)
        chain = QkdChain("c", ["a", "b", "c"], 1e-6, 32, 64, 0, 3, clock)
        # backfill only the first section
        chain.sections[0].initial_fill = 1
        with pytest.raises(KmsError, match="insufficient"):
            relay_key(chain, qrng_key(random.Random(2)))
        assert chain.sections[0].consumed_counts == {}

    def test_chain_needs_two_nodes(self):
        with pytest.raises(KmsError, match="at least 2 nodes"):
            QkdChain("c", ["solo"], 2000.0, 32, 64, 0, 1, SimClock(time_scale=1e-7))


class TestDh:
    def test_group_14_parameters(self):
        p = MODP_GROUP_14_P
        assert MODP_GROUP_14_G == 2
        assert p.bit_length() == 2048
        assert f"{p:x}".startswith("f" * 16)
        assert f"{p:x}".endswith("f" * 16)

    def test_group_14_prime_strength(self):
        # deterministic Miller-Rabin witnesses
        p = MODP_GROUP_14_P
        d, r = p - 1, 0
        while d % 2 == 0:
            d //= 2
            r += 1
        for a in (2, 3, 5, 7, 11, 13, 17, 19):
            x = pow(a, d, p)
            if x in (1, p - 1):
                continue
            for _ in range(r - 1):
                x = x * x % p
                if x == p - 1:
                    break
            else:
                pytest.fail(f"group 14 modulus failed witness {a}")

    def test_small_group_against_hand_rolled_modexp(self):
        """Same exchange computed without pow(), from a cloned RNG stream."""
        def modexp(base: int, exp: int, mod: int) -> int:
            result = 1
            base %= mod
            while exp:
                if exp & 1:
                    result = result * base % mod
                base = base * base % mod
                exp >>= 1
            return result

        p, g = 23, 5
        provider = DhProvider(random.Random(5), p=p, g=g)
        clone = random.Random(5)
        exp_bits = max(2, min(256, p.bit_length() - 2))
        a = clone.getrandbits(exp_bits) | 1
        b = clone.getrandbits(exp_bits) | 1
        shared = modexp(modexp(g, a, p), b, p)
        assert modexp(modexp(g, b, p), a, p) == shared
        expected = hashlib.sha256(shared.to_bytes(1, "big")).digest()
        assert provider.produce() == expected

    def test_produces_distinct_keys(self):
        provider = DhProvider(random.Random(8))
        keys = {provider.produce() for _ in range(3)}
        assert len(keys) == 3
        assert all(len(k) == 32 for k in keys)

    def test_seeded_determinism(self):
        assert DhProvider(random.Random(4)).produce() == \
            DhProvider(random.Random(4)).produce()


class TestKem:
    def test_shared_secret_shape(self):
        provider = SimulatedKemProvider(random.Random(2))
        clone = random.Random(2)
        pk, ct = clone.randbytes(32), clone.randbytes(32)
        assert provider.produce() == hashlib.sha256(pk + ct).digest()

    def test_seeded_determinism(self):
        assert SimulatedKemProvider(random.Random(3)).produce() == \
            SimulatedKemProvider(random.Random(3)).produce()


class TestKeyManager:
    def test_produce_by_method(self):
        km, _, _ = make_manager()
        for method in ("dh", "qra", "qkd"):
            record = km.produce_key(method)
            assert record.method == method
            assert len(record.material) == 32
            assert len(record.key_id) == 32
            int(record.key_id, 16)  # id is hex

    def test_unknown_method(self):
        km, _, _ = make_manager()
        with pytest.raises(KmsError, match="no provider for method 'rsa'"):
            km.produce_key("rsa")

    def test_qkd_produce_consumes_each_section_once(self):
        km, _, _ = make_manager()
        before = [s._consumed for s in km.chain.sections]
        km.produce_key("qkd")
        after = [s._consumed for s in km.chain.sections]
        assert [a - b for a, b in zip(after, before)] == [1, 1, 1, 1]

    def test_combine_is_order_canonical(self):
        km, _, _ = make_manager()
        a = km.produce_key("dh")
        b = km.produce_key("qkd")
        ab = km.combine_keys([a, b])
        ba = km.combine_keys([b, a])
        assert ab.material == ba.material
        assert ab.key_id != ba.key_id
        ordered = sorted([a, b], key=lambda r: (r.method, r.key_id))
        expected = hashlib.sha256(b"".join(r.material for r in ordered)).digest()
        assert ab.material == expected
        assert ab.method == "combined"

    def test_combine_needs_two(self):
        km, _, _ = make_manager()
        with pytest.raises(KmsError, match="at least 2"):
            km.combine_keys([km.produce_key("dh")])

    def test_material_length_is_enforced(self):
        with pytest.raises(KmsError, match="must be 32 bytes"):
            KeyRecord("00" * 16, "dh", b"short", 0.0)


class TestChannelBinding:
    def test_bind_sets_active_key(self):
        km, _, topo = make_manager()
        record = km.bind_channel("ch-dh")
        assert record.status == "assigned"
        assert record.channel_id == "ch-dh"
        assert topo.channels["ch-dh"].active_key_id == record.key_id
        status = km.channel_status("ch-dh")
        assert status["bound"] and status["epoch"] == 0

    def test_bind_is_idempotent(self):
        km, _, _ = make_manager()
        first = km.bind_channel("ch-qra")
        second = km.bind_channel("ch-qra")
        assert first.key_id == second.key_id

    def test_plain_channel_rejected(self):
        km, _, _ = make_manager()
        with pytest.raises(KmsError, match="carries no encryption"):
            km.bind_channel("ch-plain")

    def test_unknown_channel_rejected(self):
        km, _, _ = make_manager()
        with pytest.raises(KmsError, match="unknown channel"):
            km.bind_channel("ch-404")

    def test_active_key_requires_binding(self):
        km, _, _ = make_manager()
        with pytest.raises(KmsError, match="no bound key schedule"):
            km.active_key("ch-dh")

    def test_method_follows_security(self):
        km, _, _ = make_manager()
        for channel_id, method in (("ch-dh", "dh"), ("ch-qra", "qra"),
                                   ("ch-qkd1", "qkd")):
            assert km.bind_channel(channel_id).method == method


class TestRefresh:
    def test_thirty_seconds_of_epochs(self):
        km, clock, _ = make_manager()
        km.bind_channel("ch-dh")
        ids = {km.active_key("ch-dh").key_id}
        for _ in range(300):
            clock.advance(0.1)
            ids.add(km.active_key("ch-dh").key_id)
        # one key per 3 s epoch, plus the epoch-0 key
        assert len(ids) == int(clock.now() // 3.0) + 1
        status = km.channel_status("ch-dh")
        assert status["refresh_count"] == len(ids)
        assert status["retired_keys"] == len(ids) - 1

    def test_data_bound_per_key(self):
        km, _, _ = make_manager()
        km.bind_channel("ch-dh")
        # [DERIVED] 100 Gbps x 3 s refresh
        assert km.channel_status("ch-dh")["data_per_key_gb"] == 300.0

    def test_forced_refresh_changes_key(self):
        km, _, topo = make_manager()
        first = km.bind_channel("ch-dh")
        second = km.refresh_channel_key("ch-dh")
        assert second.key_id != first.key_id
        assert km.record(first.key_id).status == "retired"
        assert topo.channels["ch-dh"].active_key_id == second.key_id

    def test_retired_key_grace_window(self):
        km, clock, _ = make_manager()
        first = km.bind_channel("ch-dh")
        clock.advance(3.05)
        second = km.active_key("ch-dh")
        assert second.key_id != first.key_id
        # within 2x interval of retirement the old key still decrypts
        assert km.get_key(first.key_id, "card-cell1-dh") == first.material
        clock.advance(6.1)
        with pytest.raises(KmsError, match="retired beyond grace"):
            km.get_key(first.key_id, "card-cell1-dh")
        assert km.record(first.key_id).material == b""

    def test_failed_refresh_keeps_previous_key(self):
        topo = load_topology(packaged_data("testbed.topo.json"))
        clock = SimClock(time_scale=1e-7)
        # chain with exactly one relay's worth of material and ~zero rate
        chain = QkdChain("c", ["a", "b"], 1e-9, 32, 4, 1, 5, clock)
        km = KeyManager(topo, clock, 1, chain)
        first = km.bind_channel("ch-qkd1")
        again = km.refresh_channel_key("ch-qkd1")
        assert again.key_id == first.key_id
        assert km.record(first.key_id).status == "assigned"

    def test_bind_fails_cleanly_without_material(self):
        topo = load_topology(packaged_data("testbed.topo.json"))
        clock = SimClock(time_scale=1e-7)
        chain = QkdChain("c", ["a", "b"], 1e-9, 32, 4, 0, 5, clock)
        km = KeyManager(topo, clock, 1, chain)
        with pytest.raises(KmsError, match="qkd provider failed"):
            km.bind_channel("ch-qkd1")


class TestDelivery:
    def test_channel_endpoints_are_authorized(self):
        km, _, _ = make_manager()
        record = km.bind_channel("ch-dh")
        for requester in ("card-cell1-dh", "card-core1-dh", "kms-admin"):
            assert km.get_key(record.key_id, requester) == record.material

    def test_other_devices_are_rejected(self):
        km, _, _ = make_manager()
        record = km.bind_channel("ch-dh")
        with pytest.raises(KmsError, match="not authorized"):
            km.get_key(record.key_id, "eth-cell1")

    def test_unbound_keys_are_admin_only(self):
        km, _, _ = make_manager()
        record = km.produce_key("dh")
        assert km.get_key(record.key_id, "kms-admin") == record.material
        with pytest.raises(KmsError, match="not authorized"):
            km.get_key(record.key_id, "card-cell1-dh")

    def test_unknown_key_id(self):
        km, _, _ = make_manager()
        with pytest.raises(KmsError, match="unknown key id"):
            km.get_key("ff" * 16, "kms-admin")

    def test_status_of_unbound_channel(self):
        km, _, _ = make_manager()
        status = km.channel_status("ch-qra")
        assert status == {"channel_id": "ch-qra", "bound": False,
                          "security_method": "qra_aes"}
