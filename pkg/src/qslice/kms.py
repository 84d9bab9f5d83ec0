"""Key management: provider-backed key production, per-channel refresh,
trusted-node relay, and delivery by key id.

Three provider families feed the cache.  Diffie-Hellman runs for real
(modular exponentiation over an RFC 3526 MODP group between two in-process
endpoints).  The quantum-resistant provider is a KEM interface shipped with a
seeded simulated KEM, so a lattice implementation can be dropped in without
touching the manager.  The QKD provider generates an end key from a seeded
QRNG and relays it across a section chain with one-time-pad hops through the
trusted nodes; no node ever stores the end key, and every section key is
consumed at most once.

Channel keys refresh on a fixed interval in simulated time.  Refresh is
evaluated lazily against the clock (no background thread): whenever a channel
is consulted, the key for the current refresh epoch is materialized if it is
not already.  Retired keys stay fetchable for a grace window so frames
in flight across a refresh boundary still decrypt; past the window the
material is zeroized and access fails.

Key material never appears in logs; lines carry key ids and methods only.
"""

from __future__ import annotations

import hashlib
import logging
import random
import threading
from dataclasses import dataclass
from typing import Optional

from .clock import SimClock
from .errors import KmsError
from .topology import Topology

log = logging.getLogger(__name__)

KEY_BYTES = 32

# RFC 3526 group 14: 2048-bit MODP prime, generator 2.
MODP_GROUP_14_P = int(
    "FFFFFFFFFFFFFFFFC90FDAA22168C234C4C6628B80DC1CD129024E088A67CC74"
    "020BBEA63B139B22514A08798E3404DDEF9519B3CD3A431B302B0A6DF25F1437"
    "4FE1356D6D51C245E485B576625E7EC6F44C42E9A637ED6B0BFF5CB6F406B7ED"
    "EE386BFB5A899FA5AE9F24117C4B1FE649286651ECE45B3DC2007CB8A163BF05"
    "98DA48361C55D39A69163FA8FD24CF5F83655D23DCA3AD961C62F356208552BB"
    "9ED529077096966D670C354E4ABC9804F1746C08CA18217C32905E462E36CE3B"
    "E39E772C180E86039B2783A2EC07A28FB5C55DF06F4C52C9DE2BCBF695581718"
    "3995497CEA956AE515D2261898FA051015728E5A8AACAA68FFFFFFFFFFFFFFFF",
    16,
)
MODP_GROUP_14_G = 2


@dataclass
class KeyRecord:
    key_id: str                      # 128-bit id, 32 hex chars
    method: str                      # dh | qra | qkd | combined
    material: bytes
    created_at: float
    channel_id: Optional[str] = None
    status: str = "available"        # available | assigned | retired
    retired_at: Optional[float] = None

    def __post_init__(self) -> None:
        if len(self.material) != KEY_BYTES and self.material != b"":
            raise KmsError(f"key {self.key_id}: material must be {KEY_BYTES} bytes")


def qrng_key(rng: random.Random) -> bytes:
    """32 bytes from the (seeded) entropy source standing in for the QRNG."""
    return rng.randbytes(KEY_BYTES)


@dataclass(frozen=True)
class DeliveredKey:
    material: bytes
    sections_consumed: int
    # ciphertext observed on each section, kept for the OTP algebra checks
    wire_values: tuple[bytes, ...] = ()


class QkdSection:
    """One QKD link of a chain.  Section keys come from a seeded stream and
    become available at the configured secret-key rate; the buffer holds at
    most ``buffer_cap`` unconsumed keys (production pauses when full).  The
    initial stock models a link that was running before the simulation
    starts."""

    def __init__(self, section_id: str, a_node: str, b_node: str, rate_bps: float,
                 key_bytes: int, buffer_cap: int, initial_fill: int,
                 rng_seed: int, clock: SimClock):
        if rate_bps <= 0:
            raise KmsError(f"section {section_id}: rate must be > 0")
        self.id = section_id
        self.a_node = a_node
        self.b_node = b_node
        self.secret_key_rate_bps = rate_bps
        self.key_bytes = key_bytes
        self.buffer_cap = buffer_cap
        self.initial_fill = min(initial_fill, buffer_cap)
        self._stream = random.Random(rng_seed)
        self._created_at = clock.now()
        self._clock = clock
        self._consumed = 0
        self._materialized: list[bytes] = []
        self.consumed_counts: dict[int, int] = {}   # key ordinal -> times drawn

    def _producible(self, now: float) -> int:
        by_rate = int((now - self._created_at) * self.secret_key_rate_bps
                      // (self.key_bytes * 8))
        total = self.initial_fill + by_rate
        return min(total, self._consumed + self.buffer_cap)

    def available(self) -> int:
        return self._producible(self._clock.now()) - self._consumed

    def draw(self) -> bytes:
        if self.available() < 1:
            raise KmsError(f"insufficient QKD key material on section {self.id}")
        ordinal = self._consumed
        while len(self._materialized) <= ordinal:
            self._materialized.append(self._stream.randbytes(self.key_bytes))
        self._consumed += 1
        self.consumed_counts[ordinal] = self.consumed_counts.get(ordinal, 0) + 1
        return self._materialized[ordinal]


class QkdChain:
    def __init__(self, chain_id: str, nodes: list[str], rate_bps: float,
                 key_bytes: int, buffer_cap: int, initial_fill: int,
                 seed: int, clock: SimClock):
        if len(nodes) < 2:
            raise KmsError(f"chain {chain_id}: need at least 2 nodes")
        self.id = chain_id
        self.nodes = list(nodes)
        self.trusted_nodes = list(nodes[1:-1])
        self.sections = [
            QkdSection(f"{chain_id}/{nodes[i]}--{nodes[i + 1]}",
                       nodes[i], nodes[i + 1], rate_bps, key_bytes, buffer_cap,
                       initial_fill, seed + 101 * i, clock)
            for i in range(len(nodes) - 1)
        ]


def relay_key(chain: QkdChain, end_key: bytes) -> DeliveredKey:
    """Carry ``end_key`` across the chain hop by hop.

    Each section transmits end_key XOR section_key; the trusted node strips
    the incoming pad and applies the outgoing one.  Only pads and wire values
    exist between the endpoints, so this function never hands the plaintext
    to an intermediate structure.
    """
    for section in chain.sections:
        if section.available() < 1:
            raise KmsError(f"insufficient QKD key material on section {section.id}")
    wire_values: list[bytes] = []
    carried = end_key
    for section in chain.sections:
        pad = section.draw()
        if len(pad) != len(carried):
            raise KmsError(f"section {section.id}: pad length mismatch")
        wire = bytes(a ^ b for a, b in zip(carried, pad))
        wire_values.append(wire)
        carried = bytes(a ^ b for a, b in zip(wire, pad))   # node recovers the key
    return DeliveredKey(carried, len(chain.sections), tuple(wire_values))


# -- providers ----------------------------------------------------------------

class DhProvider:
    """Classic finite-field Diffie-Hellman between two in-process endpoints."""

    method = "dh"

    def __init__(self, rng: random.Random,
                 p: int = MODP_GROUP_14_P, g: int = MODP_GROUP_14_G):
        self.rng = rng
        self.p = p
        self.g = g

    def produce(self) -> bytes:
        exp_bits = max(2, min(256, self.p.bit_length() - 2))
        a = self.rng.getrandbits(exp_bits) | 1
        b = self.rng.getrandbits(exp_bits) | 1
        pub_a = pow(self.g, a, self.p)
        pub_b = pow(self.g, b, self.p)
        shared_a = pow(pub_b, a, self.p)
        shared_b = pow(pub_a, b, self.p)
        if shared_a != shared_b:
            raise KmsError("dh endpoints disagree on shared secret")
        size = (self.p.bit_length() + 7) // 8
        return hashlib.sha256(shared_a.to_bytes(size, "big")).digest()


class SimulatedKemProvider:
    """Stand-in KEM with the encapsulate/decapsulate shape of a lattice KEM.

    Both sides derive SHA-256(public_key || ciphertext); a real NTRU-class
    implementation can replace this class without changing callers.
    """

    method = "qra"

    def __init__(self, rng: random.Random):
        self.rng = rng

    def produce(self) -> bytes:
        public_key = self.rng.randbytes(32)
        ciphertext = self.rng.randbytes(32)
        shared = hashlib.sha256(public_key + ciphertext).digest()
        return shared


class QkdProvider:
    method = "qkd"

    def __init__(self, chain: QkdChain, rng: random.Random):
        self.chain = chain
        self.rng = rng

    def produce(self) -> bytes:
        end_key = qrng_key(self.rng)
        delivered = relay_key(self.chain, end_key)
        if delivered.material != end_key:
            raise KmsError("relay delivered corrupted key material")
        return delivered.material


_METHOD_BY_SECURITY = {"dh_aes": "dh", "qra_aes": "qra", "qkd_aes": "qkd"}


@dataclass
class _ChannelBinding:
    channel_id: str
    method: str
    bound_at: float
    refresh_interval_s: float
    epoch: int = -1
    active_key_id: Optional[str] = None
    refresh_count: int = 0
    endpoints: tuple[str, str] = ("", "")


class KeyManager:
    """Cache of keys by id plus per-channel refresh state.

    Thread-safe: one lock guards the cache and bindings.  Refresh work is
    clock-driven and happens inside whichever call first observes that a
    channel's refresh epoch has advanced.
    """

    def __init__(self, topology: Topology, clock: SimClock, seed: int,
                 chain: QkdChain, refresh_interval_s: float = 3.0,
                 grace_factor: float = 2.0):
        self.topology = topology
        self.clock = clock
        self.chain = chain
        self.refresh_interval_s = refresh_interval_s
        self.grace_factor = grace_factor
        self._lock = threading.RLock()
        self._keys: dict[str, KeyRecord] = {}
        self._bindings: dict[str, _ChannelBinding] = {}
        self._id_rng = random.Random(seed ^ 0x1D)
        self.providers = {
            "dh": DhProvider(random.Random(seed ^ 0xD4)),
            "qra": SimulatedKemProvider(random.Random(seed ^ 0x9A)),
            "qkd": QkdProvider(chain, random.Random(seed ^ 0x4D)),
        }

    # -- key production ------------------------------------------------------

    def _new_key_id(self) -> str:
        while True:
            key_id = f"{self._id_rng.getrandbits(128):032x}"
            if key_id not in self._keys:
                return key_id

    def produce_key(self, method: str) -> KeyRecord:
        provider = self.providers.get(method)
        if provider is None:
            raise KmsError(f"no provider for method '{method}'")
        try:
            material = provider.produce()
        except KmsError as exc:
            raise KmsError(f"{method} provider failed: {exc}") from exc
        with self._lock:
            record = KeyRecord(self._new_key_id(), method, material,
                               self.clock.now())
            self._keys[record.key_id] = record
        log.info("produced %s key %s", method, record.key_id)
        return record

    def combine_keys(self, constituents: list[KeyRecord]) -> KeyRecord:
        if len(constituents) < 2:
            raise KmsError("combine_keys needs at least 2 constituents")
        for rec in constituents:
            if rec.status not in ("available", "assigned"):
                raise KmsError(f"key {rec.key_id} is {rec.status}, cannot combine")
        ordered = sorted(constituents, key=lambda r: (r.method, r.key_id))
        digest = hashlib.sha256(b"".join(r.material for r in ordered)).digest()
        with self._lock:
            record = KeyRecord(self._new_key_id(), "combined", digest,
                               self.clock.now())
            self._keys[record.key_id] = record
        return record

    # -- channel binding and refresh ------------------------------------------

    def bind_channel(self, channel_id: str) -> KeyRecord:
        """Attach a refresh schedule to an encrypted channel and produce the
        epoch-0 key.  Idempotent: rebinding an already-bound channel only
        brings its key up to date."""
        channel = self.topology.channels.get(channel_id)
        if channel is None:
            raise KmsError(f"unknown channel '{channel_id}'")
        if channel.security_method == "none":
            raise KmsError(f"channel {channel_id} carries no encryption")
        with self._lock:
            binding = self._bindings.get(channel_id)
            if binding is None:
                binding = _ChannelBinding(
                    channel_id=channel_id,
                    method=_METHOD_BY_SECURITY[channel.security_method],
                    bound_at=self.clock.now(),
                    refresh_interval_s=channel.refresh_interval_s or self.refresh_interval_s,
                    endpoints=(channel.a_device_port.device_id,
                               channel.b_device_port.device_id),
                )
                self._bindings[channel_id] = binding
        return self._ensure_epoch(channel_id)

    def _ensure_epoch(self, channel_id: str) -> KeyRecord:
        with self._lock:
            binding = self._bindings[channel_id]
            now = self.clock.now()
            epoch = int((now - binding.bound_at) // binding.refresh_interval_s)
            if epoch > binding.epoch or binding.active_key_id is None:
                record = self._refresh_locked(binding, epoch)
            else:
                record = self._keys[binding.active_key_id]
            return record

    def _refresh_locked(self, binding: _ChannelBinding, epoch: int) -> KeyRecord:
        previous_id = binding.active_key_id
        try:
            record = self.produce_key(binding.method)
        except KmsError:
            if previous_id is not None:
                log.error("refresh failed for %s; key %s stays active",
                          binding.channel_id, previous_id)
                return self._keys[previous_id]
            raise
        record.status = "assigned"
        record.channel_id = binding.channel_id
        if previous_id is not None:
            prior = self._keys[previous_id]
            prior.status = "retired"
            prior.retired_at = self.clock.now()
        binding.active_key_id = record.key_id
        binding.epoch = epoch
        binding.refresh_count += 1
        self.topology.channels[binding.channel_id].active_key_id = record.key_id
        log.info("channel %s epoch %d key %s (%s)", binding.channel_id, epoch,
                 record.key_id, binding.method)
        return record

    def refresh_channel_key(self, channel_id: str) -> KeyRecord:
        """Force one refresh now, outside the epoch schedule."""
        with self._lock:
            if channel_id not in self._bindings:
                self.bind_channel(channel_id)
            binding = self._bindings[channel_id]
            return self._refresh_locked(binding, binding.epoch)

    def active_key(self, channel_id: str) -> KeyRecord:
        with self._lock:
            if channel_id not in self._bindings:
                raise KmsError(f"channel '{channel_id}' has no bound key schedule")
        return self._ensure_epoch(channel_id)

    # -- delivery --------------------------------------------------------------

    def _grace_s(self, binding_interval: float) -> float:
        return self.grace_factor * binding_interval

    def get_key(self, key_id: str, requester: str) -> bytes:
        with self._lock:
            record = self._keys.get(key_id)
            if record is None:
                raise KmsError(f"unknown key id '{key_id}'")
            if record.channel_id is not None:
                binding = self._bindings.get(record.channel_id)
                allowed = set(binding.endpoints) if binding else set()
                allowed.add("kms-admin")
                if requester not in allowed:
                    raise KmsError(
                        f"requester '{requester}' not authorized for key {key_id}")
                if record.status == "retired":
                    interval = binding.refresh_interval_s if binding \
                        else self.refresh_interval_s
                    age = self.clock.now() - (record.retired_at or 0.0)
                    if age > self._grace_s(interval):
                        record.material = b""
                        raise KmsError(
                            f"key {key_id} retired beyond grace window")
            elif requester != "kms-admin":
                raise KmsError(
                    f"requester '{requester}' not authorized for key {key_id}")
            return record.material

    def channel_status(self, channel_id: str) -> dict:
        channel = self.topology.channels.get(channel_id)
        if channel is None:
            raise KmsError(f"unknown channel '{channel_id}'")
        with self._lock:
            binding = self._bindings.get(channel_id)
            if binding is None:
                return {"channel_id": channel_id, "bound": False,
                        "security_method": channel.security_method}
            record = self._ensure_epoch(channel_id)
            retired = [k for k in self._keys.values()
                       if k.channel_id == channel_id and k.status == "retired"]
            return {
                "channel_id": channel_id,
                "bound": True,
                "security_method": channel.security_method,
                "method": binding.method,
                "active_key_id": record.key_id,
                "epoch": binding.epoch,
                "refresh_interval_s": binding.refresh_interval_s,
                "refresh_count": binding.refresh_count,
                "retired_keys": len(retired),
                "data_per_key_gb": channel.line_rate_gbps * binding.refresh_interval_s,
            }

    def record(self, key_id: str) -> KeyRecord:
        with self._lock:
            record = self._keys.get(key_id)
            if record is None:
                raise KmsError(f"unknown key id '{key_id}'")
            return record
