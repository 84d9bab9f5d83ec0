"""Framed data plane standing in for the encrypted 100G channels.

Frame layout (big-endian), header authenticated as AAD in mode 1:

    magic 'QSLC' | mode 1B | key_id 16B | seq 8B | nonce 12B | payload_len 4B
    | payload | tag 16B (mode 1 only)

Mode 0 is plaintext (key_id zero, no tag); mode 1 is AES-256-GCM with the
channel's current KMS key.  The nonce is a 4-byte per-port salt plus the
8-byte sequence number, so it never repeats under one key as long as the
sequence is monotonic, which the sender enforces.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field
from typing import Optional

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.ciphers.aead import AESGCM

from .clock import SimClock
from .errors import KmsError, QsliceError
from .kms import KeyManager
from .topology import Topology

MAGIC = b"QSLC"
MODE_PLAINTEXT = 0
MODE_AES256GCM = 1
HEADER_LEN = 4 + 1 + 16 + 8 + 12 + 4
TAG_LEN = 16


class FrameError(QsliceError):
    """Malformed frame or failed authentication."""


def port_salt(channel_id: str, port: int) -> bytes:
    return hashlib.sha256(f"{channel_id}:{port}".encode()).digest()[:4]


def _pack_header(mode: int, key_id: bytes, seq: int, nonce: bytes,
                 payload_len: int) -> bytes:
    return MAGIC + struct.pack(">B16sQ12sI", mode, key_id, seq, nonce, payload_len)


def encode_frame(payload: bytes, seq: int, salt: bytes,
                 key_id: Optional[str] = None,
                 key_material: Optional[bytes] = None) -> bytes:
    """Build one frame; encrypted iff key material is supplied."""
    if len(salt) != 4:
        raise FrameError("salt must be 4 bytes")
    nonce = salt + struct.pack(">Q", seq)
    if key_material is None:
        header = _pack_header(MODE_PLAINTEXT, b"\x00" * 16, seq, nonce,
                              len(payload))
        return header + payload
    if key_id is None:
        raise FrameError("key_id required in encrypted mode")
    key_id_bytes = bytes.fromhex(key_id)
    if len(key_id_bytes) != 16:
        raise FrameError("key_id must be 128 bits")
    header = _pack_header(MODE_AES256GCM, key_id_bytes, seq, nonce, len(payload))
    sealed = AESGCM(key_material).encrypt(nonce, payload, header)
    return header + sealed      # ciphertext || 16-byte tag


@dataclass(frozen=True)
class DecodedFrame:
    mode: int
    key_id: Optional[str]
    seq: int
    payload: bytes


def decode_frame(frame: bytes, key_lookup=None) -> DecodedFrame:
    """Parse and, for mode 1, authenticate and decrypt.

    ``key_lookup(key_id_hex) -> 32 bytes`` supplies the key; the tag is
    verified before any payload is released.
    """
    if len(frame) < HEADER_LEN or frame[:4] != MAGIC:
        raise FrameError("not a frame: bad magic or truncated header")
    header = frame[:HEADER_LEN]
    mode, key_id_bytes, seq, nonce, payload_len = struct.unpack(
        ">B16sQ12sI", header[4:])
    body = frame[HEADER_LEN:]
    if mode == MODE_PLAINTEXT:
        if len(body) != payload_len:
            raise FrameError("payload length mismatch")
        return DecodedFrame(mode, None, seq, body)
    if mode != MODE_AES256GCM:
        raise FrameError(f"unknown mode {mode}")
    if len(body) != payload_len + TAG_LEN:
        raise FrameError("payload/tag length mismatch")
    if key_lookup is None:
        raise FrameError("encrypted frame but no key lookup provided")
    key_id = key_id_bytes.hex()
    material = key_lookup(key_id)
    try:
        payload = AESGCM(material).decrypt(nonce, body, header)
    except InvalidTag:
        raise FrameError(f"authentication failed for key {key_id}") from None
    return DecodedFrame(mode, key_id, seq, payload)


@dataclass
class DeliveryReport:
    frames_sent: int = 0
    frames_delivered: int = 0
    decrypt_failures: int = 0
    bytes_delivered: int = 0
    key_ids: list[str] = field(default_factory=list)   # ordered, distinct

    @property
    def distinct_key_ids(self) -> int:
        return len(self.key_ids)


class ChannelDataPlane:
    """Sends frames across a channel between its two endpoint cards.

    The sender pulls the channel's current key from the KMS each frame (which
    is what drives refresh-epoch rollover during a stream); the receiver
    fetches by the key id carried in the frame header, exactly like the far
    encryptor would.
    """

    def __init__(self, topology: Topology, kms: KeyManager, clock: SimClock):
        self.topology = topology
        self.kms = kms
        self.clock = clock
        self._seq: dict[tuple[str, int], int] = {}

    def send_frames(self, channel_id: str, port: int = 0, count: int = 1,
                    payload: bytes = b"\x00" * 64,
                    pace_s: float = 0.0) -> DeliveryReport:
        channel = self.topology.channels.get(channel_id)
        if channel is None:
            raise FrameError(f"unknown channel '{channel_id}'")
        if not 0 <= port < len(channel.client_ports):
            raise FrameError(f"channel {channel_id} has no client port {port}")
        encrypted = channel.security_method != "none"
        near = channel.a_device_port.device_id
        far = channel.b_device_port.device_id
        salt = port_salt(channel_id, port)
        report = DeliveryReport()

        for _ in range(count):
            seq = self._seq.get((channel_id, port), 0)
            self._seq[(channel_id, port)] = seq + 1
            if encrypted:
                record = self.kms.active_key(channel_id)
                material = self.kms.get_key(record.key_id, requester=near)
                frame = encode_frame(payload, seq, salt, record.key_id, material)
                if record.key_id not in report.key_ids:
                    report.key_ids.append(record.key_id)
            else:
                frame = encode_frame(payload, seq, salt)
            report.frames_sent += 1
            try:
                decoded = decode_frame(
                    frame,
                    key_lookup=lambda kid: self.kms.get_key(kid, requester=far))
                if decoded.payload != payload:
                    raise FrameError("payload corrupted in flight")
                report.frames_delivered += 1
                report.bytes_delivered += len(decoded.payload)
            except (FrameError, KmsError):
                report.decrypt_failures += 1
            if pace_s > 0:
                self.clock.advance(pace_s)
        return report
