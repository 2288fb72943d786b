"""Blockchain-enabled L2 switch: BE MAC frames and ledger-backed forwarding.

Frame layout (big endian)::

    kind        1 byte   low 7 bits = FrameKind, top bit = destination MAC present
    dst BC ADD  34 bytes
    src BC ADD  34 bytes
    src MAC     6 bytes
    dst MAC     6 bytes  (only if the presence bit is set)
    length      2 bytes  payload length
    payload
    registry extension (Registry frames only):
        pk length 2 bytes, public key, suite 1 byte, signature 64 bytes, sequence 8 bytes
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from . import crypto
from .crypto import BcAddress, Signature
from .ledger import (
    BINDING_LABELS,
    BindingRecord,
    Block,
    Ledger,
    LedgerRejected,
    PhysicalAddress,
)

DEST_MAC_FLAG = 0x80
HEADER_LEN = 1 + 34 + 34 + 6 + 2

_SUITE_CODE = {crypto.SuiteKind.FINITE_FIELD: 1, crypto.SuiteKind.ELLIPTIC_CURVE: 2}
_SUITE_BY_CODE = {v: crypto.SUITES[k] for k, v in _SUITE_CODE.items()}


class FrameKind(enum.IntEnum):
    REGISTRY = 1
    CONNECT = 2
    DATA = 3
    CONTROL = 4


class MalformedFrame(ValueError):
    def __init__(self, reason: str, detail: str = ""):
        super().__init__(f"{reason}{': ' + detail if detail else ''}")
        self.reason = reason


@dataclass(frozen=True)
class RegistryExtension:
    public_key: bytes
    signature: Signature
    sequence_number: int


@dataclass(frozen=True)
class BeMacFrame:
    kind: FrameKind
    destination_bc_address: BcAddress
    source_bc_address: BcAddress
    source_mac: bytes
    destination_mac: Optional[bytes] = None
    payload: bytes = b""
    registry: Optional[RegistryExtension] = None

    def to_bytes(self) -> bytes:
        kind = int(self.kind) | (DEST_MAC_FLAG if self.destination_mac is not None else 0)
        out = bytearray([kind])
        out += self.destination_bc_address.value + self.source_bc_address.value + self.source_mac
        if self.destination_mac is not None:
            out += self.destination_mac
        out += struct.pack(">H", len(self.payload)) + self.payload
        if self.kind is FrameKind.REGISTRY:
            ext = self.registry
            out += struct.pack(">H", len(ext.public_key)) + ext.public_key
            out += bytes([_SUITE_CODE[ext.signature.suite.kind]]) + ext.signature.value
            out += struct.pack(">Q", ext.sequence_number)
        return bytes(out)

    def binding_record(self, timestamp: int = 0) -> BindingRecord:
        if self.kind is not FrameKind.REGISTRY or self.registry is None:
            raise ValueError("not a registry frame")
        return BindingRecord(self.source_bc_address, PhysicalAddress.mac(self.source_mac),
                             self.registry.public_key, self.registry.signature,
                             self.registry.sequence_number, timestamp)

    def with_destination_mac(self, mac: Optional[bytes]) -> "BeMacFrame":
        return BeMacFrame(self.kind, self.destination_bc_address, self.source_bc_address,
                          self.source_mac, mac, self.payload, self.registry)


def registry_frame(record: BindingRecord, destination: BcAddress) -> BeMacFrame:
    """Wrap a signed MAC binding in a Registry frame."""
    ext = RegistryExtension(record.public_key, record.signature, record.sequence_number)
    return BeMacFrame(FrameKind.REGISTRY, destination, record.bc_address,
                      record.physical_address.value, None, b"", ext)


def parse_frame(data: bytes) -> BeMacFrame:
    """Parse wire bytes; raises :class:`MalformedFrame` (TooShort, BadKind, LengthMismatch)."""
    data = bytes(data)
    if len(data) < 1:
        raise MalformedFrame("TooShort")
    kind_byte = data[0]
    try:
        kind = FrameKind(kind_byte & ~DEST_MAC_FLAG)
    except ValueError:
        raise MalformedFrame("BadKind", f"{kind_byte:#04x}") from None
    has_dst = bool(kind_byte & DEST_MAC_FLAG)
    need = HEADER_LEN + (6 if has_dst else 0)
    if len(data) < need:
        raise MalformedFrame("TooShort")
    dst = BcAddress(data[1:35])
    src = BcAddress(data[35:69])
    src_mac = data[69:75]
    pos = 75
    dst_mac = None
    if has_dst:
        dst_mac, pos = data[75:81], 81
    (plen,) = struct.unpack_from(">H", data, pos)
    pos += 2
    if pos + plen > len(data):
        raise MalformedFrame("LengthMismatch", "payload overruns frame")
    payload = data[pos:pos + plen]
    pos += plen
    ext = None
    if kind is FrameKind.REGISTRY:
        if pos + 2 > len(data):
            raise MalformedFrame("TooShort", "registry extension")
        (klen,) = struct.unpack_from(">H", data, pos)
        pos += 2
        end = pos + klen + 1 + crypto.SIGNATURE_LEN + 8
        if end > len(data):
            raise MalformedFrame("LengthMismatch", "registry extension overruns frame")
        pk = data[pos:pos + klen]
        suite = _SUITE_BY_CODE.get(data[pos + klen])
        if suite is None:
            raise MalformedFrame("BadKind", "unknown suite in registry extension")
        sig = data[pos + klen + 1:end - 8]
        (seq,) = struct.unpack_from(">Q", data, end - 8)
        ext = RegistryExtension(pk, Signature(suite, sig, BINDING_LABELS), seq)
        pos = end
    if pos != len(data):
        raise MalformedFrame("LengthMismatch", "trailing bytes")
    return BeMacFrame(kind, dst, src, src_mac, dst_mac, payload, ext)


def frame_hexline(tick: int, port: str, frame) -> str:
    """Golden-trace dump line: ``<tick> <port> <lowercase hex>``."""
    raw = frame.to_bytes() if isinstance(frame, BeMacFrame) else bytes(frame)
    return f"{tick} {port} {raw.hex()}"


def parse_hexline(line: str) -> Tuple[int, str, BeMacFrame]:
    tick, port, hexdata = line.split()
    return int(tick), port, parse_frame(bytes.fromhex(hexdata))


# --------------------------------------------------------------------------
# switching


@dataclass
class SwitchEntry:
    mac: bytes
    port: str
    last_seen: int = 0


@dataclass(frozen=True)
class Forward:
    action: str  # "deliver" | "bridge" | "drop"
    port: Optional[str] = None
    mac: Optional[bytes] = None
    reason: Optional[str] = None

    def __str__(self) -> str:
        if self.action == "drop":
            return f"drop:{self.reason}"
        return f"{self.action}:{self.port}"


class SwitchRejected(Exception):
    def __init__(self, reason: str, detail: str = ""):
        super().__init__(f"{reason}{': ' + detail if detail else ''}")
        self.reason = reason


class BeSwitch:
    """Switch table projected from a ledger; bindings become forwardable on commit."""

    def __init__(self, ledger: Ledger, bridge_ports: Sequence[str] = (), min_balance: Optional[int] = None):
        self.ledger = ledger
        self.bridge_ports: List[str] = list(bridge_ports)
        self.min_balance = min_balance
        self.entries: Dict[BcAddress, SwitchEntry] = {}
        self._pending: Dict[BcAddress, Tuple[bytes, str, int]] = {}

    def register_from_frame(self, frame: BeMacFrame, ingress_port: str, tick: int = 0) -> BindingRecord:
        """Hand the frame's binding to the BC node; the entry appears after the next commit."""
        if frame.kind is not FrameKind.REGISTRY or frame.registry is None:
            raise SwitchRejected("NotRegistryFrame")
        record = frame.binding_record(tick)
        try:
            self.ledger.submit_binding(record)
        except LedgerRejected as exc:
            raise SwitchRejected(exc.reason.value) from None
        self._pending[record.bc_address] = (frame.source_mac, ingress_port, tick)
        return record

    def on_commit(self, block: Block, tick: int = 0) -> None:
        for record in block.records:
            pending = self._pending.pop(record.bc_address, None)
            if pending is not None:
                mac, port, _ = pending
                self.entries[record.bc_address] = SwitchEntry(mac, port, tick)
        # keep the table a projection of the ledger (rebinds elsewhere evict entries)
        for bc in list(self.entries):
            phys = self.ledger.lookup_by_bc(bc)
            if phys is None or phys.value != self.entries[bc].mac:
                del self.entries[bc]

    def lookup(self, bc_address: BcAddress) -> Optional[SwitchEntry]:
        return self.entries.get(bc_address)

    def _entry_by_mac(self, mac: bytes) -> Optional[SwitchEntry]:
        for e in self.entries.values():
            if e.mac == mac:
                return e
        return None

    def forward(self, frame: BeMacFrame, ingress_port: Optional[str] = None, hops: int = 0, tick: int = 0) -> Forward:
        if frame.kind is FrameKind.REGISTRY:
            raise ValueError("registry frames are not forwarded")
        if self.min_balance is not None and not self.ledger.check_access(frame.source_bc_address, self.min_balance):
            # the source may live in another domain; only police locally known sources
            if frame.source_bc_address in self.entries or ingress_port not in self.bridge_ports:
                return Forward("drop", reason="AccessDenied")
        entry = self.entries.get(frame.destination_bc_address)
        if entry is None and frame.destination_mac is not None:
            entry = self._entry_by_mac(frame.destination_mac)
        if entry is not None:
            entry.last_seen = tick
            return Forward("deliver", entry.port, entry.mac)
        # no flooding; a frame that already crossed a bridge is never sent back
        if not self.bridge_ports or hops >= 1 or ingress_port in self.bridge_ports:
            return Forward("drop", reason="UnknownDestination")
        return Forward("bridge", self.bridge_ports[0])
