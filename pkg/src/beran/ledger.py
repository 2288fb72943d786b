"""Append-only hash-chained registry of address bindings and token balances.

A single committer (the DU's BC node in the simulator) turns the pending
set into blocks. Indices are a pure fold over the chain, so any node can
rebuild them from an exported chain and must arrive at the same state.
"""

from __future__ import annotations

import enum
import ipaddress
import json
import struct
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from . import crypto
from .crypto import BcAddress, KeyPair, Signature

ZERO_HASH = bytes(32)


class AddressKind(enum.Enum):
    MAC48 = "Mac48"
    IPV6 = "Ipv6"

    @property
    def length(self) -> int:
        return 6 if self is AddressKind.MAC48 else 16

    @property
    def code(self) -> int:
        return 1 if self is AddressKind.MAC48 else 2


_KIND_BY_CODE = {k.code: k for k in AddressKind}


@dataclass(frozen=True, order=True)
class PhysicalAddress:
    kind: AddressKind
    value: bytes

    def __post_init__(self):
        if len(self.value) != self.kind.length:
            raise ValueError(f"{self.kind.value} address must be {self.kind.length} bytes")

    @classmethod
    def mac(cls, text) -> "PhysicalAddress":
        if isinstance(text, (bytes, bytearray)):
            return cls(AddressKind.MAC48, bytes(text))
        return cls(AddressKind.MAC48, bytes.fromhex(text.replace(":", "").replace("-", "")))

    @classmethod
    def ipv6(cls, text) -> "PhysicalAddress":
        if isinstance(text, (bytes, bytearray)):
            return cls(AddressKind.IPV6, bytes(text))
        return cls(AddressKind.IPV6, ipaddress.IPv6Address(text).packed)

    def encode(self) -> bytes:
        return bytes([self.kind.code]) + self.value

    @classmethod
    def decode(cls, data: bytes) -> "PhysicalAddress":
        if not data or data[0] not in _KIND_BY_CODE:
            raise ValueError("unknown physical address kind")
        return cls(_KIND_BY_CODE[data[0]], bytes(data[1:]))

    @property
    def bits(self) -> int:
        return len(self.value) * 8

    def __str__(self) -> str:
        if self.kind is AddressKind.MAC48:
            return ":".join(f"{b:02x}" for b in self.value)
        return str(ipaddress.IPv6Address(self.value))


# --------------------------------------------------------------------------
# binding records


BINDING_LABELS = ("bc_address", "physical_address", "sequence_number")


def binding_content(bc_address: BcAddress, physical: PhysicalAddress, sequence: int) -> list:
    return [bc_address.value, physical.encode(), sequence.to_bytes(8, "big")]


@dataclass(frozen=True)
class BindingRecord:
    bc_address: BcAddress
    physical_address: PhysicalAddress
    public_key: bytes
    signature: Signature
    sequence_number: int
    timestamp: int = 0

    def encode(self) -> bytes:
        return crypto.canonical([
            self.bc_address.value,
            self.physical_address.encode(),
            self.public_key,
            _SUITE_CODE[self.signature.suite.kind].to_bytes(1, "big") + self.signature.value,
            self.sequence_number.to_bytes(8, "big"),
            self.timestamp.to_bytes(8, "big"),
        ])

    def to_json(self) -> dict:
        return {
            "bc_address": self.bc_address.hex(),
            "physical_address": self.physical_address.encode().hex(),
            "public_key": self.public_key.hex(),
            "suite": self.signature.suite.kind.value,
            "signature": self.signature.value.hex(),
            "sequence_number": self.sequence_number,
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_json(cls, d: dict) -> "BindingRecord":
        suite = crypto.get_suite(d["suite"])
        return cls(
            bc_address=BcAddress.from_hex(d["bc_address"]),
            physical_address=PhysicalAddress.decode(bytes.fromhex(d["physical_address"])),
            public_key=bytes.fromhex(d["public_key"]),
            signature=Signature(suite, bytes.fromhex(d["signature"]), BINDING_LABELS),
            sequence_number=int(d["sequence_number"]),
            timestamp=int(d["timestamp"]),
        )


_SUITE_CODE = {crypto.SuiteKind.FINITE_FIELD: 1, crypto.SuiteKind.ELLIPTIC_CURVE: 2}
_SUITE_BY_CODE = {v: crypto.SUITES[k] for k, v in _SUITE_CODE.items()}


def make_binding(keypair: KeyPair, physical: PhysicalAddress, sequence: int, timestamp: int = 0) -> BindingRecord:
    """Sign a claim that ``keypair``'s BC address lives at ``physical``."""
    bc = crypto.derive_bc_address(keypair.public_key)
    sig = crypto.sign(keypair, binding_content(bc, physical, sequence), BINDING_LABELS)
    return BindingRecord(bc, physical, keypair.public_key, sig, sequence, timestamp)


class RejectReason(enum.Enum):
    ADDRESS_KEY_MISMATCH = "AddressKeyMismatch"
    BAD_SIGNATURE = "BadSignature"
    STALE_SEQUENCE = "StaleSequence"
    INSUFFICIENT_BALANCE = "InsufficientBalance"
    INVALID_CHAIN = "InvalidChain"
    NOT_LONGER = "NotLonger"


class LedgerRejected(Exception):
    def __init__(self, reason: RejectReason, detail: str = ""):
        super().__init__(f"{reason.value}{': ' + detail if detail else ''}")
        self.reason = reason


# --------------------------------------------------------------------------
# blocks


def _read_field(data: bytes, pos: int) -> Tuple[bytes, int]:
    if pos + 4 > len(data):
        raise ValueError("truncated field length")
    n = int.from_bytes(data[pos:pos + 4], "big")
    end = pos + 4 + n
    if end > len(data):
        raise ValueError("truncated field")
    return data[pos + 4:end], end


def _decode_record(data: bytes) -> BindingRecord:
    fields, pos = [], 0
    while pos < len(data):
        f, pos = _read_field(data, pos)
        fields.append(f)
    if len(fields) != 6:
        raise ValueError("binding record must have 6 fields")
    bc, phys, pk, sig, seq, ts = fields
    if not sig or sig[0] not in _SUITE_BY_CODE or len(seq) != 8 or len(ts) != 8:
        raise ValueError("malformed binding record")
    return BindingRecord(
        BcAddress(bc), PhysicalAddress.decode(phys), pk,
        Signature(_SUITE_BY_CODE[sig[0]], sig[1:], BINDING_LABELS),
        int.from_bytes(seq, "big"), int.from_bytes(ts, "big"),
    )


@dataclass(frozen=True)
class Block:
    height: int
    previous_hash: bytes
    records: Tuple[BindingRecord, ...]
    balance_deltas: Tuple[Tuple[BcAddress, int], ...]
    block_hash: bytes

    @staticmethod
    def body_bytes(height, previous_hash, records, balance_deltas) -> bytes:
        out = bytearray(struct.pack(">Q", height))
        out += previous_hash
        out += struct.pack(">I", len(records))
        for r in records:
            enc = r.encode()
            out += struct.pack(">I", len(enc)) + enc
        out += struct.pack(">I", len(balance_deltas))
        for addr, amount in balance_deltas:
            out += addr.value + struct.pack(">q", amount)
        return bytes(out)

    @classmethod
    def build(cls, height, previous_hash, records=(), balance_deltas=()) -> "Block":
        records, balance_deltas = tuple(records), tuple(balance_deltas)
        body = cls.body_bytes(height, previous_hash, records, balance_deltas)
        return cls(height, previous_hash, records, balance_deltas, _hash_body(body))

    @cached_property
    def body(self) -> bytes:
        return self.body_bytes(self.height, self.previous_hash, self.records, self.balance_deltas)

    @cached_property
    def computed_hash(self) -> bytes:
        return _hash_body(self.body)

    def to_bytes(self) -> bytes:
        return self.body + self.block_hash

    @classmethod
    def from_bytes(cls, data: bytes) -> "Block":
        """Strict decoder: anything that does not re-encode to ``data`` is rejected."""
        try:
            if len(data) < 8 + 32 + 4 + 4 + 32:
                raise ValueError("block too short")
            (height,) = struct.unpack_from(">Q", data, 0)
            prev = data[8:40]
            (n,) = struct.unpack_from(">I", data, 40)
            pos, records = 44, []
            for _ in range(n):
                (ln,) = struct.unpack_from(">I", data, pos)
                pos += 4
                if pos + ln > len(data):
                    raise ValueError("truncated record")
                records.append(_decode_record(data[pos:pos + ln]))
                pos += ln
            (m,) = struct.unpack_from(">I", data, pos)
            pos += 4
            deltas = []
            for _ in range(m):
                addr = BcAddress(data[pos:pos + 34])
                (amount,) = struct.unpack_from(">q", data, pos + 34)
                deltas.append((addr, amount))
                pos += 42
            block_hash = data[pos:]
            if len(block_hash) != 32:
                raise ValueError("bad block hash length")
        except struct.error as exc:
            raise ValueError(str(exc)) from None
        block = cls(height, prev, tuple(records), tuple(deltas), block_hash)
        if block.to_bytes() != data:
            raise ValueError("non-canonical block encoding")
        return block

    def to_line(self) -> str:
        return json.dumps({
            "height": self.height,
            "previous_hash": self.previous_hash.hex(),
            "records": [r.to_json() for r in self.records],
            "balance_deltas": [[a.hex(), amt] for a, amt in self.balance_deltas],
            "block_hash": self.block_hash.hex(),
        }, sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_line(cls, line: str) -> "Block":
        d = json.loads(line)
        return cls(
            int(d["height"]),
            bytes.fromhex(d["previous_hash"]),
            tuple(BindingRecord.from_json(r) for r in d["records"]),
            tuple((BcAddress.from_hex(a), int(amt)) for a, amt in d["balance_deltas"]),
            bytes.fromhex(d["block_hash"]),
        )


def _hash_body(body: bytes) -> bytes:
    return crypto.sha256(b"beran/block/v1", body)


def genesis_block(initial_balances: Optional[Dict[BcAddress, int]] = None) -> Block:
    deltas = sorted((initial_balances or {}).items())
    if any(amount < 0 for _, amount in deltas):
        raise ValueError("genesis balances must be non-negative")
    return Block.build(0, ZERO_HASH, (), deltas)


def verify_chain(chain: Sequence[Block]) -> Optional[int]:
    """Return None if every link and hash checks out, else the first bad height."""
    prev = None
    for i, block in enumerate(chain):
        if block.height != i:
            return i
        expected_prev = ZERO_HASH if prev is None else prev.block_hash
        if block.previous_hash != expected_prev:
            return i
        if block.computed_hash != block.block_hash:
            return i
        prev = block
    return None


def export_chain(chain: Iterable[Block]) -> str:
    return "".join(b.to_line() + "\n" for b in chain)


def import_chain(text: str) -> List[Block]:
    return [Block.from_line(line) for line in text.splitlines() if line.strip()]


# --------------------------------------------------------------------------
# indices


@dataclass
class LedgerIndex:
    bindings: Dict[BcAddress, BindingRecord] = field(default_factory=dict)
    reverse: Dict[PhysicalAddress, BcAddress] = field(default_factory=dict)
    sequences: Dict[BcAddress, int] = field(default_factory=dict)
    balances: Dict[BcAddress, int] = field(default_factory=dict)

    def copy(self) -> "LedgerIndex":
        return LedgerIndex(dict(self.bindings), dict(self.reverse), dict(self.sequences), dict(self.balances))

    def check_record(self, record: BindingRecord) -> None:
        if crypto.derive_bc_address(record.public_key) != record.bc_address:
            raise LedgerRejected(RejectReason.ADDRESS_KEY_MISMATCH)
        content = binding_content(record.bc_address, record.physical_address, record.sequence_number)
        if tuple(record.signature.labels) != BINDING_LABELS or not crypto.verify(
                record.public_key, record.signature, content):
            raise LedgerRejected(RejectReason.BAD_SIGNATURE)
        if record.sequence_number <= self.sequences.get(record.bc_address, -1):
            raise LedgerRejected(RejectReason.STALE_SEQUENCE)

    def apply_record(self, record: BindingRecord) -> None:
        bc, phys = record.bc_address, record.physical_address
        old = self.bindings.get(bc)
        if old is not None and self.reverse.get(old.physical_address) == bc:
            del self.reverse[old.physical_address]
        # a physical address has one owner; the previous owner loses its binding
        prev_owner = self.reverse.get(phys)
        if prev_owner is not None and prev_owner != bc:
            del self.bindings[prev_owner]
        self.reverse[phys] = bc
        self.bindings[bc] = record
        self.sequences[bc] = record.sequence_number

    def apply_delta(self, addr: BcAddress, amount: int) -> None:
        new = self.balances.get(addr, 0) + amount
        if new < 0:
            raise LedgerRejected(RejectReason.INSUFFICIENT_BALANCE)
        self.balances[addr] = new

    def apply_block(self, block: Block, validate: bool = False) -> None:
        for r in block.records:
            if validate:
                self.check_record(r)
            self.apply_record(r)
        for addr, amount in block.balance_deltas:
            self.apply_delta(addr, amount)

    @classmethod
    def fold(cls, chain: Sequence[Block], validate: bool = False) -> "LedgerIndex":
        idx = cls()
        for block in chain:
            idx.apply_block(block, validate=validate)
        return idx


# --------------------------------------------------------------------------
# the ledger


class Ledger:
    """One node's copy of the chain plus its derived indices.

    Single writer: ``submit_*``, ``commit_block`` and ``sync_from`` must not
    run concurrently with each other. Committed blocks are never mutated.
    """

    def __init__(self, initial_balances: Optional[Dict[BcAddress, int]] = None, chain: Optional[List[Block]] = None):
        imported = chain is not None
        if chain is None:
            chain = [genesis_block(initial_balances)]
        self._chain: List[Block] = list(chain)
        self.index = LedgerIndex.fold(self._chain, validate=imported)
        self._pending_records: List[BindingRecord] = []
        self._pending_deltas: List[Tuple[BcAddress, int]] = []
        # pending view: what the index would look like after the next commit
        self._pending_index = self.index.copy()

    @property
    def chain(self) -> Tuple[Block, ...]:
        return tuple(self._chain)

    @property
    def height(self) -> int:
        return self._chain[-1].height

    @property
    def pending(self) -> Tuple[BindingRecord, ...]:
        return tuple(self._pending_records)

    def submit_binding(self, record: BindingRecord) -> None:
        """Queue ``record`` for the next block or raise :class:`LedgerRejected`."""
        self._pending_index.check_record(record)
        self._pending_index.apply_record(record)
        self._pending_records.append(record)

    def submit_balance_delta(self, addr: BcAddress, amount: int) -> None:
        self._pending_index.apply_delta(addr, amount)
        self._pending_deltas.append((addr, amount))

    def commit_block(self) -> Block:
        tip = self._chain[-1]
        block = Block.build(tip.height + 1, tip.block_hash, self._pending_records, self._pending_deltas)
        self._chain.append(block)
        self.index.apply_block(block)
        self._pending_records, self._pending_deltas = [], []
        self._pending_index = self.index.copy()
        return block

    def lookup_by_bc(self, bc_address: BcAddress) -> Optional[PhysicalAddress]:
        rec = self.index.bindings.get(bc_address)
        return None if rec is None else rec.physical_address

    def lookup_by_phys(self, physical: PhysicalAddress) -> Optional[BcAddress]:
        return self.index.reverse.get(physical)

    def balance(self, bc_address: BcAddress) -> int:
        return self.index.balances.get(bc_address, 0)

    def is_registered(self, bc_address: BcAddress) -> bool:
        return bc_address in self.index.bindings

    def check_access(self, bc_address: BcAddress, minimum_balance: int) -> bool:
        if minimum_balance < 0:
            raise ValueError("minimum_balance must be >= 0")
        if not self.is_registered(bc_address):
            return False
        return self.balance(bc_address) >= minimum_balance

    def verify(self) -> Optional[int]:
        return verify_chain(self._chain)

    def sync_from(self, peer_chain: Sequence[Block]) -> None:
        """Adopt ``peer_chain`` if it is valid, shares our genesis and is strictly longer."""
        peer_chain = list(peer_chain)
        if not peer_chain or verify_chain(peer_chain) is not None:
            raise LedgerRejected(RejectReason.INVALID_CHAIN, "hash links do not verify")
        if peer_chain[0].block_hash != self._chain[0].block_hash:
            raise LedgerRejected(RejectReason.INVALID_CHAIN, "different genesis")
        if len(peer_chain) <= len(self._chain):
            raise LedgerRejected(RejectReason.NOT_LONGER)
        try:
            index = LedgerIndex.fold(peer_chain, validate=True)
        except LedgerRejected as exc:
            raise LedgerRejected(RejectReason.INVALID_CHAIN, str(exc)) from None
        self._chain = peer_chain
        self.index = index
        self._pending_records, self._pending_deltas = [], []
        self._pending_index = index.copy()

    def export(self) -> str:
        return export_chain(self._chain)

    @classmethod
    def from_export(cls, text: str) -> "Ledger":
        chain = import_chain(text)
        bad = verify_chain(chain)
        if bad is not None:
            raise LedgerRejected(RejectReason.INVALID_CHAIN, f"height {bad}")
        return cls(chain=chain)
