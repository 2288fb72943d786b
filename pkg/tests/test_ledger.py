import dataclasses

import pytest
from hypothesis import given, settings

from beran import crypto
from beran.ledger import (
    Block,
    Ledger,
    LedgerIndex,
    LedgerRejected,
    PhysicalAddress,
    RejectReason,
    ZERO_HASH,
    export_chain,
    import_chain,
    make_binding,
    verify_chain,
)
from conftest import mac
from helpers import operations, run_operations


@pytest.fixture(scope="module")
def ids():
    return [crypto.generate_keypair("EllipticCurve", seed=f"ledger-{i}".encode()) for i in range(4)]


def fresh(ids, balance=10):
    return Ledger({kp.bc_address: balance for kp in ids})


def rejected_reason(ledger, record):
    with pytest.raises(LedgerRejected) as info:
        ledger.submit_binding(record)
    return info.value.reason


def test_physical_address_lengths():
    assert PhysicalAddress.mac("02:00:00:00:00:01").bits == 48
    assert PhysicalAddress.ipv6("fe80::1").bits == 128
    with pytest.raises(ValueError):
        PhysicalAddress.mac(b"\x00" * 5)
    a = PhysicalAddress.ipv6("2001:db8::7")
    assert PhysicalAddress.decode(a.encode()) == a
    assert str(a) == "2001:db8::7"


def test_genesis_block():
    led = Ledger()
    g = led.chain[0]
    assert (g.height, g.previous_hash, g.records) == (0, ZERO_HASH, ())
    assert led.verify() is None


def test_fresh_binding_accepted(ids):
    led = fresh(ids)
    rec = make_binding(ids[0], mac(1), 0)
    led.submit_binding(rec)
    assert led.pending == (rec,)
    assert led.lookup_by_bc(ids[0].bc_address) is None  # not before commit
    led.commit_block()
    assert led.lookup_by_bc(ids[0].bc_address) == mac(1)


def test_public_key_of_other_address_rejected(ids):
    led = fresh(ids)
    rec = make_binding(ids[0], mac(1), 0)
    swapped = dataclasses.replace(rec, public_key=ids[1].public_key)
    assert rejected_reason(led, swapped) is RejectReason.ADDRESS_KEY_MISMATCH


def test_bad_signature_rejected(ids):
    led = fresh(ids)
    rec = make_binding(ids[0], mac(1), 0)
    sig = rec.signature
    corrupted = dataclasses.replace(rec, signature=crypto.Signature(sig.suite, bytes([sig.value[0] ^ 1]) + sig.value[1:],
                                                                  sig.labels))
    assert rejected_reason(led, corrupted) is RejectReason.BAD_SIGNATURE
    # the sequence number is covered by the signature, so it cannot be bumped by a third party
    bumped = dataclasses.replace(rec, sequence_number=5)
    assert rejected_reason(led, bumped) is RejectReason.BAD_SIGNATURE


def test_replayed_record_is_stale(ids):
    led = fresh(ids)
    rec = make_binding(ids[0], mac(1), 0)
    led.submit_binding(rec)
    led.commit_block()
    assert rejected_reason(led, rec) is RejectReason.STALE_SEQUENCE
    # also within the same pending block
    rec1 = make_binding(ids[0], mac(2), 1)
    led.submit_binding(rec1)
    assert rejected_reason(led, rec1) is RejectReason.STALE_SEQUENCE


def test_empty_commit(ids):
    led = fresh(ids)
    block = led.commit_block()
    assert block.records == () and block.height == 1
    assert block.previous_hash == led.chain[0].block_hash


def test_commit_two_bindings(ids):
    led = fresh(ids)
    led.submit_binding(make_binding(ids[0], mac(1), 0))
    led.submit_binding(make_binding(ids[1], mac(2), 0))
    block = led.commit_block()
    assert len(block.records) == 2
    assert led.lookup_by_bc(ids[0].bc_address) == mac(1)
    assert led.lookup_by_bc(ids[1].bc_address) == mac(2)
    assert led.lookup_by_phys(mac(2)) == ids[1].bc_address
    assert led.pending == ()


def test_ten_commits_verify(ids):
    led = fresh(ids)
    for i in range(10):
        led.submit_binding(make_binding(ids[i % 4], mac(i), i // 4))
        led.commit_block()
    assert led.height == 10
    assert verify_chain(led.chain) is None


def test_later_binding_wins(ids):
    led = fresh(ids)
    led.submit_binding(make_binding(ids[0], mac(1), 0))
    led.commit_block()
    led.submit_binding(make_binding(ids[0], mac(2), 1))
    led.commit_block()
    assert led.lookup_by_bc(ids[0].bc_address) == mac(2)
    assert led.lookup_by_phys(mac(1)) is None


def test_unregistered_lookups(ids):
    led = fresh(ids)
    assert led.lookup_by_bc(crypto.generate_keypair("ec").bc_address) is None
    assert led.lookup_by_phys(mac(77)) is None


def test_mac_rebound_to_new_owner(ids):
    led = fresh(ids)
    led.submit_binding(make_binding(ids[0], mac(1), 0))
    led.commit_block()
    led.submit_binding(make_binding(ids[1], mac(1), 0))
    led.commit_block()
    assert led.lookup_by_phys(mac(1)) == ids[1].bc_address
    assert led.lookup_by_bc(ids[0].bc_address) is None
    # the evicted owner keeps its sequence, so old records stay stale
    assert led.index.sequences[ids[0].bc_address] == 0


def _chain_with_records(ids, n=6):
    led = fresh(ids)
    for i in range(n):
        led.submit_binding(make_binding(ids[i % 4], mac(i), i // 4))
        led.commit_block()
    return list(led.chain)


def test_record_byte_mutation_in_block_3(ids):
    chain = _chain_with_records(ids)
    raw = bytearray(chain[3].to_bytes())
    # a byte inside the first record's public key field
    offset = 44 + 4 + 4 + 34 + 4 + 7 + 4 + 5
    raw[offset] ^= 0x40
    chain[3] = Block.from_bytes(bytes(raw))
    assert verify_chain(chain) == 3


def test_swapped_blocks(ids):
    chain = _chain_with_records(ids)
    chain[2], chain[4] = chain[4], chain[2]
    assert verify_chain(chain) == 2


def test_block_bytes_round_trip(ids):
    for block in _chain_with_records(ids):
        assert Block.from_bytes(block.to_bytes()) == block
        assert Block.from_line(block.to_line()) == block
    with pytest.raises(ValueError):
        Block.from_bytes(b"\x00" * 10)


def test_export_import(ids):
    chain = _chain_with_records(ids)
    text = export_chain(chain)
    assert import_chain(text) == chain
    assert all(line.startswith("{") for line in text.splitlines())
    restored = Ledger.from_export(text)
    assert restored.index == LedgerIndex.fold(chain)


def test_import_rejects_tampered_export(ids):
    text = export_chain(_chain_with_records(ids))
    lines = text.splitlines()
    tampered = lines[2].replace('"timestamp":0', '"timestamp":9')
    assert tampered != lines[2]
    lines[2] = tampered
    with pytest.raises(LedgerRejected):
        Ledger.from_export("\n".join(lines))


def test_check_access(ids):
    led = Ledger({ids[0].bc_address: 10, ids[1].bc_address: 0})
    for kp in ids[:2]:
        led.submit_binding(make_binding(kp, mac(ids.index(kp)), 0))
    led.commit_block()
    assert led.check_access(ids[0].bc_address, 5)
    assert not led.check_access(ids[1].bc_address, 1)
    assert led.check_access(ids[1].bc_address, 0)
    # funded but never registered
    assert not Ledger({ids[2].bc_address: 10}).check_access(ids[2].bc_address, 0)
    with pytest.raises(ValueError):
        led.check_access(ids[0].bc_address, -1)


@settings(max_examples=50)
@given(ops=operations)
def test_check_access_is_monotone(ops):
    led, _ = run_operations(ops)
    for bc in led.index.balances:
        allowed = [led.check_access(bc, t) for t in range(0, 12)]
        # once denied, denied for every higher threshold
        assert allowed == sorted(allowed, reverse=True)


def test_balance_cannot_go_negative(ids):
    led = fresh(ids, balance=3)
    with pytest.raises(LedgerRejected) as info:
        led.submit_balance_delta(ids[0].bc_address, -4)
    assert info.value.reason is RejectReason.INSUFFICIENT_BALANCE
    led.submit_balance_delta(ids[0].bc_address, -3)
    led.commit_block()
    assert led.balance(ids[0].bc_address) == 0


def test_sync_longer_chain(ids):
    a, b = fresh(ids), fresh(ids)
    a.submit_binding(make_binding(ids[0], mac(1), 0))
    a.commit_block()
    b.sync_from(a.chain)
    assert b.chain == a.chain
    assert b.lookup_by_bc(ids[0].bc_address) == mac(1)


def test_sync_broken_link(ids):
    a, b = fresh(ids), fresh(ids)
    a.commit_block()
    a.commit_block()
    chain = list(a.chain)
    chain[1] = dataclasses.replace(chain[1], previous_hash=b"\x11" * 32)
    with pytest.raises(LedgerRejected) as info:
        b.sync_from(chain)
    assert info.value.reason is RejectReason.INVALID_CHAIN
    assert b.height == 0


def test_sync_shorter_or_equal(ids):
    a, b = fresh(ids), fresh(ids)
    b.commit_block()
    for peer in (a.chain, b.chain):
        with pytest.raises(LedgerRejected) as info:
            b.sync_from(peer)
        assert info.value.reason is RejectReason.NOT_LONGER


def test_sync_rejects_other_genesis(ids):
    a = Ledger({ids[0].bc_address: 1})
    a.commit_block()
    with pytest.raises(LedgerRejected) as info:
        Ledger().sync_from(a.chain)
    assert info.value.reason is RejectReason.INVALID_CHAIN


def test_sync_revalidates_records(ids):
    a, b = fresh(ids), fresh(ids)
    rec = make_binding(ids[0], mac(1), 0)
    forged = dataclasses.replace(rec, public_key=ids[1].public_key)
    # a forged record inside a correctly hash-linked chain
    blk = Block.build(1, a.chain[0].block_hash, [forged])
    with pytest.raises(LedgerRejected) as info:
        b.sync_from([a.chain[0], blk])
    assert info.value.reason is RejectReason.INVALID_CHAIN


@settings(max_examples=100)
@given(ops=operations)
def test_rebuild_equals_incremental(ops):
    led, _ = run_operations(ops)
    assert LedgerIndex.fold(led.chain, validate=True) == led.index
    assert Ledger(chain=list(led.chain)).index == led.index


@settings(max_examples=100)
@given(ops=operations)
def test_lookups_are_inverse(ops):
    led, _ = run_operations(ops)
    for bc, record in led.index.bindings.items():
        assert led.lookup_by_phys(record.physical_address) == bc
    for phys, bc in led.index.reverse.items():
        assert led.lookup_by_bc(bc) == phys


@settings(max_examples=50)
@given(ops=operations)
def test_committed_prefix_is_stable(ops):
    led, _ = run_operations(ops[: len(ops) // 2])
    prefix = [b.to_bytes() for b in led.chain]
    for op in ops[len(ops) // 2:]:
        if op[0] == "commit":
            led.commit_block()
    assert [b.to_bytes() for b in led.chain[: len(prefix)]] == prefix
