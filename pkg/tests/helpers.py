"""Shared generators and fault injectors for the property and acceptance tests."""

import dataclasses

from hypothesis import strategies as st

from beran import bemutual as bm
from beran import crypto
from beran.crypto import BcAddress, Signature
from beran.ledger import Ledger, LedgerRejected, PhysicalAddress, make_binding

OP_KEYS = [crypto.generate_keypair("EllipticCurve", seed=f"ops-{i}".encode()) for i in range(6)]
OP_MACS = [PhysicalAddress.mac(bytes([2, 0, 0, 0, 0, i])) for i in range(4)]

operation = st.one_of(
    st.tuples(st.just("bind"), st.integers(0, len(OP_KEYS) - 1), st.integers(0, len(OP_MACS) - 1),
              st.integers(-1, 2)),
    st.tuples(st.just("delta"), st.integers(0, len(OP_KEYS) - 1), st.integers(-6, 6)),
    st.tuples(st.just("commit")),
)
operations = st.lists(operation, max_size=25)


def run_operations(ops, initial_balance=5):
    """Apply ``ops`` to a fresh ledger, ignoring rejected submissions; commits at the end."""
    ledger = Ledger({kp.bc_address: initial_balance for kp in OP_KEYS[:3]})
    rejected = 0
    for op in ops:
        try:
            if op[0] == "bind":
                _, k, m, bump = op
                kp = OP_KEYS[k]
                seq = ledger.index.sequences.get(kp.bc_address, -1) + bump
                if seq < 0:
                    continue
                ledger.submit_binding(make_binding(kp, OP_MACS[m], seq, len(ledger.chain)))
            elif op[0] == "delta":
                ledger.submit_balance_delta(OP_KEYS[op[1]].bc_address, op[2])
            else:
                ledger.commit_block()
        except LedgerRejected:
            rejected += 1
    ledger.commit_block()
    return ledger, rejected


# -- handshake tampering ---------------------------------------------------------

F = bm.FailureReason

# (message index, field, reason the receiver must report)
TAMPER_CASES = [
    (1, "trusted_peer_bc_address", F.FIELD_MISMATCH),
    (1, "sender_address", F.FIELD_MISMATCH),
    (1, "sender_public_key", F.ADDRESS_KEY_MISMATCH),
    (1, "nonce1", F.FIELD_MISMATCH),
    (1, "signed_sender_address", F.SIGNATURE_INVALID),
    (1, "signed_nonce1", F.SIGNATURE_INVALID),
    (1, "signature", F.SIGNATURE_INVALID),
    (2, "trusted_peer_bc_address", F.FIELD_MISMATCH),
    (2, "echoed_sender_address", F.FIELD_MISMATCH),
    (2, "responder_address", F.FIELD_MISMATCH),
    (2, "responder_public_key", F.ADDRESS_KEY_MISMATCH),
    (2, "nonce2", F.FIELD_MISMATCH),
    (2, "signed_sender_address", F.SIGNATURE_INVALID),
    (2, "signed_responder_address", F.SIGNATURE_INVALID),
    (2, "signed_nonce2", F.SIGNATURE_INVALID),
    (2, "signature", F.SIGNATURE_INVALID),
    (3, "peer_bc_address", F.DECRYPT_FAILED),
    (3, "verified_responder_address", F.DECRYPT_FAILED),
    (3, "sender_address", F.DECRYPT_FAILED),
    (3, "encrypted_key_material", F.DECRYPT_FAILED),
    (3, "suite", F.DECRYPT_FAILED),
]


def flip_bit(value, bit=0):
    """Return ``value`` with one bit flipped, whatever wire type it has."""
    if isinstance(value, (bytes, bytearray)):
        bit %= len(value) * 8
        out = bytearray(value)
        out[bit // 8] ^= 1 << (bit % 8)
        return bytes(out)
    if isinstance(value, BcAddress):
        return BcAddress(flip_bit(value.value, bit))
    if isinstance(value, PhysicalAddress):
        return PhysicalAddress(value.kind, flip_bit(value.value, bit))
    if isinstance(value, Signature):
        return Signature(value.suite, flip_bit(value.value, bit), value.labels)
    if isinstance(value, crypto.CryptoSuite):
        other = [s for s in crypto.SUITES.values() if s != value]
        return other[0]
    raise TypeError(type(value))


def tampered_run(alice, bob, step, field, bit=0):
    """Run a handshake with one field of message ``step`` mutated in flight.

    Returns (failure reason or None, initiator state, responder state).
    """
    a_state, m1 = bm.initiate(alice, bob.bc_address)
    b_state = None
    try:
        if step == 1:
            m1 = dataclasses.replace(m1, **{field: flip_bit(getattr(m1, field), bit)})
        b_state, m2 = bm.respond(bob, m1, alice.bc_address)
        if step == 2:
            m2 = dataclasses.replace(m2, **{field: flip_bit(getattr(m2, field), bit)})
        m3, _ = bm.confirm(a_state, m2)
        if step == 3:
            m3 = dataclasses.replace(m3, **{field: flip_bit(getattr(m3, field), bit)})
        bm.finalize(b_state, m3)
    except bm.HandshakeFailure as exc:
        return exc.reason, a_state, b_state
    return None, a_state, b_state
