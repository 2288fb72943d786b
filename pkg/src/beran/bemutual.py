"""Three-message certificateless mutual authentication (BeMutual).

::

    A -> B  AuthRequest       {BC_B, ADD_A, PK_A, nonce1, sig_A(ADD_A, nonce1)}
    B -> A  AuthResponse      {BC_A, ADD_A, ADD_B, PK_B, nonce2, sig_B(ADD_A, ADD_B, nonce2)}
    A -> B  SessionKeyConfirm {BC_B, ADD_B, ADD_A, Enc_PK_B(key material)}

Each side trusts the peer's BC address beforehand (contact list), checks
that the presented public key hashes to it, verifies the signature and
compares the signed copies of the fields with the plaintext ones. The
session key is ``H(domain || key_material || nonce1 || nonce2)``.

Signed fields travel alongside the signature (the receiver compares them
with the plaintext copies), so the accounted size of a signature
(``CodecMode.PAPER``) is the size of its signed content.
"""

from __future__ import annotations

import enum
import os
import struct
from collections import Counter, OrderedDict
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Tuple, Union

from . import crypto
from .crypto import BcAddress, CryptoSuite, KeyPair, Signature
from .ledger import PhysicalAddress

REPLAY_WINDOW = 1024

REQUEST_LABELS = ("sender_address", "nonce1")
RESPONSE_LABELS = ("sender_address", "responder_address", "nonce2")


class Role(enum.Enum):
    INITIATOR = "Initiator"
    RESPONDER = "Responder"


class Phase(enum.Enum):
    IDLE = "Idle"
    AWAITING_RESPONSE = "AwaitingResponse"
    AWAITING_CONFIRM = "AwaitingConfirm"
    ESTABLISHED = "Established"
    FAILED = "Failed"


class FailureReason(enum.Enum):
    ADDRESS_KEY_MISMATCH = "AddressKeyMismatch"
    SIGNATURE_INVALID = "SignatureInvalid"
    FIELD_MISMATCH = "FieldMismatch"
    NONCE_REPLAY = "NonceReplay"
    WRONG_PHASE = "WrongPhase"
    DECRYPT_FAILED = "DecryptFailed"
    MALFORMED = "Malformed"


class HandshakeFailure(Exception):
    def __init__(self, reason: FailureReason, detail: str = ""):
        super().__init__(f"{reason.value}{': ' + detail if detail else ''}")
        self.reason = reason


# --------------------------------------------------------------------------
# messages


@dataclass(frozen=True)
class AuthRequest:
    trusted_peer_bc_address: BcAddress
    sender_address: PhysicalAddress
    sender_public_key: bytes
    nonce1: bytes
    signed_sender_address: PhysicalAddress
    signed_nonce1: bytes
    signature: Signature

    def signed_content(self):
        return [self.signed_sender_address.encode(), self.signed_nonce1]


@dataclass(frozen=True)
class AuthResponse:
    trusted_peer_bc_address: BcAddress
    echoed_sender_address: PhysicalAddress
    responder_address: PhysicalAddress
    responder_public_key: bytes
    nonce2: bytes
    signed_sender_address: PhysicalAddress
    signed_responder_address: PhysicalAddress
    signed_nonce2: bytes
    signature: Signature

    def signed_content(self):
        return [self.signed_sender_address.encode(), self.signed_responder_address.encode(), self.signed_nonce2]


@dataclass(frozen=True)
class SessionKeyConfirm:
    peer_bc_address: BcAddress
    verified_responder_address: PhysicalAddress
    sender_address: PhysicalAddress
    encrypted_key_material: bytes
    suite: CryptoSuite = crypto.ELLIPTIC_CURVE


Message = Union[AuthRequest, AuthResponse, SessionKeyConfirm]


@dataclass(frozen=True)
class SessionKey:
    bits: bytes
    peer_bc_address: BcAddress
    established_at: int = 0

    def fingerprint(self) -> str:
        return crypto.sha256(b"beran/fp", self.bits)[:8].hex()


# --------------------------------------------------------------------------
# parties and state


@dataclass(eq=False)
class Party:
    """A node's long-term identity plus its per-peer replay window."""

    keypair: KeyPair
    address: PhysicalAddress
    randbytes: Callable[[int], bytes] = os.urandom
    replay_window: int = REPLAY_WINDOW
    bc_address: BcAddress = field(init=False)
    _seen: Dict[BcAddress, "OrderedDict[bytes, None]"] = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        self.bc_address = crypto.derive_bc_address(self.keypair.public_key)

    @property
    def suite(self) -> CryptoSuite:
        return self.keypair.suite

    def seen(self, peer: BcAddress, nonce: bytes) -> bool:
        return nonce in self._seen.get(peer, ())

    def remember(self, peer: BcAddress, nonce: bytes) -> None:
        window = self._seen.setdefault(peer, OrderedDict())
        window[nonce] = None
        while len(window) > self.replay_window:
            window.popitem(last=False)


@dataclass(eq=False)
class HandshakeState:
    role: Role
    party: Party
    trusted_peer: BcAddress
    phase: Phase = Phase.IDLE
    nonce1: Optional[bytes] = None
    nonce2: Optional[bytes] = None
    peer_address: Optional[PhysicalAddress] = None
    peer_public_key: Optional[bytes] = None
    session_key: Optional[SessionKey] = None
    failure: Optional[FailureReason] = None
    peer_verified: bool = False

    def fail(self, reason: FailureReason, detail: str = "") -> HandshakeFailure:
        self.phase = Phase.FAILED
        self.failure = reason
        self.session_key = None
        return HandshakeFailure(reason, detail)

    def _require(self, phase: Phase) -> None:
        if self.phase is not phase:
            raise HandshakeFailure(FailureReason.WRONG_PHASE, f"in {self.phase.value}, expected {phase.value}")


def derive_session_key(key_material: bytes, nonce1: bytes, nonce2: bytes) -> bytes:
    return crypto.sha256(b"beran/session/v1", key_material, nonce1, nonce2)


def _confirm_aad(peer_bc: BcAddress, responder: PhysicalAddress, sender: PhysicalAddress,
                 nonce1: bytes, nonce2: bytes) -> bytes:
    return crypto.canonical([peer_bc.value, responder.encode(), sender.encode(), nonce1, nonce2])


# --------------------------------------------------------------------------
# protocol steps


def initiate(party: Party, trusted_peer: BcAddress, ledger=None) -> Tuple[HandshakeState, AuthRequest]:
    """Step 1: build the AuthRequest for ``trusted_peer``.

    If a ``ledger`` view is given, our own binding must already be on it.
    """
    if ledger is not None and ledger.lookup_by_bc(party.bc_address) != party.address:
        raise ValueError("own identity is not registered on the local ledger view")
    nonce1 = crypto.new_nonce(party.randbytes)
    sig = crypto.sign(party.keypair, [party.address.encode(), nonce1], REQUEST_LABELS)
    request = AuthRequest(trusted_peer, party.address, party.keypair.public_key, nonce1,
                          party.address, nonce1, sig)
    state = HandshakeState(Role.INITIATOR, party, trusted_peer, Phase.AWAITING_RESPONSE, nonce1=nonce1)
    return state, request


def respond(party: Party, request: AuthRequest, expected_peer: BcAddress) -> Tuple[HandshakeState, AuthResponse]:
    """Step 2: authenticate the initiator and answer with our own signed claim."""
    state = HandshakeState(Role.RESPONDER, party, expected_peer)
    if request.trusted_peer_bc_address != party.bc_address:
        raise state.fail(FailureReason.FIELD_MISMATCH, "request is addressed to another BC address")
    if crypto.derive_bc_address(request.sender_public_key) != expected_peer:
        raise state.fail(FailureReason.ADDRESS_KEY_MISMATCH)
    if (request.signature.labels != REQUEST_LABELS
            or not crypto.verify(request.sender_public_key, request.signature, request.signed_content())):
        raise state.fail(FailureReason.SIGNATURE_INVALID)
    if request.signed_nonce1 != request.nonce1 or request.signed_sender_address != request.sender_address:
        raise state.fail(FailureReason.FIELD_MISMATCH, "plaintext and signed fields differ")
    if len(request.nonce1) != crypto.NONCE_LEN:
        raise state.fail(FailureReason.MALFORMED, "nonce length")
    if party.seen(expected_peer, request.nonce1):
        raise state.fail(FailureReason.NONCE_REPLAY)
    party.remember(expected_peer, request.nonce1)

    nonce2 = crypto.new_nonce(party.randbytes)
    sig = crypto.sign(party.keypair, [request.sender_address.encode(), party.address.encode(), nonce2],
                      RESPONSE_LABELS)
    response = AuthResponse(expected_peer, request.sender_address, party.address, party.keypair.public_key,
                            nonce2, request.sender_address, party.address, nonce2, sig)
    state.phase = Phase.AWAITING_CONFIRM
    state.nonce1, state.nonce2 = request.nonce1, nonce2
    state.peer_address = request.sender_address
    state.peer_public_key = request.sender_public_key
    return state, response


def verify_response(state: HandshakeState, response: AuthResponse) -> None:
    """The checking half of step 3 (everything before key material is chosen)."""
    state._require(Phase.AWAITING_RESPONSE)
    if state.peer_verified:
        raise HandshakeFailure(FailureReason.WRONG_PHASE, "response already accepted")
    party = state.party
    if response.trusted_peer_bc_address != party.bc_address:
        raise state.fail(FailureReason.FIELD_MISMATCH, "response is addressed to another BC address")
    if crypto.derive_bc_address(response.responder_public_key) != state.trusted_peer:
        raise state.fail(FailureReason.ADDRESS_KEY_MISMATCH)
    if (response.signature.labels != RESPONSE_LABELS
            or not crypto.verify(response.responder_public_key, response.signature, response.signed_content())):
        raise state.fail(FailureReason.SIGNATURE_INVALID)
    if (response.signed_responder_address != response.responder_address
            or response.signed_nonce2 != response.nonce2
            or response.signed_sender_address != response.echoed_sender_address
            or response.echoed_sender_address != party.address):
        raise state.fail(FailureReason.FIELD_MISMATCH, "plaintext and signed fields differ")
    if len(response.nonce2) != crypto.NONCE_LEN:
        raise state.fail(FailureReason.MALFORMED, "nonce length")
    if party.seen(state.trusted_peer, response.nonce2):
        raise state.fail(FailureReason.NONCE_REPLAY)
    party.remember(state.trusted_peer, response.nonce2)
    state.nonce2 = response.nonce2
    state.peer_address = response.responder_address
    state.peer_public_key = response.responder_public_key
    state.peer_verified = True


def send_confirm(state: HandshakeState, tick: int = 0) -> Tuple[SessionKeyConfirm, SessionKey]:
    """The sending half of step 3: choose key material and encrypt it to PK_B."""
    state._require(Phase.AWAITING_RESPONSE)
    if not state.peer_verified:
        raise HandshakeFailure(FailureReason.WRONG_PHASE, "response not verified yet")
    party = state.party
    key_material = party.randbytes(32)
    aad = _confirm_aad(state.trusted_peer, state.peer_address, party.address, state.nonce1, state.nonce2)
    ciphertext = crypto.encapsulate(party.suite, state.peer_public_key, key_material, aad, party.randbytes)
    crypto._tally("kdf")
    key = SessionKey(derive_session_key(key_material, state.nonce1, state.nonce2), state.trusted_peer, tick)
    state.session_key = key
    state.phase = Phase.ESTABLISHED
    msg = SessionKeyConfirm(state.trusted_peer, state.peer_address, party.address, ciphertext, party.suite)
    return msg, key


def confirm(state: HandshakeState, response: AuthResponse, tick: int = 0) -> Tuple[SessionKeyConfirm, SessionKey]:
    """Step 3: verify Bob's response, then send him fresh key material."""
    verify_response(state, response)
    return send_confirm(state, tick)


def finalize(state: HandshakeState, message: SessionKeyConfirm, tick: int = 0) -> SessionKey:
    """Step 4 (responder): recover key material and derive the same session key."""
    state._require(Phase.AWAITING_CONFIRM)
    party = state.party
    aad = _confirm_aad(message.peer_bc_address, message.verified_responder_address, message.sender_address,
                       state.nonce1, state.nonce2)
    try:
        # header fields are bound as associated data, so any mismatch fails here
        if message.peer_bc_address != party.bc_address or message.sender_address != state.peer_address:
            raise crypto.DecryptError("header does not match this session")
        if message.suite != party.suite:
            raise crypto.DecryptError("suite does not match the recipient key")
        key_material = crypto.decapsulate(party.keypair, message.encrypted_key_material, aad)
    except crypto.DecryptError as exc:
        raise state.fail(FailureReason.DECRYPT_FAILED, str(exc)) from None
    if len(key_material) != 32:
        raise state.fail(FailureReason.DECRYPT_FAILED, "key material length")
    crypto._tally("kdf")
    key = SessionKey(derive_session_key(key_material, state.nonce1, state.nonce2), state.trusted_peer, tick)
    state.session_key = key
    state.phase = Phase.ESTABLISHED
    return key


def handshake_cost_model(suite=None) -> Counter:
    """Primitive operations of one handshake across both parties (messages 1-2).

    Independent of the suite; the message-3 key transport is reported
    separately and is not part of this composition.
    """
    return Counter({"sign": 2, "verify": 2, "hash": 2})


# --------------------------------------------------------------------------
# codec


class CodecMode(enum.Enum):
    CONCRETE = 0x01
    PAPER = 0x02


class CodecError(ValueError):
    pass


_MSG_TYPES = {AuthRequest: 1, AuthResponse: 2, SessionKeyConfirm: 3}
_TYPE_BY_CODE = {v: k for k, v in _MSG_TYPES.items()}
_SUITE_CODE = {crypto.SuiteKind.FINITE_FIELD: 1, crypto.SuiteKind.ELLIPTIC_CURVE: 2}
_SUITE_BY_CODE = {v: crypto.SUITES[k] for k, v in _SUITE_CODE.items()}


def _message_suite(msg: Message) -> CryptoSuite:
    return msg.suite if isinstance(msg, SessionKeyConfirm) else msg.signature.suite


def _concrete_fields(msg: Message) -> list:
    if isinstance(msg, AuthRequest):
        return [msg.trusted_peer_bc_address.value, msg.sender_address.encode(), msg.sender_public_key,
                msg.nonce1, msg.signed_sender_address.encode(), msg.signed_nonce1, msg.signature.value]
    if isinstance(msg, AuthResponse):
        return [msg.trusted_peer_bc_address.value, msg.echoed_sender_address.encode(),
                msg.responder_address.encode(), msg.responder_public_key, msg.nonce2,
                msg.signed_sender_address.encode(), msg.signed_responder_address.encode(),
                msg.signed_nonce2, msg.signature.value]
    return [msg.peer_bc_address.value, msg.verified_responder_address.encode(),
            msg.sender_address.encode(), msg.encrypted_key_material]


def _paper_fields(msg: Message) -> list:
    # signatures count as the bytes they sign; address kinds are implicit
    if isinstance(msg, AuthRequest):
        return [msg.trusted_peer_bc_address.value, msg.sender_address.value, msg.sender_public_key,
                msg.nonce1, msg.signed_sender_address.value, msg.signed_nonce1]
    if isinstance(msg, AuthResponse):
        return [msg.trusted_peer_bc_address.value, msg.echoed_sender_address.value,
                msg.responder_address.value, msg.responder_public_key, msg.nonce2,
                msg.signed_sender_address.value, msg.signed_responder_address.value, msg.signed_nonce2]
    return [msg.peer_bc_address.value, msg.verified_responder_address.value,
            msg.sender_address.value, msg.encrypted_key_material]


def encode(msg: Message, mode: CodecMode = CodecMode.CONCRETE) -> bytes:
    """Byte-exact serialization; the first byte is the codec tag.

    PAPER mode is a sizing encoding (fields back to back, signatures
    replaced by their signed content) and cannot be decoded.
    """
    if mode is CodecMode.PAPER:
        return bytes([mode.value]) + b"".join(_paper_fields(msg))
    out = bytearray([mode.value, _MSG_TYPES[type(msg)], _SUITE_CODE[_message_suite(msg).kind]])
    for f in _concrete_fields(msg):
        if len(f) > 0xFFFF:
            raise CodecError("field too long")
        out += struct.pack(">H", len(f)) + f
    return bytes(out)


def paper_size_bits(msg: Message) -> int:
    """Size in bits under the paper accounting, codec tag excluded."""
    return (len(encode(msg, CodecMode.PAPER)) - 1) * 8


def decode(data: bytes) -> Message:
    try:
        if len(data) < 3:
            raise CodecError("message too short")
        if data[0] != CodecMode.CONCRETE.value:
            raise CodecError(f"unsupported codec tag {data[0]:#x}")
        cls = _TYPE_BY_CODE.get(data[1])
        suite = _SUITE_BY_CODE.get(data[2])
        if cls is None or suite is None:
            raise CodecError("unknown message type or suite")
        fields, pos = [], 3
        while pos < len(data):
            if pos + 2 > len(data):
                raise CodecError("truncated length")
            (n,) = struct.unpack_from(">H", data, pos)
            pos += 2
            if pos + n > len(data):
                raise CodecError("truncated field")
            fields.append(bytes(data[pos:pos + n]))
            pos += n
        addr = PhysicalAddress.decode
        if cls is AuthRequest:
            if len(fields) != 7:
                raise CodecError("AuthRequest has 7 fields")
            bc, add_a, pk, n1, s_add_a, s_n1, sig = fields
            msg = AuthRequest(BcAddress(bc), addr(add_a), pk, n1, addr(s_add_a), s_n1,
                              Signature(suite, sig, REQUEST_LABELS))
        elif cls is AuthResponse:
            if len(fields) != 9:
                raise CodecError("AuthResponse has 9 fields")
            bc, add_a, add_b, pk, n2, s_add_a, s_add_b, s_n2, sig = fields
            msg = AuthResponse(BcAddress(bc), addr(add_a), addr(add_b), pk, n2, addr(s_add_a), addr(s_add_b),
                               s_n2, Signature(suite, sig, RESPONSE_LABELS))
        else:
            if len(fields) != 4:
                raise CodecError("SessionKeyConfirm has 4 fields")
            bc, add_b, add_a, ct = fields
            msg = SessionKeyConfirm(BcAddress(bc), addr(add_b), addr(add_a), ct, suite)
    except CodecError:
        raise
    except ValueError as exc:
        raise CodecError(str(exc)) from None
    if encode(msg) != bytes(data):
        raise CodecError("non-canonical encoding")
    return msg


# --------------------------------------------------------------------------
# convenience


@dataclass
class HandshakeResult:
    initiator: HandshakeState
    responder: HandshakeState
    initiator_key: SessionKey
    responder_key: SessionKey
    messages: Tuple[AuthRequest, AuthResponse, SessionKeyConfirm]

    @property
    def keys_match(self) -> bool:
        return self.initiator_key.bits == self.responder_key.bits


def run_handshake(alice: Party, bob: Party, tick: int = 0) -> HandshakeResult:
    """Fault-free in-process run; each party trusts the other's BC address."""
    a_state, m1 = initiate(alice, bob.bc_address)
    b_state, m2 = respond(bob, m1, alice.bc_address)
    m3, a_key = confirm(a_state, m2, tick)
    b_key = finalize(b_state, m3, tick)
    return HandshakeResult(a_state, b_state, a_key, b_key, (m1, m2, m3))
