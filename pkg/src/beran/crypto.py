"""Key pairs, signatures, blockchain addresses and key encapsulation.

Two suites are supported:

* ``FiniteField``: DSA over a fixed 3072-bit group with a 256-bit
  subgroup order, so the public key is 3072 bits and the secret 256 bits.
* ``EllipticCurve``: ECDSA on P-256 with x-only public keys (the secret
  scalar is normalised so the public point has even y), giving a 256-bit
  public key.

Signatures in both suites are serialized as fixed-width ``r || s``
(64 bytes).
"""

from __future__ import annotations

import enum
import hashlib
import hmac
import os
import secrets
import statistics
import time
from collections import Counter
from contextlib import contextmanager
from contextvars import ContextVar
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterator, Optional, Sequence

from cryptography.exceptions import InvalidSignature, InvalidTag
from cryptography.hazmat.primitives import hashes
from cryptography.hazmat.primitives.asymmetric import dsa, ec
from cryptography.hazmat.primitives.asymmetric.utils import (
    decode_dss_signature,
    encode_dss_signature,
)
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes
from cryptography.hazmat.primitives.ciphers.aead import AESGCM
from cryptography.hazmat.primitives.kdf.hkdf import HKDF
from cryptography.hazmat.primitives.serialization import Encoding, PublicFormat

from . import _ffgroup

ADDRESS_VERSION = 0x01
ADDRESS_LEN = 34
NONCE_LEN = 32
SIGNATURE_LEN = 64

_CURVE = ec.SECP256R1()
_CURVE_ORDER = 0xFFFFFFFF00000000FFFFFFFFFFFFFFFFBCE6FAADA7179E84F3B9CAC2FC632551
_FF_PARAMS = dsa.DSAParameterNumbers(_ffgroup.P, _ffgroup.Q, _ffgroup.G)


class SuiteKind(enum.Enum):
    FINITE_FIELD = "FiniteField"
    ELLIPTIC_CURVE = "EllipticCurve"


@dataclass(frozen=True)
class CryptoSuite:
    kind: SuiteKind
    public_key_bits: int
    private_key_bits: int
    signature_scheme_label: str

    @property
    def public_key_len(self) -> int:
        return self.public_key_bits // 8


FINITE_FIELD = CryptoSuite(SuiteKind.FINITE_FIELD, 3072, 256, "DSA-3072/256-SHA256")
ELLIPTIC_CURVE = CryptoSuite(SuiteKind.ELLIPTIC_CURVE, 256, 256, "ECDSA-P256-SHA256")
SUITES = {FINITE_FIELD.kind: FINITE_FIELD, ELLIPTIC_CURVE.kind: ELLIPTIC_CURVE}

_SUITE_ALIASES = {
    "ff": FINITE_FIELD,
    "finitefield": FINITE_FIELD,
    "dsa": FINITE_FIELD,
    "ec": ELLIPTIC_CURVE,
    "ellipticcurve": ELLIPTIC_CURVE,
    "ecdsa": ELLIPTIC_CURVE,
}


def get_suite(name) -> CryptoSuite:
    """Resolve a suite from a CryptoSuite, SuiteKind or a loose name ("ec", "FiniteField")."""
    if isinstance(name, CryptoSuite):
        return name
    if isinstance(name, SuiteKind):
        return SUITES[name]
    try:
        return _SUITE_ALIASES[str(name).replace("-", "").replace("_", "").lower()]
    except KeyError:
        raise ValueError(f"unsupported suite: {name!r}") from None


# --------------------------------------------------------------------------
# operation counting


_counter: ContextVar[Optional[Counter]] = ContextVar("beran_op_counter", default=None)


@contextmanager
def count_operations() -> Iterator[Counter]:
    """Tally primitive calls (sign, verify, hash, ...) made inside the block."""
    c = Counter()
    token = _counter.set(c)
    try:
        yield c
    finally:
        _counter.reset(token)


def _tally(op: str) -> None:
    c = _counter.get()
    if c is not None:
        c[op] += 1


# --------------------------------------------------------------------------
# hashing and canonical encoding


def sha256(*parts: bytes) -> bytes:
    h = hashlib.sha256()
    for p in parts:
        h.update(p)
    return h.digest()


def canonical(fields: Sequence[bytes]) -> bytes:
    """Length-prefixed concatenation (4-byte big-endian length per field)."""
    out = bytearray()
    for f in fields:
        f = bytes(f)
        out += len(f).to_bytes(4, "big")
        out += f
    return bytes(out)


# --------------------------------------------------------------------------
# addresses


@dataclass(frozen=True, order=True)
class BcAddress:
    """272-bit blockchain address: version byte, SHA-256(pk), checksum byte."""

    value: bytes

    def __post_init__(self):
        if len(self.value) != ADDRESS_LEN:
            raise ValueError(f"BC address must be {ADDRESS_LEN} bytes, got {len(self.value)}")

    def hex(self) -> str:
        return self.value.hex()

    @classmethod
    def from_hex(cls, text: str) -> "BcAddress":
        return cls(bytes.fromhex(text))

    def __str__(self) -> str:
        return self.hex()

    def __repr__(self) -> str:
        return f"BcAddress({self.value[:5].hex()}..)"

    @property
    def checksum_ok(self) -> bool:
        return sha256(self.value[:-1])[0] == self.value[-1]


def derive_bc_address(public_key: bytes) -> BcAddress:
    if not public_key:
        raise ValueError("public key must be non-empty")
    _tally("hash")
    body = bytes([ADDRESS_VERSION]) + sha256(public_key)
    return BcAddress(body + sha256(body)[:1])


# --------------------------------------------------------------------------
# keys


@dataclass(frozen=True)
class KeyPair:
    suite: CryptoSuite
    public_key: bytes
    private_key: bytes = field(repr=False)

    @property
    def bc_address(self) -> BcAddress:
        return derive_bc_address(self.public_key)


def _scalar_from(seed: Optional[bytes], label: bytes, order: int) -> int:
    if seed is None:
        return secrets.randbelow(order - 1) + 1
    if isinstance(seed, int):
        seed = seed.to_bytes(32, "big")
    return int.from_bytes(sha256(label, bytes(seed)), "big") % (order - 1) + 1


def generate_keypair(suite, seed=None) -> KeyPair:
    """Fresh key pair for ``suite``; ``seed`` (bytes or int) makes it reproducible."""
    suite = get_suite(suite)
    if suite.kind is SuiteKind.ELLIPTIC_CURVE:
        d = _scalar_from(seed, b"beran/keygen/ec", _CURVE_ORDER)
        nums = ec.derive_private_key(d, _CURVE).public_key().public_numbers()
        if nums.y & 1:
            d = _CURVE_ORDER - d
        return KeyPair(suite, nums.x.to_bytes(32, "big"), d.to_bytes(32, "big"))
    if suite.kind is SuiteKind.FINITE_FIELD:
        x = _scalar_from(seed, b"beran/keygen/ff", _ffgroup.Q)
        y = pow(_ffgroup.G, x, _ffgroup.P)
        return KeyPair(suite, y.to_bytes(384, "big"), x.to_bytes(32, "big"))
    raise ValueError(f"unsupported suite kind: {suite.kind}")


@lru_cache(maxsize=256)
def _private_key(kind: SuiteKind, private: bytes, public: bytes):
    if kind is SuiteKind.ELLIPTIC_CURVE:
        return ec.derive_private_key(int.from_bytes(private, "big"), _CURVE)
    pub = dsa.DSAPublicNumbers(int.from_bytes(public, "big"), _FF_PARAMS)
    return dsa.DSAPrivateNumbers(int.from_bytes(private, "big"), pub).private_key()


@lru_cache(maxsize=4096)
def _public_key(kind: SuiteKind, public: bytes):
    if kind is SuiteKind.ELLIPTIC_CURVE:
        if len(public) != 32:
            raise ValueError("EC public key must be 32 bytes")
        return ec.EllipticCurvePublicKey.from_encoded_point(_CURVE, b"\x02" + public)
    if len(public) != 384:
        raise ValueError("FF public key must be 384 bytes")
    y = int.from_bytes(public, "big")
    if not 1 < y < _ffgroup.P - 1:
        raise ValueError("FF public key out of range")
    return dsa.DSAPublicNumbers(y, _FF_PARAMS).public_key()


def _algorithm(kind: SuiteKind):
    if kind is SuiteKind.ELLIPTIC_CURVE:
        return ec.ECDSA(hashes.SHA256(), deterministic_signing=True)
    return hashes.SHA256()


# --------------------------------------------------------------------------
# signatures


@dataclass(frozen=True)
class Signature:
    suite: CryptoSuite
    value: bytes
    labels: tuple = ()

    def __len__(self):
        return len(self.value)


def _signed_message(labels: Sequence[str], content: Sequence[bytes]) -> bytes:
    return b"beran/sig/v1" + canonical([l.encode() for l in labels]) + canonical(content)


def sign(keypair: KeyPair, content: Sequence[bytes], labels: Sequence[str] = ()) -> Signature:
    if not content:
        raise ValueError("nothing to sign")
    try:
        key = _private_key(keypair.suite.kind, keypair.private_key, keypair.public_key)
    except ValueError as exc:
        raise ValueError(f"malformed private key: {exc}") from None
    _tally("sign")
    der = key.sign(_signed_message(labels, content), _algorithm(keypair.suite.kind))
    r, s = decode_dss_signature(der)
    return Signature(keypair.suite, r.to_bytes(32, "big") + s.to_bytes(32, "big"), tuple(labels))


def verify(public_key: bytes, signature: Signature, content: Sequence[bytes]) -> bool:
    """True iff ``signature`` covers ``content`` under ``public_key``. Never raises."""
    _tally("verify")
    try:
        if len(signature.value) != SIGNATURE_LEN:
            return False
        key = _public_key(signature.suite.kind, bytes(public_key))
        r = int.from_bytes(signature.value[:32], "big")
        s = int.from_bytes(signature.value[32:], "big")
        key.verify(
            encode_dss_signature(r, s),
            _signed_message(signature.labels, content),
            _algorithm(signature.suite.kind),
        )
        return True
    except (InvalidSignature, ValueError, TypeError, AttributeError):
        return False


def new_nonce(randbytes: Callable[[int], bytes] = os.urandom) -> bytes:
    return randbytes(NONCE_LEN)


# --------------------------------------------------------------------------
# key encapsulation (used to carry key material to the responder)


class DecryptError(Exception):
    pass


def _kem_key(shared: bytes, ephemeral: bytes, recipient: bytes) -> bytes:
    return HKDF(hashes.SHA256(), 32, salt=None, info=b"beran/kem/v1" + ephemeral + recipient).derive(shared)


def encapsulate(suite, public_key: bytes, plaintext: bytes, aad: bytes = b"",
                randbytes: Callable[[int], bytes] = os.urandom) -> bytes:
    """Encrypt ``plaintext`` to ``public_key`` (ECIES on P-256 or DH-ElGamal on the FF group)."""
    suite = get_suite(suite)
    _tally("encapsulate")
    if suite.kind is SuiteKind.ELLIPTIC_CURVE:
        r = int.from_bytes(randbytes(32), "big") % (_CURVE_ORDER - 1) + 1
        eph = ec.derive_private_key(r, _CURVE)
        ephemeral = eph.public_key().public_bytes(Encoding.X962, PublicFormat.CompressedPoint)
        shared = eph.exchange(ec.ECDH(), _public_key(suite.kind, bytes(public_key)))
    else:
        r = int.from_bytes(randbytes(32), "big") % (_ffgroup.Q - 1) + 1
        ephemeral = pow(_ffgroup.G, r, _ffgroup.P).to_bytes(384, "big")
        y = int.from_bytes(public_key, "big")
        shared = pow(y, r, _ffgroup.P).to_bytes(384, "big")
    key = _kem_key(shared, ephemeral, bytes(public_key))
    return ephemeral + AESGCM(key).encrypt(b"\x00" * 12, plaintext, aad)


def decapsulate(keypair: KeyPair, ciphertext: bytes, aad: bytes = b"") -> bytes:
    _tally("decapsulate")
    try:
        if keypair.suite.kind is SuiteKind.ELLIPTIC_CURVE:
            ephemeral, body = ciphertext[:33], ciphertext[33:]
            peer = ec.EllipticCurvePublicKey.from_encoded_point(_CURVE, ephemeral)
            priv = _private_key(keypair.suite.kind, keypair.private_key, keypair.public_key)
            shared = priv.exchange(ec.ECDH(), peer)
        else:
            ephemeral, body = ciphertext[:384], ciphertext[384:]
            R = int.from_bytes(ephemeral, "big")
            if len(ephemeral) != 384 or not 1 < R < _ffgroup.P - 1:
                raise DecryptError("bad ephemeral value")
            x = int.from_bytes(keypair.private_key, "big")
            shared = pow(R, x, _ffgroup.P).to_bytes(384, "big")
        key = _kem_key(shared, ephemeral, keypair.public_key)
        return AESGCM(key).decrypt(b"\x00" * 12, body, aad)
    except (InvalidTag, ValueError) as exc:
        raise DecryptError(str(exc) or "authentication tag mismatch") from None


# --------------------------------------------------------------------------
# primitive timing


PRIMITIVE_NAMES = ("t_sign", "t_verify", "t_hash", "t_sym", "t_hmac", "t_exp", "t_pm", "t_dh", "t_ecdh")


@dataclass(frozen=True)
class PrimitiveTimings:
    """Per-primitive durations in microseconds for one suite.

    ``t_dh`` / ``t_ecdh`` are stored explicitly so published reference
    values can be carried verbatim; :meth:`from_components` fills them as
    ``2 * t_exp`` and ``2 * t_pm``.
    """

    suite: CryptoSuite
    t_sign: Optional[float] = None
    t_verify: Optional[float] = None
    t_hash: Optional[float] = None
    t_sym: Optional[float] = None
    t_hmac: Optional[float] = None
    t_exp: Optional[float] = None
    t_pm: Optional[float] = None
    t_dh: Optional[float] = None
    t_ecdh: Optional[float] = None

    @classmethod
    def from_components(cls, suite, **values) -> "PrimitiveTimings":
        t_exp, t_pm = values.get("t_exp"), values.get("t_pm")
        values["t_dh"] = None if t_exp is None else 2 * t_exp
        values["t_ecdh"] = None if t_pm is None else 2 * t_pm
        return cls(get_suite(suite), **values)

    def to_text(self) -> str:
        lines = []
        for name in PRIMITIVE_NAMES:
            v = getattr(self, name)
            if v is not None:
                lines.append(f"{name} {self.suite.kind.value} {v:.6f}")
        return "\n".join(lines) + "\n"


def format_timings(timings: Sequence[PrimitiveTimings]) -> str:
    return "".join(t.to_text() for t in timings)


def parse_timings(text: str) -> dict:
    """Parse the ``name suite microseconds`` line format into {SuiteKind: PrimitiveTimings}."""
    values: dict = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3 or parts[0] not in PRIMITIVE_NAMES:
            raise ValueError(f"line {lineno}: expected '<primitive> <suite> <microseconds>'")
        suite = get_suite(parts[1])
        values.setdefault(suite.kind, {})[parts[0]] = float(parts[2])
    return {kind: PrimitiveTimings(SUITES[kind], **v) for kind, v in values.items()}


def _median_us(fn, repetitions: int, batch: int = 1) -> float:
    for _ in range(max(3, repetitions // 10) * batch):
        fn()
    samples = []
    for _ in range(repetitions):
        t0 = time.perf_counter_ns()
        for _ in range(batch):
            fn()
        samples.append((time.perf_counter_ns() - t0) / batch / 1000.0)
    return statistics.median(samples)


def measure_primitives(suite, repetitions: int, payload_bytes: int = 1024) -> PrimitiveTimings:
    """Median duration of each primitive on this host, single-threaded."""
    suite = get_suite(suite)
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    payload = os.urandom(payload_bytes)
    kp = generate_keypair(suite, seed=b"measure")
    content = [payload[:32], payload[32:64]]
    sig = sign(kp, content)
    sym_key = os.urandom(32)
    ctr_nonce = os.urandom(16)

    def sym():
        enc = Cipher(algorithms.AES(sym_key), modes.CTR(ctr_nonce)).encryptor()
        enc.update(payload)
        enc.finalize()

    exponent = int.from_bytes(os.urandom(32), "big") % _ffgroup.Q
    base = int.from_bytes(kp.public_key, "big") if suite.kind is SuiteKind.FINITE_FIELD else _ffgroup.G
    ec_a = ec.generate_private_key(_CURVE)
    ec_b = ec.generate_private_key(_CURVE).public_key()

    # fast primitives are timed in batches so the timer resolution doesn't dominate
    return PrimitiveTimings.from_components(
        suite,
        t_sign=_median_us(lambda: sign(kp, content), repetitions),
        t_verify=_median_us(lambda: verify(kp.public_key, sig, content), repetitions),
        t_hash=_median_us(lambda: hashlib.sha256(payload).digest(), repetitions, batch=50),
        t_sym=_median_us(sym, repetitions, batch=20),
        t_hmac=_median_us(lambda: hmac.new(sym_key, payload, hashlib.sha256).digest(), repetitions, batch=50),
        t_exp=_median_us(lambda: pow(base, exponent, _ffgroup.P), repetitions),
        t_pm=_median_us(lambda: ec_a.exchange(ec.ECDH(), ec_b), repetitions),
    )
