import os
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from beran import crypto
from beran.ledger import PhysicalAddress

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

ROOT = Path(__file__).resolve().parent.parent
CONFIGS = ROOT / "configs"
GOLDEN = Path(__file__).resolve().parent / "golden"

SUITE_NAMES = ["EllipticCurve", "FiniteField"]


@pytest.fixture(scope="session")
def keys():
    """A few seeded identities per suite, shared because FF key setup is slow."""
    return {
        name: [crypto.generate_keypair(name, seed=f"fixture-{i}".encode()) for i in range(4)]
        for name in SUITE_NAMES
    }


@pytest.fixture(scope="session", params=SUITE_NAMES)
def suite_name(request):
    return request.param


def ipv6(n: int) -> PhysicalAddress:
    return PhysicalAddress.ipv6(f"2001:db8::{n:x}")


def mac(n: int) -> PhysicalAddress:
    return PhysicalAddress.mac(bytes([2, 0, 0, 0, (n >> 8) & 0xFF, n & 0xFF]))
