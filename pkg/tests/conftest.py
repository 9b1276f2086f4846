import struct

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def eth_ipv4(payload: bytes, proto: int, ihl: int = 5) -> bytes:
    """Ethernet + IPv4 frame around ``payload`` with ``ihl`` 32-bit header words."""
    opts = b"\x01" * (4 * (ihl - 5))
    ip = struct.pack("!BBHHHBBH4s4s", 0x40 | ihl, 0, 4 * ihl + len(payload), 1, 0, 64, proto, 0,
                     b"\x0a\x00\x00\x01", b"\x0a\x00\x00\x02") + opts
    return b"\x02" * 6 + b"\x04" * 6 + b"\x08\x00" + ip + payload


def udp(payload: bytes, sport=1234, dport=53) -> bytes:
    return struct.pack("!HHHH", sport, dport, 8 + len(payload), 0) + payload


def tcp(payload: bytes, sport=1234, dport=80) -> bytes:
    return struct.pack("!HHIIBBHHH", sport, dport, 1, 0, 0x50, 0x18, 1024, 0, 0) + payload


@pytest.fixture
def frames():
    return {"eth_ipv4": eth_ipv4, "udp": udp, "tcp": tcp}


# acceptance outcomes, printed once at the end of the session
_ACCEPTANCE: dict = {}


@pytest.fixture
def acceptance():
    def record(num: int, passed: bool, detail: str) -> bool:
        line = f"criterion {num:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
        _ACCEPTANCE[num] = line
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_ACCEPTANCE):
        terminalreporter.write_line(_ACCEPTANCE[num])
