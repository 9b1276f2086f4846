"""Packet capture ingestion, lower-layer stripping and dataset sampling.

Only classic libpcap files are read.  Dissection is limited to Ethernet
(with optional 802.1Q tags), IPv4, IPv6, TCP and UDP, which is all that is
needed to reach the first byte of an unknown link, transport or
application layer protocol.
"""
from __future__ import annotations

import csv
import enum
import logging
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

log = logging.getLogger(__name__)

PCAP_MAGIC = 0xA1B2C3D4
PCAP_MAGIC_SWAPPED = 0xD4C3B2A1
GLOBAL_HEADER_LEN = 24
RECORD_HEADER_LEN = 16

PRINTABLE = frozenset(range(0x20, 0x7F)) | {0x09, 0x0A, 0x0D}


class CaptureFormatError(ValueError):
    """Raised for malformed or truncated capture files."""


class StripError(ValueError):
    """A packet is too short (or not dissectable) for the requested layer."""


class LinkType(str, enum.Enum):
    ETHERNET = "ethernet"
    IEEE80211 = "ieee80211"
    PPP = "ppp"
    RAW = "raw"


class Layer(str, enum.Enum):
    LINK = "link"
    TRANSPORT = "transport"
    APPLICATION = "application"


# libpcap network field -> link type; everything else is treated as raw
DLT_TO_LINK = {
    1: LinkType.ETHERNET,
    9: LinkType.PPP,
    105: LinkType.IEEE80211,
    12: LinkType.RAW,
    14: LinkType.RAW,
    101: LinkType.RAW,
    228: LinkType.RAW,
    229: LinkType.RAW,
}
LINK_TO_DLT = {
    LinkType.ETHERNET: 1,
    LinkType.PPP: 9,
    LinkType.IEEE80211: 105,
    LinkType.RAW: 101,
}


@dataclass(frozen=True)
class RawPacket:
    bytes: bytes
    capture_ts: int = 0
    link_type: LinkType = LinkType.ETHERNET
    truth_label: Optional[str] = None

    def __post_init__(self):
        if len(self.bytes) == 0:
            raise ValueError("packet bytes must be non-empty")


@dataclass
class Dataset:
    packets: list
    osi_target: Layer
    name: str = "dataset"
    cap: int = 200

    def __post_init__(self):
        self.osi_target = Layer(self.osi_target)
        if len(self.packets) > self.cap:
            raise ValueError(f"dataset holds {len(self.packets)} packets, cap is {self.cap}")

    def __len__(self):
        return len(self.packets)

    @property
    def labels(self) -> Optional[list]:
        labels = [p.truth_label for p in self.packets]
        if any(lab is None for lab in labels):
            return None
        return labels


@dataclass(frozen=True)
class HeaderSlice:
    bytes: bytes
    origin: int
    declared_len: int


# --------------------------------------------------------------------------
# pcap reading / writing

def load_pcap(path) -> list:
    """Read every record of a classic libpcap file as a :class:`RawPacket`."""
    data = Path(path).read_bytes()
    if len(data) < GLOBAL_HEADER_LEN:
        raise CaptureFormatError(f"{path}: file shorter than the 24-byte global header")
    magic_le = struct.unpack_from("<I", data, 0)[0]
    if magic_le == PCAP_MAGIC:
        endian = "<"
    elif magic_le == PCAP_MAGIC_SWAPPED:
        endian = ">"
    else:
        raise CaptureFormatError(f"{path}: bad pcap magic 0x{magic_le:08x}")
    network = struct.unpack_from(endian + "I", data, 20)[0]
    link = DLT_TO_LINK.get(network & 0x0FFFFFFF, LinkType.RAW)

    packets = []
    offset = GLOBAL_HEADER_LEN
    index = 0
    while offset < len(data):
        if offset + RECORD_HEADER_LEN > len(data):
            raise CaptureFormatError(f"{path}: record {index} header truncated")
        ts_sec, ts_usec, incl_len, _orig_len = struct.unpack_from(endian + "IIII", data, offset)
        offset += RECORD_HEADER_LEN
        if offset + incl_len > len(data):
            raise CaptureFormatError(
                f"{path}: record {index} truncated ({len(data) - offset} of {incl_len} bytes)")
        frame = data[offset:offset + incl_len]
        offset += incl_len
        if incl_len == 0:
            log.warning("record %d is empty, skipped", index)
        else:
            packets.append(RawPacket(frame, ts_sec * 1_000_000 + ts_usec, link))
        index += 1
    return packets


def write_pcap(path, packets: Sequence[RawPacket], link_type=LinkType.ETHERNET,
               byteorder: str = "<") -> None:
    """Write packets to a classic pcap file (``byteorder`` '<' or '>')."""
    dlt = LINK_TO_DLT[LinkType(link_type)]
    out = [struct.pack(byteorder + "IHHiIII", PCAP_MAGIC, 2, 4, 0, 0, 65535, dlt)]
    for p in packets:
        sec, usec = divmod(p.capture_ts, 1_000_000)
        out.append(struct.pack(byteorder + "IIII", sec, usec, len(p.bytes), len(p.bytes)))
        out.append(p.bytes)
    Path(path).write_bytes(b"".join(out))


def read_labels(path) -> dict:
    """Read a ``packet_index,label`` sidecar CSV into ``{index: label}``."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"packet_index", "label"} <= set(reader.fieldnames):
            raise CaptureFormatError(f"{path}: expected header 'packet_index,label'")
        return {int(row["packet_index"]): row["label"] for row in reader}


def write_labels(path, labels: Sequence[str]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["packet_index", "label"])
        for i, lab in enumerate(labels):
            w.writerow([i, lab])


def attach_labels(packets: Sequence[RawPacket], labels: dict) -> list:
    out = []
    for i, p in enumerate(packets):
        if i not in labels:
            raise ValueError(f"no label for packet {i}")
        out.append(RawPacket(p.bytes, p.capture_ts, p.link_type, labels[i]))
    return out


# --------------------------------------------------------------------------
# dissection

def _link_payload(p: RawPacket) -> tuple:
    """Return (network-layer bytes, ethertype-or-ip-version hint)."""
    frame = p.bytes
    if p.link_type == LinkType.ETHERNET:
        if len(frame) < 14:
            raise StripError("frame shorter than Ethernet header")
        off = 12
        ethertype = struct.unpack_from("!H", frame, off)[0]
        while ethertype in (0x8100, 0x88A8):
            off += 4
            if len(frame) < off + 2:
                raise StripError("truncated 802.1Q tag")
            ethertype = struct.unpack_from("!H", frame, off)[0]
        return frame[off + 2:], ethertype
    if p.link_type == LinkType.RAW:
        if not frame:
            raise StripError("empty raw packet")
        version = frame[0] >> 4
        return frame, {4: 0x0800, 6: 0x86DD}.get(version, -1)
    raise StripError(f"no dissector for link type {p.link_type.value}")


def _ip_payload(net: bytes, ethertype: int) -> tuple:
    """Return (transport bytes, IP protocol number)."""
    if ethertype == 0x0800:
        if len(net) < 20:
            raise StripError("packet shorter than IPv4 header")
        ihl = (net[0] & 0x0F) * 4
        if ihl < 20 or len(net) < ihl:
            raise StripError(f"IPv4 header length {ihl} exceeds packet")
        return net[ihl:], net[9]
    if ethertype == 0x86DD:
        if len(net) < 40:
            raise StripError("packet shorter than IPv6 header")
        nxt = net[6]
        off = 40
        # hop-by-hop, routing, destination options
        while nxt in (0, 43, 60):
            if len(net) < off + 8:
                raise StripError("truncated IPv6 extension header")
            nxt, hlen = net[off], (net[off + 1] + 1) * 8
            off += hlen
        if len(net) < off:
            raise StripError("truncated IPv6 extension header")
        return net[off:], nxt
    raise StripError(f"ethertype 0x{ethertype:04x} is not IP")


def _transport_payload(seg: bytes, proto: int) -> bytes:
    if proto == 6:
        if len(seg) < 20:
            raise StripError("segment shorter than TCP header")
        doff = (seg[12] >> 4) * 4
        if doff < 20 or len(seg) < doff:
            raise StripError(f"TCP data offset {doff} exceeds segment")
        return seg[doff:]
    if proto == 17:
        if len(seg) < 8:
            raise StripError("datagram shorter than UDP header")
        return seg[8:]
    raise StripError(f"no dissector for IP protocol {proto}")


def strip_lower_layers(p: RawPacket, target) -> bytes:
    """Return the bytes of ``p`` starting at the first byte of ``target``."""
    target = Layer(target)
    if target == Layer.LINK:
        return p.bytes
    net, ethertype = _link_payload(p)
    seg, proto = _ip_payload(net, ethertype)
    if target == Layer.TRANSPORT:
        return seg
    return _transport_payload(seg, proto)


def strip_dataset(d: Dataset) -> tuple:
    """Strip every packet of ``d``; returns ``(payloads, kept_indices)``.

    Packets that cannot be dissected, or have nothing left after
    stripping, are skipped with a warning.
    """
    payloads, kept = [], []
    for i, p in enumerate(d.packets):
        try:
            payload = strip_lower_layers(p, d.osi_target)
        except StripError as exc:
            log.warning("packet %d skipped: %s", i, exc)
            continue
        if not payload:
            log.warning("packet %d skipped: empty %s payload", i, d.osi_target.value)
            continue
        payloads.append(payload)
        kept.append(i)
    return payloads, kept


def extract_header(payload: bytes, header_len: Optional[int], layer, origin: int = 0) -> HeaderSlice:
    layer = Layer(layer)
    if not payload:
        raise ValueError(f"packet {origin}: empty payload")
    if layer == Layer.APPLICATION:
        return HeaderSlice(bytes(payload), origin, len(payload))
    if header_len is None or header_len < 1:
        raise ValueError("header_len must be >= 1 for link/transport layers")
    return HeaderSlice(bytes(payload[:header_len]), origin, header_len)


# --------------------------------------------------------------------------
# sampling

def apportion(supports: dict, cap: int) -> dict:
    """Largest-remainder apportionment of ``cap`` with a floor of one per label.

    Labels are visited in insertion order; remainders are broken by larger
    support, then by that order.
    """
    labels = list(supports)
    total = sum(supports.values())
    if cap >= total:
        return dict(supports)
    if cap < len(labels):
        raise ValueError(f"cap {cap} is smaller than the {len(labels)} distinct labels")
    exact = {lab: cap * supports[lab] / total for lab in labels}
    quota = {lab: max(1, int(exact[lab])) for lab in labels}
    remaining = cap - sum(quota.values())
    order = sorted(labels, key=lambda lab: (-(exact[lab] - int(exact[lab])), -supports[lab],
                                            labels.index(lab)))
    # hand out leftover seats by largest remainder
    while remaining > 0:
        for lab in order:
            if remaining == 0:
                break
            if quota[lab] < supports[lab]:
                quota[lab] += 1
                remaining -= 1
    # the min-1 floor can overshoot; take seats back from the largest quotas
    while remaining < 0:
        lab = max((lab for lab in labels if quota[lab] > 1),
                  key=lambda lab: (quota[lab] - exact[lab], quota[lab]))
        quota[lab] -= 1
        remaining += 1
    return quota


def stratified_sample(packets: Sequence[RawPacket], cap: int = 200, seed: int = 0,
                      osi_target=Layer.LINK, name: str = "dataset") -> Dataset:
    if any(p.truth_label is None for p in packets):
        raise ValueError("stratified sampling needs a truth_label on every packet")
    groups: dict = {}
    for i, p in enumerate(packets):
        groups.setdefault(p.truth_label, []).append(i)
    quota = apportion({lab: len(idx) for lab, idx in groups.items()}, cap)
    rng = np.random.default_rng(seed)
    chosen = []
    for lab, idx in groups.items():
        pick = rng.choice(len(idx), size=quota[lab], replace=False)
        chosen.extend(idx[j] for j in pick)
    chosen.sort()
    return Dataset([packets[i] for i in chosen], osi_target, name, cap=max(cap, len(chosen)))


def printable_ratio(payload: bytes) -> float:
    if not payload:
        return 0.0
    return sum(b in PRINTABLE for b in payload) / len(payload)


def detect_text_protocol(d: Dataset, threshold: float = 0.75) -> str:
    """Classify an application-layer dataset as ``"textual"`` or ``"binary"``.

    The median printable-byte ratio over packets is compared to
    ``threshold``; packets that cannot be stripped count as ratio 0.
    """
    if not d.packets:
        raise ValueError("empty dataset")
    ratios = []
    for p in d.packets:
        try:
            ratios.append(printable_ratio(strip_lower_layers(p, d.osi_target)))
        except StripError:
            ratios.append(0.0)
    return "textual" if float(np.median(ratios)) >= threshold else "binary"
