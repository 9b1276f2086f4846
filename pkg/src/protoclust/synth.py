"""Synthetic labelled captures built from per-class header templates.

A spec is a plain dict (JSON on disk)::

    {"name": "demo", "layer": "transport", "link_type": "ethernet",
     "classes": [{"label": "A", "support": 30, "template": "0050??01",
                  "ip_proto": 6, "tail": [0, 16]}, ...]}

``template`` is either a hex string in which ``??`` marks a random byte,
or a list of parts: ``{"hex": "..."}``, ``{"text": "..."}``,
``{"random": n, "charset": "bytes|alnum|digits|lower|hex|printable"}`` and
``{"choice": ["alt1", "alt2"]}`` (text alternatives) and
``{"pick": ["0050", "01bb"]}`` (hex alternatives).  ``tail`` is an
inclusive ``[min, max]`` range of extra random bytes (``tail_charset``
selects their alphabet).

For ``layer="transport"`` the template is wrapped in Ethernet + IPv4; for
``"application"`` in Ethernet + IPv4 + UDP (or TCP with
``"carrier": "tcp"``); for ``"link"`` it is the whole frame.
"""
from __future__ import annotations

import json
import string
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .capture import Layer, LinkType, RawPacket, apportion, write_labels, write_pcap

CHARSETS = {
    "bytes": bytes(range(256)),
    "alnum": (string.ascii_letters + string.digits).encode(),
    "digits": string.digits.encode(),
    "lower": string.ascii_lowercase.encode(),
    "hex": b"0123456789abcdef",
    "printable": bytes(range(0x20, 0x7F)),
}


class SpecError(ValueError):
    pass


@dataclass
class SyntheticSpec:
    name: str
    layer: Layer
    classes: list
    link_type: LinkType = LinkType.ETHERNET
    extra: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticSpec":
        try:
            classes = d["classes"]
            layer = Layer(d.get("layer", "transport"))
            link = LinkType(d.get("link_type", "ethernet"))
        except (KeyError, ValueError) as exc:
            raise SpecError(f"invalid synthetic spec: {exc}") from exc
        if not classes:
            raise SpecError("spec has no classes")
        seen = {}
        for c in classes:
            if "label" not in c or "template" not in c:
                raise SpecError("every class needs a label and a template")
            if int(c.get("support", 0)) < 1:
                raise SpecError(f"class {c['label']!r}: support must be >= 1")
            key = json.dumps(c["template"], sort_keys=True)
            if key in seen:
                raise SpecError(f"classes {seen[key]!r} and {c['label']!r} share a template")
            seen[key] = c["label"]
        labels = [c["label"] for c in classes]
        if len(set(labels)) != len(labels):
            raise SpecError("class labels must be unique")
        return cls(d.get("name", "synthetic"), layer, list(classes), link,
                   {k: v for k, v in d.items() if k not in ("name", "layer", "link_type", "classes")})

    @classmethod
    def load(cls, path) -> "SyntheticSpec":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        return {"name": self.name, "layer": self.layer.value, "link_type": self.link_type.value,
                "classes": self.classes, **self.extra}

    @property
    def supports(self) -> dict:
        return {c["label"]: int(c["support"]) for c in self.classes}


def _rand(rng, n: int, charset: str = "bytes") -> bytes:
    alphabet = np.frombuffer(CHARSETS[charset], dtype=np.uint8)
    return alphabet[rng.integers(0, len(alphabet), n)].tobytes()


def render_template(template, rng: np.random.Generator) -> bytes:
    if isinstance(template, str):
        out = bytearray()
        t = template.replace(" ", "")
        if len(t) % 2:
            raise SpecError(f"odd-length hex template {template!r}")
        for i in range(0, len(t), 2):
            pair = t[i:i + 2]
            out += _rand(rng, 1) if pair == "??" else bytes.fromhex(pair)
        return bytes(out)
    out = bytearray()
    for part in template:
        if "hex" in part:
            out += render_template(part["hex"], rng)
        elif "text" in part:
            out += part["text"].encode("latin-1")
        elif "random" in part:
            out += _rand(rng, int(part["random"]), part.get("charset", "bytes"))
        elif "choice" in part:
            opts = part["choice"]
            out += opts[int(rng.integers(len(opts)))].encode("latin-1")
        elif "pick" in part:
            opts = part["pick"]
            out += render_template(opts[int(rng.integers(len(opts)))], rng)
        else:
            raise SpecError(f"unknown template part {part!r}")
    return bytes(out)


def _ipv4(payload: bytes, proto: int, rng) -> bytes:
    ident = int(rng.integers(0, 65536))
    hdr = struct.pack("!BBHHHBBH4s4s", 0x45, 0, 20 + len(payload), ident, 0x4000, 64, proto, 0,
                      bytes([10, 0, 0, 1]), bytes([10, 0, 0, 2]))
    return hdr + payload


def _ethernet(payload: bytes, ethertype: int = 0x0800) -> bytes:
    return bytes.fromhex("020000000002") + bytes.fromhex("020000000001") + struct.pack("!H", ethertype) + payload


def build_frame(cls_spec: dict, layer: Layer, rng) -> bytes:
    body = render_template(cls_spec["template"], rng)
    lo, hi = cls_spec.get("tail", [0, 0])
    n_tail = int(rng.integers(lo, hi + 1))
    body += _rand(rng, n_tail, cls_spec.get("tail_charset", "bytes"))
    if not body:
        raise SpecError(f"class {cls_spec['label']!r} renders an empty packet")
    if layer == Layer.LINK:
        return body
    if layer == Layer.TRANSPORT:
        return _ethernet(_ipv4(body, int(cls_spec.get("ip_proto", 253)), rng))
    port = int(cls_spec.get("port", 9999))
    sport = int(rng.integers(1024, 65536))
    if cls_spec.get("carrier", "udp") == "tcp":
        seq = int(rng.integers(0, 2 ** 32))
        seg = struct.pack("!HHIIBBHHH", sport, port, seq, 0, 0x50, 0x18, 8192, 0, 0) + body
        return _ethernet(_ipv4(seg, 6, rng))
    seg = struct.pack("!HHHH", sport, port, 8 + len(body), 0) + body
    return _ethernet(_ipv4(seg, 17, rng))


def generate(spec, seed: int = 0) -> list:
    """Render labelled :class:`RawPacket` objects, classes interleaved at random."""
    if isinstance(spec, dict):
        spec = SyntheticSpec.from_dict(spec)
    rng = np.random.default_rng(seed)
    labels = [c["label"] for c in spec.classes for _ in range(int(c["support"]))]
    order = rng.permutation(len(labels))
    by_label = {c["label"]: c for c in spec.classes}
    packets = []
    for n, i in enumerate(order):
        lab = labels[i]
        frame = build_frame(by_label[lab], spec.layer, rng)
        packets.append(RawPacket(frame, 1_600_000_000_000_000 + 1000 * n, spec.link_type, lab))
    return packets


def write_dataset(spec, pcap_path, labels_path, seed: int = 0, byteorder: str = "<") -> list:
    if isinstance(spec, dict):
        spec = SyntheticSpec.from_dict(spec)
    packets = generate(spec, seed)
    write_pcap(pcap_path, packets, spec.link_type, byteorder)
    write_labels(labels_path, [p.truth_label for p in packets])
    return packets


# --------------------------------------------------------------------------
# built-in specs loosely shaped after common protocols

def _scaled(classes: list, cap: int = 200) -> list:
    quota = apportion({c["label"]: c["support"] for c in classes}, cap)
    return [dict(c, support=quota[c["label"]]) for c in classes]


def _tcp(flags: str, dport: str = "0050", win: str = "????") -> str:
    # sport, dport, seq, ack, offset+flags, window, checksum, urgent
    return "c3??" + dport + "????????" + "????????" + "50" + flags + win + "????" + "0000"


def builtin_specs() -> dict:
    """Nine specs mirroring the link, transport, application and per-protocol datasets."""
    specs = {}
    specs["link-layer"] = {
        "layer": "link", "classes": [
            {"label": "ppp", "support": 14, "template": "ff030021450000????0000401100????0a000001", "tail": [8, 24]},
            {"label": "lldp", "support": 8,
             "template": "0180c200000e02????????????88cc0207040002????????0403057a0406000278", "tail": [4, 12]},
            {"label": "ieee80211", "support": 86,
             "template": "80000000ffffffffffff02??????????02??????????????????????????????64001104", "tail": [10, 40]},
            {"label": "ethernet", "support": 78, "template": "020000000002020000000001080045000054????4000", "tail": [20, 50]},
        ]}
    specs["transport-layer"] = {
        "layer": "transport", "classes": [
            {"label": "icmp", "support": 22, "ip_proto": 1, "template": "0800????????00??", "tail": [16, 32]},
            {"label": "tcp", "support": 100, "ip_proto": 6, "template": _tcp("10", "0050", "01f5"), "tail": [0, 8]},
            {"label": "udp", "support": 26, "ip_proto": 17, "template": "c3??00350028????", "tail": [12, 32]},
            {"label": "sctp", "support": 38, "ip_proto": 132, "template": "0b5a0b59????????????????0003????", "tail": [12, 32]},
        ]}
    specs["app-text"] = {
        "layer": "application", "classes": [
            {"label": "tftp", "support": 20, "port": 69, "template": [
                {"hex": "0001"}, {"random": 14, "charset": "lower"}, {"text": ".bin\x00octet\x00"}]},
            {"label": "http", "support": 19, "carrier": "tcp", "port": 80, "template": [
                {"text": "GET /"}, {"random": 6, "charset": "alnum"},
                {"text": " HTTP/1.1\r\nHost: www.example.com\r\nCookie: sid="},
                {"random": 32, "charset": "alnum"}, {"text": "\r\n\r\n"}]},
            {"label": "smtp", "support": 28, "carrier": "tcp", "port": 25, "template": [
                {"choice": ["MAIL FROM:", "RCPT TO:"]}, {"text": "<"}, {"random": 12, "charset": "lower"},
                {"text": "@mail.example.org>\r\n"}]},
        ]}
    specs["app-binary"] = {
        "layer": "application", "classes": [
            {"label": "dns", "support": 38, "port": 53,
             "template": "????01000001000000000000" + "03777777??????????????03636f6d0000010001", "tail": [0, 0]},
            {"label": "rip", "support": 12, "port": 520,
             "template": "02020000000200000a00????ffffff000000000000000001", "tail": [0, 0]},
            {"label": "tls", "support": 20, "carrier": "tcp", "port": 443,
             "template": "1703030040" + "??" * 24, "tail": [8, 40]},
        ]}
    specs["tcp-types"] = {
        "layer": "transport", "classes": _scaled([
            {"label": "ack", "support": 3357, "ip_proto": 6, "template": _tcp("10")},
            {"label": "psh-ack", "support": 348, "ip_proto": 6, "template": _tcp("18"), "tail": [20, 60]},
            {"label": "syn", "support": 315, "ip_proto": 6, "template": _tcp("02", win="faf0") + "020405b40402080a"},
            {"label": "syn-ack", "support": 288, "ip_proto": 6, "template": _tcp("12", win="7120") + "020405b40101040201030307"},
            {"label": "rst", "support": 2, "ip_proto": 6, "template": _tcp("04", win="0000")},
            {"label": "rst-ack", "support": 3, "ip_proto": 6, "template": _tcp("14", win="0000")},
            {"label": "fin-ack", "support": 157, "ip_proto": 6, "template": _tcp("11")},
        ])}
    sctp_chunks = [("init", 2, "01"), ("init-ack", 2, "02"), ("cookie-echo", 2, "0a"), ("cookie-ack", 2, "0b"),
                   ("data", 120, "00"), ("sack-data", 1, "03"), ("sack", 108, "03"), ("shutdown", 3, "07"),
                   ("shutdown-ack", 2, "08"), ("shutdown-complete", 2, "0e"), ("heartbeat", 73, "04"),
                   ("heartbeat-ack", 63, "05"), ("heartbeat-ack-data", 1, "05"), ("asconf", 3, "c1"),
                   ("asconf-ack", 3, "80")]
    classes = []
    for i, (label, support, ctype) in enumerate(sctp_chunks):
        tmpl = "0b5a0b59????????????????" + ctype + "%02x" % i + "00??"
        classes.append({"label": label, "support": support, "ip_proto": 132, "template": tmpl, "tail": [4, 24]})
    specs["sctp-chunks"] = {"layer": "transport", "classes": classes}
    specs["icmp-types"] = {
        "layer": "transport", "classes": [
            {"label": "reply", "support": 23, "ip_proto": 1, "template": "0000????????00??", "tail": [24, 40]},
            {"label": "request", "support": 27, "ip_proto": 1, "template": "0800????????00??", "tail": [24, 40]},
            {"label": "ttl-exceeded", "support": 12, "ip_proto": 1, "template": "0b00????000000004500", "tail": [20, 28]},
            {"label": "unreachable", "support": 2, "ip_proto": 1, "template": "0303????000000004500", "tail": [20, 28]},
        ]}
    specs["http-methods"] = {
        "layer": "application", "classes": _scaled([
            {"label": "200-ok", "support": 146, "carrier": "tcp", "port": 80, "template": [
                {"text": "HTTP/1.1 200 OK\r\nContent-Type: text/html\r\nContent-Length: "},
                {"random": 4, "charset": "digits"}, {"text": "\r\n\r\n"}]},
            {"label": "get", "support": 537, "carrier": "tcp", "port": 80, "template": [
                {"text": "GET /"}, {"random": 8, "charset": "alnum"},
                {"text": ".html HTTP/1.1\r\nHost: www.example.com\r\nAccept: */*\r\n\r\n"}]},
            {"label": "post", "support": 6, "carrier": "tcp", "port": 80, "template": [
                {"text": "POST /submit HTTP/1.1\r\nHost: www.example.com\r\nContent-Length: "},
                {"random": 3, "charset": "digits"}, {"text": "\r\n\r\nid="}, {"random": 6, "charset": "alnum"}]},
        ])}
    specs["dns-types"] = {
        "layer": "application", "classes": [
            {"label": "query", "support": 36, "port": 53, "template": "????0100000100000000000003777777????????????03636f6d0000010001"},
            {"label": "refused", "support": 1, "port": 53, "template": "????8185000100000000000003777777????????????03636f6d0000010001"},
            {"label": "no-error", "support": 23, "port": 53,
             "template": "????8180000100010000000003777777????????????03636f6d0000010001c00c000100010000????0004????????"},
            {"label": "no-such-name", "support": 6, "port": 53,
             "template": "????8183000100000001000003777777????????????03636f6d0000010001c0??00060001"},
        ]}
    for name, spec in specs.items():
        spec["name"] = name
    return specs


def transport_mix_spec() -> dict:
    """Five-class transport-style mix with imbalanced supports 100/26/38/22/14.

    Fields vary the way live traffic does: a few flows, counters whose low
    byte moves, checksums, and payloads only where the protocol has them.
    """
    return {
        "name": "transport-mix", "layer": "transport", "classes": [
            {"label": "tcp-ack", "support": 100, "ip_proto": 6, "template": [
                {"pick": ["c3500050", "c35101bb"]}, {"hex": "0001e2??00a1b2c35010faf0??000000"}]},
            {"label": "udp-dns", "support": 26, "ip_proto": 17, "template": [
                {"hex": "e1??00350028????0100000100000000000000"},
                {"pick": ["076578616d706c6503636f6d00", "046d61696c036e657400"]}, {"hex": "00010001"}]},
            {"label": "sctp-data", "support": 38, "ip_proto": 132, "template": [
                {"hex": "0b5a0b591a2b3c4d????????000300300000??"},
                {"hex": "0001000000000033"}], "tail": [4, 16]},
            {"label": "icmp-echo", "support": 22, "ip_proto": 1, "template": [
                {"hex": "0800????0001??00"}, {"text": "abcdefghijklmnopqrstuvwabcdefghi"}]},
            {"label": "tcp-syn", "support": 14, "ip_proto": 6, "template": [
                {"hex": "d4310050????????000000006002ffff????0000020405b40103030801010402"}]},
        ]}


def planted_header_spec(n_classes: int = 5, header_bytes: int = 8, tail=(24, 56), support: int = 40) -> dict:
    """Classes that differ only inside the first ``header_bytes`` bytes; random tail after.

    Bytes 0-1 are a shared magic, byte 2 names a group of two classes,
    byte 3 is a shared version and bytes 4.. are distinct per class, so
    prefixes of 4 bytes or less cannot separate group mates.
    """
    if header_bytes < 6:
        raise ValueError("header_bytes must be >= 6")
    classes = []
    for c in range(n_classes):
        head = bytearray([0x5A, 0x17, 0x10 * (c // 2 + 1), 0x01])
        head += bytes(((c + 1) * 0x3B + pos * 0x61) & 0xFF for pos in range(4, header_bytes))
        classes.append({"label": f"type{c}", "support": support, "ip_proto": 253,
                        "template": head.hex(), "tail": list(tail)})
    return {"name": "planted-header", "layer": "transport", "classes": classes}
