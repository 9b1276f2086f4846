"""Byte n-gram and field-boundary tokenisers for protocol headers.

Tokens are lowercase hex strings.  The field tokeniser segments a message
at changes of *bit congruence* between consecutive bytes, in the spirit
of NEMESYS.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

# deltas smaller than this are float noise from edge renormalisation
_DELTA_EPS = 1e-12


@dataclass
class TokenCorpus:
    docs: list
    vocab: list = field(default_factory=list)
    method: str = "ngram"

    def __post_init__(self):
        if not self.vocab:
            self.vocab = build_vocab(self.docs)

    def __len__(self):
        return len(self.docs)

    def index(self) -> dict:
        return {tok: i for i, tok in enumerate(self.vocab)}

    def as_ids(self) -> list:
        """Docs as integer arrays into ``vocab``."""
        lookup = self.index()
        return [np.fromiter((lookup[t] for t in doc), dtype=np.int64, count=len(doc))
                for doc in self.docs]

    def subset(self, rows: Sequence[int]) -> "TokenCorpus":
        return TokenCorpus([self.docs[i] for i in rows], method=self.method)


@dataclass(frozen=True)
class FieldBoundaries:
    cut_points: tuple

    def __post_init__(self):
        cuts = self.cut_points
        if not cuts:
            raise ValueError("at least one cut point is required")
        if any(b <= a for a, b in zip(cuts, cuts[1:])) or cuts[0] <= 0:
            raise ValueError(f"cut points must be positive and strictly increasing: {cuts}")


def build_vocab(docs) -> list:
    """Distinct tokens in order of first appearance."""
    seen = {}
    for doc in docs:
        for tok in doc:
            if tok not in seen:
                seen[tok] = len(seen)
    return list(seen)


def _payload(h) -> bytes:
    return bytes(getattr(h, "bytes", h))


def ngram_tokenize(h, gram_bytes: int = 3) -> list:
    """Stride-1 byte n-grams of a header slice (or raw bytes) as hex tokens."""
    if gram_bytes < 1:
        raise ValueError("gram_bytes must be >= 1")
    data = _payload(h)
    if not data:
        return []
    if len(data) <= gram_bytes:
        return [data.hex()]
    return [data[i:i + gram_bytes].hex() for i in range(len(data) - gram_bytes + 1)]


_POPCOUNT = np.array([bin(i).count("1") for i in range(256)], dtype=np.int64)


def bit_congruence(payload: bytes) -> np.ndarray:
    """Fraction of equal bits between each pair of consecutive bytes."""
    if len(payload) < 2:
        raise ValueError("bit congruence needs at least two bytes")
    b = np.frombuffer(bytes(payload), dtype=np.uint8)
    differing = _POPCOUNT[np.bitwise_xor(b[:-1], b[1:])]
    return (8 - differing) / 8.0


def gaussian_smooth(series: np.ndarray, sigma: float) -> np.ndarray:
    """Truncated Gaussian filter (radius ceil(3 sigma)), renormalised at the edges."""
    radius = int(math.ceil(3 * sigma))
    offsets = np.arange(-radius, radius + 1)
    kernel = np.exp(-0.5 * (offsets / sigma) ** 2)
    n = len(series)
    out = np.empty(n)
    for i in range(n):
        lo, hi = max(0, i - radius), min(n, i + radius + 1)
        w = kernel[lo - i + radius:hi - i + radius]
        out[i] = np.dot(w, series[lo:hi]) / w.sum()
    return out


def nemesys_boundaries(payload: bytes, sigma: float = 0.5, max_field: int = 40) -> FieldBoundaries:
    """Field boundaries from extrema of the smoothed bit-congruence delta.

    A cut is placed before byte ``i + 1`` wherever the delta of the smoothed
    congruence turns from non-negative to negative, or where its magnitude
    exceeds the mean absolute delta.  Fields longer than ``max_field`` are
    chopped into ``max_field`` chunks.
    """
    n = len(payload)
    if n < 1:
        raise ValueError("empty payload")
    if sigma <= 0 or max_field < 1:
        raise ValueError("sigma must be > 0 and max_field >= 1")
    cuts = set()
    if n >= 3:
        smooth = gaussian_smooth(bit_congruence(payload), sigma)
        delta = np.diff(smooth)
        delta[np.abs(delta) < _DELTA_EPS] = 0.0
        mean_abs = np.abs(delta).mean()
        for i, d in enumerate(delta):
            falling = i > 0 and delta[i - 1] >= 0 and d < 0
            if falling or abs(d) > mean_abs:
                cuts.add(i + 1)
    cuts.add(n)
    cuts = sorted(c for c in cuts if 0 < c <= n)

    chunked = []
    start = 0
    for c in cuts:
        while c - start > max_field:
            start += max_field
            chunked.append(start)
        chunked.append(c)
        start = c
    return FieldBoundaries(tuple(chunked))


def field_tokenize(h, b: FieldBoundaries) -> list:
    data = _payload(h)
    cuts = b.cut_points
    if not cuts:
        raise ValueError("empty cut list")
    if cuts[-1] > len(data):
        raise ValueError(f"boundary {cuts[-1]} beyond payload of {len(data)} bytes")
    tokens, start = [], 0
    for c in cuts:
        tokens.append(data[start:c].hex())
        start = c
    if start < len(data):
        tokens.append(data[start:].hex())
    return tokens


def tokenize_corpus(slices, method: str = "ngram", gram_bytes: int = 3,
                    sigma: float = 0.5, max_field: int = 40) -> TokenCorpus:
    """Tokenise a list of header slices with either tokeniser."""
    docs = []
    for h in slices:
        data = _payload(h)
        if method == "ngram":
            docs.append(ngram_tokenize(data, gram_bytes))
        elif method in ("field", "nemesys"):
            docs.append(field_tokenize(data, nemesys_boundaries(data, sigma, max_field)) if data else [])
        else:
            raise ValueError(f"unknown tokeniser {method!r}")
    return TokenCorpus(docs, method="ngram" if method == "ngram" else "field")
