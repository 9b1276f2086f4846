"""Run configuration and seed derivation."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Optional

import numpy as np

# sub-seed stream tags
SEED_LDA = 1
SEED_KMEANS = 2
SEED_SAMPLE = 3
SEED_HARNESS = 4


def derive_seed(seed: int, *keys: int) -> int:
    """Child seed for a named stream: ``SeedSequence(seed, spawn_key=keys)``.

    Every random draw in the package goes through this, so a job's result
    does not depend on which worker ran it or in what order.
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, dtype=np.uint32)[0])


@dataclass
class RunConfig:
    seed: int = 0
    gram_bytes: int = 3
    sigma: float = 0.5
    max_field: int = 40
    threshold: float = 0.5
    alpha: Optional[float] = None      # None -> 50 / K
    eta: float = 0.01
    iters: int = 500
    k_range: tuple = tuple(range(2, 21))
    len_range: tuple = tuple(range(4, 65, 2))
    omega: float = 0.7
    coherence_m: int = 10
    text_threshold: float = 0.75
    header_len: Optional[int] = None   # None -> optimise on link/transport
    topic_size: Optional[int] = None   # None -> optimise
    kmeans_k_range: tuple = tuple(range(1, 11))
    kmeans_k: Optional[int] = None     # None -> elbow over kmeans_k_range
    kmeans_max_iters: int = 300
    match: int = 1
    mismatch: int = -1
    gap: int = -1
    textual_features: str = "tf"       # feature extractor behind field tokens
    jobs: int = 1

    def __post_init__(self):
        self.k_range = tuple(int(k) for k in self.k_range)
        self.len_range = tuple(int(x) for x in self.len_range)
        self.kmeans_k_range = tuple(int(k) for k in self.kmeans_k_range)
        if self.textual_features not in ("tf", "lda"):
            raise ValueError("textual_features must be 'tf' or 'lda'")

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        for key in ("k_range", "len_range", "kmeans_k_range"):
            d[key] = list(d[key])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})
