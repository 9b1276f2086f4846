# %% [markdown]
# # Choosing the topic size and the header length
#
# Topic size: sweep K, score each fit by FREX exclusivity and semantic
# coherence, min-max both, keep the K farthest from the origin.
# Header length: repeat that per length and keep the length whose optimum
# stands out most from its neighbours.

# %%
import numpy as np

from protoclust.capture import Dataset, Layer
from protoclust.config import RunConfig
from protoclust.optimize import select_header_length, select_topic_size
from protoclust.synth import generate, planted_header_spec
from protoclust.tokenize import TokenCorpus

rng = np.random.default_rng(0)
docs = []
for _ in range(200):
    t = rng.integers(4)
    docs.append([f"{t:02x}{w % 15:02x}" for w in rng.zipf(1.5, rng.integers(15, 30))])

K, scores = select_topic_size(TokenCorpus(docs), range(2, 9), RunConfig(iters=150))
print("chosen K", K)
for s in scores:
    print(s.K, round(s.norm_excl, 2), round(s.norm_coh, 2), round(s.origin_distance, 2))

# %%
d = Dataset(generate(planted_header_spec(), 0), Layer.TRANSPORT, "planted")
L, K, sweep = select_header_length(d, range(4, 21, 4), range(2, 8), RunConfig(iters=100))
print("chosen header length", L, "topic size", K)
for row in sweep:
    print(row["length"], row["best_K"], round(row["isolation"], 3))
