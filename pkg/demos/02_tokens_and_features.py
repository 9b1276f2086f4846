# %% [markdown]
# # Tokens and feature matrices
#
# Two tokenisers (stride-1 hex n-grams and bit-congruence field cuts) and
# three feature views: term frequencies, LDA topic mixtures, alignment scores.

# %%
import numpy as np

from protoclust.features import build_tf_matrix, doc_topic_features, fit_lda, nwsa_matrix, nwsa_score
from protoclust.tokenize import nemesys_boundaries, ngram_tokenize, tokenize_corpus

print(ngram_tokenize(b"\x01\x02\x03\x04\x05"))

msg = b"GET /index.html HTTP/1.1\r\nHost: example.com\r\n\r\n"
cuts = nemesys_boundaries(msg)
print(cuts)

# %%
msgs = [b"\x0a\x01\x00\x10payload-a", b"\x0a\x01\x00\x11payload-b", b"\x0b\x02\xff\x00zzzz"]
corpus = tokenize_corpus(msgs, "ngram", 3)
tf = build_tf_matrix(corpus)
print(tf.shape, tf.values.sum(axis=1))

# %% [markdown]
# LDA with an explicit alpha; the 50/K default spreads mass over all topics
# on documents this short.

# %%
model = fit_lda(corpus, 2, alpha=1.0, iters=200, seed=0)
print(np.round(doc_topic_features(model).values, 2))

# %%
print(nwsa_score(b"GATTACA", b"GCATGCU"))
fm = nwsa_matrix(msgs)
print(fm.values, fm.stats)
