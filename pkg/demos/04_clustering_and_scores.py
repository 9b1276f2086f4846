# %% [markdown]
# # Clustering and scoring
#
# UPGMA cut at a dissimilarity threshold, K-means with an elbow-picked K,
# and the external scores used to compare them against ground truth.

# %%
import numpy as np

from protoclust.cluster import cosine_dissimilarity, kmeans, select_k_kmeans, upgma
from protoclust.metrics import evaluate

rng = np.random.default_rng(2)
centres = np.eye(4) * 5
truth = np.repeat(np.arange(4), 25)
X = centres[truth] + rng.normal(0, 1, (100, 4))

assignment, dendro = upgma(cosine_dissimilarity(X), threshold=0.5)
print("UPGMA clusters:", assignment.k)
print(evaluate(assignment.labels, truth.tolist()))

# %%
k = select_k_kmeans(X, range(1, 9), seed=0)
km = kmeans(X, k, seed=0)
print("elbow K:", k)
print(evaluate(km.labels, truth.tolist()))
