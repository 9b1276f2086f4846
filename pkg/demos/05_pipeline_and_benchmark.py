# %% [markdown]
# # The full pipeline
#
# One call runs stripping, hyperparameter search, features, clustering and
# scoring. HYBRID picks the method from the capture itself: LDA for binary
# application payloads, field tokens for text, n-grams + TF otherwise.

# %%
from protoclust.capture import Dataset, Layer
from protoclust.config import RunConfig
from protoclust.hybrid import HYBRID, LDA_KMEANS, NETZOB_LIKE, TF_UPGMA, run_benchmark, run_pipeline, winners
from protoclust.synth import builtin_specs, generate

quick = RunConfig(iters=60, k_range=tuple(range(2, 8)), len_range=tuple(range(6, 21, 2)))

text = Dataset(generate(builtin_specs()["app-text"], 0), Layer.APPLICATION, "app-text")
report = run_pipeline(text, HYBRID, quick)
print(report.strategy, report.scores["ari"])

# %%
names = ["app-text", "icmp-types", "dns-types"]
datasets = [Dataset(generate(builtin_specs()[n], 0), builtin_specs()[n]["layer"], n) for n in names]
grid = run_benchmark(datasets, [NETZOB_LIKE, LDA_KMEANS, TF_UPGMA, HYBRID], quick)
for row in grid:
    print(f"{row['dataset']:12s} {row['strategy']:12s} {row['ari']:.3f}")
print(winners(grid))

# %% [markdown]
# On short binary payloads the default alpha of 50/K makes every topic
# mixture nearly uniform, and UPGMA puts everything in one cluster. A small
# fixed alpha keeps the mixtures sharp.

# %%
dns = datasets[2]
for alpha in (None, 0.1):
    rep = run_pipeline(dns, HYBRID, quick.replace(alpha=alpha, iters=300))
    print("alpha", alpha or "50/K", "clusters", rep.k, "ARI", round(rep.scores["ari"], 3))
