"""The four-method comparison. Pass --full for 300 epochs and three seeds."""

# %%
import sys

from lacgan.data import generate_synthetic
from lacgan.train import TrainConfig, compare_methods, prepare_data

full = "--full" in sys.argv
data = prepare_data(generate_synthetic())
base = TrainConfig() if full else TrainConfig(epochs=15)
seeds = [0, 1, 2] if full else [0]

# %% Each row is fitted per seed; the report shows medians next to the
# published reference values, which are quoted and not recomputed.
report = compare_methods(data, seeds, base)
print(report.format())
