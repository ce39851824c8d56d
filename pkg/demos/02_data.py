"""The synthetic corpus, hashed bag-of-words embeddings and the 80/10/10 split."""

# %%
import numpy as np

from lacgan.data import (
    corpus_statistics,
    embed_name,
    embed_samples,
    embed_text,
    filter_labels,
    generate_synthetic,
    split_dataset,
)

samples = generate_synthetic()
print(corpus_statistics(samples))

# %% One record: a name expression with '|'-separated candidates, scene
# sentences, and one of seven labels of which N/M0/M1/M2 are trainable.
s = samples[0]
print(s.id, s.synset, s.label.value, s.name)
for sentence in s.situation_sentences[:5]:
    print("   ", sentence)

# %% Documents sharing words get similar vectors.
def cos(a, b):
    return float(a @ b / np.linalg.norm(a) / np.linalg.norm(b))


a = embed_text("a red cup next to the sink")
b = embed_text("a red cup next to the stove")
c = embed_text("teddy bear on a sofa")
print("similar", round(cos(a, b), 3), "unrelated", round(cos(a, c), 3))
print("name average equals mean of candidates:",
      np.allclose(embed_name(["cups in stack", "stacked cups"]), (embed_text("cups in stack") + embed_text("stacked cups")) / 2))

# %% Filtering keeps the four trainable classes; the split floors validation
# and test to 10% each.
kept = filter_labels(samples)
split = split_dataset(samples, seed=0)
print(len(samples), "records,", len(kept), "trainable ->", len(split.train), len(split.validation), len(split.test))
X, Y = embed_samples(split.train)
print("x_raw matrix", X.shape, "labels", Y.sum(axis=0))
