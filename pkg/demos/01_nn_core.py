"""Building blocks: dense layers, batch normalization, losses, Adam, gradient checks."""

# %%
import numpy as np

from lacgan.gradcheck import run_all
from lacgan.nn import (
    Adam,
    BatchNormParams,
    adversarial_losses,
    batchnorm_forward,
    build_mlp,
    cross_entropy,
    softmax_forward,
)

rng = np.random.default_rng(0)

# %% Batch normalization standardizes each column in train mode and uses
# running statistics in inference mode.
x = rng.normal(3.0, 2.0, (64, 5))
bn = BatchNormParams.init(5)
y, _ = batchnorm_forward(x, bn, "train")
print("train-mode column means", y.mean(axis=0).round(12))
print("train-mode column stds ", y.std(axis=0).round(4))
print("running mean after one batch", bn.running_mean.round(3))

# %% The adversarial cost is ln 2 when D outputs 0.5 everywhere, and a uniform
# 4-way prediction costs ln 4.
half = np.full(10, 0.5)
j_s, j_g = adversarial_losses(half, half)
print("J_S", j_s, "ln 2", np.log(2), "J_G", j_g)
print("uniform CE", cross_entropy(np.full((3, 4), 0.25), np.eye(4)[:3]), "ln 4", np.log(4))

# %% A small classifier fitted with the hand-written backward pass and Adam.
W_true = rng.normal(size=(10, 4))
X = rng.normal(size=(200, 10))
Y = np.eye(4)[np.argmax(X @ W_true, axis=1)]
# The network emits logits; softmax + cross-entropy has gradient (p - y) / n.
net = build_mlp([10, 32, 4], ["relu", "linear"], rng, pa=True)
opt = Adam(net, lr=0.01)
for step in range(300):
    logits, cache = net.forward(X, "train", rng)
    p = softmax_forward(logits)
    grads, _ = net.backward(cache, (p - Y) / len(X))
    opt.step(grads)
logits, _ = net.forward(X, "infer")
print("final loss", round(cross_entropy(softmax_forward(logits), Y), 4))
print("train accuracy", np.mean(logits.argmax(1) == Y.argmax(1)))

# %% Every backward pass of E, G and D is compared against central finite
# differences, with pre-activation BN on and off.
for report in run_all(seeds=(0,)):
    layer, err = report.worst
    print(f"{report.name:<12} worst {err:.2e} at {layer}")
