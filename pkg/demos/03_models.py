"""Extractor, Generator and Discriminator, and the LAC-GAN / AC-GAN costs."""

# %%
import numpy as np

from lacgan.model import AcGanBaseline, LacGanModel, acgan_losses, lacgan_losses, sample_latent

rng = np.random.default_rng(0)
model = LacGanModel(rng)
for name, net in model.networks.items():
    print(name, net.widths, f"{net.n_params()} parameters")

# %% E maps the 400-dim input to class probabilities and exposes its 50-dim
# bottleneck as the real latent sample; G maps (z, c) into the same space.
x_raw = rng.normal(size=(6, 400))
p_e, x_real, _ = model.E.forward(x_raw, "infer")
z, c = sample_latent(rng, 6)
x_fake, _ = model.G.forward(z, c, "infer")
print("p_E rows sum to", p_e.sum(axis=1).round(12))
print("x_real", x_real.shape, "x_fake", x_fake.shape, "x_fake range", x_fake.min().round(3), x_fake.max().round(3))

# %% D judges source and class; its class head is the classifier at test time.
y = np.eye(4)[rng.integers(0, 4, 6)]
j_e, j_d, j_g, parts = lacgan_losses((x_raw, y), model, rng)
print(f"J_E {j_e:.4f}  J_S {parts.j_s:.4f}  J_C(D) {parts.j_c_d:.4f}  J_D {j_d:.4f}  J_G {j_g:.4f}")
print("J_D = J_S + 0.2 J_C:", np.isclose(j_d, parts.j_s + 0.2 * parts.j_c_d))
print("predictions", model.predict(x_raw))

# %% The AC-GAN baseline plays the same game directly on the raw inputs.
base = AcGanBaseline(rng)
print("AC-GAN G", base.G.net.widths, "D", base.D.net.widths)
j_d, j_g, parts = acgan_losses((x_raw, y), base, rng)
print(f"AC-GAN J_D {j_d:.4f}  J_G {j_g:.4f}")
