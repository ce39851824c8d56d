"""Extractor / Generator / Discriminator networks and their cost wiring.

Three trainable methods share this module:

* ``lacgan`` -- the adversarial game is played on the Extractor's 50-dim
  bottleneck features; prediction goes through the Discriminator's class head.
* ``acgan`` -- the same conditional GAN played directly on the 400-dim raw
  input, with no Extractor.
* ``extractor_only`` -- the Extractor trained alone, predicting with its own
  softmax output.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionError, StateError
from .nn import (
    DropoutSpec,
    Network,
    adversarial_grads,
    adversarial_losses,
    as_mat,
    build_mlp,
    check_one_hot,
    cross_entropy,
    set_pa_mode,
    sigmoid_forward,
    softmax_cross_entropy_grad,
    softmax_forward,
)

D_RAW = 400
D_REAL = 50
D_Z = 100
D_Y = 4

EXTRACTOR_WIDTHS = (400, 400, 100, 50, 100, 4)
GENERATOR_WIDTHS = (104, 100, 100, 50)
DISCRIMINATOR_WIDTHS = (50, 100, 100, 5)
ACGAN_GENERATOR_WIDTHS = (104, 100, 100, 400)
ACGAN_DISCRIMINATOR_WIDTHS = (400, 100, 100, 5)

METHODS = ("lacgan", "acgan", "extractor_only")


def sample_latent(rng: np.random.Generator, batch: int, d_z: int = D_Z, d_y: int = D_Y):
    """Draw ``z ~ N(0, I)`` and a uniformly distributed one-hot class code ``c``."""
    if batch < 1:
        raise ConfigError(f"batch must be >= 1, got {batch}")
    z = rng.standard_normal((batch, d_z))
    c = np.zeros((batch, d_y))
    c[np.arange(batch), rng.integers(0, d_y, size=batch)] = 1.0
    return z, c


class Extractor:
    """Bottleneck classifier producing ``p_E(y)`` and the latent features ``x_real``."""

    bottleneck_index = 2

    def __init__(self, rng: np.random.Generator, pa: bool = True, widths=EXTRACTOR_WIDTHS, **bn):
        self.net = build_mlp(widths, ["relu"] * (len(widths) - 2) + ["linear"], rng, pa=pa, **bn)

    def forward(self, x_raw, mode: str = "train", update_running: bool = True):
        """Return ``(p_E_y, x_real, cache)``."""
        logits, cache = self.net.forward(x_raw, mode, update_running=update_running)
        return softmax_forward(logits), cache.outputs[self.bottleneck_index], cache

    def backward(self, cache, d_logits, d_x_real=None):
        taps = None if d_x_real is None else {self.bottleneck_index: d_x_real}
        grads, _ = self.net.backward(cache, d_logits, taps)
        return grads


class Generator:
    """Class-conditional generator ``G(z, c)`` with a tanh output."""

    def __init__(self, rng: np.random.Generator, pa: bool = True, widths=GENERATOR_WIDTHS, d_z: int = D_Z, **bn):
        if widths[0] != d_z + D_Y:
            raise DimensionError(f"generator input width {widths[0]} != d_z + d_y = {d_z + D_Y}")
        self.d_z = d_z
        self.net = build_mlp(widths, ["relu"] * (len(widths) - 2) + ["tanh"], rng, pa=pa, **bn)

    def forward(self, z, c, mode: str = "train", update_running: bool = True):
        """Return ``(x_fake, cache)``."""
        z, c = as_mat(z), as_mat(c)
        check_one_hot(c, "class code")
        if z.shape != (c.shape[0], self.d_z) or c.shape[1] != D_Y:
            raise DimensionError(f"z of shape {z.shape} and c of shape {c.shape} do not form a generator input")
        return self.net.forward(np.hstack([z, c]), mode, update_running=update_running)


class Discriminator:
    """Dual-head discriminator: node 0 is the sigmoid source head, nodes 1..4 the softmax class head.

    The first layer carries dropout and never BN.
    """

    def __init__(self, rng: np.random.Generator, pa: bool = True, widths=DISCRIMINATOR_WIDTHS, keep_prob: float = 0.5, **bn):
        if widths[-1] != 1 + D_Y:
            raise DimensionError(f"discriminator output width must be {1 + D_Y}, got {widths[-1]}")
        self.net = build_mlp(
            widths,
            ["relu"] * (len(widths) - 2) + ["linear"],
            rng,
            pa=pa,
            no_bn=(0,),
            dropout={0: DropoutSpec(keep_prob)},
            **bn,
        )

    def forward(self, x, mode: str = "train", rng: np.random.Generator | None = None, update_running: bool = True):
        """Return ``(p_source, p_class, cache)``."""
        logits, cache = self.net.forward(x, mode, rng, update_running)
        return sigmoid_forward(logits[:, 0]), softmax_forward(logits[:, 1:]), cache

    def backward(self, cache, d_source_logit, d_class_logits):
        """Return ``(grads, dx)`` given gradients on the two heads' logits."""
        d_out = np.hstack([np.asarray(d_source_logit).reshape(-1, 1), d_class_logits])
        return self.net.backward(cache, d_out)

    def forward_mixed(self, x_real, x_fake, mode: str = "train", rng: np.random.Generator | None = None, update_running: bool = True):
        """Score real and fake rows as one batch so BN statistics are shared.

        Separate batches would let train-mode BN in front of the output layer
        pin the batch-mean source logit to the same value for real and fake
        inputs, leaving the source head nothing to learn from.
        Returns ``(p_source_real, p_class_real, p_source_fake, cache)``.
        """
        x_real, x_fake = as_mat(x_real), as_mat(x_fake)
        n = x_real.shape[0]
        p_source, p_class, cache = self.forward(np.vstack([x_real, x_fake]), mode, rng, update_running)
        return p_source[:n], p_class[:n], p_source[n:], cache


@dataclass
class LossParts:
    """Individual cost terms of one mini-batch evaluation."""

    j_s: float
    j_g: float
    j_c_d: float
    j_d: float
    j_e: float | None = None
    d_real: np.ndarray | None = None
    d_fake: np.ndarray | None = None
    p_class_real: np.ndarray | None = None


class _ConditionalGan:
    """Shared generator/discriminator game. Subclasses define the real feature space."""

    method = ""

    def __init__(self, G: Generator, D: Discriminator, lam: float, pa: bool):
        if lam < 0:
            raise ConfigError(f"lambda must be >= 0, got {lam}")
        self.G, self.D, self.lam, self.pa = G, D, float(lam), pa

    def real_features(self, x_raw):
        raise NotImplementedError

    def _heads_grad(self, ps_r, pc_r, ps_f, y, sign: float = 1.0, lam: float = 0.0):
        """Logit gradients for the mixed batch of ``sign * (J_S + lam * J_C)``."""
        g_r, g_f = adversarial_grads(ps_r, ps_f)
        d_cls = np.zeros((ps_r.size + ps_f.size, D_Y))
        if lam:
            d_cls[: ps_r.size] = lam * softmax_cross_entropy_grad(pc_r, y)
        return sign * np.concatenate([g_r, g_f]), sign * d_cls

    def d_step(self, x_real, y, rng: np.random.Generator):
        """Gradients of ``J_D = J_S + lam * J_C`` for D only; G's output is treated as a constant.

        Returns ``(grads_D, parts, dx_real)``.
        """
        x_real, y = as_mat(x_real), as_mat(y)
        n = x_real.shape[0]
        z, c = sample_latent(rng, n)
        x_fake, _ = self.G.forward(z, c, "train", update_running=False)
        ps_r, pc_r, ps_f, cache = self.D.forward_mixed(x_real, x_fake, "train", rng, update_running=True)
        j_s, j_g = adversarial_losses(ps_r, ps_f)
        j_c = cross_entropy(pc_r, y)
        grads, dx = self.D.backward(cache, *self._heads_grad(ps_r, pc_r, ps_f, y, 1.0, self.lam))
        parts = LossParts(j_s, j_g, j_c, j_s + self.lam * j_c, d_real=ps_r, d_fake=ps_f, p_class_real=pc_r)
        return grads, parts, dx[:n]

    def g_step(self, x_real, rng: np.random.Generator):
        """Gradients of ``J_G = -J_S`` for G only; D is read but never updated.

        Returns ``(grads_G, parts)``; ``parts.j_c_d`` is NaN because no labels are involved.
        """
        x_real = as_mat(x_real)
        n = x_real.shape[0]
        z, c = sample_latent(rng, n)
        x_fake, cache_g = self.G.forward(z, c, "train", update_running=True)
        ps_r, pc_r, ps_f, cache = self.D.forward_mixed(x_real, x_fake, "train", rng, update_running=False)
        j_s, j_g = adversarial_losses(ps_r, ps_f)
        _, dx = self.D.backward(cache, *self._heads_grad(ps_r, pc_r, ps_f, None, -1.0))
        grads_g, _ = self.G.net.backward(cache_g, dx[n:])
        return grads_g, LossParts(j_s, j_g, float("nan"), float("nan"), d_real=ps_r, d_fake=ps_f)

    def predict_proba(self, x_raw) -> np.ndarray:
        _, p_class, _ = self.D.forward(self.real_features(x_raw), "infer")
        return p_class

    def predict(self, x_raw) -> np.ndarray:
        return predict_labels(self.predict_proba(x_raw))

    def set_pa_mode(self, on: bool):
        _set_pa(self.networks, on)
        self.pa = bool(on)
        return self


class LacGanModel(_ConditionalGan):
    """Extractor + conditional GAN over the Extractor's bottleneck features."""

    method = "lacgan"

    def __init__(self, rng: np.random.Generator, lam: float = 0.2, pa: bool = True, keep_prob: float = 0.5, d_z: int = D_Z, **bn):
        self.E = Extractor(rng, pa, **bn)
        widths = (d_z + D_Y,) + GENERATOR_WIDTHS[1:]
        super().__init__(Generator(rng, pa, widths, d_z, **bn), Discriminator(rng, pa, keep_prob=keep_prob, **bn), lam, pa)
        if self.E.net.widths[self.E.bottleneck_index + 1] != self.G.net.widths[-1]:
            raise DimensionError("extractor bottleneck width must equal generator output width")

    @property
    def networks(self) -> dict[str, Network]:
        return {"E": self.E.net, "G": self.G.net, "D": self.D.net}

    def real_features(self, x_raw):
        _, x_real, _ = self.E.forward(x_raw, "infer")
        return x_real

    def e_step(self, x_raw, y):
        """Gradients of ``J_E = J_C(p_E(y), y)``. Returns ``(grads_E, j_e)``."""
        p, _, cache = self.E.forward(x_raw, "train")
        return self.E.backward(cache, softmax_cross_entropy_grad(p, as_mat(y))), cross_entropy(p, y)


class AcGanBaseline(_ConditionalGan):
    """Conditional GAN with an auxiliary classifier, played in the raw input space."""

    method = "acgan"

    def __init__(self, rng: np.random.Generator, lam: float = 0.2, pa: bool = True, keep_prob: float = 0.5, d_z: int = D_Z, **bn):
        widths = (d_z + D_Y,) + ACGAN_GENERATOR_WIDTHS[1:]
        super().__init__(
            Generator(rng, pa, widths, d_z, **bn),
            Discriminator(rng, pa, ACGAN_DISCRIMINATOR_WIDTHS, keep_prob, **bn),
            lam,
            pa,
        )

    @property
    def networks(self) -> dict[str, Network]:
        return {"G": self.G.net, "D": self.D.net}

    def real_features(self, x_raw):
        return as_mat(x_raw)


class ExtractorOnly:
    """The Extractor trained on its own cross-entropy, predicting from ``p_E(y)``."""

    method = "extractor_only"

    def __init__(self, rng: np.random.Generator, pa: bool = True, **bn):
        self.E = Extractor(rng, pa, **bn)
        self.pa = pa

    @property
    def networks(self) -> dict[str, Network]:
        return {"E": self.E.net}

    def e_step(self, x_raw, y):
        p, _, cache = self.E.forward(x_raw, "train")
        return self.E.backward(cache, softmax_cross_entropy_grad(p, as_mat(y))), cross_entropy(p, y)

    def predict_proba(self, x_raw) -> np.ndarray:
        p, _, _ = self.E.forward(x_raw, "infer")
        return p

    def predict(self, x_raw) -> np.ndarray:
        return predict_labels(self.predict_proba(x_raw))

    def set_pa_mode(self, on: bool):
        _set_pa(self.networks, on)
        self.pa = bool(on)
        return self


def _set_pa(networks: dict[str, Network], on: bool) -> None:
    if any(net.trained for net in networks.values()):
        raise StateError("cannot change BN placement after training has started")
    for net in networks.values():
        set_pa_mode(net, on)


def predict_labels(p_class: np.ndarray) -> np.ndarray:
    """Row-wise argmax; ties resolve to the lowest class index."""
    return np.argmax(as_mat(p_class), axis=1)


def build_model(method: str, rng: np.random.Generator, lam: float = 0.2, pa: bool = True, keep_prob: float = 0.5, d_z: int = D_Z, **bn):
    if method == "lacgan":
        return LacGanModel(rng, lam, pa, keep_prob, d_z, **bn)
    if method == "acgan":
        return AcGanBaseline(rng, lam, pa, keep_prob, d_z, **bn)
    if method == "extractor_only":
        return ExtractorOnly(rng, pa, **bn)
    raise ConfigError(f"unknown method {method!r}; expected one of {METHODS}")


def _gan_losses(model: _ConditionalGan, x_raw, y, rng: np.random.Generator) -> LossParts:
    x_raw, y = as_mat(x_raw), as_mat(y)
    x_real = model.real_features(x_raw)
    z, c = sample_latent(rng, x_real.shape[0])
    x_fake, _ = model.G.forward(z, c, "train", update_running=False)
    ps_r, pc_r, ps_f, _ = model.D.forward_mixed(x_real, x_fake, "train", rng, update_running=False)
    j_s, j_g = adversarial_losses(ps_r, ps_f)
    j_c = cross_entropy(pc_r, y)
    return LossParts(j_s, j_g, j_c, j_s + model.lam * j_c, d_real=ps_r, d_fake=ps_f, p_class_real=pc_r)


def lacgan_losses(batch, model: LacGanModel, rng: np.random.Generator):
    """Evaluate ``(J_E, J_D, J_G, parts)`` on one labelled batch without touching any state.

    ``batch`` is an ``(x_raw, y)`` pair.
    """
    x_raw, y = batch
    p_e, _, _ = model.E.forward(x_raw, "train", update_running=False)
    parts = _gan_losses(model, x_raw, y, rng)
    parts.j_e = cross_entropy(p_e, y)
    return parts.j_e, parts.j_d, parts.j_g, parts


def acgan_losses(batch, baseline: AcGanBaseline, rng: np.random.Generator):
    """Evaluate ``(J_D, J_G, parts)`` for the raw-space baseline."""
    x_raw, y = batch
    parts = _gan_losses(baseline, x_raw, y, rng)
    return parts.j_d, parts.j_g, parts
