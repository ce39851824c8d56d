"""Central finite-difference verification of the hand-written backward passes."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .model import D_Y, Discriminator, Extractor, Generator, sample_latent
from .nn import (
    Network,
    adversarial_grads,
    adversarial_losses,
    cross_entropy,
    softmax_cross_entropy_grad,
)

STEP = 1e-5
TOLERANCE = 1e-5
# Below this magnitude both gradients count as zero; keeps the ratio meaningful.
ABS_FLOOR = 1e-5


def relative_error(analytic, numeric, floor: float = ABS_FLOOR) -> np.ndarray:
    a, n = np.asarray(analytic, dtype=np.float64), np.asarray(numeric, dtype=np.float64)
    return np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)


def numeric_entries(loss: Callable[[], float], array: np.ndarray, indices, h: float = STEP) -> np.ndarray:
    """Central differences of ``loss`` with respect to selected entries of ``array`` (perturbed in place)."""
    out = np.empty(len(indices))
    flat = array.reshape(-1)
    for k, i in enumerate(indices):
        old = flat[i]
        flat[i] = old + h
        up = loss()
        flat[i] = old - h
        down = loss()
        flat[i] = old
        out[k] = (up - down) / (2.0 * h)
    return out


@dataclass
class NetworkReport:
    name: str
    errors: dict[str, float] = field(default_factory=dict)

    @property
    def worst(self) -> tuple[str, float]:
        key = max(self.errors, key=self.errors.get)
        return key, self.errors[key]

    @property
    def max_error(self) -> float:
        return max(self.errors.values())


def check_network(
    name: str,
    net: Network,
    loss: Callable[[], float],
    grads: list[np.ndarray],
    rng: np.random.Generator,
    n_entries: int = 6,
    h: float = STEP,
    perturb: float = 0.0,
) -> NetworkReport:
    """Compare ``grads`` (aligned with ``net.parameters()``) to finite differences of ``loss``.

    ``perturb`` is added to every analytic entry; it exists only to prove the
    detector fires.
    """
    report = NetworkReport(name)
    for pname, param, grad in zip(net.parameter_names(), net.parameters(), grads):
        idx = rng.choice(param.size, size=min(n_entries, param.size), replace=False)
        num = numeric_entries(loss, param, idx, h)
        report.errors[pname] = float(relative_error(grad.reshape(-1)[idx] + perturb, num).max())
    return report


def _labels(rng, n):
    y = np.zeros((n, D_Y))
    y[np.arange(n), rng.integers(0, D_Y, n)] = 1.0
    return y


def check_extractor(seed: int, pa: bool, batch: int = 8, n_entries: int = 6, perturb: float = 0.0) -> NetworkReport:
    rng = np.random.default_rng(seed)
    E = Extractor(rng, pa)
    x = rng.normal(0.0, 1.0, (batch, E.net.widths[0]))
    y = _labels(rng, batch)

    def loss():
        p, _, _ = E.forward(x, "train", update_running=False)
        return cross_entropy(p, y)

    p, _, cache = E.forward(x, "train", update_running=False)
    grads = E.backward(cache, softmax_cross_entropy_grad(p, y))
    return check_network(f"E(pa={pa})", E.net, loss, grads, rng, n_entries, perturb=perturb)


def check_discriminator(seed: int, pa: bool, batch: int = 8, n_entries: int = 6, lam: float = 0.2, width=None, perturb: float = 0.0) -> NetworkReport:
    """Check ``J_S + lam * J_C`` gradients for D on a mixed real/fake batch."""
    rng = np.random.default_rng(seed)
    D = Discriminator(rng, pa) if width is None else Discriminator(rng, pa, (width, 100, 100, 5))
    n_in = D.net.widths[0]
    x_real = rng.normal(0.0, 1.0, (batch, n_in))
    x_fake = rng.uniform(-1.0, 1.0, (batch, n_in))
    y = _labels(rng, batch)
    drop_seed = seed + 1000

    def terms():
        return D.forward_mixed(x_real, x_fake, "train", np.random.default_rng(drop_seed), update_running=False)

    def loss():
        ps_r, pc_r, ps_f, _ = terms()
        return adversarial_losses(ps_r, ps_f)[0] + lam * cross_entropy(pc_r, y)

    ps_r, pc_r, ps_f, cache = terms()
    g_r, g_f = adversarial_grads(ps_r, ps_f)
    d_cls = np.zeros((2 * batch, D_Y))
    d_cls[:batch] = lam * softmax_cross_entropy_grad(pc_r, y)
    grads, _ = D.backward(cache, np.concatenate([g_r, g_f]), d_cls)
    return check_network(f"D(pa={pa})", D.net, loss, grads, rng, n_entries, perturb=perturb)


def check_generator(seed: int, pa: bool, batch: int = 8, n_entries: int = 6, widths=None, perturb: float = 0.0) -> NetworkReport:
    """Check ``J_G`` gradients for G, routed through a fixed Discriminator."""
    rng = np.random.default_rng(seed)
    G = Generator(rng, pa) if widths is None else Generator(rng, pa, widths)
    D = Discriminator(rng, pa, (G.net.widths[-1], 100, 100, 5))
    z, c = sample_latent(rng, batch)
    x_real = rng.normal(0.0, 1.0, (batch, G.net.widths[-1]))
    drop_seed = seed + 2000

    def terms():
        x_fake, c_g = G.forward(z, c, "train", update_running=False)
        ps_r, _, ps_f, c_d = D.forward_mixed(x_real, x_fake, "train", np.random.default_rng(drop_seed), update_running=False)
        return ps_r, ps_f, c_g, c_d

    def loss():
        ps_r, ps_f, _, _ = terms()
        return adversarial_losses(ps_r, ps_f)[1]

    ps_r, ps_f, c_g, c_d = terms()
    g_r, g_f = adversarial_grads(ps_r, ps_f)
    _, dx = D.backward(c_d, -np.concatenate([g_r, g_f]), np.zeros((2 * batch, D_Y)))
    grads, _ = G.net.backward(c_g, dx[batch:])
    return check_network(f"G(pa={pa})", G.net, loss, grads, rng, n_entries, perturb=perturb)


def run_all(seeds=(0, 1, 2, 3, 4), n_entries: int = 6, perturb: float = 0.0) -> list[NetworkReport]:
    """Gradient reports for E, G and D with PA on and off over every seed."""
    reports = []
    for seed in seeds:
        for pa in (True, False):
            reports.append(check_extractor(seed, pa, n_entries=n_entries, perturb=perturb))
            reports.append(check_generator(seed, pa, n_entries=n_entries, perturb=perturb))
            reports.append(check_discriminator(seed, pa, n_entries=n_entries, perturb=perturb))
    return reports

