"""Training loop, best-by-validation selection and the method comparison.

Each epoch has up to two phases:

1. Extractor phase -- mini-batches of ``batch_e``, one Adam step on ``J_E``.
2. Adversarial phase -- mini-batches of ``batch_gd``; per batch one Adam step
   on ``J_D`` (G frozen) followed by one on ``J_G`` (D frozen), with fresh
   ``(z, c)`` drawn for each step.

``extractor_only`` runs phase 1 only and ``acgan`` phase 2 only (on raw
inputs).  All randomness after model construction comes from a single
generator seeded by ``config.seed``, whose state travels in checkpoints.
"""

from __future__ import annotations

import dataclasses
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .checkpoint import Checkpoint
from .data import RawSample, embed_samples, split_dataset
from .errors import ConfigError, NumericalError, ValidationError
from .model import METHODS, build_model
from .nn import Adam

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    method: str = "lacgan"
    pa: bool = True
    epochs: int = 300
    batch_e: int = 50
    batch_gd: int = 20
    lr: float = 0.0005
    beta1: float = 0.5
    beta2: float = 0.999
    eps_hat: float = 1e-8
    lam: float = 0.2
    d_z: int = 100
    keep_prob: float = 0.5
    bn_eps: float = 1e-5
    bn_momentum: float = 0.9
    # Let J_D gradients flow into the Extractor as well (off: E learns from J_C only).
    joint_e: bool = False
    seed: int = 0
    split_seed: int = 0
    embed_seed: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        for name in ("batch_e", "batch_gd", "d_z"):
            if getattr(self, name) < 2:
                raise ConfigError(f"{name} must be >= 2, got {getattr(self, name)}")
        for name in ("lr", "eps_hat", "bn_eps"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        for name in ("beta1", "beta2", "bn_momentum"):
            if not 0.0 < getattr(self, name) < 1.0:
                raise ConfigError(f"{name} must lie in (0, 1), got {getattr(self, name)}")
        if self.lam < 0:
            raise ConfigError(f"lam must be >= 0, got {self.lam}")
        if not 0.0 < self.keep_prob <= 1.0:
            raise ConfigError(f"keep_prob must lie in (0, 1], got {self.keep_prob}")
        if self.joint_e and self.method != "lacgan":
            raise ConfigError("joint_e only applies to the lacgan method")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        return cls(**d)


@dataclass
class EmbeddedData:
    """Embedded ``(X, Y)`` arrays for each split."""

    train: tuple[np.ndarray, np.ndarray]
    validation: tuple[np.ndarray, np.ndarray]
    test: tuple[np.ndarray, np.ndarray]

    def __getitem__(self, name: str):
        if name not in ("train", "validation", "test"):
            raise KeyError(name)
        return getattr(self, name)


def prepare_data(samples: Sequence[RawSample], split_seed: int = 0, embed_seed: int = 0) -> EmbeddedData:
    split = split_dataset(samples, split_seed)
    return EmbeddedData(*(embed_samples(split[k], embed_seed) for k in ("train", "validation", "test")))


@dataclass
class Metrics:
    history: list[dict] = field(default_factory=list)
    best_epoch: int = 0
    best_val_acc: float = 0.0
    test_acc: float | None = None

    def summary(self) -> dict:
        return {
            "summary": True,
            "best_epoch": self.best_epoch,
            "best_val_acc": self.best_val_acc,
            "test_acc": self.test_acc,
            "epochs_run": len(self.history) - 1,
        }


def evaluate(model, X: np.ndarray, Y: np.ndarray) -> float:
    """Fraction of rows whose inference-mode prediction matches the label."""
    if len(X) == 0:
        raise ValidationError("cannot evaluate on an empty split")
    return float(np.mean(model.predict(X) == np.argmax(Y, axis=1)))


def best_epoch(val_accs: Sequence[float], start: int = 0) -> int:
    """Epoch number of the highest validation accuracy; ties go to the earliest."""
    if len(val_accs) == 0:
        raise ValidationError("no validation accuracies to select from")
    return start + int(np.argmax(np.asarray(val_accs)))


def _finite(term: str, value: float, epoch: int) -> float:
    if not math.isfinite(value):
        raise NumericalError(f"non-finite {term} ({value}) at epoch {epoch}")
    return value


def _mean(values):
    return float(np.mean(values)) if values else None


def make_optimizers(model, config: TrainConfig) -> dict[str, Adam]:
    return {
        name: Adam(net, config.lr, config.beta1, config.beta2, config.eps_hat)
        for name, net in model.networks.items()
    }


def train_epoch(model, X: np.ndarray, Y: np.ndarray, config: TrainConfig, rng: np.random.Generator, optimizers: dict[str, Adam], epoch: int = 0) -> dict:
    """Run one epoch in place; return mean losses over its mini-batches."""
    if len(X) == 0:
        raise ValidationError("training set is empty")
    n = len(X)
    j_c, j_s, j_g, j_c_d, j_d = [], [], [], [], []

    if config.method in ("lacgan", "extractor_only"):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_e):
            idx = order[start : start + config.batch_e]
            if len(idx) < 2:  # BN needs two rows
                continue
            grads, loss = model.e_step(X[idx], Y[idx])
            j_c.append(_finite("J_C (extractor)", loss, epoch))
            optimizers["E"].step(grads)

    if config.method in ("lacgan", "acgan"):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_gd):
            idx = order[start : start + config.batch_gd]
            if len(idx) < 2:
                continue
            if config.joint_e:
                _, x_real, e_cache = model.E.forward(X[idx], "infer")
            else:
                x_real = model.real_features(X[idx])
            grads_d, parts, dx_real = model.d_step(x_real, Y[idx], rng)
            j_s.append(_finite("J_S", parts.j_s, epoch))
            j_c_d.append(_finite("J_C (discriminator)", parts.j_c_d, epoch))
            j_d.append(_finite("J_D", parts.j_d, epoch))
            optimizers["D"].step(grads_d)
            if config.joint_e:
                optimizers["E"].step(model.E.backward(e_cache, np.zeros((len(idx), Y.shape[1])), dx_real))
            grads_g, parts = model.g_step(x_real, rng)
            j_g.append(_finite("J_G", parts.j_g, epoch))
            optimizers["G"].step(grads_g)

    return {"j_c": _mean(j_c), "j_s": _mean(j_s), "j_g": _mean(j_g), "j_c_d": _mean(j_c_d), "j_d": _mean(j_d)}


def _state_arrays(model, prefix: str) -> dict[str, np.ndarray]:
    return {
        f"{prefix}/{name}/{k}": v.copy()
        for name, net in model.networks.items()
        for k, v in net.state_arrays().items()
    }


def _load_model_arrays(model, arrays: dict[str, np.ndarray]) -> None:
    for name, net in model.networks.items():
        p = f"{name}/"
        net.load_state_arrays({k[len(p) :]: v for k, v in arrays.items() if k.startswith(p)})


def model_from_checkpoint(ckpt: Checkpoint, section: str = "model"):
    """Rebuild the model stored in ``ckpt`` (``section`` is ``"model"`` or ``"best"``)."""
    config = TrainConfig.from_dict(ckpt.config)
    model = _build(config, np.random.default_rng(config.seed))
    _load_model_arrays(model, ckpt.section(section))
    return model


def _build(config: TrainConfig, rng: np.random.Generator):
    return build_model(
        config.method,
        rng,
        lam=config.lam,
        pa=config.pa,
        keep_prob=config.keep_prob,
        d_z=config.d_z,
        bn_eps=config.bn_eps,
        bn_momentum=config.bn_momentum,
    )


class Trainer:
    """Mutable training run: model, optimizers, RNG, history and the best snapshot."""

    def __init__(self, config: TrainConfig, data: EmbeddedData):
        config.validate()
        self.config = config
        self.data = data
        self.rng = np.random.default_rng(config.seed)
        self.model = _build(config, self.rng)
        self.optimizers = make_optimizers(self.model, config)
        self.epoch = 0
        self.history: list[dict] = [self._record({k: None for k in ("j_c", "j_s", "j_g", "j_c_d", "j_d")})]
        self.best_epoch = 0
        self.best_val_acc = self.history[0]["val_acc"]
        self.best_arrays = _state_arrays(self.model, "best")

    def _record(self, losses: dict) -> dict:
        rec = {"epoch": self.epoch, **losses}
        rec["train_acc"] = evaluate(self.model, *self.data.train)
        rec["val_acc"] = evaluate(self.model, *self.data.validation)
        return rec

    def step_epoch(self) -> dict:
        X, Y = self.data.train
        losses = train_epoch(self.model, X, Y, self.config, self.rng, self.optimizers, self.epoch + 1)
        self.epoch += 1
        rec = self._record(losses)
        self.history.append(rec)
        if rec["val_acc"] > self.best_val_acc:
            self.best_epoch, self.best_val_acc = self.epoch, rec["val_acc"]
            self.best_arrays = _state_arrays(self.model, "best")
        log.debug("epoch %d: %s", self.epoch, rec)
        return rec

    def run(self, until: int | None = None) -> None:
        """Train up to epoch ``until`` (default ``config.epochs``)."""
        stop = self.config.epochs if until is None else min(until, self.config.epochs)
        while self.epoch < stop:
            self.step_epoch()

    @property
    def done(self) -> bool:
        return self.epoch >= self.config.epochs

    def best_model(self):
        model = _build(self.config, np.random.default_rng(self.config.seed))
        _load_model_arrays(model, {k[len("best/") :]: v for k, v in self.best_arrays.items()})
        return model

    def metrics(self, test_acc: float | None = None) -> Metrics:
        return Metrics([dict(r) for r in self.history], self.best_epoch, self.best_val_acc, test_acc)

    # -- checkpoints --------------------------------------------------------

    def checkpoint(self) -> Checkpoint:
        """Resumable snapshot of the full training state."""
        arrays = _state_arrays(self.model, "model")
        arrays.update(self.best_arrays)
        adam_t = {}
        for name, opt in self.optimizers.items():
            arrays[f"adam/{name}/m"] = opt.state.m.copy()
            arrays[f"adam/{name}/v"] = opt.state.v.copy()
            adam_t[name] = opt.state.t
        meta = {
            "rng_state": self.rng.bit_generator.state,
            "adam_t": adam_t,
            "history": self.history,
            "best_epoch": self.best_epoch,
            "best_val_acc": self.best_val_acc,
        }
        return Checkpoint("train", self.config.method, self.epoch, self.config.to_dict(), arrays, meta)

    def best_checkpoint(self, test_acc: float | None = None) -> Checkpoint:
        meta = {"history": self.history, "best_epoch": self.best_epoch, "best_val_acc": self.best_val_acc, "test_acc": test_acc}
        return Checkpoint("best", self.config.method, self.best_epoch, self.config.to_dict(), dict(self.best_arrays), meta)

    @classmethod
    def from_checkpoint(cls, ckpt: Checkpoint, data: EmbeddedData) -> "Trainer":
        if ckpt.kind != "train":
            raise ConfigError(f"can only resume from a training-state checkpoint, got kind {ckpt.kind!r}")
        self = cls.__new__(cls)
        self.config = TrainConfig.from_dict(ckpt.config)
        self.data = data
        self.rng = np.random.default_rng(self.config.seed)
        self.model = _build(self.config, self.rng)
        _load_model_arrays(self.model, ckpt.section("model"))
        self.optimizers = make_optimizers(self.model, self.config)
        for name, opt in self.optimizers.items():
            opt.state.m = ckpt.arrays[f"adam/{name}/m"].copy()
            opt.state.v = ckpt.arrays[f"adam/{name}/v"].copy()
            opt.state.t = int(ckpt.meta["adam_t"][name])
        self.rng.bit_generator.state = ckpt.meta["rng_state"]
        self.epoch = ckpt.epoch
        self.history = [dict(r) for r in ckpt.meta["history"]]
        self.best_epoch = ckpt.meta["best_epoch"]
        self.best_val_acc = ckpt.meta["best_val_acc"]
        self.best_arrays = {f"best/{k}": v.copy() for k, v in ckpt.section("best").items()}
        return self


def fit(config: TrainConfig, data: EmbeddedData, resume: Checkpoint | None = None):
    """Train for ``config.epochs`` and return ``(best checkpoint, metrics)``.

    The best model is the one with the highest validation accuracy over
    epochs ``0..epochs`` (epoch 0 is the untrained model); its test accuracy
    is reported in the metrics.
    """
    trainer = Trainer(config, data) if resume is None else Trainer.from_checkpoint(resume, data)
    trainer.run()
    test_acc = evaluate(trainer.best_model(), *data.test)
    return trainer.best_checkpoint(test_acc), trainer.metrics(test_acc)


# ---------------------------------------------------------------------------
# method comparison
# ---------------------------------------------------------------------------

COMPARISON_ROWS = (
    ("AC-GAN (without PA)", "acgan", False),
    ("AC-GAN (with PA)", "acgan", True),
    ("Extractor only", "extractor_only", True),
    ("LAC-GAN", "lacgan", True),
)

# Published test-set accuracies, quoted for reference and never recomputed.
PUBLISHED_ACCURACY = {
    "AC-GAN (without PA)": 0.507,
    "AC-GAN (with PA)": 0.582,
    "Extractor only": 0.611,
    "LAC-GAN": 0.671,
}


@dataclass
class ComparisonRow:
    label: str
    method: str
    pa: bool
    seeds: list[int]
    test_acc: list[float]
    best_epoch: list[int]
    finite_losses: bool = True

    @property
    def median(self) -> float:
        return float(np.median(self.test_acc))


@dataclass
class ComparisonReport:
    rows: list[ComparisonRow]
    n_test: int

    def ordering_holds(self) -> bool:
        """Whether median accuracies follow LAC-GAN > Extractor only > both AC-GAN rows."""
        m = {r.label: r.median for r in self.rows}
        return m["LAC-GAN"] > m["Extractor only"] > max(m["AC-GAN (without PA)"], m["AC-GAN (with PA)"])

    def to_dict(self) -> dict:
        return {
            "n_test": self.n_test,
            "rows": [
                {**dataclasses.asdict(r), "median": r.median, "published": PUBLISHED_ACCURACY[r.label]}
                for r in self.rows
            ],
            "ordering_lacgan_gt_extractor_gt_acgan": self.ordering_holds(),
        }

    def format(self) -> str:
        seeds = self.rows[0].seeds
        head = f"{'Method':<22}{'median':>8}  " + "  ".join(f"seed {s:>3}" for s in seeds)
        lines = [head, "-" * len(head)]
        for r in self.rows:
            cells = "  ".join(f"{a * 100:7.1f}%" for a in r.test_acc)
            lines.append(f"{r.label:<22}{r.median * 100:7.1f}%  {cells}")
        lines.append("-" * len(head))
        lines.append(f"test split size: {self.n_test}")
        lines.append("published reference (not recomputed): " + ", ".join(f"{k} {v * 100:.1f}%" for k, v in PUBLISHED_ACCURACY.items()))
        lines.append(f"observed ordering LAC-GAN > Extractor only > AC-GAN: {self.ordering_holds()}")
        return "\n".join(lines)


def _run_one(args):
    config, data = args
    _, metrics = fit(config, data)
    finite = all(
        v is None or math.isfinite(v)
        for rec in metrics.history
        for k, v in rec.items()
        if k.startswith("j_")
    )
    return metrics.test_acc, metrics.best_epoch, finite


def compare_methods(data: EmbeddedData, seeds: Sequence[int], base: TrainConfig | None = None, jobs: int = 1) -> ComparisonReport:
    """Fit every comparison row for every seed; runs are independent and may fan out over ``jobs`` processes."""
    if len(seeds) == 0:
        raise ConfigError("compare_methods needs at least one seed")
    base = base or TrainConfig()
    tasks = [
        (dataclasses.replace(base, method=method, pa=pa, seed=seed, joint_e=False), data)
        for _, method, pa in COMPARISON_ROWS
        for seed in seeds
    ]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            results = list(pool.map(_run_one, tasks))
    else:
        results = [_run_one(t) for t in tasks]
    rows = []
    for i, (label, method, pa) in enumerate(COMPARISON_ROWS):
        chunk = results[i * len(seeds) : (i + 1) * len(seeds)]
        rows.append(
            ComparisonRow(
                label,
                method,
                pa,
                list(seeds),
                [r[0] for r in chunk],
                [r[1] for r in chunk],
                all(r[2] for r in chunk),
            )
        )
    return ComparisonReport(rows, len(data.test[0]))
