import dataclasses
import math
import time

import numpy as np
import pytest
from scipy.optimize import linprog

from lacgan.checkpoint import MAGIC, Checkpoint, from_bytes, load_checkpoint, save_checkpoint, to_bytes
from lacgan.data import generate_separable, generate_synthetic
from lacgan.errors import CheckpointError, ConfigError, NumericalError, ValidationError
from lacgan.model import ExtractorOnly
from lacgan.train import (
    COMPARISON_ROWS,
    PUBLISHED_ACCURACY,
    EmbeddedData,
    TrainConfig,
    Trainer,
    best_epoch,
    compare_methods,
    evaluate,
    fit,
    make_optimizers,
    model_from_checkpoint,
    prepare_data,
    train_epoch,
)


@pytest.fixture(scope="module")
def small():
    return prepare_data(generate_synthetic(n=80, n_excluded=0, seed=2))


@pytest.fixture(scope="module")
def separable():
    return prepare_data(generate_separable(n=200, seed=0))


def flat(net):
    return net.get_flat().copy()


def linear_margin_feasible(X, Y):
    """LP: does some (W, b) give every row a multiclass margin of at least 1?"""
    n, d = X.shape
    k = Y.shape[1]
    Xb = np.hstack([X, np.ones((n, 1))])
    y = Y.argmax(axis=1)
    rows = []
    for i in range(n):
        for j in range(k):
            if j == y[i]:
                continue
            r = np.zeros(k * (d + 1))
            r[y[i] * (d + 1) : (y[i] + 1) * (d + 1)] = -Xb[i]
            r[j * (d + 1) : (j + 1) * (d + 1)] = Xb[i]
            rows.append(r)
    A = np.array(rows)
    res = linprog(np.zeros(A.shape[1]), A_ub=A, b_ub=-np.ones(len(A)), bounds=(None, None), method="highs")
    return res.status == 0


class TestConfig:
    def test_defaults(self):
        c = TrainConfig()
        assert (c.epochs, c.batch_e, c.batch_gd, c.lr, c.beta1, c.beta2, c.lam, c.d_z) == (300, 50, 20, 0.0005, 0.5, 0.999, 0.2, 100)

    @pytest.mark.parametrize(
        "bad",
        [
            {"method": "gan"},
            {"lr": 0.0},
            {"lr": -1.0},
            {"batch_e": 1},
            {"beta1": 1.0},
            {"lam": -0.1},
            {"epochs": -1},
            {"keep_prob": 0.0},
            {"joint_e": True, "method": "acgan"},
        ],
    )
    def test_invalid(self, bad):
        with pytest.raises(ConfigError):
            TrainConfig(**bad)

    def test_dict_round_trip(self):
        c = TrainConfig(method="acgan", pa=False, seed=4)
        assert TrainConfig.from_dict(c.to_dict()) == c

    def test_unknown_key(self):
        with pytest.raises(ConfigError):
            TrainConfig.from_dict({"learning_rate": 0.1})


class TestSeparable:
    def test_oracle_confirms_separability(self, separable):
        X = np.vstack([separable.train[0], separable.validation[0], separable.test[0]])
        Y = np.vstack([separable.train[1], separable.validation[1], separable.test[1]])
        assert linear_margin_feasible(X, Y)

    def test_oracle_rejects_contradiction(self):
        X = np.array([[1.0, 0.0], [1.0, 0.0]])
        Y = np.array([[1.0, 0, 0, 0], [0, 1.0, 0, 0]])
        assert not linear_margin_feasible(X, Y)

    def test_extractor_learns(self, separable):
        t0 = time.perf_counter()
        tr = Trainer(TrainConfig(method="extractor_only", epochs=50), separable)
        tr.run()
        test_acc = evaluate(tr.best_model(), *separable.test)
        assert time.perf_counter() - t0 < 60
        assert max(h["train_acc"] for h in tr.history) >= 0.99
        assert tr.history[-1]["train_acc"] >= 0.99
        assert test_acc >= 0.95


class TestTrainEpoch:
    @pytest.mark.parametrize("method", ["lacgan", "acgan", "extractor_only"])
    def test_phases_and_finite(self, small, method):
        tr = Trainer(TrainConfig(method=method, epochs=1), small)
        rec = tr.step_epoch()
        has_e = method != "acgan"
        has_gd = method != "extractor_only"
        assert (rec["j_c"] is not None) == has_e
        assert all((rec[k] is not None) == has_gd for k in ("j_s", "j_g", "j_c_d", "j_d"))
        assert all(math.isfinite(v) for k, v in rec.items() if k.startswith("j_") and v is not None)

    def test_deterministic(self, small):
        recs = [Trainer(TrainConfig(epochs=1, seed=3), small).step_epoch() for _ in range(2)]
        assert recs[0] == recs[1]

    def test_seed_matters(self, small):
        a = Trainer(TrainConfig(epochs=1, seed=3), small).step_epoch()
        b = Trainer(TrainConfig(epochs=1, seed=4), small).step_epoch()
        assert a != b

    def test_empty_rejected(self, small):
        tr = Trainer(TrainConfig(epochs=1), small)
        with pytest.raises(ValidationError):
            train_epoch(tr.model, np.zeros((0, 400)), np.zeros((0, 4)), tr.config, tr.rng, tr.optimizers)

    def test_nan_aborts_naming_term(self, small):
        tr = Trainer(TrainConfig(method="extractor_only", epochs=1), small)
        orig = tr.model.e_step
        tr.model.e_step = lambda x, y: (orig(x, y)[0], float("nan"))
        with pytest.raises(NumericalError, match="J_C"):
            tr.step_epoch()

    def test_single_row_tail_skipped(self):
        data = prepare_data(generate_synthetic(n=63, n_excluded=0, seed=1))
        assert len(data.train[0]) == 51  # one leftover row for batch_e=50
        rec = Trainer(TrainConfig(epochs=1), data).step_epoch()
        assert math.isfinite(rec["j_c"])


class FreezeProbe:
    """Wraps the optimizers and checks which networks move on each step."""

    def __init__(self, model, optimizers):
        self.model = model
        self.phase2_started = False
        self.violations = []
        self.e_at_phase2 = None
        for name, opt in optimizers.items():
            opt.step = self._wrap(name, opt.step)

    def _wrap(self, name, step):
        def wrapped(grads):
            if name in ("D", "G") and not self.phase2_started:
                self.phase2_started = True
                self.e_at_phase2 = flat(self.model.E.net) if hasattr(self.model, "E") else None
            others = {k: flat(n) for k, n in self.model.networks.items() if k != name}
            step(grads)
            for k, before in others.items():
                if not np.array_equal(before, flat(self.model.networks[k])):
                    self.violations.append((name, k))

        return wrapped


class TestFreeze:
    @pytest.mark.parametrize("method", ["lacgan", "acgan"])
    def test_each_step_moves_only_its_network(self, small, method):
        tr = Trainer(TrainConfig(method=method, epochs=1), small)
        probe = FreezeProbe(tr.model, tr.optimizers)
        tr.step_epoch()
        assert probe.phase2_started and probe.violations == []

    def test_e_constant_during_phase2(self, small):
        tr = Trainer(TrainConfig(epochs=1), small)
        probe = FreezeProbe(tr.model, tr.optimizers)
        tr.step_epoch()
        np.testing.assert_array_equal(probe.e_at_phase2, flat(tr.model.E.net))

    def test_joint_e_moves_e_in_phase2(self, small):
        tr = Trainer(TrainConfig(epochs=1, joint_e=True), small)
        probe = FreezeProbe(tr.model, tr.optimizers)
        tr.step_epoch()
        assert not np.array_equal(probe.e_at_phase2, flat(tr.model.E.net))


class TestEvaluate:
    def test_fresh_model_near_chance(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(1000, 400))
        Y = np.eye(4)[np.repeat(np.arange(4), 250)]
        acc = evaluate(ExtractorOnly(np.random.default_rng(1)), X, Y)
        assert 0.18 <= acc <= 0.32

    def test_memorized_train_set(self, separable):
        tr = Trainer(TrainConfig(method="extractor_only", epochs=30), separable)
        tr.run()
        assert evaluate(tr.model, *separable.train) == 1.0

    def test_concatenation_is_weighted_mean(self, small):
        model = Trainer(TrainConfig(epochs=0), small).model
        (Xa, Ya), (Xb, Yb) = small.train, small.test
        a, b = evaluate(model, Xa, Ya), evaluate(model, Xb, Yb)
        both = evaluate(model, np.vstack([Xa, Xb]), np.vstack([Ya, Yb]))
        assert both == pytest.approx((a * len(Xa) + b * len(Xb)) / (len(Xa) + len(Xb)), abs=1e-15)

    def test_empty(self, small):
        with pytest.raises(ValidationError):
            evaluate(ExtractorOnly(np.random.default_rng(0)), np.zeros((0, 400)), np.zeros((0, 4)))


class TestSelection:
    def test_injected_sequence(self):
        # accuracies after epochs 1..4
        assert best_epoch([0.3, 0.7, 0.7, 0.5], start=1) == 2

    def test_monotone(self):
        assert best_epoch([0.1, 0.2, 0.3, 0.4]) == 3

    def test_empty(self):
        with pytest.raises(ValidationError):
            best_epoch([])

    def test_epochs_zero(self, small):
        tr = Trainer(TrainConfig(epochs=0), small)
        init = {k: v.copy() for k, v in tr.best_arrays.items()}
        ckpt, m = fit(TrainConfig(epochs=0), small)
        assert m.best_epoch == 0 and len(m.history) == 1
        for k, v in init.items():
            np.testing.assert_array_equal(ckpt.arrays[k], v)

    def test_selected_epoch_is_argmax_of_inference_accuracy(self, small):
        tr = Trainer(TrainConfig(method="extractor_only", epochs=6), small)
        tr.run()
        vals = [h["val_acc"] for h in tr.history]
        assert tr.best_epoch == best_epoch(vals)
        assert evaluate(tr.best_model(), *small.validation) == tr.best_val_acc

    def test_reported_test_acc_is_best_models(self, small):
        ckpt, m = fit(TrainConfig(method="extractor_only", epochs=4), small)
        assert m.test_acc == evaluate(model_from_checkpoint(ckpt, "best"), *small.test)
        assert 0.0 <= m.test_acc <= 1.0 and m.best_epoch <= 4

    def test_fit_deterministic(self, small):
        runs = [fit(TrainConfig(epochs=2, seed=7), small)[1] for _ in range(2)]
        assert runs[0] == runs[1]


class TestCheckpoint:
    @pytest.fixture
    def trained(self, small):
        tr = Trainer(TrainConfig(epochs=3, seed=5), small)
        tr.run(2)
        return tr

    def test_save_load_save_identical(self, trained, tmp_path):
        save_checkpoint(trained.checkpoint(), tmp_path / "a.ckpt")
        save_checkpoint(load_checkpoint(tmp_path / "a.ckpt"), tmp_path / "b.ckpt")
        assert (tmp_path / "a.ckpt").read_bytes() == (tmp_path / "b.ckpt").read_bytes()

    def test_arrays_round_trip(self, trained):
        ck = trained.checkpoint()
        back = from_bytes(to_bytes(ck))
        assert back.arrays.keys() == ck.arrays.keys()
        for k in ck.arrays:
            np.testing.assert_array_equal(back.arrays[k], ck.arrays[k])
        assert back.meta == ck.meta and back.config == ck.config

    @pytest.mark.parametrize("method", ["lacgan", "acgan", "extractor_only"])
    @pytest.mark.parametrize("k", [0, 1, 2])
    def test_resume_equivalence(self, small, method, k, tmp_path):
        cfg = TrainConfig(method=method, epochs=3, seed=11)
        full_ckpt, full = fit(cfg, small)
        tr = Trainer(cfg, small)
        tr.run(k)
        save_checkpoint(tr.checkpoint(), tmp_path / "mid.ckpt")
        resumed_ckpt, resumed = fit(cfg, small, resume=load_checkpoint(tmp_path / "mid.ckpt"))
        assert resumed == full
        assert to_bytes(resumed_ckpt) == to_bytes(full_ckpt)

    def test_truncated(self, trained, tmp_path):
        blob = to_bytes(trained.checkpoint())
        for cut in (4, 30, len(blob) // 2, len(blob) - 1):
            with pytest.raises(CheckpointError):
                from_bytes(blob[:cut])

    def test_flipped_byte(self, trained):
        blob = bytearray(to_bytes(trained.checkpoint()))
        blob[len(blob) // 2] ^= 0xFF
        with pytest.raises(CheckpointError, match="digest"):
            from_bytes(bytes(blob))

    def test_version_mismatch(self, trained):
        blob = bytearray(to_bytes(trained.checkpoint()))
        blob[len(MAGIC)] = 99
        with pytest.raises(CheckpointError, match="version"):
            from_bytes(bytes(blob))

    def test_bad_magic_and_missing(self, tmp_path):
        (tmp_path / "x.ckpt").write_bytes(b"NOTACKPT" + bytes(64))
        with pytest.raises(CheckpointError):
            load_checkpoint(tmp_path / "x.ckpt")
        with pytest.raises(CheckpointError):
            load_checkpoint(tmp_path / "absent.ckpt")

    def test_layout(self, trained):
        blob = to_bytes(trained.checkpoint())
        assert blob[:8] == b"LACGANCK"
        assert int.from_bytes(blob[8:12], "little") == 1

    def test_best_checkpoint_rejected_for_resume(self, trained, small):
        with pytest.raises(ConfigError):
            Trainer.from_checkpoint(trained.best_checkpoint(), small)

    def test_section(self):
        ck = Checkpoint("best", "lacgan", 0, {}, {"a/x": np.zeros(1), "b/y": np.ones(2)})
        assert list(ck.section("a")) == ["x"]


@pytest.fixture(scope="module")
def one_seed(small):
    return compare_methods(small, [0], TrainConfig(epochs=1))


class TestCompare:
    def test_shape(self, one_seed):
        assert [r.label for r in one_seed.rows] == [r[0] for r in COMPARISON_ROWS]
        assert all(0.0 <= a <= 1.0 for r in one_seed.rows for a in r.test_acc)
        assert all(r.finite_losses for r in one_seed.rows)

    def test_published_footer(self, one_seed):
        text = one_seed.format()
        for v in ("50.7%", "58.2%", "61.1%", "67.1%"):
            assert v in text
        assert [PUBLISHED_ACCURACY[r[0]] for r in COMPARISON_ROWS] == [0.507, 0.582, 0.611, 0.671]
        d = one_seed.to_dict()
        assert [r["published"] for r in d["rows"]] == [0.507, 0.582, 0.611, 0.671]

    def test_two_seed_median_and_parallel(self, small):
        base = TrainConfig(epochs=1)
        serial = compare_methods(small, [0, 1], base)
        for r in serial.rows:
            assert r.median == pytest.approx((r.test_acc[0] + r.test_acc[1]) / 2, abs=1e-15)
        parallel = compare_methods(small, [0, 1], base, jobs=2)
        assert parallel.to_dict() == serial.to_dict()

    def test_matches_individual_fit(self, small, one_seed):
        label, method, pa = COMPARISON_ROWS[2]
        _, m = fit(TrainConfig(method=method, pa=pa, epochs=1, seed=0), small)
        assert one_seed.rows[2].test_acc == [m.test_acc]

    def test_no_seeds(self, small):
        with pytest.raises(ConfigError):
            compare_methods(small, [])


def test_embedded_data_keys(small):
    assert isinstance(small, EmbeddedData)
    with pytest.raises(KeyError):
        small["dev"]
    assert small["test"][0].shape[1] == 400


def test_make_optimizers_covers_networks(small):
    tr = Trainer(TrainConfig(epochs=0), small)
    assert set(make_optimizers(tr.model, tr.config)) == {"E", "G", "D"}
    assert dataclasses.asdict(tr.config)["lr"] == 0.0005
