import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from lacgan.errors import DimensionError, StateError, ValidationError
from lacgan.model import (
    AcGanBaseline,
    Discriminator,
    Extractor,
    ExtractorOnly,
    Generator,
    LacGanModel,
    acgan_losses,
    lacgan_losses,
    predict_labels,
    sample_latent,
)
from lacgan.nn import softmax_forward


def labels(idx, k=4):
    y = np.zeros((len(idx), k))
    y[np.arange(len(idx)), idx] = 1.0
    return y


def scalar_js(d_real, d_fake):
    clamp = lambda v: min(max(v, 1e-12), 1 - 1e-12)  # noqa: E731
    return (
        -0.5 * sum(math.log(clamp(v)) for v in d_real) / len(d_real)
        - 0.5 * sum(math.log(1 - clamp(v)) for v in d_fake) / len(d_fake)
    )


def scalar_ce(p, y):
    return -sum(math.log(max(p[i][int(np.argmax(y[i]))], 1e-12)) for i in range(len(p))) / len(p)


@pytest.fixture
def rng():
    return np.random.default_rng(2024)


@pytest.fixture
def batch(rng):
    return rng.normal(0, 0.3, (12, 400)), labels(rng.integers(0, 4, 12))


class TestShapes:
    def test_extractor(self, rng):
        E = Extractor(rng)
        p, x_real, _ = E.forward(rng.normal(size=(7, 400)))
        assert p.shape == (7, 4) and x_real.shape == (7, 50)
        assert E.net.widths == [400, 400, 100, 50, 100, 4]

    def test_generator(self, rng):
        G = Generator(rng)
        z, c = sample_latent(rng, 3)
        x, _ = G.forward(z, c)
        assert x.shape == (3, 50)
        assert G.net.widths == [104, 100, 100, 50]

    def test_discriminator(self, rng):
        D = Discriminator(rng)
        ps, pc, _ = D.forward(rng.normal(size=(5, 50)), "train", rng)
        assert ps.shape == (5,) and pc.shape == (5, 4)
        assert D.net.widths == [50, 100, 100, 5]

    def test_acgan_widths(self, rng):
        m = AcGanBaseline(rng)
        assert m.G.net.widths == [104, 100, 100, 400]
        assert m.D.net.widths == [400, 100, 100, 5]
        lac = LacGanModel(rng)
        # same hidden structure, differing only at the raw-space end
        assert m.G.net.widths[:-1] == lac.G.net.widths[:-1]
        assert m.D.net.widths[1:] == lac.D.net.widths[1:]

    def test_wrong_width_rejected(self, rng):
        with pytest.raises(DimensionError):
            Extractor(rng).forward(np.zeros((2, 399)))
        with pytest.raises(DimensionError):
            Discriminator(rng).forward(np.zeros((2, 49)), "infer")


class TestExtractor:
    def test_single_row_probabilities(self, rng):
        p, _, _ = Extractor(rng).forward(rng.normal(size=(1, 400)), "infer")
        assert p.sum() == pytest.approx(1.0, abs=1e-12)

    def test_fresh_init_near_uniform(self):
        means = []
        for seed in range(50):
            r = np.random.default_rng(seed)
            p, _, _ = Extractor(r).forward(r.normal(size=(200, 400)), "train")
            means.append(p.mean(axis=0))
        means = np.array(means)
        assert np.all((means >= 0.15) & (means <= 0.35))

    def test_bottleneck_is_post_relu(self, rng):
        _, x_real, _ = Extractor(rng).forward(rng.normal(size=(6, 400)))
        assert np.all(x_real >= 0)


class TestGenerator:
    def test_outputs_in_open_interval(self, rng):
        z, c = sample_latent(rng, 64)
        x, _ = Generator(rng).forward(z * 50, c)
        assert np.all(np.abs(x) < 1)

    def test_non_one_hot_c_rejected(self, rng):
        z, _ = sample_latent(rng, 2)
        with pytest.raises(ValidationError):
            Generator(rng).forward(z, np.full((2, 4), 0.25))

    def test_class_conditional_after_training(self, rng):
        from lacgan.data import generate_synthetic
        from lacgan.train import TrainConfig, Trainer, prepare_data

        data = prepare_data(generate_synthetic(n=120, n_excluded=0, seed=3))
        tr = Trainer(TrainConfig(method="lacgan", epochs=2, seed=1), data)
        tr.run()
        z = np.zeros((1, 100))
        a, _ = tr.model.G.forward(z, labels([0]), "infer")
        b, _ = tr.model.G.forward(z, labels([3]), "infer")
        assert np.linalg.norm(a - b) > 0


class TestDiscriminator:
    def test_class_head_normalized(self, rng):
        _, pc, _ = Discriminator(rng).forward(rng.normal(size=(9, 50)) * 10, "train", rng)
        np.testing.assert_allclose(pc.sum(axis=1), 1.0, atol=1e-12)

    def test_zero_input_fresh_init(self, rng):
        ps, _, _ = Discriminator(rng).forward(np.zeros((4, 50)), "infer")
        np.testing.assert_allclose(ps, 0.5, atol=1e-12)

    @pytest.mark.parametrize("pa", [True, False])
    def test_first_layer_dropout_no_bn(self, rng, pa):
        D = Discriminator(rng, pa)
        first = D.net.layers[0]
        assert first.bn is None and first.dropout is not None and first.dropout.keep_prob == 0.5

    def test_mixed_batch_splits_rows(self, rng):
        D = Discriminator(rng)
        xr, xf = rng.normal(size=(3, 50)), rng.normal(size=(5, 50))
        ps_r, pc_r, ps_f, _ = D.forward_mixed(xr, xf, "infer")
        ps, pc, _ = D.forward(np.vstack([xr, xf]), "infer")
        np.testing.assert_array_equal(ps_r, ps[:3])
        np.testing.assert_array_equal(ps_f, ps[3:])
        np.testing.assert_array_equal(pc_r, pc[:3])


class TestLatent:
    def test_z_moments(self):
        z, _ = sample_latent(np.random.default_rng(0), 100_000)
        # sd of the mean is 0.0032 and of the variance 0.0045; bounds sit beyond 4 sigma
        assert np.all(np.abs(z.mean(axis=0)) <= 0.02)
        assert np.all((z.var(axis=0) >= 0.97) & (z.var(axis=0) <= 1.03))

    def test_class_frequencies(self):
        _, c = sample_latent(np.random.default_rng(1), 10_000)
        freq = c.mean(axis=0)
        assert np.all((freq >= 0.23) & (freq <= 0.27))

    def test_single_draw_one_hot(self):
        _, c = sample_latent(np.random.default_rng(2), 1)
        assert c.sum() == 1.0 and set(np.unique(c)) == {0.0, 1.0}


def _perfect_heads(model: LacGanModel, target: int):
    """Zero D's output weights: source logit 0, class logits saturated on ``target``."""
    last = model.D.net.layers[-1]
    last.dense.W[:] = 0.0
    last.dense.b[:] = 0.0
    last.dense.b[1 + target] = 100.0
    e_last = model.E.net.layers[-1]
    e_last.dense.W[:] = 0.0
    e_last.dense.b[:] = 0.0
    e_last.dense.b[target] = 100.0


class TestLacGanLosses:
    def test_lambda_zero(self, rng, batch):
        j_e, j_d, j_g, parts = lacgan_losses(batch, LacGanModel(rng, lam=0.0), rng)
        assert j_d == parts.j_s
        assert j_g == -parts.j_s

    def test_perfect_heads(self, rng):
        model = LacGanModel(rng, lam=0.2)
        _perfect_heads(model, 0)
        batch = (rng.normal(size=(6, 400)), labels([0] * 6))
        j_e, j_d, j_g, parts = lacgan_losses(batch, model, rng)
        assert parts.j_s == pytest.approx(math.log(2), abs=1e-12)
        assert j_d == pytest.approx(math.log(2), abs=1e-12)
        assert 0.0 <= j_e < 1e-12

    def test_recomposition(self, rng, batch):
        model = LacGanModel(rng, lam=0.2)
        j_e, j_d, j_g, parts = lacgan_losses(batch, model, rng)
        j_s = scalar_js(parts.d_real, parts.d_fake)
        j_c = scalar_ce(parts.p_class_real, batch[1])
        assert j_d == pytest.approx(j_s + 0.2 * j_c, abs=1e-12)
        assert j_g == -parts.j_s
        p_e, _, _ = model.E.forward(batch[0], "train", update_running=False)
        assert j_e == pytest.approx(scalar_ce(p_e, batch[1]), abs=1e-12)

    def test_reduces_to_plain_gan_on_latents(self, batch):
        model = LacGanModel(np.random.default_rng(5), lam=0.0)
        _, j_d, _, _ = lacgan_losses(batch, model, np.random.default_rng(77))
        # rebuild the same draws by hand and score them with the two-player objective
        r = np.random.default_rng(77)
        _, x_real, _ = model.E.forward(batch[0], "infer")
        z, c = sample_latent(r, len(x_real))
        x_fake, _ = model.G.forward(z, c, "train", update_running=False)
        ps, _, _ = model.D.forward(np.vstack([x_real, x_fake]), "train", r, update_running=False)
        assert j_d == pytest.approx(scalar_js(ps[: len(x_real)], ps[len(x_real) :]), abs=1e-12)

    def test_losses_leave_state_untouched(self, rng, batch):
        model = LacGanModel(rng)
        before = {k: {n: a.copy() for n, a in net.state_arrays().items()} for k, net in model.networks.items()}
        lacgan_losses(batch, model, rng)
        for k, net in model.networks.items():
            for n, a in net.state_arrays().items():
                np.testing.assert_array_equal(a, before[k][n])

    def test_latent_widths_interchangeable(self, rng):
        model = LacGanModel(rng)
        _, x_real, _ = model.E.forward(rng.normal(size=(4, 400)), "infer")
        x_fake, _ = model.G.forward(*sample_latent(rng, 4), "infer")
        assert x_real.shape == x_fake.shape
        model.D.forward(x_real, "infer")
        model.D.forward(x_fake, "infer")


class TestAcGanLosses:
    def test_lambda_zero(self, rng, batch):
        j_d, j_g, parts = acgan_losses(batch, AcGanBaseline(rng, lam=0.0), rng)
        assert j_d == parts.j_s and j_g == -parts.j_s

    def test_half_and_perfect_class_head(self, rng):
        model = AcGanBaseline(rng, lam=0.2)
        last = model.D.net.layers[-1]
        last.dense.W[:] = 0.0
        last.dense.b[:] = [0.0, 0.0, 100.0, 0.0, 0.0]
        j_d, _, parts = acgan_losses((rng.normal(size=(5, 400)), labels([1] * 5)), model, rng)
        assert j_d == pytest.approx(math.log(2), abs=1e-12)

    def test_recomposition(self, rng, batch):
        j_d, j_g, parts = acgan_losses(batch, AcGanBaseline(rng, lam=0.2), rng)
        assert j_d == pytest.approx(scalar_js(parts.d_real, parts.d_fake) + 0.2 * scalar_ce(parts.p_class_real, batch[1]), abs=1e-12)
        assert j_g == -parts.j_s


class TestSteps:
    @pytest.mark.parametrize("cls", [LacGanModel, AcGanBaseline])
    def test_step_costs_negate(self, cls, rng, batch):
        model = cls(rng)
        x_real = model.real_features(batch[0])
        _, d_parts, _ = model.d_step(x_real, batch[1], rng)
        _, g_parts = model.g_step(x_real, rng)
        assert d_parts.j_g == -d_parts.j_s and g_parts.j_g == -g_parts.j_s

    def test_steps_only_return_own_grads(self, rng, batch):
        model = LacGanModel(rng)
        x_real = model.real_features(batch[0])
        grads_d, _, _ = model.d_step(x_real, batch[1], rng)
        grads_g, _ = model.g_step(x_real, rng)
        assert [g.shape for g in grads_d] == [p.shape for p in model.D.net.parameters()]
        assert [g.shape for g in grads_g] == [p.shape for p in model.G.net.parameters()]

    def test_d_step_freezes_g_running_stats(self, rng, batch):
        model = LacGanModel(rng)
        before = {k: v.copy() for k, v in model.G.net.state_arrays().items()}
        model.d_step(model.real_features(batch[0]), batch[1], rng)
        for k, v in model.G.net.state_arrays().items():
            np.testing.assert_array_equal(v, before[k])

    def test_g_step_freezes_d_state(self, rng, batch):
        model = LacGanModel(rng)
        before = {k: v.copy() for k, v in model.D.net.state_arrays().items()}
        model.g_step(model.real_features(batch[0]), rng)
        for k, v in model.D.net.state_arrays().items():
            np.testing.assert_array_equal(v, before[k])


class TestPredict:
    def test_argmax(self):
        assert predict_labels([[0.1, 0.6, 0.2, 0.1]]).tolist() == [1]

    def test_tie_goes_low(self):
        assert predict_labels([[0.5, 0.5, 0.0, 0.0]]).tolist() == [0]

    @pytest.mark.parametrize("cls", [LacGanModel, AcGanBaseline, ExtractorOnly])
    def test_batch_equals_single(self, cls, rng):
        model = cls(rng)
        x = rng.normal(size=(9, 400))
        batched = model.predict(x)
        single = [int(model.predict(x[i : i + 1])[0]) for i in range(9)]
        assert batched.tolist() == single

    @given(
        arrays(np.float64, (6, 4), elements=st.floats(-20, 20)),
        st.sampled_from([np.exp, np.cbrt, lambda v: 3.0 * v + 1.0, lambda v: np.log1p(v)]),
    )
    def test_monotone_rescale_invariance(self, logits, f):
        p = softmax_forward(logits)
        q = f(p)
        # strict monotonicity can merge near-ties in floating point; only compare unambiguous rows
        s = np.sort(q, axis=1)
        clear = (s[:, -1] - s[:, -2]) > 1e-12
        assert np.array_equal(predict_labels(p)[clear], predict_labels(q)[clear])

    def test_lacgan_predicts_through_discriminator(self, rng):
        model = LacGanModel(rng)
        x = rng.normal(size=(5, 400))
        _, pc, _ = model.D.forward(model.real_features(x), "infer")
        np.testing.assert_array_equal(model.predict_proba(x), pc)


class TestPaMode:
    def test_first_d_layer_stays_dropout_only(self, rng):
        model = LacGanModel(rng, pa=False).set_pa_mode(True)
        first = model.D.net.layers[0]
        assert first.bn is None and first.dropout is not None
        assert all(l.bn_position == "pre" for l in model.D.net.layers[1:])

    def test_pa_on_constant_batch_first_bn(self, rng):
        E = Extractor(rng, pa=True)
        E.net.layers[0].bn.beta[:] = 0.7
        _, _, cache = E.forward(np.full((5, 400), 3.0), "train")
        np.testing.assert_array_equal(cache.inputs[0], 0.7)

    def test_modes_distinguishable(self):
        from lacgan.data import generate_synthetic
        from lacgan.train import TrainConfig, Trainer, prepare_data

        data = prepare_data(generate_synthetic(n=100, n_excluded=0, seed=4))
        firsts = []
        for pa in (True, False):
            tr = Trainer(TrainConfig(method="lacgan", pa=pa, epochs=1, seed=9), data)
            firsts.append(tr.step_epoch())
        assert firsts[0]["j_c"] != firsts[1]["j_c"]
        assert firsts[0]["j_d"] != firsts[1]["j_d"]

    def test_toggle_after_training_rejected(self, rng, batch):
        from lacgan.nn import Adam

        model = ExtractorOnly(rng)
        grads, _ = model.e_step(*batch)
        Adam(model.E.net).step(grads)
        with pytest.raises(StateError):
            model.set_pa_mode(False)
