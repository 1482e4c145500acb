"""Tests for the two-generator adversarial trainer and its losses."""

from __future__ import annotations

import math

import numpy as np
import pytest

from cyclevc.cyclegan import (
    CycleGanConfig,
    CycleGanModel,
    LossReport,
    adversarial_loss_log,
    adversarial_loss_lsgan,
    build_model,
    convert_frames,
    cycle_loss,
    discriminator_objective,
    full_objective,
    generator_objective,
    train,
    train_step,
    TrainerState,
)
from cyclevc.errors import DimensionMismatchError, InsufficientDataError
from cyclevc.features import FeatureKind, FeatureSequence
from cyclevc.net import Mlp, forward


def tiny_model(seed: int = 0, dim: int = 3) -> CycleGanModel:
    config = CycleGanConfig(hidden_dims=(5, 4), seed=seed)
    return build_model(dim, config)


class TestLsganLoss:
    def test_exact_targets(self):
        disc, gen = adversarial_loss_lsgan(np.array([1.0]), np.array([0.0]))
        assert disc == 0.0
        assert gen == 1.0

    def test_midpoint(self):
        disc, gen = adversarial_loss_lsgan(np.array([0.5]), np.array([0.5]))
        assert disc == pytest.approx(0.5)  # 0.25 + 0.25
        assert gen == pytest.approx(0.25)

    def test_generator_target_reached(self):
        _, gen = adversarial_loss_lsgan(np.array([0.3]), np.array([1.0]))
        assert gen == 0.0

    def test_batch_mean(self):
        disc, _ = adversarial_loss_lsgan(np.array([1.0, 0.0]), np.array([0.0, 0.0]))
        assert disc == pytest.approx(0.5)  # mean[(d_real-1)^2] = 0.5, fake term 0


class TestLogLoss:
    def test_uninformative_discriminator(self):
        """Raw output 0 squashes to 0.5 on both sides: loss is 2 log 2."""
        disc, _ = adversarial_loss_log(np.array([0.0]), np.array([0.0]))
        assert disc == pytest.approx(2 * math.log(2), rel=1e-12)

    def test_confident_discriminator(self):
        disc, _ = adversarial_loss_log(np.array([30.0]), np.array([-30.0]))
        assert disc == pytest.approx(0.0, abs=1e-10)

    def test_clamping_keeps_loss_finite(self):
        disc, gen = adversarial_loss_log(np.array([-1e4]), np.array([1e4]))
        assert np.isfinite(disc) and np.isfinite(gen)

    def test_batch_of_one_is_pointwise(self):
        raw = 0.7
        p = 1.0 / (1.0 + math.exp(-raw))
        disc, gen = adversarial_loss_log(np.array([raw]), np.array([raw]))
        assert disc == pytest.approx(-(math.log(p) + math.log(1 - p)), rel=1e-12)
        assert gen == pytest.approx(-math.log(p), rel=1e-12)


class TestCycleLoss:
    def test_perfect_reconstruction(self):
        x = np.ones((4, 3))
        y = np.zeros((2, 3))
        assert cycle_loss(x, x.copy(), y, y.copy()) == 0.0

    def test_hand_example(self):
        x = np.array([[1.0, 2.0]])
        fgx = np.array([[0.0, 4.0]])
        y = np.array([[0.0, 0.0]])
        assert cycle_loss(x, fgx, y, y.copy()) == pytest.approx(3.0)

    def test_symmetric_in_direction_roles(self):
        rng = np.random.default_rng(0)
        x, fgx = rng.normal(size=(5, 4)), rng.normal(size=(5, 4))
        y, gfy = rng.normal(size=(3, 4)), rng.normal(size=(3, 4))
        assert cycle_loss(x, fgx, y, gfy) == pytest.approx(cycle_loss(y, gfy, x, fgx))

    def test_non_negative(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            x, fgx = rng.normal(size=(4, 3)), rng.normal(size=(4, 3))
            y, gfy = rng.normal(size=(4, 3)), rng.normal(size=(4, 3))
            assert cycle_loss(x, fgx, y, gfy) >= 0.0


class TestFullObjective:
    def _report(self, adv_g, adv_f, cycle):
        return LossReport(adv_g=adv_g, adv_f=adv_f, disc_x=0.0, disc_y=0.0,
                          cycle=cycle, total=0.0)

    def test_weighted_sum(self):
        assert full_objective(self._report(1.0, 1.0, 0.5), 10.0) == pytest.approx(7.0)

    def test_zero_weight_is_pure_adversarial(self):
        assert full_objective(self._report(0.3, 0.4, 99.0), 0.0) == pytest.approx(0.7)

    def test_linear_in_weight(self):
        base = full_objective(self._report(0.0, 0.0, 2.0), 1.0)
        assert full_objective(self._report(0.0, 0.0, 2.0), 3.0) == pytest.approx(3 * base)


class TestGeneratorGradients:
    """Finite-difference checks of the full chained generator objective."""

    def _numeric(self, model, x, y, cycle_weight, loss_form, net_name, step=1e-5):
        net = getattr(model, net_name)

        def replaced(candidate: Mlp) -> CycleGanModel:
            return CycleGanModel(
                g=candidate if net_name == "g" else model.g,
                f=candidate if net_name == "f" else model.f,
                d_x=model.d_x,
                d_y=model.d_y,
            )

        grad_w = []
        for layer in range(net.n_layers):
            g = np.zeros_like(net.weights[layer])
            for idx in np.ndindex(*g.shape):
                vals = []
                for delta in (step, -step):
                    weights = [w.copy() for w in net.weights]
                    weights[layer][idx] += delta
                    candidate = Mlp(net.layer_dims, tuple(weights), net.biases)
                    report, _, _ = generator_objective(
                        replaced(candidate), x, y, cycle_weight, loss_form
                    )
                    vals.append(report.total)
                g[idx] = (vals[0] - vals[1]) / (2 * step)
            grad_w.append(g)
        return grad_w

    @pytest.mark.parametrize("loss_form", ["lsgan", "log"])
    def test_chained_gradients_match_finite_differences(self, loss_form):
        rng = np.random.default_rng(2)
        model = tiny_model(seed=7)
        x = rng.normal(size=(3, 3))
        y = rng.normal(size=(3, 3))
        _, grads_g, grads_f = generator_objective(model, x, y, 10.0, loss_form)
        for net_name, analytic in (("g", grads_g), ("f", grads_f)):
            numeric = self._numeric(model, x, y, 10.0, loss_form, net_name)
            for a, n in zip(analytic.weights, numeric):
                rel = np.abs(a - n) / np.maximum.reduce(
                    [np.abs(a), np.abs(n), np.full_like(a, 1e-6)]
                )
                assert rel.max() <= 1e-4

    def test_zero_cycle_weight_drops_cycle_term(self):
        """At weight 0 the generator gradients ignore reconstruction error."""
        rng = np.random.default_rng(3)
        model = tiny_model(seed=8)
        x = rng.normal(size=(4, 3))
        y = rng.normal(size=(4, 3))
        report, grads_g, _ = generator_objective(model, x, y, 0.0, "lsgan")
        assert report.total == pytest.approx(report.adv_g + report.adv_f)

        # adversarial-only gradient computed independently through D_Y
        out, cache = forward(model.g, x)
        d_out, d_cache = forward(model.d_y, out)
        from cyclevc.net import backward

        b = x.shape[0]
        d_grad = 2.0 * (d_out - 1.0) / b
        _, fake_grad = backward(model.d_y, d_cache, d_grad)
        expected, _ = backward(model.g, cache, fake_grad)
        for a, e in zip(grads_g.weights, expected.weights):
            np.testing.assert_allclose(a, e, rtol=1e-10, atol=1e-12)


class TestDiscriminatorObjective:
    def test_matches_loss_functions(self):
        rng = np.random.default_rng(4)
        model = tiny_model(seed=9)
        x = rng.normal(size=(5, 3))
        y = rng.normal(size=(5, 3))
        loss_x, loss_y, _, _ = discriminator_objective(model, x, y, "lsgan")
        d_real_x = forward(model.d_x, x)[0].ravel()
        d_fake_x = forward(model.d_x, forward(model.f, y)[0])[0].ravel()
        expected_x, _ = adversarial_loss_lsgan(d_real_x, d_fake_x)
        assert loss_x == pytest.approx(expected_x, rel=1e-12)
        d_real_y = forward(model.d_y, y)[0].ravel()
        d_fake_y = forward(model.d_y, forward(model.g, x)[0])[0].ravel()
        expected_y, _ = adversarial_loss_lsgan(d_real_y, d_fake_y)
        assert loss_y == pytest.approx(expected_y, rel=1e-12)

    def test_discriminator_gradients_match_finite_differences(self):
        rng = np.random.default_rng(5)
        model = tiny_model(seed=10)
        x = rng.normal(size=(3, 3))
        y = rng.normal(size=(3, 3))
        _, _, grads_dx, grads_dy = discriminator_objective(model, x, y, "lsgan")

        step = 1e-5
        for disc_name, analytic in (("d_x", grads_dx), ("d_y", grads_dy)):
            net = getattr(model, disc_name)
            for layer in range(net.n_layers):
                numeric = np.zeros_like(net.weights[layer])
                for idx in np.ndindex(*numeric.shape):
                    vals = []
                    for delta in (step, -step):
                        weights = [w.copy() for w in net.weights]
                        weights[layer][idx] += delta
                        candidate = Mlp(net.layer_dims, tuple(weights), net.biases)
                        patched = CycleGanModel(
                            g=model.g,
                            f=model.f,
                            d_x=candidate if disc_name == "d_x" else model.d_x,
                            d_y=candidate if disc_name == "d_y" else model.d_y,
                        )
                        lx, ly, _, _ = discriminator_objective(patched, x, y, "lsgan")
                        vals.append(lx if disc_name == "d_x" else ly)
                    numeric[idx] = (vals[0] - vals[1]) / (2 * step)
                a = analytic.weights[layer]
                rel = np.abs(a - numeric) / np.maximum.reduce(
                    [np.abs(a), np.abs(numeric), np.full_like(a, 1e-6)]
                )
                assert rel.max() <= 1e-4


class TestTraining:
    def _dataset(self, rng, frames, dim=3, shift=0.0):
        return FeatureSequence(rng.normal(shift, 1.0, size=(frames, dim)))

    def test_step_count_per_epoch(self):
        rng = np.random.default_rng(6)
        config = CycleGanConfig(hidden_dims=(4,), epochs=2, batch_frames=128, seed=1)
        model = build_model(3, config)
        x = self._dataset(rng, 256)
        y = self._dataset(rng, 256)
        model, history = train(model, x, y, config)
        assert len(history) == 2  # one report per epoch, 2 steps inside each

    def test_loss_history_is_deterministic(self):
        rng = np.random.default_rng(7)
        x = self._dataset(rng, 64)
        y = self._dataset(rng, 64, shift=1.0)
        config = CycleGanConfig(hidden_dims=(4,), epochs=3, batch_frames=32, seed=5)

        def run():
            model = build_model(3, config)
            _, history = train(model, x, y, config)
            return [(r.adv_g, r.adv_f, r.disc_x, r.disc_y, r.cycle) for r in history]

        assert run() == run()

    def test_discriminator_step_reduces_its_loss(self):
        """With a small lr, one discriminator update descends on the same batch."""
        rng = np.random.default_rng(8)
        config = CycleGanConfig(
            hidden_dims=(6,), seed=2, lr_discriminator=1e-4, cycle_weight=0.0
        )
        model = build_model(3, config)
        x = rng.normal(size=(8, 3))
        y = rng.normal(size=(8, 3))
        state = TrainerState.fresh(model, config)
        before_x, before_y, _, _ = discriminator_objective(model, x, y, "lsgan")
        stepped, _, _ = train_step(model, x, y, config, state)
        # generators moved too; recompute with the original generators so the
        # comparison isolates the discriminator update
        rewound = CycleGanModel(g=model.g, f=model.f, d_x=stepped.d_x, d_y=stepped.d_y)
        after_x, after_y, _, _ = discriminator_objective(rewound, x, y, "lsgan")
        assert after_x <= before_x + 1e-12
        assert after_y <= before_y + 1e-12

    def test_empty_dataset_rejected(self):
        config = CycleGanConfig(hidden_dims=(4,), seed=0)
        model = build_model(3, config)
        empty = FeatureSequence(np.zeros((0, 3)))
        data = FeatureSequence(np.zeros((4, 3)))
        with pytest.raises(InsufficientDataError):
            train(model, empty, data, config)

    def test_dim_mismatch_rejected(self):
        config = CycleGanConfig(hidden_dims=(4,), seed=0)
        model = build_model(3, config)
        data = FeatureSequence(np.zeros((4, 5)))
        with pytest.raises(DimensionMismatchError):
            train(model, data, data, config)


class TestConvertFrames:
    def test_frame_count_preserved(self):
        rng = np.random.default_rng(9)
        model = tiny_model(seed=11)
        x = FeatureSequence(rng.normal(size=(13, 3)))
        out = convert_frames(model, x, "xy")
        assert out.frames == 13

    def test_batch_equals_per_frame(self):
        rng = np.random.default_rng(10)
        model = tiny_model(seed=12)
        x = rng.normal(size=(6, 3))
        batch_out = convert_frames(model, FeatureSequence(x), "xy").data
        row_out = np.vstack(
            [convert_frames(model, FeatureSequence(x[k : k + 1]), "xy").data
             for k in range(6)]
        )
        # BLAS may route single-row and batched products differently, so the
        # comparison is numerical rather than bitwise
        np.testing.assert_allclose(batch_out, row_out, rtol=1e-12, atol=1e-14)

    def test_directions_use_different_generators(self):
        rng = np.random.default_rng(11)
        model = tiny_model(seed=13)
        x = FeatureSequence(rng.normal(size=(4, 3)))
        fwd = convert_frames(model, x, "xy").data
        rev = convert_frames(model, x, "yx").data
        assert not np.array_equal(fwd, rev)

    def test_bad_direction(self):
        model = tiny_model(seed=14)
        x = FeatureSequence(np.zeros((2, 3)))
        with pytest.raises(ValueError):
            convert_frames(model, x, "sideways")
