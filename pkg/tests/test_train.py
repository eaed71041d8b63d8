"""Loss, SGD, and the epoch loop on small synthetic datasets."""

import numpy as np
import pytest

from onn4f.grad import ConsistencyError, Gradients, LayerGrads
from onn4f.mnist import Dataset
from onn4f.train import (
    CSV_HEADER,
    DataError,
    MetricsRecord,
    TrainConfig,
    TrainingDivergedError,
    batch_cross_entropy,
    cross_entropy,
    evaluate,
    evaluate_confusion,
    fit,
    init_model,
    sgd_step,
    softmax,
    train_epoch,
)


def synthetic_dataset(rng, count, grid_size=32, split="train") -> Dataset:
    images = rng.integers(0, 256, size=(count, 28, 28), dtype=np.uint8)
    labels = rng.integers(0, 10, size=count).astype(np.uint8)
    return Dataset(images, labels, grid_size, split)


class TestSoftmax:
    def test_uniform(self):
        np.testing.assert_allclose(softmax(np.zeros(10)), np.full(10, 0.1))

    def test_two_to_one_odds(self):
        p = softmax(np.array([0.0, np.log(2.0)] + [-np.inf] * 0))
        np.testing.assert_allclose(p, [1 / 3, 2 / 3])

    def test_rows_sum_to_one(self, rng):
        p = softmax(rng.standard_normal((5, 10)))
        np.testing.assert_allclose(p.sum(axis=-1), np.ones(5))
        assert np.all(p > 0)

    def test_shift_invariant_and_overflow_safe(self, rng):
        v = rng.standard_normal(10)
        np.testing.assert_allclose(softmax(v + 1000.0), softmax(v), atol=1e-12)
        p = softmax(np.array([1e5, 0.0, 0.0]))
        assert np.isfinite(p).all() and p[0] == pytest.approx(1.0)


class TestCrossEntropy:
    def test_certain_correct_is_zero(self):
        p = np.zeros(10)
        p[3] = 1.0
        assert cross_entropy(p, 3) == pytest.approx(0.0)

    def test_uniform_is_log_ten(self):
        assert cross_entropy(np.full(10, 0.1), 7) == pytest.approx(np.log(10.0))

    def test_zero_probability_is_clamped_finite(self):
        p = np.zeros(10)
        p[0] = 1.0
        loss = cross_entropy(p, 9)
        assert np.isfinite(loss)
        assert loss == pytest.approx(-np.log(1e-12))

    def test_batch_matches_scalar(self, rng):
        probs = softmax(rng.standard_normal((6, 10)))
        labels = rng.integers(0, 10, size=6)
        batch = batch_cross_entropy(probs, labels)
        expected = [cross_entropy(probs[i], int(labels[i])) for i in range(6)]
        np.testing.assert_allclose(batch, expected)


class TestSgdStep:
    def zero_grads(self, model) -> Gradients:
        n = model.grid_size
        return Gradients(
            tuple(
                LayerGrads(np.zeros((n, n)), np.zeros((n, n)), np.zeros((n, n)))
                for _ in model.layers
            )
        )

    def test_zero_learning_rate_is_identity(self, rng):
        model = init_model(8, 2, 0.01, rng)
        grads = Gradients(
            tuple(
                LayerGrads(
                    rng.standard_normal((8, 8)),
                    rng.standard_normal((8, 8)),
                    rng.standard_normal((8, 8)),
                )
                for _ in range(2)
            )
        )
        stepped = sgd_step(model, grads, 0.0)
        for a, b in zip(stepped.layers, model.layers):
            np.testing.assert_array_equal(a.weight, b.weight)
            np.testing.assert_array_equal(a.bias, b.bias)
            np.testing.assert_array_equal(a.phase, b.phase)

    def test_zero_grads_keep_params(self, rng):
        model = init_model(8, 1, 0.01, rng)
        stepped = sgd_step(model, self.zero_grads(model), 0.05)
        np.testing.assert_array_equal(stepped.layers[0].phase, model.layers[0].phase)

    def test_explicit_update_rule(self, rng):
        model = init_model(8, 1, 0.01, rng)
        g = LayerGrads(
            np.full((8, 8), 2.0), np.full((8, 8), -1.0), np.full((8, 8), 0.5)
        )
        stepped = sgd_step(model, Gradients((g,)), 0.1)
        np.testing.assert_allclose(
            stepped.layers[0].weight, model.layers[0].weight - 0.2
        )
        np.testing.assert_allclose(stepped.layers[0].bias, model.layers[0].bias + 0.1)
        np.testing.assert_allclose(
            stepped.layers[0].phase, model.layers[0].phase - 0.05
        )

    def test_original_model_untouched(self, rng):
        model = init_model(8, 1, 0.01, rng)
        before = model.layers[0].weight.copy()
        g = LayerGrads(np.ones((8, 8)), np.ones((8, 8)), np.ones((8, 8)))
        sgd_step(model, Gradients((g,)), 0.5)
        np.testing.assert_array_equal(model.layers[0].weight, before)

    def test_layer_mismatch_rejected(self, rng):
        model = init_model(8, 2, 0.01, rng)
        one = Gradients(
            (LayerGrads(np.zeros((8, 8)), np.zeros((8, 8)), np.zeros((8, 8))),)
        )
        with pytest.raises(ConsistencyError):
            sgd_step(model, one, 0.1)


class TestInitModel:
    def test_deterministic_per_seed(self):
        a = init_model(16, 2, 0.01, np.random.default_rng(7))
        b = init_model(16, 2, 0.01, np.random.default_rng(7))
        c = init_model(16, 2, 0.01, np.random.default_rng(8))
        for la, lb in zip(a.layers, b.layers):
            np.testing.assert_array_equal(la.phase, lb.phase)
        assert not np.array_equal(a.layers[0].phase, c.layers[0].phase)

    def test_transparent_start_with_random_phase(self, rng):
        model = init_model(16, 3, 0.02, rng)
        assert model.num_layers == 3
        assert model.activation_shift == 0.02
        for layer in model.layers:
            np.testing.assert_array_equal(layer.weight, np.ones((16, 16)))
            np.testing.assert_array_equal(layer.bias, np.zeros((16, 16)))
            assert layer.phase.min() >= 0.0
            assert layer.phase.max() < 2 * np.pi
            assert layer.phase.std() > 0.5  # actually random, not constant

    def test_detector_is_default_layout(self, rng):
        from onn4f.optics import DetectorLayout

        model = init_model(32, 1, 0.01, rng)
        assert model.detector == DetectorLayout.default(32)


class TestTrainEpoch:
    def small_config(self, **kw) -> TrainConfig:
        base = dict(
            learning_rate=0.05,
            batch_size=4,
            epochs=1,
            seed=0,
            grid_size=32,
            layers=1,
            activation_shift=0.01,
        )
        base.update(kw)
        return TrainConfig(**base)

    def test_deterministic_given_seed(self, rng):
        data_rng = np.random.default_rng(99)
        train_data = synthetic_dataset(data_rng, 12)
        val_data = synthetic_dataset(data_rng, 6, split="validation")
        cfg = self.small_config()

        results = []
        for _ in range(2):
            model = init_model(cfg.grid_size, cfg.layers, cfg.activation_shift,
                               np.random.default_rng(cfg.seed))
            stepper = np.random.default_rng(cfg.seed)
            model, rec = train_epoch(model, train_data, val_data, cfg, stepper)
            results.append((model, rec))
        (m0, r0), (m1, r1) = results
        np.testing.assert_array_equal(m0.layers[0].weight, m1.layers[0].weight)
        np.testing.assert_array_equal(m0.layers[0].phase, m1.layers[0].phase)
        assert r0.train_loss == r1.train_loss
        assert r0.val_accuracy == r1.val_accuracy

    def test_rng_advances_between_epochs(self, rng):
        data_rng = np.random.default_rng(5)
        train_data = synthetic_dataset(data_rng, 16)
        val_data = synthetic_dataset(data_rng, 4, split="validation")
        cfg = self.small_config(learning_rate=1e-9)  # keep the model ~static
        model = init_model(cfg.grid_size, cfg.layers, cfg.activation_shift,
                           np.random.default_rng(0))
        stepper = np.random.default_rng(0)
        perm_before = np.random.default_rng(0).permutation(16)
        model, _ = train_epoch(model, train_data, val_data, cfg, stepper, 0)
        # the next epoch's permutation must differ from a fresh generator's
        next_perm = stepper.permutation(16)
        assert not np.array_equal(next_perm, perm_before)

    def test_loss_decreases_on_tiny_problem(self):
        data_rng = np.random.default_rng(3)
        train_data = synthetic_dataset(data_rng, 8)
        val_data = train_data
        cfg = self.small_config(batch_size=8)
        model = init_model(cfg.grid_size, cfg.layers, cfg.activation_shift,
                           np.random.default_rng(0))
        stepper = np.random.default_rng(0)
        first = None
        last = None
        for epoch in range(25):
            model, rec = train_epoch(model, train_data, val_data, cfg, stepper, epoch)
            if first is None:
                first = rec.train_loss
            last = rec.train_loss
        assert last < first

    def test_empty_dataset_rejected(self, rng):
        empty = Dataset(
            np.zeros((0, 28, 28), np.uint8), np.zeros(0, np.uint8), 32, "train"
        )
        cfg = self.small_config()
        model = init_model(32, 1, 0.01, rng)
        with pytest.raises(DataError):
            train_epoch(model, empty, empty, cfg, np.random.default_rng(0))

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")  # inf readouts en route
    def test_divergence_raises_with_location(self, rng):
        data_rng = np.random.default_rng(11)
        train_data = synthetic_dataset(data_rng, 8)
        cfg = self.small_config(learning_rate=1e300, batch_size=4)
        model = init_model(32, 1, 0.01, np.random.default_rng(0))
        with pytest.raises(TrainingDivergedError) as exc:
            train_epoch(model, train_data, train_data, cfg, np.random.default_rng(0), 4)
        assert exc.value.epoch == 4
        assert exc.value.batch_index >= 0


class TestEvaluate:
    def test_confusion_totals(self, rng):
        data_rng = np.random.default_rng(21)
        data = synthetic_dataset(data_rng, 20, split="test")
        model = init_model(32, 1, 0.01, rng)
        loss, acc, confusion = evaluate_confusion(model, data, batch_size=7)
        assert confusion.shape == (10, 10)
        assert confusion.sum() == 20
        assert confusion.dtype == np.int64
        np.testing.assert_array_equal(
            confusion.sum(axis=1), np.bincount(data.labels, minlength=10)
        )
        assert acc == pytest.approx(np.trace(confusion) / 20)
        assert loss > 0

    def test_evaluate_matches_confusion(self, rng):
        data_rng = np.random.default_rng(22)
        data = synthetic_dataset(data_rng, 10, split="test")
        model = init_model(32, 1, 0.01, rng)
        l1, a1 = evaluate(model, data, batch_size=3)
        l2, a2, _ = evaluate_confusion(model, data, batch_size=3)
        assert l1 == l2 and a1 == a2

    def test_batch_size_does_not_change_result(self, rng):
        data_rng = np.random.default_rng(23)
        data = synthetic_dataset(data_rng, 9, split="test")
        model = init_model(32, 1, 0.01, rng)
        l1, a1 = evaluate(model, data, batch_size=2)
        l2, a2 = evaluate(model, data, batch_size=9)
        assert a1 == a2
        assert l1 == pytest.approx(l2, rel=1e-12)

    def test_empty_rejected(self, rng):
        empty = Dataset(
            np.zeros((0, 28, 28), np.uint8), np.zeros(0, np.uint8), 32, "test"
        )
        with pytest.raises(DataError):
            evaluate(init_model(32, 1, 0.01, rng), empty)


class TestFit:
    def test_tracks_best_validation_epoch(self):
        data_rng = np.random.default_rng(31)
        train_data = synthetic_dataset(data_rng, 12)
        val_data = synthetic_dataset(data_rng, 8, split="validation")
        cfg = TrainConfig(
            learning_rate=0.05, batch_size=4, epochs=3, seed=0,
            grid_size=32, layers=1, activation_shift=0.01,
        )
        model = init_model(cfg.grid_size, cfg.layers, cfg.activation_shift,
                           np.random.default_rng(cfg.seed))
        seen = []
        result = fit(model, train_data, val_data, cfg, np.random.default_rng(0),
                     on_epoch=seen.append)
        assert len(result.records) == 3
        assert seen == result.records
        accs = [r.val_accuracy for r in result.records]
        assert result.best_epoch == int(np.argmax(accs))
        best_loss, best_acc = evaluate(result.best_model, val_data)
        assert best_acc == pytest.approx(max(accs))


class TestMetricsRecord:
    def test_csv_row_matches_header(self):
        rec = MetricsRecord(2, 0.5, 0.25, 0.75, 0.125, 1.5)
        row = rec.to_csv_row()
        assert len(row.split(",")) == len(CSV_HEADER.split(","))
        assert row == "2,0.5,0.25,0.75,0.125,1.5"

    def test_floats_round_trip(self):
        rec = MetricsRecord(0, 1 / 3, 2 / 3, 1 / 7, 355 / 113, 0.1)
        parts = rec.to_csv_row().split(",")
        assert float(parts[1]) == 1 / 3
        assert float(parts[4]) == 355 / 113


class TestTrainConfigValidation:
    @pytest.mark.parametrize(
        "kw",
        [
            {"learning_rate": 0.0},
            {"learning_rate": -0.1},
            {"batch_size": 0},
            {"epochs": 0},
            {"layers": 0},
            {"grid_size": 48},
            {"grid_size": 0},
            {"activation_shift": -1e-9},
        ],
    )
    def test_bad_values_rejected(self, kw):
        with pytest.raises(ValueError):
            TrainConfig(**kw)
