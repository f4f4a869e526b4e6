import numpy as np
import pytest

from jointhash.data import Dataset, synth_dataset
from jointhash.errors import (
    DataError,
    FormatError,
    TrainingDivergedError,
)
from jointhash.index import load_code_table, save_code_table
from jointhash.model import ModelParams, affine_hash, binarize, unpack_codes
from jointhash.objective import GradientSet, Hyperparams, total_loss
from jointhash.train import (
    Checkpoint,
    TrainConfig,
    build_pair_labels,
    encode_database,
    init_params,
    load_checkpoint,
    save_checkpoint,
    sgd_step,
    train,
)


def small_dataset(seed=0, classes=3, per_class=8, dim=6):
    return synth_dataset(classes, per_class, dim, separation=3.0, seed=seed)


def quick_hyper(**kw):
    base = dict(eta=0.2, beta=25.0, lr=3e-4, code_bits=8, batch_size=8,
                epochs=5, seed=0)
    base.update(kw)
    return Hyperparams(**base)


class TestBuildPairLabels:
    def test_example(self):
        pairs = build_pair_labels(np.array([0, 0, 1]))
        got = set(zip(pairs.first.tolist(), pairs.second.tolist(),
                      pairs.similar.tolist()))
        assert got == {(0, 1, 1.0), (0, 2, 0.0), (1, 2, 0.0)}

    def test_pair_count(self):
        for m in (1, 2, 7, 12):
            assert len(build_pair_labels(np.zeros(m, dtype=int))) == m * (m - 1) // 2


class TestSgdStep:
    def make(self):
        rng = np.random.default_rng(0)
        params = ModelParams(rng.normal(size=(3, 4)), rng.normal(size=3),
                             rng.normal(size=(2, 3)), rng.normal(size=2))
        zeros = GradientSet(np.zeros((3, 4)), np.zeros(3), np.zeros((2, 3)),
                            np.zeros(2), np.zeros((1, 4)))
        return params, zeros

    def test_zero_gradient_noop(self):
        params, zeros = self.make()
        before = params.copy()
        sgd_step(params, zeros, lr=0.5)
        for a, b in zip(params.blocks().values(), before.blocks().values()):
            assert np.array_equal(a, b)

    def test_zero_lr_noop(self):
        params, _ = self.make()
        rng = np.random.default_rng(2)
        grads = GradientSet(rng.normal(size=(3, 4)), rng.normal(size=3),
                            rng.normal(size=(2, 3)), rng.normal(size=2),
                            np.zeros((1, 4)))
        before = params.copy()
        sgd_step(params, grads, lr=0.0)
        for a, b in zip(params.blocks().values(), before.blocks().values()):
            assert np.array_equal(a, b)

    def test_step_reduces_convex_toy_loss(self):
        # quadratic surrogate: requesting descent on 0.5*||W||^2
        rng = np.random.default_rng(1)
        params = ModelParams(rng.normal(size=(2, 2)), rng.normal(size=2),
                             rng.normal(size=(2, 2)), rng.normal(size=2))

        def toy(p):
            return sum(float(np.sum(b**2)) for b in p.blocks().values()) / 2

        grads = GradientSet(params.hash_weights.copy(),
                            params.hash_bias.copy(),
                            params.cls_weights.copy(),
                            params.cls_bias.copy(), np.zeros((1, 2)))
        before = toy(params)
        sgd_step(params, grads, lr=0.1)
        assert toy(params) < before

    def test_in_place_and_returns_params(self):
        params, zeros = self.make()
        assert sgd_step(params, zeros, lr=0.1) is params


class TestTrain:
    def test_deterministic(self):
        ds = small_dataset()
        p1, t1 = train(ds, TrainConfig(quick_hyper()))
        p2, t2 = train(ds, TrainConfig(quick_hyper()))
        for a, b in zip(p1.blocks().values(), p2.blocks().values()):
            assert np.array_equal(a, b)
        assert [(r.epoch, r.total, r.similarity, r.label) for r in t1] == \
               [(r.epoch, r.total, r.similarity, r.label) for r in t2]

    def test_seed_changes_params(self):
        ds = small_dataset()
        p1, _ = train(ds, TrainConfig(quick_hyper(seed=0)))
        p2, _ = train(ds, TrainConfig(quick_hyper(seed=1)))
        assert not np.array_equal(p1.hash_weights, p2.hash_weights)

    def test_label_loss_trend_eta_zero(self):
        # full batch keeps the per-epoch mean free of shuffle noise, so the
        # trace reflects pure descent
        ds = synth_dataset(3, 20, 8, separation=4.0, seed=2)
        _, trace = train(ds, TrainConfig(quick_hyper(eta=0.0, epochs=5,
                                                     lr=0.05, batch_size=60)))
        values = [r.label for r in trace]
        assert all(b <= a for a, b in zip(values, values[1:]))

    def test_joint_loss_decreases_epoch1_to_10(self):
        ds = synth_dataset(4, 20, 16, separation=3.0, seed=3)
        _, trace = train(ds, TrainConfig(quick_hyper(epochs=10)))
        assert trace[9].total < trace[0].total

    def test_single_class_rejected(self):
        ds = Dataset(np.random.default_rng(0).normal(size=(6, 4)),
                     np.zeros(6, dtype=int), num_classes=2)
        with pytest.raises(DataError):
            train(ds, TrainConfig(quick_hyper()))

    def test_divergence_aborts_with_context(self):
        ds = synth_dataset(3, 16, 8, separation=3.0, seed=4)
        big = TrainConfig(quick_hyper(lr=50.0, epochs=3))
        with pytest.raises(TrainingDivergedError) as err:
            train(ds, big)
        assert err.value.epoch >= 1

    def test_checkpoint_interval_emits_files(self, tmp_path):
        ds = small_dataset()
        config = TrainConfig(quick_hyper(epochs=4), checkpoint_interval=2,
                             checkpoint_dir=tmp_path)
        train(ds, config)
        assert (tmp_path / "checkpoint_epoch0002.bin").exists()
        assert (tmp_path / "checkpoint_epoch0004.bin").exists()

    def test_trace_epochs_one_based(self):
        ds = small_dataset()
        _, trace = train(ds, TrainConfig(quick_hyper(epochs=3)))
        assert [r.epoch for r in trace] == [1, 2, 3]

    def test_lr_decay_validated(self):
        with pytest.raises(ValueError):
            TrainConfig(quick_hyper(), lr_decay=0.0)
        with pytest.raises(ValueError):
            TrainConfig(quick_hyper(), lr_decay=1.5)


class TestEncodeDatabase:
    def test_codes_match_forward_composition(self):
        ds = small_dataset(seed=5)
        params = init_params(ds.feature_dim, 8, ds.num_classes, seed=1)
        table = encode_database(params, ds)
        signs = binarize(affine_hash(ds.features, params))
        assert np.array_equal(unpack_codes(table.codes, 8), signs)
        assert np.array_equal(table.ids, np.arange(len(ds)))
        assert np.array_equal(table.labels, ds.labels)

    def test_empty_dataset(self):
        ds = Dataset(np.zeros((0, 4)), np.zeros(0, dtype=int), num_classes=3)
        params = init_params(4, 8, 3, seed=0)
        assert len(encode_database(params, ds)) == 0

    def test_roundtrips_through_table_file(self, tmp_path):
        ds = small_dataset(seed=6)
        params = init_params(ds.feature_dim, 12, ds.num_classes, seed=2)
        table = encode_database(params, ds)
        save_code_table(table, tmp_path / "db.htbl")
        loaded = load_code_table(tmp_path / "db.htbl")
        assert np.array_equal(loaded.codes, table.codes)
        assert np.array_equal(loaded.predicted, table.predicted)


class TestCheckpointIO:
    def roundtrip(self, tmp_path, cp):
        path = tmp_path / "cp.bin"
        save_checkpoint(cp, path)
        return path, load_checkpoint(path)

    def test_bit_exact_roundtrip(self, tmp_path):
        rng = np.random.default_rng(7)
        params = ModelParams(rng.normal(size=(8, 5)), rng.normal(size=8),
                             rng.normal(size=(3, 8)), rng.normal(size=3))
        cp = Checkpoint(params, quick_hyper(eta=0.375, lr=1.25e-4, seed=99),
                        epoch=17)
        _, loaded = self.roundtrip(tmp_path, cp)
        for a, b in zip(loaded.params.blocks().values(),
                        params.blocks().values()):
            assert np.array_equal(a, b)
        assert loaded.hyper == cp.hyper
        assert loaded.epoch == 17

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "cp.bin"
        save_checkpoint(Checkpoint(init_params(3, 4, 2, 0), quick_hyper(), 1),
                        path)
        raw = bytearray(path.read_bytes())
        raw[:4] = b"XXXX"
        path.write_bytes(bytes(raw))
        with pytest.raises(FormatError):
            load_checkpoint(path)

    def test_bad_version(self, tmp_path):
        path = tmp_path / "cp.bin"
        save_checkpoint(Checkpoint(init_params(3, 4, 2, 0), quick_hyper(), 1),
                        path)
        raw = bytearray(path.read_bytes())
        raw[4] = 99
        path.write_bytes(bytes(raw))
        with pytest.raises(FormatError):
            load_checkpoint(path)

    def test_truncated(self, tmp_path):
        path = tmp_path / "cp.bin"
        save_checkpoint(Checkpoint(init_params(3, 4, 2, 0), quick_hyper(), 1),
                        path)
        path.write_bytes(path.read_bytes()[:-5])
        with pytest.raises(FormatError):
            load_checkpoint(path)

    def test_loaded_params_reproduce_loss(self, tmp_path):
        ds = small_dataset(seed=8)
        hyper = quick_hyper(epochs=2)
        params, _ = train(ds, TrainConfig(hyper))
        _, loaded = self.roundtrip(tmp_path, Checkpoint(params, hyper, 2))
        expected = total_loss(ds.features, ds.labels, params, hyper)
        assert total_loss(ds.features, ds.labels, loaded.params,
                          hyper) == expected
