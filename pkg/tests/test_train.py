"""Losses, batching and the training loop."""

import numpy as np
import pytest

from manner import nd
from manner import train as tr
from manner.errors import ContractError
from manner.model import ModelConfig
from manner.nd import Rng
from manner.synth import SynthSpec, gen_corpus

TINY_MODEL = ModelConfig(d_seg=16, d_text=8, e=8, heads=2, mlp_hidden=8,
                         dropout=0.0, a=4)


def tiny_corpus(seed=0, **kw):
    spec = SynthSpec(v=2, a=4, n_train=12, n_test=8, d_seg=16, d_pool=8,
                     d_text=8, t_min=2, t_max=4, noise_sigma=0.1, seed=seed, **kw)
    return gen_corpus(spec)


class TestLossCE:
    def test_uniform_logits(self):
        preds = nd.constant(np.zeros((3, 4), dtype=np.float32))
        loss = tr.loss_ce(preds, np.array([0, 1, 3]))
        assert float(loss.data) == pytest.approx(np.log(4), abs=1e-6)

    def test_confident_correct_goes_to_zero(self):
        logits = np.zeros((1, 4), dtype=np.float32)
        logits[0, 2] = 30.0
        loss = tr.loss_ce(nd.constant(logits), np.array([2]))
        assert float(loss.data) == pytest.approx(0.0, abs=1e-6)

    def test_batch_mean_equals_per_sample_mean(self):
        rng = np.random.default_rng(0)
        logits = rng.normal(size=(2, 4)).astype(np.float64)
        pair = tr.loss_ce(nd.constant(logits), np.array([1, 3]))
        singles = [float(tr.loss_ce(nd.constant(logits[i:i + 1]), np.array([g])).data)
                   for i, g in enumerate((1, 3))]
        assert float(pair.data) == pytest.approx(np.mean(singles), abs=1e-9)

    def test_nonnegative(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            logits = rng.normal(size=(4, 5)).astype(np.float32) * 3
            gt = rng.integers(0, 5, size=4)
            assert float(tr.loss_ce(nd.constant(logits), gt).data) >= 0

    def test_bad_index_rejected(self):
        with pytest.raises(IndexError):
            tr.loss_ce(nd.constant(np.zeros((1, 4), dtype=np.float32)), np.array([4]))


class TestLossReg:
    def test_exact_match_is_zero(self):
        x = np.random.default_rng(2).normal(size=(3, 4)).astype(np.float32)
        assert float(tr.loss_reg(nd.constant(x), x).data) == 0.0

    def test_hand_computed(self):
        target = np.array([[0.848528, -0.848528, 0.0, 0.0]], dtype=np.float32)
        loss = tr.loss_reg(nd.constant(np.zeros((1, 4), dtype=np.float32)), target)
        assert float(loss.data) == pytest.approx(0.36, abs=1e-4)

    def test_quadratic_homogeneity(self):
        rng = np.random.default_rng(3)
        target = rng.normal(size=(2, 3)).astype(np.float32)
        l1 = float(tr.loss_reg(nd.constant(np.zeros((2, 3), dtype=np.float32)), target).data)
        l2 = float(tr.loss_reg(nd.constant(np.zeros((2, 3), dtype=np.float32)), 2 * target).data)
        assert l2 == pytest.approx(4 * l1, rel=1e-5)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ContractError):
            tr.loss_reg(nd.constant(np.zeros((2, 3), dtype=np.float32)),
                        np.zeros((3, 2), dtype=np.float32))


class TestMakeBatches:
    def records(self, n):
        corpus, _ = tiny_corpus()
        return (corpus.records * ((n // len(corpus.records)) + 1))[:n]

    def test_one_batch_when_large(self):
        recs = self.records(7)
        batches = tr.make_batches(recs, Rng(0), 100, epoch=0)
        assert len(batches) == 1
        assert len(batches[0]) == 7

    def test_same_seed_epoch_same_order(self):
        recs = self.records(20)
        a = tr.make_batches(recs, Rng(5), 6, epoch=3)
        b = tr.make_batches(recs, Rng(5), 6, epoch=3)
        assert [r.id for batch in a for r in batch] == [r.id for batch in b for r in batch]

    def test_different_epochs_differ(self):
        recs = self.records(20)
        a = tr.make_batches(recs, Rng(5), 6, epoch=0)
        b = tr.make_batches(recs, Rng(5), 6, epoch=1)
        assert [r.id for batch in a for r in batch] != [r.id for batch in b for r in batch]

    def test_batches_partition_records(self):
        recs = self.records(23)
        batches = tr.make_batches(recs, Rng(1), 5, epoch=2)
        flat = sorted(id(r) for batch in batches for r in batch)
        assert flat == sorted(id(r) for r in recs)
        assert [len(b) for b in batches] == [5, 5, 5, 5, 3]  # short tail kept


class TestCollate:
    def test_padding_and_mask(self):
        corpus, table = tiny_corpus()
        queries = np.stack([table.get(f"verb:{v}") for v in corpus.vocab.verbs])
        batch = corpus.records[:4]
        feats, mask, q = tr.collate(batch, corpus, queries)
        t_max = max(r.t for r in batch)
        assert feats.shape == (4, t_max, 16)
        for i, rec in enumerate(batch):
            assert mask[i, :rec.t].all()
            assert not mask[i, rec.t:].any()
            assert not feats[i, rec.t:].any()


class TestFit:
    def test_zero_epochs_returns_init(self):
        corpus, table = tiny_corpus()
        result = tr.fit(corpus, table, TINY_MODEL,
                        tr.TrainConfig(epochs=0, seed=1, batch_size=8))
        assert result.loss_log == []
        assert result.tracker.best == {}

    def test_loss_decreases_on_fixed_batch(self):
        corpus, table = tiny_corpus()
        config = tr.TrainConfig(epochs=51, lr=1e-3, batch_size=64,
                                loss_mode="REG", eval_every=100, seed=2)
        result = tr.fit(corpus, table, TINY_MODEL, config)
        losses = [l for _, _, l in result.loss_log]
        assert losses[50] < losses[0]

    def test_overfits_single_batch(self):
        corpus, table = tiny_corpus()
        config = tr.TrainConfig(epochs=500, lr=1e-3, batch_size=64,
                                loss_mode="REG", eval_every=1000, seed=3)
        result = tr.fit(corpus, table, TINY_MODEL, config)
        assert result.loss_log[-1][2] < 0.01

    def test_deterministic_loss_sequence(self):
        corpus, table = tiny_corpus()
        config = tr.TrainConfig(epochs=5, lr=1e-3, batch_size=4,
                                loss_mode="CLS", eval_every=100, seed=4)
        a = tr.fit(corpus, table, TINY_MODEL, config)
        b = tr.fit(corpus, table, TINY_MODEL, config)
        assert a.loss_log == b.loss_log

    def test_reg_antonym_requires_map(self):
        corpus, table = tiny_corpus(antonyms=False)
        with pytest.raises(ContractError):
            tr.fit(corpus, table, TINY_MODEL,
                   tr.TrainConfig(epochs=1, loss_mode="REG", antonym_mode=True))

    def test_no_antonym_mode_trains(self):
        corpus, table = tiny_corpus(antonyms=False)
        config = tr.TrainConfig(epochs=2, batch_size=8, loss_mode="REG",
                                antonym_mode=False, eval_every=1, seed=5)
        result = tr.fit(corpus, table, TINY_MODEL, config)
        assert result.loss_log

    def test_tracker_equals_max_of_eval_log(self):
        corpus, table = tiny_corpus()
        config = tr.TrainConfig(epochs=12, lr=1e-3, batch_size=8,
                                loss_mode="CLS", eval_every=3, seed=6)
        result = tr.fit(corpus, table, TINY_MODEL, config)
        assert result.eval_log
        for key, entry in result.tracker.best.items():
            protocol, metric = key.split("/", 1)
            history = [v for _, m, v, p in result.eval_log
                       if m == metric and p == protocol]
            assert entry.value == max(history)
            assert entry.params is not None

    def test_bests_are_monotone(self):
        tracker = tr.BestTracker()
        assert tracker.update("with_labels/mAP_M", 0.5, 1)
        assert not tracker.update("with_labels/mAP_M", 0.4, 2)
        assert tracker.best["with_labels/mAP_M"].value == 0.5
        assert tracker.update("with_labels/mAP_M", 0.6, 3)

    def test_inputs_not_mutated(self):
        corpus, table = tiny_corpus()
        feat_before = {rid: corpus.features[rid].segments.copy()
                       for rid in corpus.features.ids()}
        emb_before = {k: table.get(k).copy() for k in table.keys()}
        config = tr.TrainConfig(epochs=3, batch_size=8, loss_mode="REG",
                                eval_every=2, seed=7)
        tr.fit(corpus, table, TINY_MODEL, config)
        for rid, arr in feat_before.items():
            np.testing.assert_array_equal(corpus.features[rid].segments, arr)
        for key, vec in emb_before.items():
            np.testing.assert_array_equal(table.get(key), vec)

    def test_divergence_aborts_with_diagnostic(self):
        from manner.errors import NonFiniteError

        corpus, table = tiny_corpus()
        config = tr.TrainConfig(epochs=5, lr=1e22, batch_size=64,
                                loss_mode="REG", eval_every=100, seed=9)
        with pytest.raises(NonFiniteError, match="epoch"):
            tr.fit(corpus, table, TINY_MODEL, config)

    def test_logs_written(self, tmp_path):
        corpus, table = tiny_corpus()
        config = tr.TrainConfig(epochs=4, batch_size=8, loss_mode="CLS",
                                eval_every=2, seed=8)
        result = tr.fit(corpus, table, TINY_MODEL, config, out_dir=tmp_path)
        assert (tmp_path / "train_log.csv").exists()
        assert (tmp_path / "evals.csv").exists()
        ckpts = list((tmp_path / "checkpoints").glob("*.ckpt"))
        assert ckpts  # at least the first eval sets a best
        lines = (tmp_path / "train_log.csv").read_text().splitlines()
        assert len(lines) == 1 + len(result.loss_log)
