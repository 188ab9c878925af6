"""Embedding geometry: distances, scaled distances, targets, export."""

import numpy as np
import pytest

from manner import textgeo as tg
from manner.corpus import VideoRecord, Vocab
from manner.errors import ContractError, DegenerateInputError, EmbeddingKeyError
from manner.synth import SynthSpec, gen_corpus, oracle_geometry

SQRT2 = float(np.sqrt(2.0))


def pair_vocab():
    return Vocab(
        verbs=("chop",),
        adverbs=("finely", "coarsely", "slowly", "quickly"),
        antonym={0: 1, 1: 0, 2: 3, 3: 2},
    )


def hand_table():
    """dim-3 table with known geometry for (chop, finely)."""
    t = tg.EmbeddingTable(3)
    t.put("verb:chop", np.array([1.0, 0.0, 0.0]))
    t.put("adverb:finely", np.array([0.6, 0.8, 0.0]))
    t.put("sent:chop finely", np.array([1.0, 0.0, 0.0]))
    t.put("sent:chop coarsely", np.array([0.0, 1.0, 0.0]))
    return t


def random_table(rng, vocab, dim=6):
    t = tg.EmbeddingTable(dim)
    for verb in vocab.verbs:
        t.put(tg.verb_key(verb), rng.normal(size=dim))
        t.put(tg.phrase_key(verb), rng.normal(size=dim))
        for adverb in vocab.adverbs:
            t.put(tg.phrase_key(verb, adverb), rng.normal(size=dim))
    for adverb in vocab.adverbs:
        t.put(tg.adverb_key(adverb), rng.normal(size=dim))
    return t


class TestDistance:
    def test_identical_sentences_give_zero(self):
        t = hand_table()
        t.put("sent:chop coarsely", t.get("sent:chop finely"))
        assert tg.distance_d("chop", "finely", pair_vocab(), t) == 0.0

    def test_hand_computed(self):
        d = tg.distance_d("chop", "finely", pair_vocab(), hand_table())
        assert d == pytest.approx(1.414214, abs=1e-6)

    def test_symmetric_under_antonym_flip(self):
        rng = np.random.default_rng(0)
        vocab = pair_vocab()
        for _ in range(30):
            t = random_table(rng, vocab)
            d1 = tg.distance_d("chop", "finely", vocab, t)
            d2 = tg.distance_d("chop", "coarsely", vocab, t)
            assert d1 == pytest.approx(d2, abs=1e-12)

    def test_missing_key_names_key(self):
        t = hand_table()
        vocab = pair_vocab()
        with pytest.raises(EmbeddingKeyError, match="sent:chop slowly"):
            tg.distance_d("chop", "slowly", vocab, t)


class TestDelta:
    def test_orthogonal_verb_adverb_zeroes_delta(self):
        t = hand_table()
        t.put("adverb:finely", np.array([0.0, 1.0, 0.0]))  # perp to verb
        assert tg.delta("chop", "finely", pair_vocab(), t) == pytest.approx(0.0, abs=1e-12)

    def test_hand_computed(self):
        val = tg.delta("chop", "finely", pair_vocab(), hand_table())
        assert val == pytest.approx(0.848528, abs=1e-6)

    def test_negating_adverb_negates_delta(self):
        t = hand_table()
        before = tg.delta("chop", "finely", pair_vocab(), t)
        t.put("adverb:finely", -t.get("adverb:finely"))
        after = tg.delta("chop", "finely", pair_vocab(), t)
        assert after == pytest.approx(-before, abs=1e-12)

    def test_zero_norm_rejected(self):
        t = hand_table()
        t.put("adverb:finely", np.zeros(3))
        with pytest.raises(DegenerateInputError):
            tg.delta("chop", "finely", pair_vocab(), t)

    def test_bounded_by_distance(self):
        rng = np.random.default_rng(1)
        vocab = pair_vocab()
        for _ in range(100):
            t = random_table(rng, vocab)
            d = tg.distance_d("chop", "slowly", vocab, t)
            s = tg.delta("chop", "slowly", vocab, t)
            assert abs(s) <= d + 1e-12

    def test_invariant_to_positive_rescaling(self):
        rng = np.random.default_rng(2)
        vocab = pair_vocab()
        t = random_table(rng, vocab)
        base = tg.delta("chop", "finely", vocab, t)
        t.put("verb:chop", 17.5 * t.get("verb:chop"))
        t.put("adverb:finely", 0.003 * t.get("adverb:finely"))
        assert tg.delta("chop", "finely", vocab, t) == pytest.approx(base, abs=1e-9)

    def test_distance_invariant_under_common_rotation(self):
        rng = np.random.default_rng(12)
        vocab = pair_vocab()
        t = random_table(rng, vocab)
        rotation, _ = np.linalg.qr(rng.normal(size=(6, 6)))
        rotated = tg.EmbeddingTable(6)
        for key in t.keys():
            vec = t.get(key)
            rotated.put(key, rotation @ vec if key.startswith("sent:") else vec)
        for adverb in vocab.adverbs:
            d0 = tg.distance_d("chop", adverb, vocab, t)
            d1 = tg.distance_d("chop", adverb, vocab, rotated)
            assert d1 == pytest.approx(d0, abs=1e-12)


class TestDeltaNoAntonym:
    def test_phrase_equal_to_verb_gives_zero(self):
        t = tg.EmbeddingTable(2)
        t.put("verb:chop", np.array([1.0, 0.0]))
        t.put("adverb:finely", np.array([1.0, 0.0]))
        t.put("sent:chop finely", np.array([1.0, 0.0]))
        t.put("sent:chop", np.array([1.0, 0.0]))
        assert tg.delta_no_antonym("chop", "finely", t) == 0.0

    def test_hand_computed(self):
        t = tg.EmbeddingTable(2)
        t.put("verb:chop", np.array([1.0, 0.0]))
        t.put("adverb:finely", np.array([1.0, 0.0]))
        t.put("sent:chop finely", np.array([0.0, 1.0]))
        t.put("sent:chop", np.array([1.0, 0.0]))
        assert tg.delta_no_antonym("chop", "finely", t) == pytest.approx(SQRT2, abs=1e-12)

    def test_does_not_touch_antonym_map(self):
        rng = np.random.default_rng(3)
        vocab_no_h = Vocab(verbs=("chop",), adverbs=("finely", "coarsely"), antonym=None)
        t = random_table(rng, vocab_no_h)
        # works fine with no antonym map anywhere
        tg.delta_no_antonym("chop", "finely", t)


class TestBuildTarget:
    def test_antonym_mode_signed_pair(self):
        rec = VideoRecord("r", 0, 0, "train", 1)
        y = tg.build_target(rec, pair_vocab(), hand_table(), mode="antonym")
        np.testing.assert_allclose(y, [0.848528, -0.848528, 0.0, 0.0], atol=1e-6)

    def test_fixed_mode(self):
        rec = VideoRecord("r", 0, 0, "train", 1)
        y = tg.build_target(rec, pair_vocab(), hand_table(), mode="fixed")
        np.testing.assert_array_equal(y, [1.0, -1.0, 0.0, 0.0])

    def test_fixed_mode_reads_no_sentence_entries(self):
        rec = VideoRecord("r", 0, 2, "train", 1)
        empty = tg.EmbeddingTable(3)  # no keys at all
        y = tg.build_target(rec, pair_vocab(), empty, mode="fixed")
        np.testing.assert_array_equal(y, [0.0, 0.0, 1.0, -1.0])

    def test_no_antonym_mode_single_entry(self):
        t = tg.EmbeddingTable(2)
        t.put("verb:chop", np.array([1.0, 0.0]))
        t.put("adverb:finely", np.array([1.0, 0.0]))
        t.put("sent:chop finely", np.array([1.0, 0.3]))
        t.put("sent:chop", np.array([1.0, 0.0]))
        rec = VideoRecord("r", 0, 0, "train", 1)
        y = tg.build_target(rec, pair_vocab(), t, mode="no_antonym")
        assert y[0] == pytest.approx(0.3, abs=1e-9)
        assert not y[1:].any()

    def test_antonym_mode_requires_map(self):
        vocab = Vocab(verbs=("chop",), adverbs=("finely", "coarsely"), antonym=None)
        rec = VideoRecord("r", 0, 0, "train", 1)
        with pytest.raises(ContractError):
            tg.build_target(rec, vocab, hand_table(), mode="antonym")

    def test_structure_on_random_corpus(self):
        corpus, table = gen_corpus(SynthSpec(v=3, a=4, n_train=40, n_test=10, seed=5))
        for rec in corpus.records:
            y = tg.build_target(rec, corpus.vocab, table, mode="antonym")
            nz = np.flatnonzero(y)
            assert len(nz) <= 2
            assert y[rec.adverb_id] == -y[corpus.vocab.antonym[rec.adverb_id]]
            y1 = tg.build_target(rec, corpus.vocab, table, mode="no_antonym")
            assert np.count_nonzero(y1) <= 1
            assert not np.delete(y1, rec.adverb_id).any()


class TestBatchTargets:
    def test_matches_per_record(self):
        corpus, table = gen_corpus(SynthSpec(v=2, a=4, n_train=20, n_test=5, seed=7))
        mat = tg.build_targets(corpus.records, corpus.vocab, table, mode="antonym")
        for i, rec in enumerate(corpus.records):
            np.testing.assert_array_equal(
                mat[i], tg.build_target(rec, corpus.vocab, table, mode="antonym"))

    def test_cache_returns_same_object(self):
        corpus, table = gen_corpus(SynthSpec(v=2, a=2, n_train=10, n_test=2, seed=8))
        a = tg.build_targets(corpus.records, corpus.vocab, table, mode="fixed")
        b = tg.build_targets(corpus.records, corpus.vocab, table, mode="fixed")
        assert a is b


class TestGeometryExport:
    def test_single_pair_matrix_equals_ops(self):
        vocab = Vocab(verbs=("chop",), adverbs=("finely", "coarsely"), antonym={0: 1, 1: 0})
        rng = np.random.default_rng(4)
        t = random_table(rng, vocab)
        d_mat, s_mat = tg.geometry_export(vocab, t)
        assert d_mat.values[0, 0] == tg.distance_d("chop", "finely", vocab, t)
        assert s_mat.values[0, 0] == tg.delta("chop", "finely", vocab, t)

    def test_distances_nonnegative(self):
        rng = np.random.default_rng(6)
        vocab = pair_vocab()
        for _ in range(20):
            t = random_table(rng, vocab)
            d_mat, _ = tg.geometry_export(vocab, t)
            assert (d_mat.values >= 0).all()

    def test_matches_oracle(self):
        rng = np.random.default_rng(7)
        vocab = pair_vocab()
        t = random_table(rng, vocab)
        d_mat, s_mat = tg.geometry_export(vocab, t)
        d_oracle, s_oracle = oracle_geometry(vocab, t)
        np.testing.assert_allclose(d_mat.values, d_oracle, atol=1e-12)
        np.testing.assert_allclose(s_mat.values, s_oracle, atol=1e-12)

    def test_csv_written(self, tmp_path):
        vocab = pair_vocab()
        t = random_table(np.random.default_rng(8), vocab)
        path = tmp_path / "geometry.csv"
        tg.geometry_export(vocab, t, present_pairs={(0, 0), (0, 3)}, csv_path=path)
        lines = path.read_text().splitlines()
        assert lines[0] == "verb,adverb,d,delta,present"
        assert len(lines) == 1 + vocab.num_verbs * vocab.num_adverbs
        flags = [line.rsplit(",", 1)[1] for line in lines[1:]]
        assert flags.count("1") == 2

    def test_summary_counts_negative_deltas(self):
        vocab = Vocab(verbs=("chop",), adverbs=("finely", "coarsely"), antonym={0: 1, 1: 0})
        t = hand_table()
        t.put("adverb:coarsely", np.array([-1.0, 0.0, 0.0]))  # anti-correlated
        d_mat, s_mat = tg.geometry_export(vocab, t)
        summary = tg.geometry_summary(d_mat, s_mat)
        assert summary["pairs"] == 2
        assert summary["negative_delta_pairs"] == 1


class TestTableIO:
    def test_jsonl_roundtrip(self, tmp_path):
        rng = np.random.default_rng(9)
        vocab = pair_vocab()
        t = random_table(rng, vocab)
        t.save_jsonl(tmp_path / "emb.jsonl")
        loaded = tg.EmbeddingTable.load_jsonl(tmp_path / "emb.jsonl")
        assert sorted(loaded.keys()) == sorted(t.keys())
        for key in t.keys():
            np.testing.assert_array_equal(loaded.get(key), t.get(key))
