"""Synthetic generator: structure, determinism, learnability ceiling."""

import numpy as np
import pytest

from manner.corpus import load_corpus
from manner.errors import ContractError
from manner.synth import SynthSpec, gen_corpus, oracle_ap, write_corpus
from manner.textgeo import EmbeddingTable, adverb_key, phrase_key, verb_key


class TestSpecValidation:
    def test_zero_signal_fraction_rejected(self):
        with pytest.raises(ContractError):
            SynthSpec(signal_fraction=0.0)

    def test_odd_adverbs_with_antonyms_rejected(self):
        with pytest.raises(ContractError):
            SynthSpec(a=3, antonyms=True)

    def test_odd_adverbs_without_antonyms_ok(self):
        SynthSpec(a=3, antonyms=False)


class TestGeneration:
    def test_pure_signal_zero_noise_repeats_prototype(self):
        corpus, _ = gen_corpus(SynthSpec(v=2, a=2, n_train=10, n_test=2,
                                         signal_fraction=1.0, noise_sigma=0.0,
                                         seed=1))
        by_class = {}
        for rec in corpus.records:
            seq = corpus.features[rec.id]
            # all segments identical within a video
            assert np.ptp(seq.segments, axis=0).max() == 0.0
            key = (rec.verb_id, rec.adverb_id)
            if key in by_class:
                np.testing.assert_array_equal(seq.segments[0], by_class[key])
            by_class[key] = seq.segments[0]

    def test_labels_balanced_within_one(self):
        spec = SynthSpec(v=3, a=4, n_train=100, n_test=30, seed=2)
        corpus, _ = gen_corpus(spec)
        counts = np.zeros((3, 4), dtype=int)
        for rec in corpus.records:
            counts[rec.verb_id, rec.adverb_id] += 1
        assert counts.max() - counts.min() <= 1

    def test_same_seed_byte_identical_files(self, tmp_path):
        spec = SynthSpec(v=2, a=2, n_train=12, n_test=4, seed=3)
        write_corpus(spec, tmp_path / "a")
        write_corpus(spec, tmp_path / "b")
        for name in ("vocab.json", "manifest.jsonl", "features.bin",
                     "text_embeddings.jsonl"):
            assert (tmp_path / "a" / name).read_bytes() == \
                   (tmp_path / "b" / name).read_bytes(), name

    def test_written_corpus_loads_back(self, tmp_path):
        spec = SynthSpec(v=2, a=4, n_train=16, n_test=6, seed=4)
        paths = write_corpus(spec, tmp_path)
        corpus = load_corpus(paths["manifest"], paths["features"], paths["vocab"])
        table = EmbeddingTable.load_jsonl(paths["text_embeddings"])
        assert len(corpus.records) == 22
        for verb in corpus.vocab.verbs:
            assert verb_key(verb) in table
            assert phrase_key(verb) in table
            for adverb in corpus.vocab.adverbs:
                assert phrase_key(verb, adverb) in table
        for adverb in corpus.vocab.adverbs:
            assert adverb_key(adverb) in table

    def test_segment_counts_in_range(self):
        spec = SynthSpec(v=2, a=2, t_min=3, t_max=7, n_train=30, n_test=5, seed=5)
        corpus, _ = gen_corpus(spec)
        for rec in corpus.records:
            assert 3 <= rec.t <= 7
            assert corpus.features[rec.id].segments.shape[0] == rec.t

    def test_corpus_pair_cosines_positive(self):
        corpus, table = gen_corpus(SynthSpec(v=6, a=6, n_train=30, n_test=6,
                                             d_text=32, seed=6))
        for verb in corpus.vocab.verbs:
            gv = table.get(verb_key(verb))
            for adverb in corpus.vocab.adverbs:
                ga = table.get(adverb_key(adverb))
                cos = gv @ ga / (np.linalg.norm(gv) * np.linalg.norm(ga))
                assert cos >= 0.1 - 1e-12

    def test_nearest_prototype_ceiling(self):
        # noise-free, all-signal corpus: mean-pooled segments recover the
        # class prototype exactly, so a nearest-prototype classifier is
        # perfect on adverbs.
        spec = SynthSpec(v=3, a=4, n_train=60, n_test=20,
                         signal_fraction=1.0, noise_sigma=0.0, seed=7)
        corpus, _ = gen_corpus(spec)
        protos = {}
        for rec in corpus.split("train"):
            protos[(rec.verb_id, rec.adverb_id)] = \
                corpus.features[rec.id].segments.mean(axis=0)
        keys = list(protos)
        hits = 0
        for rec in corpus.split("test"):
            pooled = corpus.features[rec.id].segments.mean(axis=0)
            sims = [pooled @ protos[k] for k in keys]
            guess = keys[int(np.argmax(sims))]
            hits += guess[1] == rec.adverb_id
        assert hits == len(corpus.split("test"))


class TestOracleAP:
    def test_all_relevant(self):
        assert oracle_ap([0.2, 0.9], [1, 1]) == 1.0

    def test_single_positive_rank_k(self):
        # positive sits at rank 3 of 4
        assert oracle_ap([0.9, 0.8, 0.5, 0.1], [0, 0, 1, 0]) == pytest.approx(1 / 3)

    def test_requires_positive(self):
        with pytest.raises(ContractError):
            oracle_ap([0.5], [0])
