"""Synthetic corpora with controllable structure, and brute-force oracles.

The generator plants one hidden prototype vector per (verb, adverb) class.
A video of t segments carries the prototype (plus gaussian noise) in a
random ceil(signal_fraction * t) subset of its segments; the rest are
unrelated distractors, so attention has something to find.  Text embeddings
are built so that verb-adverb cosines of corpus pairs are positive, which
keeps regression targets sign-structured.

The oracles reimplement average precision, metric aggregation and the
embedding geometry in plain python, on purpose: they share no code with the
library paths they check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from manner.corpus import Corpus, FeatureStore, VideoRecord, Vocab, save_corpus
from manner.errors import ContractError
from manner.nd import Rng
from manner.textgeo import EmbeddingTable, adverb_key, phrase_key, verb_key


@dataclass
class SynthSpec:
    v: int = 4
    a: int = 4
    antonyms: bool = True
    t_min: int = 3
    t_max: int = 8
    n_train: int = 200
    n_test: int = 50
    signal_fraction: float = 0.5
    noise_sigma: float = 0.2
    d_seg: int = 32
    d_pool: int = 16
    d_text: int = 16
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.signal_fraction <= 1.0:
            raise ContractError("signal_fraction must be in (0, 1]")
        if min(self.d_seg, self.d_pool, self.d_text) < 2:
            raise ContractError("feature dims must be >= 2")
        if self.antonyms and self.a % 2:
            raise ContractError("antonym pairing (i, i+1) needs an even adverb count")
        if self.t_min < 1 or self.t_max < self.t_min:
            raise ContractError("bad segment-count range")


def _unit(rng: np.random.Generator, dim: int) -> np.ndarray:
    vec = rng.normal(size=dim)
    return vec / np.linalg.norm(vec)


def _chebyshev_direction(verb_vecs: np.ndarray) -> np.ndarray:
    """Unit vector (approximately) maximizing the minimum cosine with every
    verb embedding: repeated pulls toward the currently worst verb."""
    c = verb_vecs.sum(axis=0)
    c /= np.linalg.norm(c)
    for _ in range(300):
        worst = int(np.argmin(verb_vecs @ c))
        c = c + 0.1 * verb_vecs[worst]
        c /= np.linalg.norm(c)
    return c


def _adverb_embeddings(rng, verb_vecs, dim, n_adverbs, antonym_pairs,
                       min_cos=0.15):
    """Unit adverb embeddings with two parts: a shared component along the
    verbs' Chebyshev direction, which keeps every corpus pair's cosine (and
    hence its scaled distance) safely positive, and a per-adverb random
    component orthogonal to the verb span, which keeps the phrase distance
    between an adverb and its antonym large.  Antonym partners get opposite
    random components."""
    c = _chebyshev_direction(verb_vecs)
    q_min = float((verb_vecs @ c).min())
    alpha = 0.7
    if alpha * q_min < min_cos:
        alpha = min(0.95, min_cos / q_min)
    if alpha * q_min < 0.1:
        raise ContractError("verb embeddings too spread for a positive "
                            "verb-adverb cosine floor; use a larger text dim")
    beta = float(np.sqrt(1.0 - alpha * alpha))
    basis = list(verb_vecs) + [c]

    def fresh_direction() -> np.ndarray:
        for _ in range(50):
            w = _unit(rng, dim)
            for b in basis:
                w = w - (w @ b) / (b @ b) * b
            norm = np.linalg.norm(w)
            if norm > 1e-6:
                return w / norm
        raise ContractError("text dim too small to separate adverbs; "
                            "increase d_text")

    out = np.zeros((n_adverbs, dim))
    if antonym_pairs:
        for i, j in antonym_pairs:
            w = fresh_direction()
            basis.append(w)
            out[i] = alpha * c + beta * w
            out[j] = alpha * c - beta * w
    else:
        for i in range(n_adverbs):
            w = fresh_direction()
            basis.append(w)
            out[i] = alpha * c + beta * w
    return out


def gen_corpus(spec: SynthSpec) -> tuple[Corpus, EmbeddingTable]:
    rng = Rng(spec.seed)

    verbs = tuple(f"verb{i}" for i in range(spec.v))
    adverbs = tuple(f"adv{i}" for i in range(spec.a))
    antonym = None
    if spec.antonyms:
        antonym = {}
        for i in range(0, spec.a, 2):
            antonym[i] = i + 1
            antonym[i + 1] = i
    vocab = Vocab(verbs=verbs, adverbs=adverbs, antonym=antonym)

    # text embeddings; verbs share a common component (as sentence encoders
    # produce) so verb-adverb cosines, and with them the regression targets,
    # stay uniformly bounded away from zero
    text_rng = rng.stream("text")
    table = EmbeddingTable(spec.d_text)
    verb_common = _unit(text_rng, spec.d_text)
    verb_vecs = np.stack([0.5 * verb_common + _unit(text_rng, spec.d_text)
                          for _ in range(spec.v)])
    verb_vecs /= np.linalg.norm(verb_vecs, axis=1, keepdims=True)
    for vi, verb in enumerate(verbs):
        table.put(verb_key(verb), verb_vecs[vi])
    pairs_ij = [(i, i + 1) for i in range(0, spec.a, 2)] if spec.antonyms else None
    adverb_vecs = _adverb_embeddings(text_rng, verb_vecs, spec.d_text,
                                     spec.a, pairs_ij)
    for ai, adverb in enumerate(adverbs):
        table.put(adverb_key(adverb), adverb_vecs[ai])
    for vi, verb in enumerate(verbs):
        for adverb in adverbs:
            noise = text_rng.normal(size=spec.d_text) * 0.02
            phrase = verb_vecs[vi] + 0.5 * table.get(adverb_key(adverb)) + noise
            table.put(phrase_key(verb, adverb), phrase / np.linalg.norm(phrase))
        table.put(phrase_key(verb), verb_vecs[vi] + text_rng.normal(size=spec.d_text) * 0.02)

    # hidden class prototypes and their pooled joint-space projections
    proto_rng = rng.stream("proto")
    protos = {(vi, ai): _unit(proto_rng, spec.d_seg)
              for vi in range(spec.v) for ai in range(spec.a)}
    pool_proj = rng.stream("pool-proj").normal(size=(spec.d_pool, spec.d_seg))
    pooled = {}
    for key, proto in protos.items():
        p = pool_proj @ proto
        pooled[key] = p / np.linalg.norm(p)

    # videos: pair labels round-robin over all classes, per-video draw streams
    pairs = [(vi, ai) for vi in range(spec.v) for ai in range(spec.a)]
    n_total = spec.n_train + spec.n_test
    store = FeatureStore(spec.d_seg, spec.d_pool)
    records = []
    for i in range(n_total):
        vi, ai = pairs[i % len(pairs)]
        vid_rng = rng.stream(f"video/{i}")
        t = int(vid_rng.integers(spec.t_min, spec.t_max + 1))
        n_sig = math.ceil(spec.signal_fraction * t)
        signal_at = np.zeros(t, dtype=bool)
        signal_at[vid_rng.permutation(t)[:n_sig]] = True
        segments = np.empty((t, spec.d_seg), dtype=np.float64)
        for row in range(t):
            base = protos[vi, ai] if signal_at[row] else _unit(vid_rng, spec.d_seg)
            segments[row] = base + vid_rng.normal(size=spec.d_seg) * spec.noise_sigma
        rid = f"synth{i:05d}"
        store.put(rid, segments, pooled[vi, ai])
        records.append(VideoRecord(
            id=rid, verb_id=vi, adverb_id=ai,
            split="train" if i < spec.n_train else "test", t=t,
        ))
    return Corpus(vocab=vocab, records=records, features=store), table


def write_corpus(spec: SynthSpec, out_dir: str | Path) -> dict[str, Path]:
    """Generate and write all four corpus files."""
    corpus, table = gen_corpus(spec)
    paths = save_corpus(corpus, out_dir)
    paths["text_embeddings"] = Path(out_dir) / "text_embeddings.jsonl"
    table.save_jsonl(paths["text_embeddings"])
    return paths


# ---------------------------------------------------------------------------
# oracles
# ---------------------------------------------------------------------------


def oracle_ap(scores, relevance) -> float:
    """Average precision by exhaustive walk over the sorted list.

    Ties break toward the earlier index, matching the library convention.
    """
    n = len(scores)
    if n == 0 or sum(relevance) == 0:
        raise ContractError("oracle_ap needs at least one positive")
    order = sorted(range(n), key=lambda i: (-float(scores[i]), i))
    hits = 0
    precisions = []
    for rank, idx in enumerate(order, start=1):
        if relevance[idx]:
            hits += 1
            precisions.append(hits / rank)
    return sum(precisions) / len(precisions)


def oracle_metrics(scores, gt_adverbs, num_adverbs, antonym=None) -> dict:
    """Aggregate metrics by brute force: per-class AP, support weighting,
    macro mean, and strict antonym accuracy."""
    n = len(gt_adverbs)
    per_class = {}
    for a in range(num_adverbs):
        relevance = [1 if gt_adverbs[i] == a else 0 for i in range(n)]
        support = sum(relevance)
        if support == 0:
            continue
        col = [scores[i][a] for i in range(n)]
        per_class[a] = (oracle_ap(col, relevance), support)
    total = sum(s for _, s in per_class.values())
    map_w = sum(ap * s for ap, s in per_class.values()) / total if per_class else 0.0
    map_m = sum(ap for ap, _ in per_class.values()) / len(per_class) if per_class else 0.0
    out = {"mAP_W": map_w, "mAP_M": map_m}
    if antonym is not None:
        correct = 0
        for i in range(n):
            gt = gt_adverbs[i]
            if scores[i][gt] > scores[i][antonym[gt]]:
                correct += 1
        out["Acc_A"] = correct / n if n else 0.0
    return out


def oracle_geometry(vocab: Vocab, table: EmbeddingTable):
    """Recompute the distance matrices with straight-line python."""
    v_n, a_n = vocab.num_verbs, vocab.num_adverbs
    d_mat = np.zeros((v_n, a_n))
    s_mat = np.zeros((v_n, a_n))
    for vi in range(v_n):
        for ai in range(a_n):
            verb, adverb = vocab.verbs[vi], vocab.adverbs[ai]
            s = table.get(phrase_key(verb, adverb))
            if vocab.antonym is not None:
                opp = vocab.adverbs[vocab.antonym[ai]]
                s_neg = table.get(phrase_key(verb, opp))
            else:
                s_neg = table.get(phrase_key(verb))
            d = math.sqrt(sum((float(x) - float(y)) ** 2 for x, y in zip(s, s_neg)))
            gv = table.get(verb_key(verb))
            ga = table.get(adverb_key(adverb))
            dot = sum(float(x) * float(y) for x, y in zip(gv, ga))
            nv = math.sqrt(sum(float(x) ** 2 for x in gv))
            na = math.sqrt(sum(float(x) ** 2 for x in ga))
            d_mat[vi, ai] = d
            s_mat[vi, ai] = d * dot / (nv * na)
    return d_mat, s_mat
