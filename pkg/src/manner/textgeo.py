"""Verb-adverb text geometry: distances, scaled distances, regression targets.

The action change an adverb applies to a verb is estimated from sentence
embeddings: the distance between the phrase "verb adverb" and the phrase
with the adverb flipped to its antonym, scaled by the cosine similarity of
the bare verb and adverb embeddings.  A per-video regression target puts
that signed magnitude at the ground-truth adverb, its negation at the
antonym slot, and zero elsewhere.  Without antonyms the flipped phrase is
replaced by the bare verb and the antonym slot stays zero.

All geometry math runs in float64; targets are cast to float32 at loss time
by the training code.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from manner.corpus import VideoRecord, Vocab
from manner.errors import ContractError, DegenerateInputError, EmbeddingKeyError

TARGET_MODES = ("antonym", "no_antonym", "fixed")


class EmbeddingTable:
    """Typed-key map to fixed-dimension float64 vectors.

    Keys: ``verb:<v>``, ``adverb:<a>``, ``sent:<v> <a>`` and ``sent:<v>``.
    Phrase keys are the exact string "verb adverb" with a single space.
    """

    def __init__(self, dim: int):
        self.dim = dim
        self._vecs: dict[str, np.ndarray] = {}

    def put(self, key: str, vec: np.ndarray) -> None:
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape != (self.dim,):
            raise ContractError(f"key {key!r}: expected dim {self.dim}, got {vec.shape}")
        if not np.isfinite(vec).all():
            raise ContractError(f"key {key!r}: non-finite embedding")
        self._vecs[key] = vec

    def get(self, key: str) -> np.ndarray:
        try:
            return self._vecs[key]
        except KeyError:
            raise EmbeddingKeyError(key) from None

    def __contains__(self, key: str) -> bool:
        return key in self._vecs

    def __len__(self) -> int:
        return len(self._vecs)

    def keys(self) -> list[str]:
        return list(self._vecs)

    def content_hash(self) -> str:
        h = hashlib.sha256()
        for key in sorted(self._vecs):
            h.update(key.encode())
            h.update(self._vecs[key].tobytes())
        return h.hexdigest()

    def save_jsonl(self, path: str | Path) -> None:
        with open(path, "w") as f:
            for key in self._vecs:
                f.write(json.dumps({"key": key, "vec": self._vecs[key].tolist()}) + "\n")

    @classmethod
    def load_jsonl(cls, path: str | Path) -> "EmbeddingTable":
        table = None
        with open(path) as f:
            for line in f:
                line = line.strip()
                if not line:
                    continue
                doc = json.loads(line)
                vec = np.asarray(doc["vec"], dtype=np.float64)
                if table is None:
                    table = cls(vec.shape[0])
                table.put(doc["key"], vec)
        return table if table is not None else cls(0)


def verb_key(verb: str) -> str:
    return f"verb:{verb}"


def adverb_key(adverb: str) -> str:
    return f"adverb:{adverb}"


def phrase_key(verb: str, adverb: str | None = None) -> str:
    return f"sent:{verb} {adverb}" if adverb is not None else f"sent:{verb}"


def _cosine(u: np.ndarray, v: np.ndarray) -> float:
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        raise DegenerateInputError("zero-norm verb or adverb embedding")
    return float(u @ v) / (nu * nv)


def distance_d(verb: str, adverb: str, vocab: Vocab, table: EmbeddingTable) -> float:
    """Euclidean distance between the phrase embedding and the phrase with
    the adverb flipped to its antonym."""
    if vocab.antonym is None:
        raise ContractError("distance_d requires an antonym map")
    opposite = vocab.adverbs[vocab.antonym[vocab.adverb_id(adverb)]]
    s = table.get(phrase_key(verb, adverb))
    s_neg = table.get(phrase_key(verb, opposite))
    return float(np.linalg.norm(s - s_neg))


def delta(verb: str, adverb: str, vocab: Vocab, table: EmbeddingTable) -> float:
    """distance_d scaled by cos(verb, adverb).  The cosine keeps its sign:
    an anti-correlated pair yields a negative value."""
    d = distance_d(verb, adverb, vocab, table)
    c = _cosine(table.get(verb_key(verb)), table.get(adverb_key(adverb)))
    return d * c


def delta_no_antonym(verb: str, adverb: str, table: EmbeddingTable) -> float:
    """Antonym-free variant: the flipped phrase is the bare verb."""
    s = table.get(phrase_key(verb, adverb))
    s_neg = table.get(phrase_key(verb))
    d = float(np.linalg.norm(s - s_neg))
    c = _cosine(table.get(verb_key(verb)), table.get(adverb_key(adverb)))
    return d * c


def build_target(
    record: VideoRecord,
    vocab: Vocab,
    table: EmbeddingTable,
    mode: str,
) -> np.ndarray:
    """Length-A signed target vector for one record (float64)."""
    if mode not in TARGET_MODES:
        raise ContractError(f"unknown target mode {mode!r}")
    a = vocab.num_adverbs
    verb = vocab.verbs[record.verb_id]
    adverb = vocab.adverbs[record.adverb_id]
    y = np.zeros(a, dtype=np.float64)
    if mode == "no_antonym":
        y[record.adverb_id] = delta_no_antonym(verb, adverb, table)
        return y
    if vocab.antonym is None:
        raise ContractError(f"target mode {mode!r} requires an antonym map")
    opposite_id = vocab.antonym[record.adverb_id]
    value = 1.0 if mode == "fixed" else delta(verb, adverb, vocab, table)
    y[record.adverb_id] = value
    y[opposite_id] = -value
    return y


_target_cache: dict[tuple[str, str, str, str], np.ndarray] = {}


def _vocab_hash(vocab: Vocab) -> str:
    doc = json.dumps(vocab.to_json(), sort_keys=True)
    return hashlib.sha256(doc.encode()).hexdigest()


def build_targets(
    records: list[VideoRecord],
    vocab: Vocab,
    table: EmbeddingTable,
    mode: str,
) -> np.ndarray:
    """(N, A) target matrix for a record list.  Targets depend only on the
    labels, so results are cached per (vocab, table, mode, labels)."""
    labels = hashlib.sha256(
        json.dumps([(r.verb_id, r.adverb_id) for r in records]).encode()
    ).hexdigest()
    key = (_vocab_hash(vocab), table.content_hash(), mode, labels)
    hit = _target_cache.get(key)
    if hit is not None:
        return hit
    out = np.stack([build_target(r, vocab, table, mode) for r in records]) \
        if records else np.zeros((0, vocab.num_adverbs), dtype=np.float64)
    _target_cache[key] = out
    return out


@dataclass
class GeometryMatrix:
    """V x A table of distances with a presence mask for pairs that occur
    in a corpus."""

    values: np.ndarray  # (V, A) float64
    present: np.ndarray  # (V, A) bool


def geometry_export(
    vocab: Vocab,
    table: EmbeddingTable,
    present_pairs: set[tuple[int, int]] | None = None,
    csv_path: str | Path | None = None,
) -> tuple[GeometryMatrix, GeometryMatrix]:
    """Unscaled and scaled distance matrices over all (verb, adverb) pairs,
    optionally written as CSV rows (verb, adverb, d, delta, present).

    With an antonym map the distances follow the flipped-phrase form;
    without one, the bare-verb form.
    """
    v_n, a_n = vocab.num_verbs, vocab.num_adverbs
    d_mat = np.zeros((v_n, a_n), dtype=np.float64)
    s_mat = np.zeros((v_n, a_n), dtype=np.float64)
    for vi, verb in enumerate(vocab.verbs):
        for ai, adverb in enumerate(vocab.adverbs):
            if vocab.antonym is not None:
                d_mat[vi, ai] = distance_d(verb, adverb, vocab, table)
                s_mat[vi, ai] = delta(verb, adverb, vocab, table)
            else:
                s_mat[vi, ai] = delta_no_antonym(verb, adverb, table)
                s = table.get(phrase_key(verb, adverb))
                d_mat[vi, ai] = float(np.linalg.norm(s - table.get(phrase_key(verb))))
    if present_pairs is None:
        present = np.ones((v_n, a_n), dtype=bool)
    else:
        present = np.zeros((v_n, a_n), dtype=bool)
        for vi, ai in present_pairs:
            present[vi, ai] = True
    if csv_path is not None:
        with open(csv_path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["verb", "adverb", "d", "delta", "present"])
            for vi, verb in enumerate(vocab.verbs):
                for ai, adverb in enumerate(vocab.adverbs):
                    w.writerow([verb, adverb,
                                repr(d_mat[vi, ai]), repr(s_mat[vi, ai]),
                                int(present[vi, ai])])
    return GeometryMatrix(d_mat, present), GeometryMatrix(s_mat, present)


def geometry_summary(d_mat: GeometryMatrix, s_mat: GeometryMatrix) -> dict:
    """Summary statistics for an export, including how many present pairs
    have a negative scaled distance (anti-correlated verb-adverb pairs)."""
    keep = d_mat.present
    d = d_mat.values[keep]
    s = s_mat.values[keep]
    return {
        "pairs": int(keep.sum()),
        "d_min": float(d.min()) if d.size else 0.0,
        "d_max": float(d.max()) if d.size else 0.0,
        "d_mean": float(d.mean()) if d.size else 0.0,
        "delta_min": float(s.min()) if s.size else 0.0,
        "delta_max": float(s.max()) if s.size else 0.0,
        "delta_mean": float(s.mean()) if s.size else 0.0,
        "negative_delta_pairs": int((s < 0).sum()),
    }
