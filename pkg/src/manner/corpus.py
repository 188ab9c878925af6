"""Corpus data model and on-disk formats.

Three files describe a corpus:

- ``vocab.json``      {"verbs": [...], "adverbs": [...], "antonyms": [[a, b], ...]}
                      where antonym pairs are adverb strings; the key is
                      optional, but when present every adverb must appear in
                      exactly one pair (the pairing is a fixed-point-free
                      involution).
- ``manifest.jsonl``  one record per line:
                      {"id", "verb", "adverb", "split", "t"} with split in
                      {"train", "test"} and t >= 1 whole one-second segments.
- ``features.bin``    magic "AVF1"; little-endian u32 version=1, u32 d_seg,
                      u32 d_pool, u64 count; an index block (per video:
                      u32 id length, UTF-8 id, u64 absolute byte offset,
                      u32 t); then per video the payload: t x d_seg float32
                      row-major followed by d_pool float32.

Everything is validated on load; unknown labels and t mismatches are hard
errors naming the offending record.
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from manner.errors import CorpusError

MAGIC = b"AVF1"
VERSION = 1

_SPLITS = ("train", "test")


@dataclass(frozen=True)
class Vocab:
    """Verb and adverb string tables with an optional antonym involution."""

    verbs: tuple[str, ...]
    adverbs: tuple[str, ...]
    antonym: dict[int, int] | None = None

    def __post_init__(self):
        if len(set(self.verbs)) != len(self.verbs):
            raise CorpusError("duplicate verbs in vocab")
        if len(set(self.adverbs)) != len(self.adverbs):
            raise CorpusError("duplicate adverbs in vocab")
        if self.antonym is not None:
            a = self.antonym
            if sorted(a) != list(range(len(self.adverbs))):
                raise CorpusError("antonym map must cover every adverb exactly once")
            for i, j in a.items():
                if j == i:
                    raise CorpusError(f"adverb {self.adverbs[i]!r} is its own antonym")
                if a.get(j) != i:
                    raise CorpusError("antonym map is not an involution")

    @property
    def num_verbs(self) -> int:
        return len(self.verbs)

    @property
    def num_adverbs(self) -> int:
        return len(self.adverbs)

    def verb_id(self, verb: str) -> int:
        try:
            return self.verbs.index(verb)
        except ValueError:
            raise CorpusError(f"unknown verb {verb!r}") from None

    def adverb_id(self, adverb: str) -> int:
        try:
            return self.adverbs.index(adverb)
        except ValueError:
            raise CorpusError(f"unknown adverb {adverb!r}") from None

    def to_json(self) -> dict:
        doc = {"verbs": list(self.verbs), "adverbs": list(self.adverbs)}
        if self.antonym is not None:
            pairs = []
            seen = set()
            for i in range(len(self.adverbs)):
                j = self.antonym[i]
                if i not in seen:
                    pairs.append([self.adverbs[i], self.adverbs[j]])
                    seen.update((i, j))
            doc["antonyms"] = pairs
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> "Vocab":
        verbs = tuple(doc["verbs"])
        adverbs = tuple(doc["adverbs"])
        antonym = None
        if "antonyms" in doc and doc["antonyms"] is not None:
            index = {a: i for i, a in enumerate(adverbs)}
            antonym = {}
            for pair in doc["antonyms"]:
                if len(pair) != 2:
                    raise CorpusError(f"antonym entry {pair!r} is not a pair")
                a, b = pair
                for name in (a, b):
                    if name not in index:
                        raise CorpusError(f"antonym pair names unknown adverb {name!r}")
                antonym[index[a]] = index[b]
                antonym[index[b]] = index[a]
        return cls(verbs=verbs, adverbs=adverbs, antonym=antonym)


@dataclass(frozen=True)
class VideoRecord:
    id: str
    verb_id: int
    adverb_id: int
    split: str
    t: int


@dataclass
class FeatureSequence:
    """Per-second segment features (t x d_seg) plus one pooled joint-space
    embedding (d_pool)."""

    segments: np.ndarray
    pooled: np.ndarray


class FeatureStore:
    """In-memory feature table keyed by video id."""

    def __init__(self, d_seg: int, d_pool: int):
        self.d_seg = d_seg
        self.d_pool = d_pool
        self._table: dict[str, FeatureSequence] = {}

    def put(self, video_id: str, segments: np.ndarray, pooled: np.ndarray) -> None:
        segments = np.ascontiguousarray(segments, dtype=np.float32)
        pooled = np.ascontiguousarray(pooled, dtype=np.float32)
        if segments.ndim != 2 or segments.shape[1] != self.d_seg:
            raise CorpusError(f"record {video_id!r}: segments must be t x {self.d_seg}")
        if pooled.shape != (self.d_pool,):
            raise CorpusError(f"record {video_id!r}: pooled must have dim {self.d_pool}")
        if not np.isfinite(segments).all() or not np.isfinite(pooled).all():
            raise CorpusError(f"record {video_id!r}: non-finite feature values")
        self._table[video_id] = FeatureSequence(segments, pooled)

    def __getitem__(self, video_id: str) -> FeatureSequence:
        try:
            return self._table[video_id]
        except KeyError:
            raise CorpusError(f"no features stored for record {video_id!r}") from None

    def __contains__(self, video_id: str) -> bool:
        return video_id in self._table

    def __len__(self) -> int:
        return len(self._table)

    def ids(self) -> list[str]:
        return list(self._table)


@dataclass
class Corpus:
    vocab: Vocab
    records: list[VideoRecord]
    features: FeatureStore

    def split(self, name: str) -> list[VideoRecord]:
        return [r for r in self.records if r.split == name]


@dataclass
class PriorsTable:
    """Train-split verb-adverb co-occurrence counts and adverb marginals."""

    counts: np.ndarray  # (V, A) int64
    marginals: np.ndarray = field(init=False)  # (A,) int64

    def __post_init__(self):
        if (self.counts < 0).any():
            raise CorpusError("priors counts must be non-negative")
        self.marginals = self.counts.sum(axis=0)


def build_priors(records: list[VideoRecord], vocab: Vocab) -> PriorsTable:
    """Count (verb, adverb) pairs; callers pass the train split only."""
    counts = np.zeros((vocab.num_verbs, vocab.num_adverbs), dtype=np.int64)
    for r in records:
        counts[r.verb_id, r.adverb_id] += 1
    return PriorsTable(counts)


# ---------------------------------------------------------------------------
# file IO
# ---------------------------------------------------------------------------


def save_vocab(vocab: Vocab, path: str | Path) -> None:
    Path(path).write_text(json.dumps(vocab.to_json(), indent=1) + "\n")


def load_vocab(path: str | Path) -> Vocab:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise CorpusError(f"cannot read vocab {path}: {e}") from e
    return Vocab.from_json(doc)


def save_manifest(records: list[VideoRecord], vocab: Vocab, path: str | Path) -> None:
    with open(path, "w") as f:
        for r in records:
            f.write(json.dumps({
                "id": r.id,
                "verb": vocab.verbs[r.verb_id],
                "adverb": vocab.adverbs[r.adverb_id],
                "split": r.split,
                "t": r.t,
            }) + "\n")


def load_manifest(path: str | Path, vocab: Vocab) -> list[VideoRecord]:
    records = []
    seen = set()
    with open(path) as f:
        for line_no, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                doc = json.loads(line)
            except json.JSONDecodeError as e:
                raise CorpusError(f"manifest line {line_no}: bad JSON: {e}") from e
            rid = doc["id"]
            if rid in seen:
                raise CorpusError(f"duplicate record id {rid!r}")
            seen.add(rid)
            if doc["split"] not in _SPLITS:
                raise CorpusError(f"record {rid!r}: unknown split {doc['split']!r}")
            t = int(doc["t"])
            if t < 1:
                raise CorpusError(f"record {rid!r}: t must be >= 1, got {t}")
            records.append(VideoRecord(
                id=rid,
                verb_id=vocab.verb_id(doc["verb"]),
                adverb_id=vocab.adverb_id(doc["adverb"]),
                split=doc["split"],
                t=t,
            ))
    return records


def save_features(store: FeatureStore, path: str | Path, order: list[str] | None = None) -> None:
    """Write the AVF1 container.  ``order`` fixes the index order (defaults
    to insertion order) so identical content yields identical bytes."""
    ids = order if order is not None else store.ids()
    header = struct.pack("<4sIIIQ", MAGIC, VERSION, store.d_seg, store.d_pool, len(ids))
    index = io.BytesIO()
    payload = io.BytesIO()
    index_size = sum(4 + len(i.encode()) + 8 + 4 for i in ids)
    base = len(header) + index_size
    for video_id in ids:
        seq = store[video_id]
        raw = video_id.encode()
        offset = base + payload.tell()
        index.write(struct.pack("<I", len(raw)))
        index.write(raw)
        index.write(struct.pack("<QI", offset, seq.segments.shape[0]))
        payload.write(seq.segments.astype("<f4").tobytes(order="C"))
        payload.write(seq.pooled.astype("<f4").tobytes(order="C"))
    with open(path, "wb") as f:
        f.write(header)
        f.write(index.getvalue())
        f.write(payload.getvalue())


def load_features(path: str | Path) -> FeatureStore:
    data = Path(path).read_bytes()
    if len(data) < 24:
        raise CorpusError(f"{path}: truncated header")
    magic, version, d_seg, d_pool, count = struct.unpack_from("<4sIIIQ", data, 0)
    if magic != MAGIC:
        raise CorpusError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise CorpusError(f"{path}: unsupported version {version}")
    store = FeatureStore(d_seg, d_pool)
    pos = 24
    entries = []
    for _ in range(count):
        (id_len,) = struct.unpack_from("<I", data, pos)
        pos += 4
        video_id = data[pos:pos + id_len].decode()
        pos += id_len
        offset, t = struct.unpack_from("<QI", data, pos)
        pos += 12
        entries.append((video_id, offset, t))
    for video_id, offset, t in entries:
        n_seg = t * d_seg
        end = offset + 4 * (n_seg + d_pool)
        if end > len(data):
            raise CorpusError(f"record {video_id!r}: payload extends past end of file")
        flat = np.frombuffer(data, dtype="<f4", count=n_seg + d_pool, offset=offset)
        segments = flat[:n_seg].reshape(t, d_seg)
        pooled = flat[n_seg:]
        store.put(video_id, segments, pooled)
    return store


def load_corpus(
    manifest_path: str | Path,
    features_path: str | Path,
    vocab_path: str | Path,
) -> Corpus:
    """Load and cross-validate the three corpus files."""
    vocab = load_vocab(vocab_path)
    records = load_manifest(manifest_path, vocab)
    store = load_features(features_path)
    for r in records:
        if r.id not in store:
            raise CorpusError(f"record {r.id!r}: no features in store")
        rows = store[r.id].segments.shape[0]
        if rows != r.t:
            raise CorpusError(
                f"record {r.id!r}: manifest t={r.t} but store holds {rows} rows"
            )
    return Corpus(vocab=vocab, records=records, features=store)


def save_corpus(corpus: Corpus, out_dir: str | Path) -> dict[str, Path]:
    """Write vocab.json, manifest.jsonl and features.bin into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "vocab": out / "vocab.json",
        "manifest": out / "manifest.jsonl",
        "features": out / "features.bin",
    }
    save_vocab(corpus.vocab, paths["vocab"])
    save_manifest(corpus.records, corpus.vocab, paths["manifest"])
    save_features(corpus.features, paths["features"], order=[r.id for r in corpus.records])
    return paths
