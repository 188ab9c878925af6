"""Inference protocols, ranking metrics and the no-training baselines.

Two protocols score the test split: "with_labels" queries the model with
each video's ground-truth verb; "label_free" takes, per adverb, the maximum
score over all verb queries.  Metrics are mean average precision with
support-weighted (mAP_W) and macro (mAP_M) averaging over adverb classes,
plus strict antonym accuracy (Acc_A) when an antonym map exists.

AP convention: sort by descending score with ties broken by ascending row
position, then average the precision at each positive's rank.  Classes with
no positives are excluded from both averages.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from manner.corpus import Corpus, PriorsTable
from manner.errors import ContractError, DimensionError
from manner.model import Model, forward, predict_all_verbs
from manner.textgeo import EmbeddingTable, phrase_key, verb_key

PROTOCOLS = ("with_labels", "label_free")


@dataclass
class ScoreMatrix:
    ids: list[str]
    gt_verb: np.ndarray  # (N,) int
    gt_adverb: np.ndarray  # (N,) int
    scores: np.ndarray  # (N, A) float64
    protocol: str

    def __post_init__(self):
        if not np.isfinite(self.scores).all():
            raise ContractError("score matrix contains non-finite values")


@dataclass
class MetricsReport:
    map_w: float
    map_m: float
    acc_a: float | None
    per_class_ap: dict[int, float]
    support: dict[int, int]
    protocol: str

    def as_dict(self) -> dict:
        metrics = {"mAP_W": self.map_w, "mAP_M": self.map_m}
        if self.acc_a is not None:
            metrics["Acc_A"] = self.acc_a
        return metrics


def _verb_matrix(corpus: Corpus, table: EmbeddingTable) -> np.ndarray:
    return np.stack([table.get(verb_key(v)) for v in corpus.vocab.verbs])


def infer_with_labels(model: Model, corpus: Corpus, table: EmbeddingTable,
                      split: str = "test") -> ScoreMatrix:
    """Score each video with its ground-truth verb as the attention query."""
    records = corpus.split(split)
    rows = np.zeros((len(records), corpus.vocab.num_adverbs))
    for i, rec in enumerate(records):
        seq = corpus.features[rec.id]
        query = table.get(verb_key(corpus.vocab.verbs[rec.verb_id]))
        _, preds, _ = forward(model, seq.segments, np.ones(rec.t, dtype=bool), query)
        rows[i] = preds
    return ScoreMatrix(
        ids=[r.id for r in records],
        gt_verb=np.array([r.verb_id for r in records], dtype=np.int64),
        gt_adverb=np.array([r.adverb_id for r in records], dtype=np.int64),
        scores=rows,
        protocol="with_labels",
    )


def infer_label_free(model: Model, corpus: Corpus, table: EmbeddingTable,
                     split: str = "test") -> ScoreMatrix:
    """Score each adverb by the maximum over all verb queries."""
    records = corpus.split(split)
    verbs = _verb_matrix(corpus, table)
    rows = np.zeros((len(records), corpus.vocab.num_adverbs))
    for i, rec in enumerate(records):
        seq = corpus.features[rec.id]
        all_scores = predict_all_verbs(model, seq.segments, np.ones(rec.t, dtype=bool), verbs)
        rows[i] = all_scores.max(axis=0)
    return ScoreMatrix(
        ids=[r.id for r in records],
        gt_verb=np.array([r.verb_id for r in records], dtype=np.int64),
        gt_adverb=np.array([r.adverb_id for r in records], dtype=np.int64),
        scores=rows,
        protocol="label_free",
    )


def average_precision(scores: np.ndarray, relevance: np.ndarray) -> float:
    """AP over one ranked list; requires at least one positive."""
    scores = np.asarray(scores, dtype=np.float64)
    relevance = np.asarray(relevance).astype(bool)
    if scores.shape != relevance.shape or scores.ndim != 1:
        raise DimensionError("scores and relevance must be equal-length vectors")
    n_pos = int(relevance.sum())
    if n_pos == 0:
        raise ContractError("average_precision is undefined with no positives")
    # stable sort on negated scores: ties resolve to the lower row position
    order = np.argsort(-scores, kind="stable")
    rel_sorted = relevance[order]
    cum_hits = np.cumsum(rel_sorted)
    ranks = np.arange(1, scores.size + 1)
    precisions = cum_hits[rel_sorted] / ranks[rel_sorted]
    return float(precisions.mean())


def compute_metrics(sm: ScoreMatrix, vocab) -> MetricsReport:
    """Per-class AP, weighted and macro means, strict antonym accuracy.

    Zero-support classes are excluded from both averages; Acc_A is reported
    only when the vocab carries an antonym map, and a tie counts as wrong.
    """
    n = sm.scores.shape[0]
    per_class_ap: dict[int, float] = {}
    support: dict[int, int] = {}
    for a in range(vocab.num_adverbs):
        relevance = sm.gt_adverb == a
        s = int(relevance.sum())
        if s == 0:
            continue
        per_class_ap[a] = average_precision(sm.scores[:, a], relevance)
        support[a] = s
    total = sum(support.values())
    if per_class_ap:
        map_w = sum(per_class_ap[a] * support[a] for a in per_class_ap) / total
        map_m = sum(per_class_ap.values()) / len(per_class_ap)
    else:
        map_w = map_m = 0.0
    acc_a = None
    if vocab.antonym is not None and n > 0:
        gt = sm.gt_adverb
        opp = np.array([vocab.antonym[int(a)] for a in gt])
        rows = np.arange(n)
        acc_a = float((sm.scores[rows, gt] > sm.scores[rows, opp]).mean())
    elif vocab.antonym is not None:
        acc_a = 0.0
    return MetricsReport(map_w=map_w, map_m=map_m, acc_a=acc_a,
                         per_class_ap=per_class_ap, support=support,
                         protocol=sm.protocol)


def baseline_priors(priors: PriorsTable, corpus: Corpus, protocol: str,
                    split: str = "test") -> ScoreMatrix:
    """Scores from train-split co-occurrence counts alone."""
    if protocol not in PROTOCOLS:
        raise ContractError(f"unknown protocol {protocol!r}")
    records = corpus.split(split)
    if protocol == "with_labels":
        rows = np.stack([priors.counts[r.verb_id] for r in records]) \
            if records else np.zeros((0, corpus.vocab.num_adverbs))
    else:
        rows = np.tile(priors.marginals, (len(records), 1))
    return ScoreMatrix(
        ids=[r.id for r in records],
        gt_verb=np.array([r.verb_id for r in records], dtype=np.int64),
        gt_adverb=np.array([r.adverb_id for r in records], dtype=np.int64),
        scores=rows.astype(np.float64),
        protocol=protocol,
    )


def baseline_retrieval(corpus: Corpus, table: EmbeddingTable, protocol: str,
                       split: str = "test") -> ScoreMatrix:
    """Dot products between the pooled joint-space video embedding and the
    phrase embeddings "verb adverb"."""
    if protocol not in PROTOCOLS:
        raise ContractError(f"unknown protocol {protocol!r}")
    if corpus.features.d_pool != table.dim:
        raise DimensionError(
            f"pooled dim {corpus.features.d_pool} != text dim {table.dim}")
    records = corpus.split(split)
    vocab = corpus.vocab
    phrase = np.zeros((vocab.num_verbs, vocab.num_adverbs, table.dim))
    for vi, verb in enumerate(vocab.verbs):
        for ai, adverb in enumerate(vocab.adverbs):
            phrase[vi, ai] = table.get(phrase_key(verb, adverb))
    rows = np.zeros((len(records), vocab.num_adverbs))
    for i, rec in enumerate(records):
        pooled = corpus.features[rec.id].pooled.astype(np.float64)
        per_verb = phrase @ pooled  # (V, A)
        rows[i] = per_verb[rec.verb_id] if protocol == "with_labels" else per_verb.max(axis=0)
    return ScoreMatrix(
        ids=[r.id for r in records],
        gt_verb=np.array([r.verb_id for r in records], dtype=np.int64),
        gt_adverb=np.array([r.adverb_id for r in records], dtype=np.int64),
        scores=rows,
        protocol=protocol,
    )


def variance_report(reports: list[MetricsReport | dict]) -> dict[str, dict[str, float]]:
    """mean and population std per metric over repeated runs."""
    if len(reports) < 2:
        raise ContractError("variance_report needs at least two runs")
    dicts = [r.as_dict() if isinstance(r, MetricsReport) else dict(r) for r in reports]
    keys = [k for k in dicts[0] if all(k in d for d in dicts)]
    out = {}
    for key in keys:
        vals = np.array([d[key] for d in dicts], dtype=np.float64)
        out[key] = {"mean": float(vals.mean()), "std": float(vals.std())}
    return out


def format_variance(table: dict[str, dict[str, float]]) -> str:
    lines = [f"{key}: {stats['mean']:.4f} ± {stats['std']:.4f}"
             for key, stats in table.items()]
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# report files
# ---------------------------------------------------------------------------


def save_scores_csv(sm: ScoreMatrix, vocab, path: str | Path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        header = ["id", "gt_verb", "gt_adverb"] + [f"score_{a}" for a in vocab.adverbs]
        header.append("protocol")
        w.writerow(header)
        for i, rid in enumerate(sm.ids):
            row = [rid, vocab.verbs[sm.gt_verb[i]], vocab.adverbs[sm.gt_adverb[i]]]
            row += [repr(x) for x in sm.scores[i]]
            row.append(sm.protocol)
            w.writerow(row)


def save_report_json(report: MetricsReport, vocab, path: str | Path,
                     extra: dict | None = None) -> None:
    doc = {
        "protocol": report.protocol,
        "metrics": report.as_dict(),
        "per_class": {
            vocab.adverbs[a]: {"ap": report.per_class_ap[a], "support": report.support[a]}
            for a in sorted(report.per_class_ap)
        },
    }
    if extra:
        doc.update(extra)
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")
