"""Losses, batching and the training loop.

Each epoch shuffles the train split with a stream keyed by (seed, epoch),
pads every batch to its own longest video, and takes one Adam step per
batch.  Every ``eval_every`` epochs the test split is scored and each
metric's best value is tracked independently, snapshotting parameters (and
writing a checkpoint when an output directory is given).  Feature and
embedding tables are never written to: the upstream extractors are frozen.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from manner import evaluate as ev
from manner import nd
from manner.corpus import Corpus, VideoRecord
from manner.errors import ContractError, NonFiniteError
from manner.model import Model, ModelConfig, forward_graph, init_model, save_checkpoint
from manner.nd import AdamState, Rng, adam_step
from manner.nd.tensor import Tensor, gather, softmax_masked
from manner.textgeo import EmbeddingTable, build_targets, verb_key

LOSS_MODES = ("CLS", "REG", "REG_FIXED")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 1000
    lr: float = 1e-4
    weight_decay: float = 5e-5
    batch_size: int = 512
    loss_mode: str = "REG"
    antonym_mode: bool = True
    eval_every: int = 10
    eval_label_free: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.loss_mode not in LOSS_MODES:
            raise ContractError(f"unknown loss mode {self.loss_mode!r}")
        if self.epochs < 0 or self.lr <= 0 or self.weight_decay < 0 \
                or self.batch_size < 1 or self.eval_every < 1:
            raise ContractError("bad training hyperparameters")

    @property
    def target_mode(self) -> str | None:
        if self.loss_mode == "CLS":
            return None
        if self.loss_mode == "REG_FIXED":
            return "fixed"
        return "antonym" if self.antonym_mode else "no_antonym"


def loss_ce(predictions: Tensor, gt_adverbs: np.ndarray) -> Tensor:
    """Mean cross entropy: -log softmax(prediction)[gt] averaged over the
    batch."""
    probs = softmax_masked(predictions, np.ones(predictions.shape, dtype=bool))
    return gather(probs, gt_adverbs).log().mean() * -1.0


def loss_reg(predictions: Tensor, targets: np.ndarray) -> Tensor:
    """Mean squared error over every batch-by-adverb entry."""
    if tuple(targets.shape) != predictions.shape:
        raise ContractError(
            f"targets shape {targets.shape} != predictions {predictions.shape}")
    diff = predictions - nd.constant(targets, dtype=predictions.dtype)
    return diff.square().mean()


def make_batches(records: list[VideoRecord], rng: Rng, batch_size: int,
                 epoch: int) -> list[list[VideoRecord]]:
    """Shuffle keyed by (seed, epoch), then chunk; the last short batch is
    kept."""
    order = rng.stream(f"batch/{epoch}").permutation(len(records))
    shuffled = [records[i] for i in order]
    return [shuffled[i:i + batch_size] for i in range(0, len(shuffled), batch_size)]


def collate(batch: list[VideoRecord], corpus: Corpus,
            queries: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Pad a batch to its own longest video; mask is False on padding."""
    t_max = max(r.t for r in batch)
    d_seg = corpus.features.d_seg
    feats = np.zeros((len(batch), t_max, d_seg), dtype=np.float32)
    mask = np.zeros((len(batch), t_max), dtype=bool)
    q = np.zeros((len(batch), queries.shape[1]), dtype=np.float32)
    for i, rec in enumerate(batch):
        feats[i, :rec.t] = corpus.features[rec.id].segments
        mask[i, :rec.t] = True
        q[i] = queries[rec.verb_id]
    return feats, mask, q


@dataclass
class BestEntry:
    value: float
    epoch: int
    checkpoint: str | None
    params: dict[str, np.ndarray] | None


@dataclass
class BestTracker:
    """Best value per metric key ("protocol/metric"), tracked independently."""

    best: dict[str, BestEntry] = field(default_factory=dict)

    def update(self, key: str, value: float, epoch: int) -> bool:
        entry = self.best.get(key)
        if entry is None or value > entry.value:
            self.best[key] = BestEntry(value=value, epoch=epoch,
                                       checkpoint=None, params=None)
            return True
        return False

    def attach(self, keys: list[str], model: Model, checkpoint: str | None) -> None:
        snapshot = {k: v.copy() for k, v in model.params.items()}
        for key in keys:
            self.best[key].params = snapshot
            self.best[key].checkpoint = checkpoint


@dataclass
class FitResult:
    model: Model
    tracker: BestTracker
    loss_log: list[tuple[int, int, float]]  # (epoch, step, loss)
    eval_log: list[tuple[int, str, float, str]]  # (epoch, metric, value, protocol)


def _evaluate(model: Model, corpus: Corpus, table: EmbeddingTable,
              label_free: bool) -> dict[str, float]:
    out = {}
    sm = ev.infer_with_labels(model, corpus, table)
    for name, value in ev.compute_metrics(sm, corpus.vocab).as_dict().items():
        out[f"with_labels/{name}"] = value
    if label_free:
        sm = ev.infer_label_free(model, corpus, table)
        for name, value in ev.compute_metrics(sm, corpus.vocab).as_dict().items():
            out[f"label_free/{name}"] = value
    return out


def fit(corpus: Corpus, table: EmbeddingTable, model_config: ModelConfig,
        config: TrainConfig, out_dir: str | Path | None = None) -> FitResult:
    """Train on the train split, tracking per-metric bests on the test
    split.  Returns the final model, the tracker (with parameter snapshots
    of each best), and the loss/eval logs."""
    if config.loss_mode == "REG" and config.antonym_mode and corpus.vocab.antonym is None:
        raise ContractError("REG with antonym_mode needs an antonym map; "
                            "pass antonym_mode=False for this vocab")
    if model_config.a != corpus.vocab.num_adverbs:
        model_config = replace(model_config, a=corpus.vocab.num_adverbs)

    rng = Rng(config.seed)
    model = init_model(model_config, rng)
    state = AdamState.for_params(model.params, lr=config.lr,
                                 weight_decay=config.weight_decay)
    train_records = corpus.split("train")
    queries = np.stack([table.get(verb_key(v)) for v in corpus.vocab.verbs]) \
        .astype(np.float32)
    targets = None
    if config.target_mode is not None:
        targets = build_targets(train_records, corpus.vocab, table,
                                config.target_mode).astype(np.float32)
    target_row = {r.id: i for i, r in enumerate(train_records)}

    ckpt_dir = None
    if out_dir is not None:
        out_dir = Path(out_dir)
        ckpt_dir = out_dir / "checkpoints"
        ckpt_dir.mkdir(parents=True, exist_ok=True)

    tracker = BestTracker()
    loss_log: list[tuple[int, int, float]] = []
    eval_log: list[tuple[int, str, float, str]] = []

    def run_eval(epoch: int) -> None:
        metrics = _evaluate(model, corpus, table, config.eval_label_free)
        improved = [key for key, value in metrics.items()
                    if tracker.update(key, value, epoch)]
        for key, value in metrics.items():
            protocol, name = key.split("/", 1)
            eval_log.append((epoch, name, value, protocol))
        if improved:
            path = None
            if ckpt_dir is not None:
                path = str(ckpt_dir / f"epoch_{epoch:05d}.ckpt")
                save_checkpoint(model, path)
            tracker.attach(improved, model, path)

    step = 0
    for epoch in range(config.epochs):
        for batch in make_batches(train_records, rng, config.batch_size, epoch):
            feats, mask, q = collate(batch, corpus, queries)
            leaves = {k: nd.leaf(v, requires_grad=True) for k, v in model.params.items()}
            drop_rng = rng.stream(f"dropout/{epoch}/{step}")
            try:
                _, preds, _ = forward_graph(model.config, leaves, feats, mask, q,
                                            train_mode=True, dropout_rng=drop_rng)
                if config.loss_mode == "CLS":
                    loss = loss_ce(preds, np.array([r.adverb_id for r in batch]))
                else:
                    rows = np.stack([targets[target_row[r.id]] for r in batch])
                    loss = loss_reg(preds, rows)
            except NonFiniteError as e:
                raise NonFiniteError(
                    f"training diverged at epoch {epoch} step {step}: {e}") from e
            grads = nd.grad(loss, leaves)
            model.params, state = adam_step(model.params, grads, state)
            loss_log.append((epoch, step, float(loss.data)))
            step += 1
        if (epoch + 1) % config.eval_every == 0 or epoch + 1 == config.epochs:
            run_eval(epoch)

    if out_dir is not None:
        write_logs(out_dir, loss_log, eval_log, config.lr)
    return FitResult(model=model, tracker=tracker, loss_log=loss_log, eval_log=eval_log)


def write_logs(out_dir: str | Path, loss_log, eval_log, lr: float) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "train_log.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["epoch", "step", "loss", "lr"])
        for epoch, step, loss in loss_log:
            w.writerow([epoch, step, repr(loss), repr(lr)])
    with open(out_dir / "evals.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["epoch", "metric", "value", "protocol"])
        for epoch, metric, value, protocol in eval_log:
            w.writerow([epoch, metric, repr(value), protocol])
