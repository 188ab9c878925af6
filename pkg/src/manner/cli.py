"""Command-line entry points for reproducible runs.

Every command writes its outputs plus a ``run_manifest.json`` recording the
effective configuration, its hash, the seed, input-file digests and output
paths, so a run can be reproduced exactly.  All randomness flows from the
``--seed`` flag; nothing is taken from the clock or the environment.

Config precedence: command-line flags override the ``--config`` JSON file,
which overrides built-in defaults.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import os
import sys
from pathlib import Path

import manner
from manner import evaluate as ev
from manner import train as tr
from manner.corpus import Corpus, build_priors, load_corpus
from manner.model import ModelConfig, load_checkpoint, save_checkpoint
from manner.synth import SynthSpec, write_corpus
from manner.textgeo import EmbeddingTable, geometry_export, geometry_summary

_LOSS_FLAGS = {"cls": "CLS", "reg": "REG", "reg-fixed": "REG_FIXED"}
_PROTOCOL_FLAGS = {"with-labels": "with_labels", "label-free": "label_free"}


class CliError(Exception):
    pass


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _config_hash(config: dict) -> str:
    return hashlib.sha256(json.dumps(config, sort_keys=True).encode()).hexdigest()


def _write_manifest(out_dir: Path, command: str, config: dict,
                    seed: int | None, inputs: dict[str, str],
                    outputs: list[Path]) -> Path:
    doc = {
        "command": command,
        "build": f"manner {manner.__version__}",
        "seed": seed,
        "config": config,
        "config_hash": _config_hash(config),
        "inputs": inputs,
        "outputs": [str(p) for p in outputs],
    }
    path = out_dir / "run_manifest.json"
    tmp = out_dir / ".run_manifest.json.tmp"
    tmp.write_text(json.dumps(doc, indent=1) + "\n")
    os.replace(tmp, path)
    return path


def _corpus_paths(corpus_dir: Path) -> dict[str, Path]:
    return {
        "vocab": corpus_dir / "vocab.json",
        "manifest": corpus_dir / "manifest.jsonl",
        "features": corpus_dir / "features.bin",
        "text_embeddings": corpus_dir / "text_embeddings.jsonl",
    }


def load_corpus_dir(corpus_dir: str | Path) -> tuple[Corpus, EmbeddingTable]:
    paths = _corpus_paths(Path(corpus_dir))
    for name, p in paths.items():
        if not p.exists():
            raise CliError(f"corpus dir is missing {p.name}")
    corpus = load_corpus(paths["manifest"], paths["features"], paths["vocab"])
    table = EmbeddingTable.load_jsonl(paths["text_embeddings"])
    return corpus, table


def _digest_corpus(corpus_dir: Path) -> dict[str, str]:
    return {str(p): _sha256(p) for p in _corpus_paths(corpus_dir).values() if p.exists()}


def _load_json(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise CliError(f"cannot read config {path}: {e}") from e


def _merge_train_config(args) -> tuple[tr.TrainConfig, ModelConfig]:
    doc = _load_json(args.config)
    train_kw = dict(doc.get("train", {}))
    model_kw = dict(doc.get("model", {}))
    for flag, key in [("loss", "loss_mode"), ("seed", "seed"), ("epochs", "epochs"),
                      ("eval_every", "eval_every"), ("lr", "lr"),
                      ("batch_size", "batch_size"), ("weight_decay", "weight_decay")]:
        value = getattr(args, flag)
        if value is not None:
            train_kw[key] = value
    if train_kw.get("loss_mode") in _LOSS_FLAGS:
        train_kw["loss_mode"] = _LOSS_FLAGS[train_kw["loss_mode"]]
    if args.no_antonyms:
        train_kw["antonym_mode"] = False
    if args.eval_label_free:
        train_kw["eval_label_free"] = True
    return tr.TrainConfig(**train_kw), ModelConfig(**model_kw) if model_kw else None


def _prepare_model_config(model_config: ModelConfig | None, corpus: Corpus,
                          table: EmbeddingTable) -> ModelConfig:
    kw = dataclasses.asdict(model_config) if model_config else {}
    kw["d_seg"] = corpus.features.d_seg
    kw["d_text"] = table.dim
    kw["a"] = corpus.vocab.num_adverbs
    kw.setdefault("e", 64)
    kw.setdefault("heads", 4)
    kw.setdefault("mlp_hidden", kw["e"])
    return ModelConfig(**kw)


def _ensure_out_dir(path: str, force: bool, expected: list[str]) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    if not force:
        clashes = [name for name in expected if (out / name).exists()]
        if clashes:
            raise CliError(
                f"refusing to overwrite {', '.join(clashes)} in {out} (use --force)")
    return out


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_gen_synth(args) -> int:
    doc = _load_json(args.spec)
    if args.seed is not None:
        doc["seed"] = args.seed
    try:
        spec = SynthSpec(**doc)
    except TypeError as e:
        raise CliError(f"bad synth spec: {e}") from e
    out = _ensure_out_dir(args.out_dir, args.force,
                          ["vocab.json", "manifest.jsonl", "features.bin",
                           "text_embeddings.jsonl"])
    paths = write_corpus(spec, out)
    outputs = sorted(paths.values())
    manifest = _write_manifest(out, "gen-synth", dataclasses.asdict(spec),
                               spec.seed, {}, outputs)
    print(f"wrote {len(outputs) + 1} files to {out}")
    print(f"manifest: {manifest}")
    return 0


def cmd_train(args) -> int:
    corpus_dir = Path(args.corpus_dir)
    train_config, model_config = _merge_train_config(args)
    corpus, table = load_corpus_dir(corpus_dir)
    model_config = _prepare_model_config(model_config, corpus, table)
    out = _ensure_out_dir(args.out_dir, args.force, ["model_final.ckpt"])
    inputs = _digest_corpus(corpus_dir)
    result = tr.fit(corpus, table, model_config, train_config, out_dir=out)
    final_path = out / "model_final.ckpt"
    save_checkpoint(result.model, final_path)
    outputs = [final_path, out / "train_log.csv", out / "evals.csv"]
    bests = {key: {"value": entry.value, "epoch": entry.epoch,
                   "checkpoint": entry.checkpoint}
             for key, entry in result.tracker.best.items()}
    (out / "best_metrics.json").write_text(json.dumps(bests, indent=1) + "\n")
    outputs.append(out / "best_metrics.json")
    config_doc = {"train": dataclasses.asdict(train_config),
                  "model": dataclasses.asdict(model_config)}
    _write_manifest(out, "train", config_doc, train_config.seed, inputs, outputs)
    for key, entry in sorted(result.tracker.best.items()):
        print(f"best {key}: {entry.value:.4f} (epoch {entry.epoch})")
    print(f"final checkpoint: {final_path}")
    return 0


def cmd_eval(args) -> int:
    protocol = _PROTOCOL_FLAGS[args.protocol]
    corpus_dir = Path(args.corpus_dir)
    corpus, table = load_corpus_dir(corpus_dir)
    model = load_checkpoint(args.checkpoint)
    out = _ensure_out_dir(args.out_dir, args.force, ["report.json", "scores.csv"])
    inputs = _digest_corpus(corpus_dir)
    inputs[str(args.checkpoint)] = _sha256(Path(args.checkpoint))
    if protocol == "with_labels":
        sm = ev.infer_with_labels(model, corpus, table)
    else:
        sm = ev.infer_label_free(model, corpus, table)
    report = ev.compute_metrics(sm, corpus.vocab)
    config_doc = {"protocol": protocol, "checkpoint": str(args.checkpoint)}
    ev.save_scores_csv(sm, corpus.vocab, out / "scores.csv")
    ev.save_report_json(report, corpus.vocab, out / "report.json",
                        extra={"checkpoint": str(args.checkpoint),
                               "config_hash": _config_hash(config_doc),
                               "seeds": None})
    _write_manifest(out, "eval", config_doc, None, inputs,
                    [out / "report.json", out / "scores.csv"])
    for name, value in report.as_dict().items():
        print(f"{name}: {value:.4f}")
    return 0


def cmd_baseline(args) -> int:
    protocol = _PROTOCOL_FLAGS[args.protocol]
    corpus_dir = Path(args.corpus_dir)
    corpus, table = load_corpus_dir(corpus_dir)
    out = _ensure_out_dir(args.out_dir, args.force, ["report.json", "scores.csv"])
    inputs = _digest_corpus(corpus_dir)
    if args.kind == "priors":
        priors = build_priors(corpus.split("train"), corpus.vocab)
        sm = ev.baseline_priors(priors, corpus, protocol)
    else:
        sm = ev.baseline_retrieval(corpus, table, protocol)
    report = ev.compute_metrics(sm, corpus.vocab)
    config_doc = {"kind": args.kind, "protocol": protocol}
    ev.save_scores_csv(sm, corpus.vocab, out / "scores.csv")
    ev.save_report_json(report, corpus.vocab, out / "report.json",
                        extra={"baseline": args.kind,
                               "config_hash": _config_hash(config_doc),
                               "seeds": None})
    _write_manifest(out, "baseline", config_doc, None, inputs,
                    [out / "report.json", out / "scores.csv"])
    for name, value in report.as_dict().items():
        print(f"{name}: {value:.4f}")
    return 0


def cmd_geometry(args) -> int:
    corpus_dir = Path(args.corpus_dir)
    corpus, table = load_corpus_dir(corpus_dir)
    out = _ensure_out_dir(args.out_dir, args.force, ["geometry.csv"])
    inputs = _digest_corpus(corpus_dir)
    present = {(r.verb_id, r.adverb_id) for r in corpus.records}
    csv_path = out / "geometry.csv"
    d_mat, s_mat = geometry_export(corpus.vocab, table, present, csv_path)
    summary = geometry_summary(d_mat, s_mat)
    (out / "geometry_summary.json").write_text(json.dumps(summary, indent=1) + "\n")
    _write_manifest(out, "geometry", {}, None, inputs,
                    [csv_path, out / "geometry_summary.json"])
    for key, value in summary.items():
        print(f"{key}: {value}")
    return 0


def cmd_variance(args) -> int:
    seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
    if len(seeds) < 2:
        raise CliError("variance needs at least two seeds")
    corpus_dir = Path(args.corpus_dir)
    corpus, table = load_corpus_dir(corpus_dir)
    base_config, model_config = _merge_train_config(args)
    model_config = _prepare_model_config(model_config, corpus, table)
    out = _ensure_out_dir(args.out_dir, args.force, ["variance.json"])
    inputs = _digest_corpus(corpus_dir)
    runs = []
    for seed in seeds:
        config = dataclasses.replace(base_config, seed=seed)
        result = tr.fit(corpus, table, model_config, config)
        metrics = {key.split("/", 1)[1]: entry.value
                   for key, entry in result.tracker.best.items()
                   if key.startswith("with_labels/")}
        runs.append(metrics)
    table_out = ev.variance_report(runs)
    doc = {"seeds": seeds, "per_seed": runs, "summary": table_out}
    (out / "variance.json").write_text(json.dumps(doc, indent=1) + "\n")
    config_doc = {"train": dataclasses.asdict(base_config),
                  "model": dataclasses.asdict(model_config), "seeds": seeds}
    _write_manifest(out, "variance", config_doc, None, inputs,
                    [out / "variance.json"])
    print(ev.format_variance(table_out))
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file with 'train' and 'model' sections")
    p.add_argument("--loss", choices=sorted(_LOSS_FLAGS), default=None,
                   help="training objective")
    p.add_argument("--no-antonyms", action="store_true",
                   help="train the regression target without antonym pairs")
    p.add_argument("--seed", type=int, default=None, help="root random seed")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--eval-every", dest="eval_every", type=int, default=None,
                   help="epochs between test-split evaluations")
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--batch-size", dest="batch_size", type=int, default=None)
    p.add_argument("--weight-decay", dest="weight_decay", type=float, default=None)
    p.add_argument("--eval-label-free", dest="eval_label_free", action="store_true",
                   help="also evaluate without action labels during training")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="manner",
        description="Train and evaluate models that predict how an action "
                    "is performed.")
    sub = parser.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("gen-synth", help="generate a synthetic corpus")
    p.add_argument("out_dir")
    p.add_argument("--spec", help="JSON file of generator settings")
    p.add_argument("--seed", type=int, default=None,
                   help="override the generator-settings seed")
    p.add_argument("--force", action="store_true", help="overwrite existing files")
    p.set_defaults(func=cmd_gen_synth)

    p = sub.add_parser("train", help="train a model on a corpus directory")
    p.add_argument("corpus_dir")
    p.add_argument("out_dir")
    _add_train_flags(p)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score a checkpoint on the test split")
    p.add_argument("checkpoint")
    p.add_argument("corpus_dir")
    p.add_argument("out_dir")
    p.add_argument("--protocol", choices=sorted(_PROTOCOL_FLAGS),
                   default="with-labels")
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("baseline", help="run a no-training baseline")
    p.add_argument("corpus_dir")
    p.add_argument("out_dir")
    p.add_argument("--kind", choices=["priors", "retrieval"], required=True)
    p.add_argument("--protocol", choices=sorted(_PROTOCOL_FLAGS),
                   default="with-labels")
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("geometry", help="export distance matrices as CSV")
    p.add_argument("corpus_dir")
    p.add_argument("out_dir")
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_geometry)

    p = sub.add_parser("variance", help="mean and std of metrics over seeds")
    p.add_argument("corpus_dir")
    p.add_argument("out_dir")
    p.add_argument("--seeds", required=True, help="comma-separated seed list")
    _add_train_flags(p)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_variance)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as e:  # CLI boundary: report and exit nonzero
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
