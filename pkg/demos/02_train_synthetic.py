"""Train both objectives on a small synthetic corpus and compare them to
the priors baseline.

The corpus plants a hidden prototype per (verb, adverb) class inside half
of each video's segments; the attention model has to find those segments
from the verb query alone.

Run:  python3 demos/02_train_synthetic.py   (about half a minute)
"""

import time

from manner import evaluate as ev
from manner import train as tr
from manner.corpus import build_priors
from manner.model import ModelConfig
from manner.synth import SynthSpec, gen_corpus

spec = SynthSpec(v=4, a=4, antonyms=True, t_min=4, t_max=10,
                 n_train=400, n_test=120, signal_fraction=0.5,
                 noise_sigma=0.3, d_seg=32, d_pool=16, d_text=16, seed=7)
corpus, table = gen_corpus(spec)
print(f"corpus: {len(corpus.split('train'))} train / {len(corpus.split('test'))} test, "
      f"{corpus.vocab.num_verbs} verbs x {corpus.vocab.num_adverbs} adverbs")

model_config = ModelConfig(d_seg=32, d_text=16, e=64, heads=4, mlp_hidden=128,
                           mlp_hidden_layers=2, dropout=0.1, a=4)

results = {}
for loss_mode in ("CLS", "REG"):
    config = tr.TrainConfig(epochs=60, lr=1e-3, weight_decay=5e-5, batch_size=64,
                            loss_mode=loss_mode, eval_every=10, seed=1)
    t0 = time.time()
    fit = tr.fit(corpus, table, model_config, config)
    best = {k.split("/")[1]: e.value for k, e in fit.tracker.best.items()}
    results[loss_mode] = best
    print(f"{loss_mode}: trained {config.epochs} epochs in {time.time()-t0:.0f}s, "
          f"first/last loss {fit.loss_log[0][2]:.3f} -> {fit.loss_log[-1][2]:.3f}")

priors = build_priors(corpus.split("train"), corpus.vocab)
sm = ev.baseline_priors(priors, corpus, "with_labels")
results["priors"] = ev.compute_metrics(sm, corpus.vocab).as_dict()

print(f"\n{'model':8s} {'mAP_W':>7s} {'mAP_M':>7s} {'Acc_A':>7s}")
for name, metrics in results.items():
    print(f"{name:8s} {metrics['mAP_W']:7.3f} {metrics['mAP_M']:7.3f} "
          f"{metrics['Acc_A']:7.3f}")
