"""Walk through the text-geometry pipeline on a hand-built vocabulary.

Shows how the distance between a phrase and its antonym-flipped twin,
scaled by the verb-adverb cosine, turns into the signed regression target
used for training.

Run:  python3 demos/01_text_geometry.py
"""

import numpy as np

from manner.corpus import VideoRecord, Vocab
from manner.textgeo import (
    EmbeddingTable, build_target, delta, distance_d, geometry_export,
    geometry_summary,
)

vocab = Vocab(
    verbs=("chop", "stir"),
    adverbs=("finely", "coarsely", "slowly", "quickly"),
    antonym={0: 1, 1: 0, 2: 3, 3: 2},
)

# a tiny 3-d embedding table, built by hand so every number is inspectable
rng = np.random.default_rng(0)
table = EmbeddingTable(3)
table.put("verb:chop", np.array([1.0, 0.0, 0.0]))
table.put("verb:stir", np.array([0.0, 1.0, 0.0]))
table.put("adverb:finely", np.array([0.6, 0.8, 0.0]))
table.put("adverb:coarsely", np.array([0.6, -0.8, 0.0]))
table.put("adverb:slowly", np.array([0.0, 0.0, 1.0]))  # orthogonal to verbs
table.put("adverb:quickly", np.array([0.0, 0.3, -1.0]))
for verb in vocab.verbs:
    base = table.get(f"verb:{verb}")
    for adverb in vocab.adverbs:
        vec = base + 0.5 * table.get(f"adverb:{adverb}") + rng.normal(size=3) * 0.02
        table.put(f"sent:{verb} {adverb}", vec / np.linalg.norm(vec))
    table.put(f"sent:{verb}", base)

print("== single pair ==")
d = distance_d("chop", "finely", vocab, table)
s = delta("chop", "finely", vocab, table)
print(f"d(chop, finely)      = {d:.4f}   (phrase vs antonym-flipped phrase)")
print(f"delta(chop, finely)  = {s:.4f}   (d scaled by cos(verb, adverb))")
print(f"delta(chop, slowly)  = {delta('chop', 'slowly', vocab, table):.4f}"
      "   (orthogonal verb/adverb -> zero)")

print("\n== regression targets for one video of (chop, finely) ==")
rec = VideoRecord("demo", verb_id=0, adverb_id=0, split="train", t=5)
for mode in ("antonym", "fixed", "no_antonym"):
    y = build_target(rec, vocab, table, mode=mode)
    print(f"mode={mode:11s} Y = {np.round(y, 4)}")

print("\n== full matrix export ==")
d_mat, s_mat = geometry_export(vocab, table)
print("d matrix:\n", np.round(d_mat.values, 3))
print("delta matrix:\n", np.round(s_mat.values, 3))
print("summary:", geometry_summary(d_mat, s_mat))
