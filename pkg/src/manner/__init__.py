"""Learning how actions are performed from per-segment feature sequences.

The library regresses per-adverb scores onto targets derived from the
geometry of verb/adverb text embeddings.  Subpackages:

- ``manner.nd``       dense-array kernel with reverse-mode gradients and Adam
- ``manner.corpus``   vocabularies, manifests, binary feature store, priors
- ``manner.textgeo``  verb-adverb embedding distances and regression targets
- ``manner.model``    cross-attention encoder + MLP head
- ``manner.train``    losses, batching, training loop, best-metric tracking
- ``manner.evaluate`` inference protocols, ranking metrics, baselines
- ``manner.synth``    synthetic corpus generator and brute-force oracles
- ``manner.cli``      command-line entry points
"""

__version__ = "0.1.0"
