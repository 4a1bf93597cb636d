"""
A proxy reward set built from the training data
===============================================

Each training sample keeps a running score. After every epoch the top
scorers of every observed class form a class-balanced dictionary, and
reward batches are drawn from it.
"""

import numpy as np

from fsr.dictionary import (
    SampleState,
    alt_pusher,
    fetch_balanced_batch,
    init_dictionary,
    meta_margin,
    rebuild_dictionary,
    update_momentum_score,
)

# the meta-margin is the loss drop from the model to its one-step lookahead
print("meta-margin (2.0 -> 1.5):", meta_margin(2.0, 1.5))
print("meta-margin (1.0 -> 1.4):", meta_margin(1.0, 1.4))

state = SampleState(8, 2)
print("max-margin of logits [3,1] for label 0:", alt_pusher("max_margin", state, [0], np.array([[3.0, 1.0]]), [0], None))

labels = np.array([0, 0, 0, 0, 1, 1, 1, 1])
rng = np.random.default_rng(0)
d0 = init_dictionary(labels, 4, 2, rng)
print("initial dictionary (random, balanced):", [e.tolist() for e in d0.entries])

# three epochs of scores, smoothed with momentum 0.5
for scores in ([0.1, 0.9, 0.3, 0.2, 0.5, 0.0, 0.7, 0.6], [0.2, 0.8, 0.4, 0.1, 0.4, 0.1, 0.8, 0.5], [0.3, 0.7, 0.6, 0.0, 0.6, 0.2, 0.9, 0.4]):
    update_momentum_score(state, np.arange(8), scores, 0.5)
print("momentum scores:", np.round(state.momentum_score, 3))

d = rebuild_dictionary(state, labels, 4, 2)
print("rebuilt dictionary (top 2 per class):", [e.tolist() for e in d.entries])

# reward batches: equal share per class, reproducible per seed
print("fetch q=4:", fetch_balanced_batch(d, 4, np.random.default_rng(5)))
print("fetch q=6 (short classes resample):", fetch_balanced_batch(d, 6, np.random.default_rng(5)))
