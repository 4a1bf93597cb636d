"""
Pseudo-labels and MixUp
=======================

Predictions are averaged into soft pseudo-labels that feed a second loss
term, while the weighted term sees MixUp pairs drawn inside the batch.
"""

import numpy as np

from fsr import nn
from fsr.dictionary import SampleState
from fsr.relabel import MixPlan, RelabelConfig, apply_mix, draw_mix, mixup_batch, total_loss, update_pseudo_label

state = SampleState(1, 2)
update_pseudo_label(state, [0], [1.0, 0.0], 0.1)  # first prediction seeds the label
update_pseudo_label(state, [0], [0.6, 0.4], 0.1)
print("pseudo-label after [1,0] then [0.6,0.4] with beta=0.1:", state.pseudo_label[0])

batch = nn.Batch(np.array([[1.0, 0.0], [0.0, 1.0]]), np.eye(2))
half = apply_mix(batch, MixPlan(lam=np.array([0.5, 0.5]), partner=np.array([1, 0])))
print("lambda=0.5 mix:", half.features.tolist(), half.labels.tolist())
same = mixup_batch(batch, 1.0, np.random.default_rng(0), lam=1.0)
print("lambda=1 leaves the batch alone:", np.array_equal(same.features, batch.features))

rng = np.random.default_rng(2)
x = rng.standard_normal((6, 3))
y = nn.one_hot(rng.integers(0, 3, 6), 3)
batch = nn.Batch(x, y, np.arange(6))
plan = draw_mix(6, 1.0, rng)
print("mix coefficients:", np.round(plan.lam, 3), "partners:", plan.partner)
print("mixed labels stay distributions:", apply_mix(batch, plan).labels.sum(axis=1))

params = nn.init_mlp([3, 8, 3], seed=0)
weights = np.full(6, 1 / 6)
pseudo = nn.softmax(nn.forward(params, x)[0])
for cfg in (RelabelConfig(p=0.0, mixup=False), RelabelConfig(p=2.0, mixup=False), RelabelConfig(p=2.0)):
    loss, _ = total_loss(params, batch, weights, pseudo, cfg, plan=plan if cfg.mixup else None)
    print(f"p={cfg.p}, mixup={cfg.mixup}: loss {loss:.4f}")
