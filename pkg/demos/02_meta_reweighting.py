"""
Weighting samples by a reward batch
===================================

A sample's weight grows when its loss gradient points the same way as the
mean gradient of a trusted reward batch. Here one sample carries a wrong
label and ends up with the smallest weight.
"""

import numpy as np

from fsr import nn
from fsr.reweight import MetaConfig, compute_weights, fd_weight_oracle, meta_reweight, normalize_weights

rng = np.random.default_rng(1)
centers = np.array([[2.0, 0.0], [-2.0, 0.0]])
labels = np.array([0, 0, 0, 1, 1, 1])
x = centers[labels] + 0.3 * rng.standard_normal((6, 2))
observed = labels.copy()
observed[2] = 1  # mislabelled
train = nn.Batch(x, nn.one_hot(observed, 2))

# a clean reward batch from the same two clusters
r_labels = np.array([0, 0, 1, 1])
reward = nn.Batch(centers[r_labels] + 0.3 * rng.standard_normal((4, 2)), nn.one_hot(r_labels, 2))

params = nn.init_mlp([2, 16, 2], seed=3)
cfg = MetaConfig(alpha=1.0, eta=0.5)
res = meta_reweight(params, train, reward, cfg)
print("gradient alignment:", np.round(res.dots, 4))
print("raw weights:       ", np.round(res.weights, 4))
print("clip-normalised:   ", np.round(normalize_weights(res.weights, "clip"), 4))
print("shift-normalised:  ", np.round(normalize_weights(res.weights, "shift"), 4))
print("lowest weight goes to sample", int(np.argmin(res.weights)), "(the flipped label is sample 2)")

# the alignment is the derivative of the post-step reward loss w.r.t. each weight;
# check it against finite differences with all layers in the meta set
params_all = nn.init_mlp([2, 16, 2], seed=3, meta_layers="all")
cfg_next = MetaConfig(eta=0.5, meta_eval_point="at_theta_t_plus_1")
dots = meta_reweight(params_all, train, reward, cfg_next).dots
fd = [fd_weight_oracle(params_all, train, reward, cfg_next, i) for i in range(6)]
print("-eta * dot:", np.round(-0.5 * dots, 6))
print("numeric:   ", np.round(fd, 6))

# with the initial weight set to zero this is the classic reward-set re-weighting
print("zero-init weights:", np.round(compute_weights(params, train, reward, MetaConfig(eta=0.5, weight_init=0.0)), 4))
