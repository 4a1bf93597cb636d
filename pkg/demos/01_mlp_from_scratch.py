"""
A ReLU network by hand
======================

Forward pass, weighted cross-entropy and analytic backprop, checked against
finite differences. Everything else in the package is built on these pieces.
"""

import numpy as np

from fsr import nn

# 4 inputs, two hidden layers of 8, 3 classes; only the last layer is "meta"
params = nn.init_mlp([4, 8, 8, 3], seed=0, meta_layers="fc")
print("layer shapes:", [W.shape for W in params.weights])
print("meta layers: ", params.meta_layers)

rng = np.random.default_rng(0)
x = rng.standard_normal((5, 4))
y = nn.one_hot([0, 1, 2, 1, 0], 3)
batch = nn.Batch(x, y)

logits, cache = nn.forward(params, x)
print("softmax rows sum to", nn.softmax(logits).sum(axis=1))

# a zero network predicts uniformly, so the loss is log C
flat = nn.ModelParams([np.zeros((3, 4))], [np.zeros(3)], (True,))
print("loss at zero logits:", nn.softmax_xent(nn.forward(flat, x)[0], y)[0], "vs log 3 =", np.log(3))

# weighted loss: one weight per sample
w = np.array([0.4, 0.3, 0.2, 0.1, 0.0])
grads = nn.backward_weighted(params, batch, w)

# compare the largest entry of the middle layer against a central difference
l, eps = 1, 1e-6
i, j = np.unravel_index(np.abs(grads.weights[l]).argmax(), grads.weights[l].shape)
def loss():
    return w @ nn.softmax_xent(nn.forward(params, x)[0], y)
keep = params.weights[l][i, j]
params.weights[l][i, j] = keep + eps
up = loss()
params.weights[l][i, j] = keep - eps
down = loss()
params.weights[l][i, j] = keep
print(f"dL/dW[{l}][{i},{j}] analytic {grads.weights[l][i, j]:.8f}  numeric {(up - down) / (2 * eps):.8f}")

# per-sample gradients of the meta layers average to the uniform-weight gradient
ps = nn.per_sample_grad_meta(params, batch)
uniform = nn.backward_weighted(params, batch, np.full(5, 0.2)).restrict(params.meta_layers)
print("per-sample mean vs aggregate:", np.abs(ps.mean().flat() - uniform.flat()).max())

# one SGD step on the meta layers leaves the others untouched
stepped = nn.sgd_step(params, grads, 0.1, mask=params.meta_mask)
print("lower layers unchanged:", all(np.array_equal(a, b) for a, b in zip(stepped.weights[:2], params.weights[:2])))
print("cosine schedule:", [round(nn.cosine_lr(s, 10, 0.1), 4) for s in range(0, 10, 3)])
