"""Independent reference computations used to check the library.

Nothing here imports the code under test beyond plain data containers.
"""

import itertools
import math

import numpy as np


def loop_forward(weights, biases, x):
    """MLP forward as explicit scalar loops; ReLU between layers."""
    h = [float(v) for v in x]
    for l, (W, b) in enumerate(zip(weights, biases)):
        out = []
        for o in range(W.shape[0]):
            acc = float(b[o])
            for i in range(W.shape[1]):
                acc += float(W[o, i]) * h[i]
            out.append(acc)
        h = out if l == len(weights) - 1 else [max(0.0, v) for v in out]
    return np.array(h)


def loop_xent(logits, label_dist):
    m = max(logits)
    lse = m + math.log(sum(math.exp(z - m) for z in logits))
    return -sum(p * (z - lse) for p, z in zip(label_dist, logits))


def central_diff(f, arrays, eps=1e-5):
    """Central-difference gradient of scalar ``f()`` w.r.t. every entry of ``arrays`` (mutated in place)."""
    grads = []
    for a in arrays:
        g = np.zeros_like(a)
        for idx in np.ndindex(a.shape):
            keep = a[idx]
            a[idx] = keep + eps
            up = f()
            a[idx] = keep - eps
            down = f()
            a[idx] = keep
            g[idx] = (up - down) / (2 * eps)
        grads.append(g)
    return grads


def rel_err(a, b):
    a, b = np.ravel(a), np.ravel(b)
    scale = max(np.linalg.norm(a), np.linalg.norm(b), 1e-12)
    return float(np.linalg.norm(a - b) / scale)


def best_subset(candidates, scores, k):
    """Exhaustive search for the k-subset with the largest score sum."""
    best, best_sum = None, -math.inf
    for combo in itertools.combinations(candidates, k):
        s = sum(scores[i] for i in combo)
        if s > best_sum:
            best, best_sum = set(combo), s
    return best, best_sum
