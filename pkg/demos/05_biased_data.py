"""
Synthetic data with label noise and a long tail
===============================================

Gaussian clusters stand in for an image dataset. Noise and imbalance are
applied to the training split only, and the clean labels are kept for
diagnostics.
"""

import tempfile
from pathlib import Path

import numpy as np

from fsr.data import (
    BiasSpec,
    apply_bias,
    inject_asymmetric_noise,
    inject_uniform_noise,
    load_csv,
    long_tail_counts,
    make_gaussian_clusters,
    save_csv,
)

ds = make_gaussian_clusters(6, 100, d=2, spread=0.2, seed=0, test_per_class=20)
print("splits:", {s: len(ds.rows(s)) for s in ("train", "test")})

noisy = inject_uniform_noise(ds, 0.4, seed=1)
print("uniform 40%: noise rate", noisy.noise_rate(), "test rows untouched:", noisy.noise_rate("test") == 0)

pairs = inject_asymmetric_noise(ds, 0.2, seed=1)  # default map c -> c+1
flipped = pairs.observed_labels != pairs.clean_labels
print("asymmetric 20%: every flip goes to the next class:",
      bool(np.all(pairs.observed_labels[flipped] == (pairs.clean_labels[flipped] + 1) % 6)))

print("long-tail profile, n_max=1000, mu=10:", long_tail_counts(1000, 10, 10).tolist())
mixed = apply_bias(make_gaussian_clusters(6, 200, seed=0), BiasSpec("uniform", 0.2, imbalance_ratio=10, seed=3))
print("long tail + noise, train counts:", mixed.class_counts().tolist(), "noise rate", round(mixed.noise_rate(), 3))

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "data.csv"
    save_csv(noisy, path)
    print("csv header:", path.read_text().splitlines()[0])
    back = load_csv(path)
    print("round trip exact:", np.array_equal(back.features, noisy.features)
          and np.array_equal(back.observed_labels, noisy.observed_labels))
