"""
Where the time goes
===================

Restricting the meta step to the last layer lets the lookahead model reuse
the lower-layer activations. The phase timer shows the extra cost over
plain SGD for the last layer alone and for every layer.
"""

from fsr.harness import PHASES, ExperimentConfig, run_experiment

common = dict(
    data="synthetic:C=6,per_class=200,d=60,spread=0.15,test_per_class=50",
    epochs=6, warm_up=1, eta=0.5, dict_size=300, reward_batch=20, hidden=(256, 256),
    noise="uniform", noise_ratio=0.2,
)

times = {}
for name, kw in (("vanilla", dict(mode="vanilla")), ("fc", dict(mode="fsr")), ("all", dict(mode="fsr", meta_layers="all"))):
    s = run_experiment(ExperimentConfig(**common, **kw)).summary
    times[name] = s["mean_step_time"]
    buckets = "  ".join(f"{p} {1e3 * s['phase_times'][p]:.2f}" for p in PHASES)
    print(f"{name:7s} {1e3 * s['mean_step_time']:.2f} ms/step | {buckets}")

print(f"fc / vanilla {times['fc'] / times['vanilla']:.2f}x, all / vanilla {times['all'] / times['vanilla']:.2f}x")
