"""
Selecting the synchronous group
===============================

Two groups of 16 inputs: group A fires within one step of an anchor, group
B fires about six steps later. A receiver is forced to spike at the anchor
and only Gaussian SSDP updates its weights. Weights from A grow, weights
from B barely move.
"""
import numpy as np

from ssdp.data import SyntheticSynchronySpec, gen_synchrony_task
from ssdp.plasticity import SsdpConfig, apply_update, ssdp_from_rasters

cfg = SsdpConfig("gauss", a_plus=1.5e-2, a_minus=None, a_baseline=5e-3, sigma=1.0)
rng = np.random.default_rng(0)
w = rng.uniform(-0.01, 0.01, size=(1, 32))

for k in range(51):
    spec = SyntheticSynchronySpec(jitter_steps=(1, 1), offsets=(0, 6), n_samples=16, seed=k)
    batch, groups = gen_synchrony_task(spec)
    post = np.zeros((spec.T, spec.n_samples, 1), dtype=np.uint8)
    post[batch.anchors, np.arange(spec.n_samples), 0] = 1  # teacher forcing
    if k % 10 == 0:
        a, b = w[0, groups == 0].mean(), w[0, groups == 1].mean()
        print(f"update {k:2d}  mean w_A {a:+.4f}  mean w_B {b:+.4f}")
    w = apply_update(w, ssdp_from_rasters(batch.raster, post, cfg), cfg)
